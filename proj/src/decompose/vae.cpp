#include "nilm/decompose/vae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "nilm/nn/ops.hpp"
#include "nilm/nn/optim.hpp"

namespace nilm::decompose {

namespace {

constexpr std::size_t kNoSolo = std::numeric_limits<std::size_t>::max();

std::string dec_name(std::size_t i, const char* what) { return "vae.decoder." + std::to_string(i) + "." + what; }

Var dense(Graph& g, const ParamStore& p, const std::string& w, const std::string& b, const Var& x) {
    return nn::add_bias(nn::matmul(g.parameter(p, w), x), g.parameter(p, b));
}

struct Encoded {
    Var mu, logvar;
};

Encoded encode(Graph& g, const Vae& v, const std::vector<double>& p_total) {
    const std::size_t m = v.cfg.window, d = v.cfg.latent;
    Tensor x({m, 1});
    const double inv = 1.0 / v.power_scale();
    for (std::size_t t = 0; t < m; ++t) x[t] = p_total[t] * inv;
    const Var h = nn::relu(dense(g, v.params, "vae.encoder.l0.w", "vae.encoder.l0.b", g.constant(std::move(x))));
    const Var out = dense(g, v.params, "vae.encoder.l1.w", "vae.encoder.l1.b", h);
    return {nn::slice_rows(out, 0, d), nn::slice_rows(out, d, 2 * d)};
}

// Scaled, nonnegative power series [M × 1] of appliance i.
Var decode(Graph& g, const Vae& v, std::size_t i, const Var& z) {
    const Var h = nn::relu(dense(g, v.params, dec_name(i, "l0.w"), dec_name(i, "l0.b"), z));
    return nn::softplus(dense(g, v.params, dec_name(i, "l1.w"), dec_name(i, "l1.b"), h));
}

Var sum_squared_error(const Var& pred, const Tensor& target) {
    return nn::scale(nn::mse(pred, target), static_cast<double>(target.size()));
}

// Loss of one window; `solo` names the appliance whose decoder is supervised directly.
Var window_loss(Graph& g, const Vae& v, const PowerWindow& w, std::size_t solo, std::mt19937_64& rng) {
    const auto enc = encode(g, v, w.p_total);
    Tensor eps({v.cfg.latent, 1});
    std::normal_distribution<double> nd;
    for (auto& e : eps.values()) e = nd(rng);
    const Var z = nn::add(enc.mu, nn::mul(nn::exp(nn::scale(enc.logvar, 0.5)), g.constant(std::move(eps))));

    Tensor target({v.cfg.window, 1});
    const double inv = 1.0 / v.power_scale();
    for (std::size_t t = 0; t < v.cfg.window; ++t) target[t] = w.p_total[t] * inv;

    Var loss = nn::scale(kl_divergence(enc.mu, enc.logvar), v.cfg.kl_weight);
    Var total;
    for (std::size_t i = 0; i < v.cfg.appliances; ++i) {
        if (!w.on_off[i]) continue;
        const Var p = decode(g, v, i, z);
        total = total.valid() ? nn::add(total, p) : p;
        if (i == solo) loss = nn::add(loss, sum_squared_error(p, target));
    }
    if (total.valid()) loss = nn::add(loss, sum_squared_error(total, target));
    return loss;
}

}  // namespace

void PowerWindow::validate(std::size_t window, std::size_t appliances) const {
    if (p_total.size() != window)
        throw std::invalid_argument("power window: expected " + std::to_string(window) + " cycles, got " + std::to_string(p_total.size()));
    if (on_off.size() != appliances)
        throw std::invalid_argument("power window: expected " + std::to_string(appliances) + " on/off flags, got " + std::to_string(on_off.size()));
    for (double p : p_total)
        if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("power window: total power must be finite and >= 0");
}

void VaeConfig::validate() const {
    if (window == 0 || latent == 0 || hidden == 0 || appliances == 0) throw std::invalid_argument("vae: sizes must be positive");
    if (!(kl_weight >= 0.0)) throw std::invalid_argument("vae: kl_weight must be >= 0");
    if (!(lr > 0.0)) throw std::invalid_argument("vae: learning rate must be positive");
    if (batch_size == 0) throw std::invalid_argument("vae: batch size must be >= 1");
}

Var kl_divergence(const Var& mu, const Var& logvar) {
    const Var inner = nn::sub(nn::add_scalar(logvar, 1.0), nn::add(nn::square(mu), nn::exp(logvar)));
    return nn::scale(nn::sum(inner), -0.5);
}

Vae init_vae(const VaeConfig& cfg, double power_scale) {
    cfg.validate();
    if (!(power_scale > 0.0)) throw std::invalid_argument("vae: power scale must be positive");
    Vae v{cfg, ParamStore(cfg.seed)};
    auto& p = v.params;
    const auto s = cfg.seed;
    p.set("vae.power_scale", Tensor::scalar(power_scale));
    p.set("vae.encoder.l0.w", nn::init_he({cfg.hidden, cfg.window}, cfg.window, s, "vae.encoder.l0.w"));
    p.set("vae.encoder.l0.b", Tensor({cfg.hidden}, 0.0));
    p.set("vae.encoder.l1.w", nn::init_normal({2 * cfg.latent, cfg.hidden}, 0.1 / std::sqrt(static_cast<double>(cfg.hidden)), s, "vae.encoder.l1.w"));
    p.set("vae.encoder.l1.b", Tensor({2 * cfg.latent}, 0.0));
    for (std::size_t i = 0; i < cfg.appliances; ++i) {
        p.set(dec_name(i, "l0.w"), nn::init_he({cfg.hidden, cfg.latent}, cfg.latent, s, dec_name(i, "l0.w")));
        p.set(dec_name(i, "l0.b"), Tensor({cfg.hidden}, 0.1));
        p.set(dec_name(i, "l1.w"), nn::init_normal({cfg.window, cfg.hidden}, 0.1 / std::sqrt(static_cast<double>(cfg.hidden)), s, dec_name(i, "l1.w")));
        p.set(dec_name(i, "l1.b"), Tensor({cfg.window}, 0.0));
    }
    return v;
}

Vae vae_train(const std::vector<SoloWindow>& solo, const std::vector<PowerWindow>& mixes, const VaeConfig& cfg) {
    cfg.validate();
    std::vector<bool> covered(cfg.appliances, false);
    double peak = 0.0;
    for (const auto& s : solo) {
        s.window.validate(cfg.window, cfg.appliances);
        if (s.appliance >= cfg.appliances) throw std::invalid_argument("vae_train: solo appliance index out of range");
        covered[s.appliance] = true;
        for (double p : s.window.p_total) peak = std::max(peak, p);
    }
    std::string missing;
    for (std::size_t i = 0; i < cfg.appliances; ++i)
        if (!covered[i]) missing += (missing.empty() ? "" : ", ") + std::to_string(i);
    if (!missing.empty()) throw std::invalid_argument("vae_train: no solo window for appliance(s) " + missing);
    for (const auto& w : mixes) {
        w.validate(cfg.window, cfg.appliances);
        for (double p : w.p_total) peak = std::max(peak, p);
    }

    Vae v = init_vae(cfg, peak > 0.0 ? peak : 1.0);
    // (window, solo appliance or kNoSolo)
    std::vector<std::pair<const PowerWindow*, std::size_t>> items;
    for (const auto& s : solo) items.emplace_back(&s.window, s.appliance);
    for (const auto& w : mixes) items.emplace_back(&w, kNoSolo);

    nn::AdamConfig adam;
    adam.lr = cfg.lr;
    nn::AdamState state;
    std::mt19937_64 order_rng(nn::derive_seed(cfg.seed, "vae.shuffle"));
    std::mt19937_64 noise_rng(nn::derive_seed(cfg.seed, "vae.noise"));
    std::vector<std::size_t> order(items.size());
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng() % i]);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            ParamStore grads;
            for (std::size_t b = start; b < end; ++b) {
                const auto& [w, which] = items[order[b]];
                Graph g;
                const Var loss = window_loss(g, v, *w, which, noise_rng);
                if (!std::isfinite(loss.value()[0]))
                    throw std::runtime_error("vae_train: non-finite loss at epoch " + std::to_string(epoch));
                g.backward(loss);
                g.accumulate_gradients(grads, 1.0 / static_cast<double>(end - start));
            }
            nn::adam_step(v.params, grads, adam, state);
        }
    }
    return v;
}

std::vector<std::vector<double>> decompose(const Vae& v, const PowerWindow& w) {
    w.validate(v.cfg.window, v.cfg.appliances);
    std::vector<std::vector<double>> out(v.cfg.appliances, std::vector<double>(v.cfg.window, 0.0));
    if (std::none_of(w.on_off.begin(), w.on_off.end(), [](std::uint8_t b) { return b != 0; })) return out;
    Graph g;
    const auto enc = encode(g, v, w.p_total);
    const double scale = v.power_scale();
    for (std::size_t i = 0; i < v.cfg.appliances; ++i) {
        if (!w.on_off[i]) continue;
        const Tensor& p = decode(g, v, i, enc.mu).value();
        for (std::size_t t = 0; t < v.cfg.window; ++t) out[i][t] = p[t] * scale;
    }
    return out;
}

double energy(const std::vector<double>& power, double cycle_duration) {
    if (!(cycle_duration > 0.0)) throw std::invalid_argument("energy: cycle duration must be positive");
    double sum = 0.0;
    for (double p : power) {
        if (!(p >= 0.0)) throw std::invalid_argument("energy: power must be >= 0, got " + std::to_string(p));
        sum += p;
    }
    return sum * cycle_duration;
}

std::vector<PowerWindow> make_windows(const std::vector<double>& p_total, const std::vector<std::vector<std::uint8_t>>& on_off, std::size_t m) {
    if (m == 0) throw std::invalid_argument("make_windows: window length must be >= 1");
    if (on_off.size() != p_total.size()) throw std::invalid_argument("make_windows: on/off context must cover every cycle");
    std::vector<PowerWindow> out;
    for (std::size_t start = 0; start + m <= p_total.size(); start += m) {
        PowerWindow w;
        const std::size_t k = on_off[start].size();
        std::vector<std::size_t> votes(k, 0);
        for (std::size_t t = start; t < start + m; ++t) {
            if (on_off[t].size() != k) throw std::invalid_argument("make_windows: inconsistent on/off length");
            w.p_total.push_back(std::max(0.0, p_total[t]));
            for (std::size_t i = 0; i < k; ++i) votes[i] += on_off[t][i] ? 1 : 0;
        }
        for (std::size_t i = 0; i < k; ++i) w.on_off.push_back(2 * votes[i] > m ? 1 : 0);
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace nilm::decompose
