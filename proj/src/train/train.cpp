#include "nilm/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "nilm/nn/ops.hpp"

namespace nilm::train {

namespace {

ParamStore floored(ParamStore fisher, double floor) {
    for (auto& [name, f] : fisher)
        for (auto& v : f.values()) v = std::max(v, floor);
    return fisher;
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    return idx;
}

void require_finite(double loss, const std::string& phase, std::size_t epoch, std::size_t sample) {
    if (!std::isfinite(loss))
        throw std::runtime_error(phase + ": non-finite loss at epoch " + std::to_string(epoch) + ", sample " + std::to_string(sample));
}

void check_labels(const Model& m, const std::vector<Sample>& samples, const char* what) {
    if (samples.empty()) throw std::invalid_argument(std::string(what) + ": no labelled samples");
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].labels.size() != m.num_classes())
            throw std::invalid_argument(std::string(what) + ": sample " + std::to_string(i) + " has " + std::to_string(samples[i].labels.size()) +
                                        " labels, model has " + std::to_string(m.num_classes()) + " classes");
}

// True when `cur` is `old` with extra leading rows.
bool grown_rows(const nn::Shape& cur, const nn::Shape& old) {
    return cur.size() == old.size() && cur[0] > old[0] && std::equal(cur.begin() + 1, cur.end(), old.begin() + 1);
}

// Rows of `p` that correspond to a snapshot tensor of shape `old`.
Var old_part(const Var& p, const nn::Shape& old, const std::string& name) {
    if (p.shape() == old) return p;
    if (!grown_rows(p.shape(), old)) throw nn::ShapeError("ewc: parameter '" + name + "' does not match its snapshot", p.shape(), old);
    return nn::slice_rows(p, 0, old[0]);
}

Var ssl_forward(Graph& g, const ParamStore& front, const ParamStore& decoder, const signature::SignatureConfig& sig, const NormalizedCycle& c,
                Tensor& truth) {
    const std::size_t n = c.size();
    if (n % 2 != 0) throw std::invalid_argument("ssl: cycle length " + std::to_string(n) + " is odd, halves must be equal");
    if (n != sig.n_cyc) throw std::invalid_argument("ssl: cycle length differs from the model's n_cyc");
    const std::size_t h = n / 2;
    signature::SignatureConfig half = sig;
    half.n_cyc = h;

    auto first = [&](const std::vector<double>& x) { return g.constant(Tensor({1, h}, std::vector<double>(x.begin(), x.begin() + h))); };
    const auto f = signature::extract(g, front, half, first(c.i_norm), first(c.v_norm), first(c.pf_norm));
    const Var fused = signature::fuse(g, front, half, f);

    truth = Tensor({3, h});
    for (std::size_t t = 0; t < h; ++t) {
        truth.at(0, t) = c.i_norm[h + t];
        truth.at(1, t) = c.v_norm[h + t];
        truth.at(2, t) = c.pf_norm[h + t];
    }
    const std::size_t flat = fused.value().size();
    const Var z = nn::reshape(fused, {flat, 1});
    const Var out = nn::add_bias(nn::matmul(g.parameter(decoder, "ssl.decoder.w"), z), g.parameter(decoder, "ssl.decoder.b"));
    return nn::reshape(out, {3, h});
}

// Shared mini-batch loop for supervised training and continual updates. With
// no anchor (or λ = 0) the trajectory is plain Adam on the batch-mean BCE.
void fit(Model& m, const std::vector<Sample>& samples, const TrainConfig& cfg, const std::string& phase, const TaskSnapshot* anchor,
         double lambda, const EpochLogger& log) {
    nn::AdamConfig adam;
    adam.lr = cfg.lr;
    nn::AdamState state;
    std::mt19937_64 rng(nn::derive_seed(cfg.seed, "train.shuffle"));
    const bool penalise = anchor != nullptr && lambda > 0.0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled(samples.size(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(end - start);
            ParamStore grads;
            for (std::size_t b = start; b < end; ++b) {
                const Sample& s = samples[order[b]];
                Graph g;
                const Var loss = bce_loss(forward(g, m, s.cycle), s.labels);
                require_finite(loss.value()[0], phase, epoch, order[b]);
                total += loss.value()[0];
                g.backward(loss);
                g.accumulate_gradients(grads, inv);
            }
            if (penalise) {
                Graph g;
                const Var pen = ewc_total_loss(g, g.constant(Tensor::scalar(0.0)), m.params, *anchor, lambda);
                require_finite(pen.value()[0], phase + " penalty", epoch, start);
                g.backward(pen);
                g.accumulate_gradients(grads);
            }
            nn::adam_step(m.params, grads, adam, state);
        }
        if (log) log({phase, epoch, total / static_cast<double>(samples.size())});
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
    if (!(ssl_lr > 0.0)) throw std::invalid_argument("train: SSL learning rate must be positive");
    if (batch_size == 0) throw std::invalid_argument("train: batch size must be >= 1");
    if (!(lambda_ewc >= 0.0)) throw std::invalid_argument("train: lambda_ewc must be >= 0");
    if (!(fisher_floor >= 0.0)) throw std::invalid_argument("train: fisher_floor must be >= 0");
}

Var half_cycle_mse(const Var& predicted, const Tensor& truth) {
    if (predicted.shape().size() != 2 || predicted.shape()[0] != 3 || truth.shape() != predicted.shape())
        throw nn::ShapeError("half_cycle_mse: expected matching [3 x n/2] tensors", predicted.shape(), truth.shape());
    const std::size_t h = truth.dim(1);
    Var total;
    for (std::size_t ch = 0; ch < 3; ++ch) {
        Tensor row({1, h});
        for (std::size_t t = 0; t < h; ++t) row[t] = truth.at(ch, t);
        const Var term = nn::mse(nn::slice_rows(predicted, ch, ch + 1), row);
        total = total.valid() ? nn::add(total, term) : term;
    }
    return total;
}

ParamStore init_ssl_decoder(const ModelConfig& cfg, std::uint64_t seed) {
    const std::size_t h = cfg.signature.n_cyc / 2;
    const std::size_t in = cfg.signature.d_fus * h;
    ParamStore p(seed);
    p.set("ssl.decoder.w", nn::init_normal({3 * h, in}, 1.0 / std::sqrt(static_cast<double>(in)), seed, "ssl.decoder.w"));
    p.set("ssl.decoder.b", Tensor({3 * h}, 0.0));
    return p;
}

Var ssl_loss(Graph& g, const Model& m, const ParamStore& decoder, const NormalizedCycle& c) {
    Tensor truth;
    const Var pred = ssl_forward(g, m.params, decoder, m.cfg.signature, c, truth);
    return half_cycle_mse(pred, truth);
}

ParamStore pretrain(Model& m, const std::vector<NormalizedCycle>& cycles, const TrainConfig& cfg, const EpochLogger& log) {
    cfg.validate();
    if (cycles.empty()) throw std::invalid_argument("pretrain: no cycles");
    if (m.cfg.signature.n_cyc % 2 != 0) throw std::invalid_argument("pretrain: n_cyc must be even");

    // Front-end weights and the throw-away decoder train together in one store.
    ParamStore work = m.params.subset("extractor.");
    work.merge_from(m.params.subset("fusion."));
    work.merge_from(init_ssl_decoder(m.cfg, nn::derive_seed(cfg.seed, "ssl.decoder")));

    nn::AdamConfig adam;
    adam.lr = cfg.ssl_lr;
    nn::AdamState state;
    std::mt19937_64 rng(nn::derive_seed(cfg.seed, "ssl.shuffle"));
    for (std::size_t epoch = 0; epoch < cfg.ssl_epochs; ++epoch) {
        const auto order = shuffled(cycles.size(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(end - start);
            ParamStore grads;
            for (std::size_t b = start; b < end; ++b) {
                Graph g;
                Tensor truth;
                const Var loss = half_cycle_mse(ssl_forward(g, work, work, m.cfg.signature, cycles[order[b]], truth), truth);
                require_finite(loss.value()[0], "ssl", epoch, order[b]);
                total += loss.value()[0];
                g.backward(loss);
                g.accumulate_gradients(grads, inv);
            }
            nn::adam_step(work, grads, adam, state);
        }
        if (log) log({"ssl", epoch, total / static_cast<double>(cycles.size())});
    }

    ParamStore theta0(m.params.seed());
    for (const auto& [name, t] : work)
        if (!name.starts_with("ssl.")) {
            m.params.set(name, t);
            theta0.set(name, t);
        }
    return theta0;
}

Var bce_loss(const Var& probs, const std::vector<std::uint8_t>& labels) {
    if (probs.value().size() != labels.size())
        throw nn::ShapeError("bce_loss: prediction and label lengths differ", probs.shape(), nn::Shape{labels.size()});
    Tensor y(probs.shape());
    for (std::size_t k = 0; k < labels.size(); ++k) y[k] = labels[k] ? 1.0 : 0.0;
    return nn::binary_cross_entropy(probs, y, 1e-7);
}

TaskSnapshot train_supervised(Model& m, const std::vector<Sample>& samples, const TrainConfig& cfg, const std::string& task_id,
                              const EpochLogger& log) {
    cfg.validate();
    check_labels(m, samples, "train_supervised");
    fit(m, samples, cfg, "supervised", nullptr, 0.0, log);
    return {m.params, floored(fisher_diag(m, samples), cfg.fisher_floor), task_id};
}

ParamStore fisher_diag(const Model& m, const std::vector<Sample>& samples) {
    check_labels(m, samples, "fisher_diag");
    ParamStore fisher = m.params.zeros_like();
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (const Sample& s : samples) {
        Graph g;
        const Var loss = bce_loss(forward(g, m, s.cycle), s.labels);
        g.backward(loss);
        // (∂ log p)² == (∂ BCE)², the sign does not matter
        for (auto& [name, f] : fisher) {
            const Tensor grad = g.grad(g.parameter(m.params, name));
            for (std::size_t k = 0; k < f.size(); ++k) f[k] += inv * grad[k] * grad[k];
        }
    }
    return fisher;
}

Var ewc_total_loss(Graph& g, const Var& new_loss, const ParamStore& params, const TaskSnapshot& snapshot, double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("ewc: lambda must be >= 0");
    Var penalty;
    for (const auto& [name, star] : snapshot.theta_star) {
        const Tensor& f = snapshot.fisher.at(name);
        if (f.shape() != star.shape()) throw nn::ShapeError("ewc: Fisher and snapshot shapes differ for '" + name + "'", f.shape(), star.shape());
        const Var p = old_part(g.parameter(params, name), star.shape(), name);
        const Var term = nn::sum(nn::mul(g.constant(f), nn::square(nn::sub(p, g.constant(star)))));
        penalty = penalty.valid() ? nn::add(penalty, term) : term;
    }
    if (!penalty.valid()) return new_loss;
    return nn::add(new_loss, nn::scale(penalty, lambda / 2.0));
}

TaskSnapshot continual_update(Model& m, const TaskSnapshot& snapshot, const std::vector<Sample>& samples, const TrainConfig& cfg,
                              const std::string& task_id, const EpochLogger& log) {
    cfg.validate();
    if (samples.empty()) throw std::invalid_argument("continual_update: no labelled samples");
    const std::size_t k_new = samples.front().labels.size();
    if (k_new < m.num_classes())
        throw std::invalid_argument("continual_update: samples carry " + std::to_string(k_new) + " labels, fewer than the model's " +
                                    std::to_string(m.num_classes()));
    widen_head(m, k_new, nn::derive_seed(cfg.seed, "continual.head"));
    check_labels(m, samples, "continual_update");

    fit(m, samples, cfg, "continual", &snapshot, cfg.lambda_ewc, log);

    ParamStore merged = floored(fisher_diag(m, samples), cfg.fisher_floor);
    for (auto& [name, f] : merged) {
        if (!snapshot.fisher.contains(name)) continue;
        const Tensor& old = snapshot.fisher.at(name);
        if (old.shape() != f.shape() && !grown_rows(f.shape(), old.shape()))
            throw nn::ShapeError("continual_update: Fisher shape for '" + name + "'", f.shape(), old.shape());
        // old rows are a prefix of the row-major data
        for (std::size_t k = 0; k < old.size(); ++k) f[k] = std::max(f[k], old[k]);
    }
    return {m.params, std::move(merged), task_id};
}

double max_parameter_shift(const ParamStore& params, const ParamStore& theta_star) {
    double worst = 0.0;
    for (const auto& [name, star] : theta_star) {
        const Tensor& p = params.at(name);
        if (p.shape() != star.shape() && !grown_rows(p.shape(), star.shape()))
            throw nn::ShapeError("max_parameter_shift: '" + name + "'", p.shape(), star.shape());
        for (std::size_t k = 0; k < star.size(); ++k) worst = std::max(worst, std::abs(p[k] - star[k]));
    }
    return worst;
}

}  // namespace nilm::train
