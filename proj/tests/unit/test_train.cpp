#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "nilm/nn/grad_check.hpp"
#include "nilm/nn/ops.hpp"
#include "nilm/train/train.hpp"

using namespace nilm::train;
namespace nn = nilm::nn;
using std::numbers::pi;

namespace {

ModelConfig toy_config(std::size_t classes) {
    ModelConfig cfg;
    auto& s = cfg.signature;
    s.n_cyc = 16;
    s.d_i = 4;
    s.d_v = 4;
    s.d_pf = 2;
    s.d_fus = 4;
    s.image_side = 16;
    cfg.classifier.conv0 = 4;
    cfg.classifier.conv1 = 8;
    cfg.classifier.pool = 4;
    cfg.num_classes = classes;
    return cfg;
}

NormalizedCycle zscored(std::vector<double> i, std::vector<double> v, std::vector<double> pf) {
    nilm::preprocess::CycleTriple c;
    c.i_cyc = std::move(i);
    c.v_cyc = std::move(v);
    c.pf_cyc = std::move(pf);
    return nilm::preprocess::normalize_cycle(c);
}

// Archetype 0: sinusoidal current; archetype 1: clipped, rectifier-like pulses.
NormalizedCycle archetype(int kind, std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 0.03);
    std::vector<double> i(n), v(n), pf(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double ph = 2.0 * pi * static_cast<double>(t) / static_cast<double>(n);
        v[t] = std::sin(ph) + nd(rng);
        const double s = std::sin(ph - (kind == 0 ? 0.2 : 0.0));
        i[t] = (kind == 0 ? s : std::pow(s, 5.0)) + nd(rng);
        pf[t] = (kind == 0 ? 0.9 : 0.6) + 0.1 * std::sin(2.0 * ph) + nd(rng);
    }
    return zscored(i, v, pf);
}

std::vector<Sample> toy_samples(std::size_t per_class, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Sample> out;
    for (std::size_t k = 0; k < per_class; ++k)
        for (int kind = 0; kind < 2; ++kind) out.push_back({archetype(kind, 16, rng), {static_cast<std::uint8_t>(kind == 0), static_cast<std::uint8_t>(kind == 1)}});
    return out;
}

TrainConfig toy_train(std::size_t epochs) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 8;
    cfg.lr = 3e-3;
    cfg.seed = 4;
    return cfg;
}

Tensor random_like(const Tensor& t, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor out(t.shape());
    for (auto& v : out.values()) v = u(rng);
    return out;
}

}  // namespace

TEST_CASE("bce_loss: closed forms, clamp and gradient") {
    nn::Graph g;
    const Var half = g.constant(Tensor({3}, 0.5));
    CHECK(bce_loss(half, {1, 0, 1}).value()[0] == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));

    const double eps = 1e-7;
    const Var sure = g.constant(Tensor::vector({eps, 1.0 - eps, 1.0 - eps, eps}));
    const double l = bce_loss(sure, {0, 1, 1, 0}).value()[0];
    CHECK(l >= 0.0);
    CHECK(l <= 4 * 1e-6);
    CHECK_THROWS_AS(bce_loss(half, {1, 0}), nn::ShapeError);

    ParamStore p;
    std::mt19937_64 rng(3);
    p.set("logits", random_like(Tensor({5}), rng, -3.0, 3.0));
    auto fn = [](nn::Graph& gg, const ParamStore& ps) { return bce_loss(nn::sigmoid(gg.parameter(ps, "logits")), {1, 0, 0, 1, 1}); };
    CHECK(nn::grad_check(fn, p, 1e-5) < 1e-5);
}

TEST_CASE("half_cycle_mse: exact, offset and independent oracle") {
    std::mt19937_64 rng(1);
    const Tensor truth = random_like(Tensor({3, 8}), rng, -2.0, 2.0);
    nn::Graph g;
    CHECK(half_cycle_mse(g.constant(truth), truth).value()[0] == 0.0);
    Tensor shifted = truth;
    for (auto& v : shifted.values()) v += 1.0;
    CHECK(half_cycle_mse(g.constant(shifted), truth).value()[0] == doctest::Approx(3.0).epsilon(1e-12));

    const Tensor pred = random_like(truth, rng, -2.0, 2.0);
    double oracle = 0.0;
    for (std::size_t ch = 0; ch < 3; ++ch) {
        double s = 0.0;
        for (std::size_t t = 0; t < 8; ++t) s += (pred.at(ch, t) - truth.at(ch, t)) * (pred.at(ch, t) - truth.at(ch, t));
        oracle += s / 8.0;
    }
    CHECK(half_cycle_mse(g.constant(pred), truth).value()[0] == doctest::Approx(oracle).epsilon(1e-12));
    CHECK_THROWS_AS(half_cycle_mse(g.constant(Tensor({2, 8})), Tensor({2, 8})), nn::ShapeError);
}

TEST_CASE("ssl: odd cycle length is rejected") {
    ModelConfig cfg = toy_config(2);
    cfg.signature.n_cyc = 15;
    cfg.signature.gg_rows = 4;
    cfg.signature.gg_cols = 15;
    Model m = make_model(cfg, 1);
    std::vector<double> x(15);
    for (std::size_t t = 0; t < 15; ++t) x[t] = std::sin(static_cast<double>(t));
    const auto c = zscored(x, x, x);
    CHECK_THROWS_AS(pretrain(m, {c}, toy_train(1)), std::invalid_argument);
    const ParamStore dec = init_ssl_decoder(toy_config(2), 1);
    nn::Graph g;
    CHECK_THROWS_AS(ssl_loss(g, m, dec, c), std::invalid_argument);
}

TEST_CASE("pretrain: zero epochs, determinism and convergence on periodic cycles") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 2.0 * pi);
    std::vector<NormalizedCycle> cycles;
    for (int k = 0; k < 32; ++k) {
        const double phi = u(rng), a3 = 0.4 * std::sin(u(rng));
        std::vector<double> i(16), v(16), pf(16);
        for (std::size_t t = 0; t < 16; ++t) {
            const double ph = 2.0 * pi * static_cast<double>(t) / 16.0;
            i[t] = std::sin(ph - phi) + a3 * std::sin(3.0 * (ph - phi));
            v[t] = std::sin(ph);
            pf[t] = std::cos(2.0 * ph - phi);
        }
        cycles.push_back(zscored(i, v, pf));
    }

    const ModelConfig cfg = toy_config(2);
    Model m0 = make_model(cfg, 5);
    const ParamStore init = m0.params;
    TrainConfig tc = toy_train(0);
    tc.ssl_epochs = 0;
    const ParamStore theta0 = pretrain(m0, cycles, tc);
    CHECK(m0.params == init);
    for (const auto& [name, t] : theta0) {
        CHECK((name.starts_with("extractor.") || name.starts_with("fusion.")));
        CHECK(t == init.at(name));
    }

    tc.ssl_epochs = 60;
    tc.batch_size = 8;
    std::vector<double> losses;
    Model m1 = make_model(cfg, 5);
    const ParamStore a = pretrain(m1, cycles, tc, [&](const EpochRecord& r) { losses.push_back(r.loss); });
    REQUIRE(losses.size() == 60);
    CHECK(losses.back() < 0.1 * losses.front());
    // classifier untouched
    for (const auto& [name, t] : m1.params)
        if (name.starts_with("classifier.") || name.starts_with("signature.")) CHECK(t == init.at(name));
    CHECK(!m1.params.contains("ssl.decoder.w"));

    Model m2 = make_model(cfg, 5);
    CHECK(pretrain(m2, cycles, tc) == a);
}

TEST_CASE("predict: zero classifier, threshold and class-count checks") {
    Model m = make_model(toy_config(3), 2);
    m.params.at("classifier.head.w").fill(0.0);
    m.params.at("classifier.head.b").fill(0.0);
    std::mt19937_64 rng(1);
    const auto c = archetype(0, 16, rng);
    const Prediction p = predict(m, c);
    REQUIRE(p.probs.size() == 3);
    for (double v : p.probs) CHECK(v == 0.5);
    for (auto b : p.on) CHECK(b == 1);

    m.params.at("classifier.head.b")[0] = std::log(9.0);   // sigmoid -> 0.9
    m.params.at("classifier.head.b")[1] = -std::log(9.0);  // sigmoid -> 0.1
    const Prediction q = predict(m, c, 0.5);
    CHECK(q.probs[0] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(q.on[0] == 1);
    CHECK(q.on[1] == 0);
    CHECK_THROWS_AS(predict(m, c, 0.5, 4), std::invalid_argument);
    CHECK_THROWS_AS(predict(m, c, 1.0), std::invalid_argument);
}

TEST_CASE("train_supervised: separable archetypes and degenerate targets") {
    const auto train = toy_samples(24, 1);
    Model m = make_model(toy_config(2), 3);
    std::vector<double> losses;
    const TaskSnapshot snap = train_supervised(m, train, toy_train(15), "toy", [&](const EpochRecord& r) { losses.push_back(r.loss); });
    CHECK(losses.back() < losses.front());
    std::size_t correct = 0;
    for (const auto& s : train) correct += predict(m, s.cycle).on == s.labels;
    CHECK(static_cast<double>(correct) / static_cast<double>(train.size()) >= 0.99);

    CHECK(snap.theta_star == m.params);
    const ParamStore raw = fisher_diag(m, train);
    for (const auto& [name, f] : snap.fisher) {
        CHECK(f.shape() == snap.theta_star.at(name).shape());
        for (std::size_t k = 0; k < f.size(); ++k) CHECK(f[k] == std::max(raw.at(name)[k], toy_train(15).fisher_floor));
    }

    auto zeros = train;
    for (auto& s : zeros) s.labels = {0, 0};
    Model z = make_model(toy_config(2), 3);
    train_supervised(z, zeros, toy_train(10));
    for (const auto& s : zeros)
        for (double v : predict(z, s.cycle).probs) CHECK(v < 0.1);

    Model again = make_model(toy_config(2), 3);
    train_supervised(again, train, toy_train(15));
    CHECK(again.params == m.params);

    auto bad = train;
    bad[3].labels = {1};
    Model b = make_model(toy_config(2), 3);
    CHECK_THROWS_AS(train_supervised(b, bad, toy_train(1)), std::invalid_argument);
    CHECK_THROWS_AS(train_supervised(b, {}, toy_train(1)), std::invalid_argument);
}

TEST_CASE("fisher_diag: analytic head-bias oracle, unused parameters and mean invariance") {
    const auto samples = toy_samples(4, 7);
    Model m = make_model(toy_config(2), 11);
    m.params.set("unused.w", Tensor({3}, 0.7));
    const ParamStore f = fisher_diag(m, samples);

    // d BCE / d b_k = y_hat_k - y_k for a sigmoid output
    std::vector<double> oracle(2, 0.0);
    for (const auto& s : samples) {
        const auto p = predict(m, s.cycle);
        for (std::size_t k = 0; k < 2; ++k) oracle[k] += (p.probs[k] - s.labels[k]) * (p.probs[k] - s.labels[k]) / static_cast<double>(samples.size());
    }
    for (std::size_t k = 0; k < 2; ++k) CHECK(f.at("classifier.head.b")[k] == doctest::Approx(oracle[k]).epsilon(1e-10));
    for (double v : f.at("unused.w").values()) CHECK(v == 0.0);

    auto doubled = samples;
    doubled.insert(doubled.end(), samples.begin(), samples.end());
    const ParamStore f2 = fisher_diag(m, doubled);
    for (const auto& [name, t] : f)
        for (std::size_t k = 0; k < t.size(); ++k) CHECK(std::abs(f2.at(name)[k] - t[k]) <= 1e-12 * std::max(1.0, t[k]));
}

TEST_CASE("ewc_total_loss: hand case, identities and exact penalty") {
    TaskSnapshot s;
    s.theta_star.set("w", Tensor::scalar(1.0));
    s.fisher.set("w", Tensor::scalar(2.0));
    ParamStore p;
    p.set("w", Tensor::scalar(4.0));
    nn::Graph g;
    const Var zero = g.constant(Tensor::scalar(0.0));
    CHECK(ewc_total_loss(g, zero, p, s, 1.0).value()[0] == 9.0);

    const Var l = g.constant(Tensor::scalar(1.25));
    CHECK(ewc_total_loss(g, l, p, s, 0.0).value()[0] == 1.25);
    ParamStore same;
    same.set("w", Tensor::scalar(1.0));
    nn::Graph g2;
    CHECK(ewc_total_loss(g2, g2.constant(Tensor::scalar(1.25)), same, s, 50.0).value()[0] == 1.25);
    CHECK_THROWS_AS(ewc_total_loss(g2, l, p, s, -1.0), std::invalid_argument);

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        TaskSnapshot snap;
        ParamStore theta;
        for (const char* name : {"a", "b", "c"}) {
            const Tensor shape({static_cast<std::size_t>(2 + trial % 3), 3});
            snap.theta_star.set(name, random_like(shape, rng, -1.0, 1.0));
            snap.fisher.set(name, random_like(shape, rng, 0.0, 2.0));
            theta.set(name, random_like(shape, rng, -1.0, 1.0));
        }
        const double lambda = 0.5 + trial, base = 0.3 * trial;
        double oracle = 0.0;
        for (const auto& [name, star] : snap.theta_star)
            for (std::size_t k = 0; k < star.size(); ++k) {
                const double d = theta.at(name)[k] - star[k];
                oracle += snap.fisher.at(name)[k] * d * d;
            }
        nn::Graph gr;
        const Var total = ewc_total_loss(gr, gr.constant(Tensor::scalar(base)), theta, snap, lambda);
        CHECK(total.value()[0] - base == doctest::Approx(lambda / 2.0 * oracle).epsilon(1e-12));

        // gradient is λ F (θ - θ*)
        gr.backward(total);
        for (const auto& [name, star] : snap.theta_star) {
            const Tensor grad = gr.grad(gr.parameter(theta, name));
            for (std::size_t k = 0; k < star.size(); ++k)
                CHECK(grad[k] == doctest::Approx(lambda * snap.fisher.at(name)[k] * (theta.at(name)[k] - star[k])).epsilon(1e-12));
        }

        // monotone in each |θ - θ*|
        ParamStore further = theta;
        Tensor& t = further.at("b");
        t[1] = snap.theta_star.at("b")[1] + 1.5 * (t[1] - snap.theta_star.at("b")[1]);
        nn::Graph gm;
        CHECK(ewc_total_loss(gm, gm.constant(Tensor::scalar(base)), further, snap, lambda).value()[0] >= total.value()[0]);
    }

    ParamStore wrong;
    wrong.set("w", Tensor({2, 2}, 0.0));
    nn::Graph g3;
    CHECK_THROWS_AS(ewc_total_loss(g3, g3.constant(Tensor::scalar(0.0)), wrong, s, 1.0), nn::ShapeError);

    // widened tensors are penalised on their old rows only
    TaskSnapshot rows;
    rows.theta_star.set("h", Tensor::matrix(1, 2, {0.0, 0.0}));
    rows.fisher.set("h", Tensor::matrix(1, 2, {1.0, 1.0}));
    ParamStore grown;
    grown.set("h", Tensor::matrix(2, 2, {1.0, 1.0, 100.0, 100.0}));
    nn::Graph g4;
    CHECK(ewc_total_loss(g4, g4.constant(Tensor::scalar(0.0)), grown, rows, 2.0).value()[0] == 2.0);
}

TEST_CASE("continual_update: lambda zero equals plain fine-tuning") {
    const auto old_task = toy_samples(8, 1);
    const auto new_task = toy_samples(8, 2);
    Model base = make_model(toy_config(2), 3);
    const TaskSnapshot snap = train_supervised(base, old_task, toy_train(3));

    TrainConfig tc = toy_train(3);
    tc.lambda_ewc = 0.0;
    Model a = base, b = base;
    continual_update(a, snap, new_task, tc);
    train_supervised(b, new_task, tc);
    CHECK(a.params == b.params);

    tc.lambda_ewc = -1.0;
    Model c = base;
    CHECK_THROWS_AS(continual_update(c, snap, new_task, tc), std::invalid_argument);
}

TEST_CASE("continual_update: new class widens the head and anchors old weights") {
    const auto old_task = toy_samples(8, 1);
    Model m = make_model(toy_config(2), 3);
    const TaskSnapshot snap = train_supervised(m, old_task, toy_train(3));

    auto new_task = toy_samples(6, 5);
    for (std::size_t k = 0; k < new_task.size(); ++k) new_task[k].labels.push_back(k % 3 == 0);

    TrainConfig tc = toy_train(3);
    tc.lambda_ewc = 100.0;
    Model widened = m;
    const TaskSnapshot next = continual_update(widened, snap, new_task, tc);
    CHECK(widened.num_classes() == 3);
    CHECK(widened.params.at("classifier.head.w").dim(0) == 3);
    CHECK(next.fisher.at("classifier.head.b").size() == 3);
    // merged Fisher dominates the old one on old rows
    for (const auto& [name, old] : snap.fisher)
        for (std::size_t k = 0; k < old.size(); ++k) CHECK(next.fisher.at(name)[k] >= old[k]);

    tc.lambda_ewc = 1e9;
    Model pinned = m;
    continual_update(pinned, snap, new_task, tc);
    Model free = m;
    tc.lambda_ewc = 0.0;
    continual_update(free, snap, new_task, tc);
    CHECK(max_parameter_shift(pinned.params, snap.theta_star) < max_parameter_shift(free.params, snap.theta_star));

    auto fewer = old_task;
    for (auto& s : fewer) s.labels.pop_back();
    Model f = m;
    CHECK_THROWS_AS(continual_update(f, snap, fewer, tc), std::invalid_argument);
}
