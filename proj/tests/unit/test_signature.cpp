#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "nilm/nn/grad_check.hpp"
#include "nilm/nn/ops.hpp"
#include "nilm/signature/signature.hpp"

using namespace nilm::signature;
namespace nn = nilm::nn;

namespace {

Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = u(rng);
    return t;
}

nilm::preprocess::NormalizedCycle random_cycle(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    nilm::preprocess::NormalizedCycle c;
    for (std::size_t k = 0; k < n; ++k) {
        c.i_norm.push_back(nd(rng));
        c.v_norm.push_back(std::sin(2.0 * 3.14159265358979 * static_cast<double>(k) / static_cast<double>(n) + 0.4));
        c.pf_norm.push_back(nd(rng));
    }
    return c;
}

// Symmetric Jacobi eigenvalue iteration.
std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-22) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (std::size_t k = 0; k < n; ++k) ev[k] = a[k][k];
    return ev;
}

SignatureConfig small_config() {
    SignatureConfig cfg;
    cfg.n_cyc = 8;
    cfg.d_i = 3;
    cfg.d_v = 2;
    cfg.d_pf = 2;
    cfg.d_fus = 2;
    cfg.tcn_layers = 2;
    cfg.pf_layers = 1;
    cfg.image_side = 8;
    return cfg;
}

}  // namespace

TEST_CASE("config: defaults and GG factorisation") {
    SignatureConfig cfg;
    cfg.validate();
    CHECK(cfg.gg_shape() == std::pair<std::size_t, std::size_t>{16, 32});
    cfg.n_cyc = 32;
    CHECK(cfg.gg_shape() == std::pair<std::size_t, std::size_t>{16, 16});
    cfg.gg_rows = 10;
    cfg.gg_cols = 10;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    SignatureConfig tiny;
    tiny.image_side = 4;
    CHECK_THROWS_AS(tiny.validate(), std::invalid_argument);
}

TEST_CASE("extract: zero input, identity layer and shape errors") {
    SignatureConfig cfg;
    ParamStore p;
    init_signature_params(p, cfg, 3);
    nn::Graph g;
    const Var z = g.constant(Tensor({1, 64}, 0.0));
    const auto f = extract(g, p, cfg, z, z, z);
    CHECK(f.current.shape() == nn::Shape{8, 64});
    CHECK(f.voltage.shape() == nn::Shape{8, 64});
    CHECK(f.pf.shape() == nn::Shape{4, 64});
    for (const Var* v : {&f.current, &f.voltage, &f.pf})
        for (double x : v->value().values()) CHECK(x == 0.0);

    SignatureConfig one = cfg;
    one.tcn_layers = 1;
    ParamStore q;
    init_signature_params(q, one, 3);
    q.at("extractor.current.l0.w").fill(0.0);
    q.at("extractor.current.l0.w")[2] = 1.0;  // channel 0, current-sample tap
    std::mt19937_64 rng(1);
    const auto c = random_cycle(64, rng);
    nn::Graph g2;
    const auto in = cycle_inputs(g2, c);
    const auto f2 = extract(g2, q, one, in.i, in.v, in.pf);
    for (std::size_t t = 0; t < 64; ++t) CHECK(f2.current.value().at(0, t) == c.i_norm[t]);

    nn::Graph g3;
    const Var wrong = g3.constant(Tensor({1, 32}, 0.0));
    CHECK_THROWS_AS(extract(g3, p, cfg, wrong, wrong, wrong), nn::ShapeError);
}

TEST_CASE("extract: gradient of a feature readout matches finite differences") {
    const SignatureConfig cfg = small_config();
    ParamStore p;
    init_signature_params(p, cfg, 5);
    std::mt19937_64 rng(2);
    const auto c = random_cycle(cfg.n_cyc, rng);
    const Tensor readout = random_tensor({cfg.d_i, cfg.n_cyc}, rng);
    ParamStore ext = p.subset("extractor.");
    auto fn = [&](nn::Graph& g, const ParamStore& params) {
        const auto in = cycle_inputs(g, c);
        const auto f = extract(g, params, cfg, in.i, in.v, in.pf);
        return nn::sum(nn::mul(f.current, g.constant(readout)));
    };
    CHECK(nn::grad_check(fn, ext, 1e-6) < 1e-4);
}

TEST_CASE("fuse: hand-evaluated cases") {
    SignatureConfig cfg = small_config();
    cfg.d_i = cfg.d_v = cfg.d_pf = 1;
    cfg.d_fus = 1;
    ParamStore p;
    p.set("fusion.w", Tensor::matrix(1, 3, {1, 1, 1}));
    p.set("fusion.b", Tensor({1}, 0.0));
    nn::Graph g;
    const Features f{g.constant(Tensor({1, 4}, 1.0)), g.constant(Tensor({1, 4}, 2.0)), g.constant(Tensor({1, 4}, 3.0))};
    for (double v : fuse(g, p, cfg, f).value().values()) CHECK(v == 6.0);

    p.at("fusion.b")[0] = -1e6;
    nn::Graph g2;
    const Features f2{g2.constant(Tensor({1, 4}, 1.0)), g2.constant(Tensor({1, 4}, 2.0)), g2.constant(Tensor({1, 4}, 3.0))};
    for (double v : fuse(g2, p, cfg, f2).value().values()) CHECK(v == 0.0);

    p.at("fusion.w").fill(0.0);
    p.at("fusion.b").fill(0.0);
    nn::Graph g3;
    const Features f3{g3.constant(Tensor({1, 4}, 1.0)), g3.constant(Tensor({1, 4}, 2.0)), g3.constant(Tensor({1, 5}, 3.0))};
    CHECK_THROWS_AS(fuse(g3, p, cfg, f3), nn::ShapeError);
}

TEST_CASE("lrg: pairwise relational map") {
    SignatureConfig cfg = small_config();
    cfg.d_fus = 1;
    ParamStore p;
    p.set("signature.lrg.w", Tensor::matrix(1, 2, {1, 1}));
    p.set("signature.lrg.b", Tensor({1}, 0.0));
    nn::Graph g;
    const Var r = lrg(g, p, cfg, g.constant(Tensor::matrix(1, 2, {1, 2})));
    CHECK(r.value() == Tensor::matrix(2, 2, {2, 3, 3, 4}));

    p.at("signature.lrg.w").fill(0.0);
    for (double b : {0.0, -1.0}) {
        p.at("signature.lrg.b")[0] = b;
        nn::Graph g2;
        for (double v : lrg(g2, p, cfg, g2.constant(Tensor::matrix(1, 2, {1, 2}))).value().values()) CHECK(v == 0.0);
    }

    // ordered pairs: [f_i; f_j] with asymmetric weights gives an asymmetric map
    cfg.d_fus = 2;
    ParamStore q;
    std::mt19937_64 rng(4);
    q.set("signature.lrg.w", random_tensor({1, 4}, rng));
    q.set("signature.lrg.b", Tensor({1}, 0.5));
    for (int trial = 0; trial < 10; ++trial) {
        nn::Graph g3;
        const Tensor f = random_tensor({2, 8}, rng);
        const Tensor r3 = lrg(g3, q, cfg, g3.constant(f)).value();
        const auto& w = q.at("signature.lrg.w");
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) {
                const double z = w[0] * f.at(0, i) + w[1] * f.at(1, i) + w[2] * f.at(0, j) + w[3] * f.at(1, j) + 0.5;
                CHECK(r3.at(i, j) == doctest::Approx(std::max(0.0, z)).epsilon(1e-12));
                CHECK(r3.at(i, j) >= 0.0);
            }
    }

    SignatureConfig deep = small_config();
    deep.lrg_hidden = 3;
    ParamStore d;
    init_signature_params(d, deep, 9);
    nn::Graph g4;
    const Tensor r4 = lrg(g4, d, deep, g4.constant(random_tensor({2, 8}, rng))).value();
    CHECK(r4.shape() == nn::Shape{8, 8});
    for (double v : r4.values()) CHECK(v >= 0.0);
}

TEST_CASE("lgm: Gram structure") {
    nn::Graph g;
    CHECK(lgm(g.constant(Tensor::matrix(2, 3, {1, 0, 1, 0, 1, 0}))).value() == Tensor::matrix(2, 2, {2, 0, 0, 1}));
    for (double v : lgm(g.constant(Tensor({3, 5}, 0.0))).value().values()) CHECK(v == 0.0);

    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor f = random_tensor({5, 7}, rng);
        nn::Graph g2;
        const Var fv = g2.constant(f);
        const Tensor gram = nn::matmul(fv, nn::transpose(fv)).value();
        std::vector<std::vector<double>> m(5, std::vector<double>(5));
        for (std::size_t p = 0; p < 5; ++p)
            for (std::size_t q = 0; q < 5; ++q) {
                CHECK(gram.at(p, q) == gram.at(q, p));
                m[p][q] = gram.at(p, q);
            }
        for (double ev : jacobi_eigenvalues(m)) CHECK(ev >= -1e-9);

        // column permutation leaves the Gram matrix unchanged
        std::vector<std::size_t> perm{6, 2, 0, 4, 1, 5, 3};
        Tensor fp({5, 7});
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t c = 0; c < 7; ++c) fp.at(r, c) = f.at(r, perm[c]);
        const Tensor a = lgm(fv).value(), b = lgm(g2.constant(fp)).value();
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-12);
    }
}

TEST_CASE("gg: flattening convention and linearity") {
    SignatureConfig cfg = small_config();
    cfg.d_fus = 2;
    cfg.n_cyc = 2;
    cfg.gg_rows = cfg.gg_cols = 2;
    ParamStore p;
    Tensor eye({4, 4}, 0.0);
    for (std::size_t k = 0; k < 4; ++k) eye.at(k, k) = 1.0;
    p.set("signature.gg.w", eye);
    p.set("signature.gg.b", Tensor({4}, 0.0));
    nn::Graph g;
    CHECK(gg(g, p, cfg, g.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}))).value() == Tensor::matrix(2, 2, {1, 3, 2, 4}));

    p.at("signature.gg.w").fill(0.0);
    p.at("signature.gg.b").fill(2.5);
    nn::Graph g1;
    for (double v : gg(g1, p, cfg, g.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}))).value().values()) CHECK(v == 2.5);

    SignatureConfig big = small_config();
    ParamStore q;
    init_signature_params(q, big, 1);
    q.at("signature.gg.b").fill(0.0);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const Tensor f1 = random_tensor({2, 8}, rng), f2 = random_tensor({2, 8}, rng);
        const double a = 1.7, b = -0.4;
        Tensor mix({2, 8});
        for (std::size_t k = 0; k < mix.size(); ++k) mix[k] = a * f1[k] + b * f2[k];
        nn::Graph g2;
        const Tensor y1 = gg(g2, q, big, g2.constant(f1)).value(), y2 = gg(g2, q, big, g2.constant(f2)).value();
        const Tensor ym = gg(g2, q, big, g2.constant(mix)).value();
        CHECK(ym.shape() == nn::Shape{4, 4});
        for (std::size_t k = 0; k < ym.size(); ++k) CHECK(std::abs(ym[k] - (a * y1[k] + b * y2[k])) < 1e-12);
    }

    SignatureConfig bad = cfg;
    bad.gg_rows = 3;
    nn::Graph g3;
    CHECK_THROWS_AS(gg(g3, p, bad, g3.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}))), nn::ShapeError);
}

TEST_CASE("assemble: channel layout, scaling and determinism") {
    nn::Graph g;
    const Var zr = g.constant(Tensor({64, 64}, 0.0)), zg = g.constant(Tensor({8, 8}, 0.0)), zgg = g.constant(Tensor({16, 32}, 0.0));
    const Tensor img = assemble(zr, zg, zgg, 64).value();
    CHECK(img.shape() == nn::Shape{3, 64, 64});
    for (double v : img.values()) CHECK(v == 0.0);

    std::mt19937_64 rng(12);
    const Tensor gp = random_tensor({8, 8}, rng, 0.0, 5.0);
    const Tensor out = assemble(g.constant(random_tensor({64, 64}, rng)), g.constant(gp), g.constant(random_tensor({16, 32}, rng)), 8).value();
    double lo = gp[0], hi = gp[0];
    for (double v : gp.values()) lo = std::min(lo, v), hi = std::max(hi, v);
    for (std::size_t k = 0; k < 64; ++k) CHECK(out[64 + k] == (gp[k] - lo) / (hi - lo));
    for (double v : out.values()) CHECK((v >= 0.0 && v <= 1.0));

    SignatureConfig cfg;
    ParamStore p;
    init_signature_params(p, cfg, 21);
    const auto c = random_cycle(64, rng);
    const Tensor a = compute_signature(p, cfg, c), b = compute_signature(p, cfg, c);
    CHECK(a == b);
    CHECK(a.shape() == nn::Shape{3, 64, 64});
    CHECK(a.all_finite());
    cfg.gg_only = true;
    const Tensor only = compute_signature(p, cfg, c);
    CHECK(only.shape() == nn::Shape{1, 64, 64});
    for (std::size_t k = 0; k < only.size(); ++k) CHECK(only[k] == a[2 * 64 * 64 + k]);
}

TEST_CASE("signature: end-to-end gradient matches finite differences") {
    const SignatureConfig cfg = small_config();
    ParamStore p;
    init_signature_params(p, cfg, 17);
    p.at("signature.lrg.b")[0] = 0.3;
    std::mt19937_64 rng(5);
    const auto c = random_cycle(cfg.n_cyc, rng);
    const Tensor weights = random_tensor({3, cfg.image_side, cfg.image_side}, rng);
    auto fn = [&](nn::Graph& g, const ParamStore& params) {
        return nn::sum(nn::mul(signature_image(g, params, cfg, c), g.constant(weights)));
    };
    CHECK(nn::grad_check(fn, p, 1e-6) < 1e-4);
}

TEST_CASE("pgm: render and re-read") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = dir / "nilm_sig.pgm";
    render_pgm(Tensor({8, 8}, 0.0), 0, path);
    const Tensor zeros = read_pgm(path);
    for (double v : zeros.values()) CHECK(v == 0.0);
    render_pgm(Tensor({2, 8, 8}, 1.0), 1, path);
    const Tensor ones = read_pgm(path);
    for (double v : ones.values()) CHECK(v == 1.0);

    Tensor ramp({3, 16, 16});
    for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t r = 0; r < 16; ++r)
            for (std::size_t col = 0; col < 16; ++col) ramp[(ch * 16 + r) * 16 + col] = static_cast<double>(col) / 15.0 * (r + 1) / 16.0;
    render_pgm(ramp, 2, path);
    const Tensor back = read_pgm(path);
    CHECK(back.shape() == nn::Shape{16, 16});
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t col = 0; col < 16; ++col) {
            CHECK(std::abs(back.at(r, col) - ramp[(2 * 16 + r) * 16 + col]) <= 1.0 / 255.0);
            if (col > 0) CHECK(back.at(r, col) >= back.at(r, col - 1));
        }

    CHECK_THROWS_AS(render_pgm(Tensor({4, 4}, 1.5), 0, path), std::invalid_argument);
    CHECK_THROWS_AS(render_pgm(Tensor({4, 4}, 0.5), 0, "/nonexistent/dir/x.pgm"), std::runtime_error);
    std::filesystem::remove(path);
}
