#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>

#include "commands.hpp"
#include "nilm/nn/grad_check.hpp"
#include "nilm/nn/ops.hpp"
#include "nilm/preprocess/filters.hpp"
#include "nilm/signature/signature.hpp"

namespace nilm::cli {

namespace {

using std::numbers::pi;

struct Check {
    std::string name;
    std::function<std::string()> run;  // empty string on success
};

std::string expect(bool ok, const std::string& detail) { return ok ? "" : detail; }

double gain_db(const std::vector<double>& h, double f, double fs) {
    std::complex<double> s = 0.0;
    for (std::size_t n = 0; n < h.size(); ++n) s += h[n] * std::polar(1.0, -2.0 * pi * f * static_cast<double>(n) / fs);
    return 20.0 * std::log10(std::abs(s));
}

preprocess::NormalizedCycle random_cycle(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.1);
    preprocess::CycleTriple c;
    for (std::size_t t = 0; t < n; ++t) {
        const double ph = 2.0 * pi * static_cast<double>(t) / static_cast<double>(n);
        c.i_cyc.push_back(std::sin(ph - 0.5) + nd(rng));
        c.v_cyc.push_back(std::sin(ph + 0.4));
        c.pf_cyc.push_back(0.8 + nd(rng));
    }
    return preprocess::normalize_cycle(c);
}

std::vector<Check> checks() {
    std::vector<Check> out;
    out.push_back({"grad_check: layer types", [] {
                       std::mt19937_64 rng(1);
                       std::normal_distribution<double> nd;
                       nn::ParamStore p;
                       for (auto [name, shape] : std::vector<std::pair<std::string, nn::Shape>>{{"w", {3, 2, 3}}, {"x", {2, 10}}, {"d", {4, 3}}, {"b", {4}}}) {
                           nn::Tensor t(shape);
                           for (auto& v : t.values()) v = nd(rng);
                           p.set(name, t);
                       }
                       nn::LossBuilder fn = [](nn::Graph& g, const nn::ParamStore& ps) {
                           const auto h = nn::relu(nn::conv1d(g.parameter(ps, "x"), g.parameter(ps, "w"), 2, true));
                           const auto y = nn::sigmoid(nn::add_bias(nn::matmul(g.parameter(ps, "d"), h), g.parameter(ps, "b")));
                           return nn::sum(nn::square(y));
                       };
                       const double e = nn::grad_check(fn, p, 1e-5);
                       return expect(e < 1e-4, "relative error " + std::to_string(e));
                   }});
    out.push_back({"grad_check: end-to-end signature and classifier", [] {
                       train::ModelConfig mc;
                       auto& s = mc.signature;
                       s.n_cyc = 16;
                       s.d_i = s.d_v = s.d_fus = 4;
                       s.d_pf = 2;
                       s.image_side = 16;
                       mc.classifier.conv0 = 4;
                       mc.classifier.conv1 = 4;
                       mc.num_classes = 2;
                       const train::Model m = train::make_model(mc, 3);
                       const auto c = random_cycle(16, 4);
                       nn::LossBuilder fn = [&](nn::Graph& g, const nn::ParamStore& ps) {
                           const auto img = signature::signature_image(g, ps, mc.signature, c);
                           return train::bce_loss(train::classify(g, ps, mc, img), {1, 0});
                       };
                       const double e = nn::grad_check(fn, m.params, 1e-5);
                       return expect(e < 1e-4, "relative error " + std::to_string(e));
                   }});
    out.push_back({"filter: 50 Hz passes, 5 kHz is attenuated", [] {
                       const auto h = preprocess::lowpass_kernel(50000.0, preprocess::FilterSpec{});
                       const double pass = gain_db(h, 50.0, 50000.0), stop = gain_db(h, 5000.0, 50000.0);
                       return expect(std::abs(pass) <= 1.0 && stop <= -20.0, "50 Hz " + std::to_string(pass) + " dB, 5 kHz " + std::to_string(stop) + " dB");
                   }});
    out.push_back({"cycles: clean sine crossings every 1000 samples", [] {
                       std::vector<double> v(10000);
                       for (std::size_t n = 0; n < v.size(); ++n) v[n] = std::sin(2.0 * pi * static_cast<double>(n % 1000) / 1000.0);
                       const auto z = preprocess::detect_cycles(v, 50000.0);
                       bool ok = z.size() == 10;
                       for (std::size_t k = 0; ok && k < z.size(); ++k) ok = z[k] == 1000 * k;
                       return expect(ok, std::to_string(z.size()) + " crossings");
                   }});
    out.push_back({"normalize: zero mean and unit deviation", [] {
                       const auto c = random_cycle(64, 9);
                       double mu = 0.0, var = 0.0;
                       for (double x : c.i_norm) mu += x / 64.0;
                       for (double x : c.i_norm) var += (x - mu) * (x - mu) / 64.0;
                       return expect(std::abs(mu) < 1e-9 && std::abs(std::sqrt(var) - 1.0) < 1e-9, "mean " + std::to_string(mu));
                   }});
    out.push_back({"signature: Gram map is symmetric", [] {
                       nn::Graph g;
                       nn::Tensor f({3, 5});
                       std::mt19937_64 rng(2);
                       std::normal_distribution<double> nd;
                       for (auto& v : f.values()) v = nd(rng);
                       const auto& gm = signature::lgm(g.constant(f)).value();
                       bool ok = true;
                       for (std::size_t a = 0; a < 3; ++a)
                           for (std::size_t b = 0; b < 3; ++b) ok = ok && gm[a * 3 + b] == gm[b * 3 + a] && gm[a * 3 + b] >= 0.0;
                       return expect(ok, "asymmetric or negative entry");
                   }});
    out.push_back({"metrics: hand-evaluated macro-F1 and Jaccard", [] {
                       const auto r = eval::multilabel_metrics({{1, 0}, {0, 1}}, {{1, 1}, {0, 1}});
                       return expect(std::abs(r.f1_macro - 5.0 / 6.0) < 1e-12 && r.accuracy_jaccard == 0.75, "F1 " + std::to_string(r.f1_macro));
                   }});
    out.push_back({"energy: constant 100 W for one hour is 100 Wh", [] {
                       const double e = decompose::energy(std::vector<double>(180000, 100.0), 0.02);
                       return expect(decompose::joules_to_wh(e) == 100.0, std::to_string(e) + " J");
                   }});
    return out;
}

}  // namespace

int cmd_selftest() {
    int failed = 0;
    for (const auto& c : checks()) {
        std::string detail;
        try {
            detail = c.run();
        } catch (const std::exception& e) {
            detail = std::string("threw: ") + e.what();
        }
        if (detail.empty()) {
            std::printf("PASS %s\n", c.name.c_str());
        } else {
            std::printf("FAIL %s (%s)\n", c.name.c_str(), detail.c_str());
            ++failed;
        }
    }
    std::printf("%d check(s) failed\n", failed);
    return failed;
}

}  // namespace nilm::cli
