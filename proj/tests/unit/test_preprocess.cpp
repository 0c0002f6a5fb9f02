#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "nilm/preprocess/pipeline.hpp"
#include "nilm/synth/simulator.hpp"

using namespace nilm::preprocess;
using nilm::synth::RawRecording;
using std::numbers::pi;

namespace {

std::vector<double> sine(double freq, double fs, std::size_t n, double amp = 1.0, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = amp * std::sin(2.0 * pi * freq * static_cast<double>(k) / fs + phase);
    return x;
}

// Sine with the argument reduced per period so that exact zeros land on integer samples.
std::vector<double> grid_sine(std::size_t period, std::size_t n, std::size_t offset) {
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k)
        x[k] = std::sin(2.0 * pi * static_cast<double>((k + offset) % period) / static_cast<double>(period));
    return x;
}

double rms(const std::vector<double>& x, std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t k = begin; k < end; ++k) s += x[k] * x[k];
    return std::sqrt(s / static_cast<double>(end - begin));
}

double mean(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double pop_std(const std::vector<double>& x) {
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size()));
}

RawRecording two_channel(std::vector<double> i, std::vector<double> v, double fs) {
    RawRecording r;
    r.fs = fs;
    r.current = std::move(i);
    r.voltage = std::move(v);
    return r;
}

}  // namespace

TEST_CASE("lowpass: unit DC gain and pass/stop band behaviour") {
    const double fs = 50000.0;
    FilterSpec spec;
    const auto h = lowpass_kernel(fs, spec);
    double dc = 0.0;
    for (double v : h) dc += v;
    CHECK(std::abs(dc - 1.0) < 1e-6);

    const std::vector<double> c(2000, 3.25);
    for (double v : lowpass(c, fs, spec)) CHECK(v == doctest::Approx(3.25).epsilon(1e-12));

    // Measure away from the edges: 0.1 s of signal, 0.02 s margins.
    const std::size_t n = 5000, lo = 1000, hi = 4000;
    const auto x50 = sine(50.0, fs, n);
    const double db50 = 20.0 * std::log10(rms(lowpass(x50, fs, spec), lo, hi) / rms(x50, lo, hi));
    CHECK(std::abs(db50) <= 1.0);

    const auto x5k = sine(5000.0, fs, n);
    const double db5k = 20.0 * std::log10(rms(lowpass(x5k, fs, spec), lo, hi) / rms(x5k, lo, hi));
    CHECK(db5k <= -20.0);
}

TEST_CASE("lowpass: linearity and argument checks") {
    const double fs = 10000.0;
    FilterSpec spec;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> x(600), y(600), z(600);
        const double a = nd(rng), b = nd(rng);
        for (std::size_t k = 0; k < x.size(); ++k) {
            x[k] = nd(rng);
            y[k] = nd(rng);
            z[k] = a * x[k] + b * y[k];
        }
        const auto fx = lowpass(x, fs, spec), fy = lowpass(y, fs, spec), fz = lowpass(z, fs, spec);
        for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(fz[k] - (a * fx[k] + b * fy[k])) < 1e-9);
    }
    FilterSpec bad;
    bad.cutoff_hz = 5000.0;
    CHECK_THROWS_AS(lowpass(std::vector<double>(600, 1.0), fs, bad), std::invalid_argument);
    bad = FilterSpec{};
    bad.taps = 200;
    CHECK_THROWS_AS(lowpass(std::vector<double>(600, 1.0), fs, bad), std::invalid_argument);
    CHECK_THROWS_AS(lowpass(std::vector<double>(100, 1.0), fs, spec), std::invalid_argument);
}

TEST_CASE("moving_mean: prefix truncation") {
    const std::vector<double> x{1, 2, 3, 4};
    CHECK(moving_mean(x, 1) == x);
    const auto y = moving_mean(x, 2);
    const std::vector<double> expect{1.0, 1.5, 2.5, 3.5};
    CHECK(y == expect);
    const std::vector<double> c(17, 3.0);
    CHECK(moving_mean(c, 5) == c);
    CHECK_THROWS_AS(moving_mean(std::vector<double>{}, 3), std::invalid_argument);
    CHECK_THROWS_AS(moving_mean(x, 0), std::invalid_argument);
}

TEST_CASE("detect_cycles: analytic sine boundaries") {
    const double fs = 50000.0;
    const auto v = grid_sine(1000, 5000, 0);
    const auto b = detect_cycles(v, fs);
    REQUIRE(b.size() == 5);
    for (std::size_t k = 0; k < b.size(); ++k) CHECK(b[k] == 1000 * k);

    const auto shifted = detect_cycles(grid_sine(1000, 5000, 500), fs);
    REQUIRE(!shifted.empty());
    CHECK(shifted.front() == 500);

    CHECK_THROWS_AS(detect_cycles(std::vector<double>(3000, 1.0), fs), std::runtime_error);
}

TEST_CASE("detect_cycles: count and spacing on synthetic recordings") {
    using namespace nilm::synth;
    for (double duration : {0.3, 1.0, 1.37}) {
        Scenario sc;
        sc.profiles = standard_appliances();
        sc.fs = 10000.0;
        sc.duration = duration;
        sc.noise_std = 0.02;
        sc.seed = 11;
        sc.schedule = {{1, 0.0, duration}, {2, 0.05, duration}};
        const RawRecording r = synth_recording(sc);
        const double expect = 50.0 * duration;
        for (const auto& v : {r.voltage, lowpass(r.voltage, r.fs, FilterSpec{})}) {
            const auto b = detect_cycles(v, r.fs);
            CHECK(std::abs(static_cast<double>(b.size()) - expect) <= 1.0);
            for (std::size_t k = 1; k < b.size(); ++k) {
                CHECK(b[k] > b[k - 1]);
                CHECK(std::abs(static_cast<double>(b[k] - b[k - 1]) - 200.0) <= 20.0);
            }
        }
    }
}

TEST_CASE("build_cycle: power-factor proxy") {
    const double fs = 50000.0;
    const std::size_t n = 4000;
    const auto v = sine(50.0, fs, n, 325.0);

    SUBCASE("resistive load") {
        const RawRecording r = two_channel(sine(50.0, fs, n, 2.0), v, fs);
        const auto c = build_cycle(r, 1000, 2000, 250);
        REQUIRE(c.pf_cyc.size() == 64);
        CHECK(c.i_cyc.size() == 64);
        CHECK(c.v_cyc.size() == 64);
        CHECK(c.t0 == 1000);
        for (double p : c.pf_cyc) CHECK(p == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(c.i_cyc.front() == r.current[1000]);
        CHECK(c.i_cyc.back() == r.current[1999]);
    }
    SUBCASE("60 degree lag over a half-cycle window") {
        const RawRecording r = two_channel(sine(50.0, fs, n, 2.0, -pi / 3.0), v, fs);
        const auto c = build_cycle(r, 1000, 2000, 500);
        for (double p : c.pf_cyc) CHECK(p == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("zero current") {
        const RawRecording r = two_channel(std::vector<double>(n, 0.0), v, fs);
        const auto c = build_cycle(r, 1000, 2000, 250);
        for (double p : c.pf_cyc) CHECK(p == 0.0);
    }
    SUBCASE("window clipped at the recording start") {
        const RawRecording r = two_channel(sine(50.0, fs, n, 2.0), v, fs);
        const auto c = build_cycle(r, 0, 1000, 250);
        for (double p : c.pf_cyc) CHECK(std::abs(p) <= 1.0);
    }
    const RawRecording r = two_channel(sine(50.0, fs, n), v, fs);
    CHECK_THROWS_AS(build_cycle(r, 2000, 1000, 250), std::invalid_argument);
    CHECK_THROWS_AS(build_cycle(r, 0, n + 1, 250), std::invalid_argument);
}

TEST_CASE("resample_linear: endpoints and linear data") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (std::size_t len : {2u, 3u, 17u, 200u, 1000u}) {
        std::vector<double> x(len);
        for (auto& v : x) v = u(rng);
        const auto y = resample_linear(x, 64);
        CHECK(y.front() == x.front());
        CHECK(y.back() == x.back());
        // interpolated values stay inside the data range
        const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
        for (double v : y) CHECK((v >= *mn - 1e-12 && v <= *mx + 1e-12));

        // a straight line is reproduced exactly up to rounding
        const double a = u(rng), b = u(rng);
        std::vector<double> line(len);
        for (std::size_t k = 0; k < len; ++k) line[k] = a + b * static_cast<double>(k);
        const auto yl = resample_linear(line, 64);
        for (std::size_t j = 0; j < 64; ++j) {
            const double pos = static_cast<double>(j) * static_cast<double>(len - 1) / 63.0;
            CHECK(std::abs(yl[j] - (a + b * pos)) < 1e-9);
        }
    }
}

TEST_CASE("normalize_cycle: z-score properties") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(3.0, 2.0);
    std::uniform_real_distribution<double> u(0.1, 50.0);
    for (int trial = 0; trial < 20; ++trial) {
        CycleTriple c;
        for (int k = 0; k < 64; ++k) {
            c.i_cyc.push_back(nd(rng));
            c.v_cyc.push_back(nd(rng) * 100.0);
            c.pf_cyc.push_back(nd(rng) * 0.1);
        }
        const auto n = normalize_cycle(c);
        CHECK(!n.degenerate());
        for (const auto* s : {&n.i_norm, &n.v_norm, &n.pf_norm}) {
            CHECK(std::abs(mean(*s)) < 1e-9);
            CHECK(std::abs(pop_std(*s) - 1.0) < 1e-9);
        }

        const double a = u(rng), b = nd(rng);
        CycleTriple t = c;
        for (auto* s : {&t.i_cyc, &t.v_cyc, &t.pf_cyc})
            for (auto& v : *s) v = a * v + b;
        const auto nt = normalize_cycle(t);
        for (std::size_t k = 0; k < 64; ++k) {
            CHECK(std::abs(nt.i_norm[k] - n.i_norm[k]) < 1e-9);
            CHECK(std::abs(nt.v_norm[k] - n.v_norm[k]) < 1e-9);
            CHECK(std::abs(nt.pf_norm[k] - n.pf_norm[k]) < 1e-9);
        }
    }

    CycleTriple flat;
    flat.i_cyc = {1, 2, 3, 4};
    flat.v_cyc = {4, 3, 2, 1};
    flat.pf_cyc = {1, 1, 1, 1};
    const auto nf = normalize_cycle(flat);
    CHECK(nf.degenerate_pf);
    CHECK(!nf.degenerate_i);
    CHECK(nf.stats.sigma_pf == 1.0);
    for (double v : nf.pf_norm) CHECK(v == 0.0);

    CycleTriple tiny;
    tiny.i_cyc = tiny.v_cyc = tiny.pf_cyc = {1.0};
    CHECK_THROWS_AS(normalize_cycle(tiny), std::invalid_argument);
}

TEST_CASE("process_recording: cycles, labels and power bookkeeping") {
    using namespace nilm::synth;
    Scenario sc;
    sc.profiles = standard_appliances();
    sc.fs = 10000.0;
    sc.duration = 0.5;
    sc.noise_std = 0.01;
    sc.seed = 5;
    sc.schedule = {{0, 0.0, 0.5}, {4, 0.2, 0.5}};
    const RawRecording r = synth_recording(sc);
    PreprocessConfig cfg;
    const auto cycles = process_recording(r, cfg);
    CHECK(std::abs(static_cast<double>(cycles.size()) - 25.0) <= 1.0);
    for (const auto& c : cycles) {
        CHECK(c.norm.size() == 64);
        CHECK(c.labels.size() == 6);
        CHECK(c.labels[0] == 1);
        CHECK(c.labels[1] == 0);
        const double t_mid = static_cast<double>(c.start + c.end) / 2.0 / sc.fs;
        if (t_mid > 0.22) CHECK(c.labels[4] == 1);
        if (t_mid < 0.18) CHECK(c.labels[4] == 0);
        double truth = 0.0;
        for (double p : c.p_appliance) truth += p;
        CHECK(std::abs(c.p_total - truth) <= 0.03 * truth + 5.0);
    }
    CHECK(cycles.back().p_total > cycles.front().p_total + 300.0);
}
