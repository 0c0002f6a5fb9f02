#include "nilm/preprocess/cycles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nilm::preprocess {

std::vector<std::size_t> detect_cycles(std::span<const double> v, double fs, double grid_hz) {
    if (!(fs > 0.0) || !(grid_hz > 0.0)) throw std::invalid_argument("detect_cycles: fs and grid frequency must be positive");
    if (v.size() < 2) throw std::invalid_argument("detect_cycles: need at least two samples");
    const double period = fs / grid_hz;
    const auto min_gap = static_cast<std::size_t>(std::floor(0.9 * period));

    std::vector<std::size_t> out;
    auto accept = [&](std::size_t n) {
        if (out.empty() || n - out.back() >= min_gap) out.push_back(n);
    };
    if (v[0] >= 0.0 && 2.0 * v[0] - v[1] < 0.0) accept(0);
    for (std::size_t n = 1; n < v.size(); ++n)
        if (v[n - 1] < 0.0 && v[n] >= 0.0) accept(n);
    if (out.empty()) throw std::runtime_error("detect_cycles: no negative-to-positive voltage crossing found");
    return out;
}

std::vector<double> resample_linear(std::span<const double> x, std::size_t n) {
    if (x.empty() || n == 0) throw std::invalid_argument("resample_linear: empty input or output");
    std::vector<double> y(n);
    if (n == 1 || x.size() == 1) {
        std::fill(y.begin(), y.end(), x[0]);
        if (n > 1) y.back() = x.back();
        return y;
    }
    const double step = static_cast<double>(x.size() - 1) / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
        const double pos = static_cast<double>(j) * step;
        std::size_t lo = static_cast<std::size_t>(pos);
        if (lo >= x.size() - 1) {
            y[j] = x.back();
            continue;
        }
        const double f = pos - static_cast<double>(lo);
        y[j] = (1.0 - f) * x[lo] + f * x[lo + 1];
    }
    y.back() = x.back();
    return y;
}

CycleTriple build_cycle(const synth::RawRecording& rec, std::size_t boundary, std::size_t next_boundary, std::size_t pf_window,
                        std::size_t n_cyc) {
    if (boundary >= next_boundary || next_boundary > rec.size())
        throw std::invalid_argument("build_cycle: boundaries [" + std::to_string(boundary) + ", " + std::to_string(next_boundary) +
                                    ") outside recording of " + std::to_string(rec.size()) + " samples");
    if (pf_window == 0) throw std::invalid_argument("build_cycle: pf_window must be >= 1");
    if (n_cyc < 2) throw std::invalid_argument("build_cycle: n_cyc must be >= 2");

    // Prefix sums of v*i, v^2, i^2 from the earliest sample any window reaches.
    const std::size_t origin = boundary + 1 >= pf_window ? boundary + 1 - pf_window : 0;
    const std::size_t span = next_boundary - origin;
    std::vector<double> svi(span + 1, 0.0), svv(span + 1, 0.0), sii(span + 1, 0.0);
    for (std::size_t k = 0; k < span; ++k) {
        const double v = rec.voltage[origin + k], i = rec.current[origin + k];
        svi[k + 1] = svi[k] + v * i;
        svv[k + 1] = svv[k] + v * v;
        sii[k + 1] = sii[k] + i * i;
    }

    const std::size_t len = next_boundary - boundary;
    std::vector<double> pf(len);
    for (std::size_t k = 0; k < len; ++k) {
        const std::size_t t = boundary + k;
        const std::size_t first = t + 1 >= pf_window ? t + 1 - pf_window : 0;
        const std::size_t a = first - origin, b = t + 1 - origin;
        const double n = static_cast<double>(b - a);
        const double p = (svi[b] - svi[a]) / n;
        const double vrms = std::sqrt(std::max(0.0, (svv[b] - svv[a]) / n));
        const double irms = std::sqrt(std::max(0.0, (sii[b] - sii[a]) / n));
        pf[k] = (irms < 1e-6 || vrms <= 0.0) ? 0.0 : std::clamp(p / (vrms * irms), -1.0, 1.0);
    }

    const std::span<const double> i_src(rec.current.data() + boundary, len);
    const std::span<const double> v_src(rec.voltage.data() + boundary, len);
    return {resample_linear(i_src, n_cyc), resample_linear(v_src, n_cyc), resample_linear(pf, n_cyc), boundary, rec.fs};
}

namespace {

std::vector<double> zscore(const std::vector<double>& x, double& mu, double& sigma, bool& degenerate) {
    const double n = static_cast<double>(x.size());
    mu = 0.0;
    for (double v : x) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    sigma = std::sqrt(var / n);
    degenerate = sigma < 1e-9;
    std::vector<double> out(x.size(), 0.0);
    if (degenerate) {
        sigma = 1.0;
        return out;
    }
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = (x[k] - mu) / sigma;
    return out;
}

}  // namespace

NormalizedCycle normalize_cycle(const CycleTriple& c) {
    if (c.i_cyc.size() < 2) throw std::invalid_argument("normalize_cycle: need at least 2 samples");
    if (c.v_cyc.size() != c.i_cyc.size() || c.pf_cyc.size() != c.i_cyc.size())
        throw std::invalid_argument("normalize_cycle: I, V and PF sequences differ in length");
    NormalizedCycle out;
    out.i_norm = zscore(c.i_cyc, out.stats.mu_i, out.stats.sigma_i, out.degenerate_i);
    out.v_norm = zscore(c.v_cyc, out.stats.mu_v, out.stats.sigma_v, out.degenerate_v);
    out.pf_norm = zscore(c.pf_cyc, out.stats.mu_pf, out.stats.sigma_pf, out.degenerate_pf);
    return out;
}

}  // namespace nilm::preprocess
