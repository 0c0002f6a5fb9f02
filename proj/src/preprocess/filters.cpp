#include "nilm/preprocess/filters.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nilm::preprocess {

void FilterSpec::validate(double fs) const {
    if (!(fs > 0.0)) throw std::invalid_argument("lowpass: fs must be positive");
    if (!(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0))
        throw std::invalid_argument("lowpass: cutoff " + std::to_string(cutoff_hz) + " Hz must lie in (0, fs/2 = " + std::to_string(fs / 2.0) + ")");
    if (taps == 0 || taps % 2 == 0) throw std::invalid_argument("lowpass: tap count must be odd");
}

std::vector<double> lowpass_kernel(double fs, const FilterSpec& spec) {
    spec.validate(fs);
    using std::numbers::pi;
    const std::size_t n = spec.taps;
    const double mid = static_cast<double>(n - 1) / 2.0;
    const double fc = spec.cutoff_hz / fs;
    std::vector<double> h(n);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double m = static_cast<double>(k) - mid;
        const double sinc = m == 0.0 ? 2.0 * fc : std::sin(2.0 * pi * fc * m) / (pi * m);
        const double win = n > 1 ? 0.54 - 0.46 * std::cos(2.0 * pi * static_cast<double>(k) / static_cast<double>(n - 1)) : 1.0;
        h[k] = sinc * win;
        total += h[k];
    }
    for (auto& v : h) v /= total;
    return h;
}

std::vector<double> lowpass(std::span<const double> x, double fs, const FilterSpec& spec) {
    const auto h = lowpass_kernel(fs, spec);
    const std::size_t len = x.size();
    if (len < spec.taps)
        throw std::invalid_argument("lowpass: series of " + std::to_string(len) + " samples is shorter than " + std::to_string(spec.taps) + " taps");
    const std::size_t half = spec.taps / 2;

    // Point-reflected extension: x[-j] = 2 x[0] - x[j], x[L-1+j] = 2 x[L-1] - x[L-1-j].
    std::vector<double> ext(len + 2 * half);
    for (std::size_t j = 0; j < half; ++j) {
        ext[half - 1 - j] = 2.0 * x[0] - x[j + 1];
        ext[half + len + j] = 2.0 * x[len - 1] - x[len - 2 - j];
    }
    for (std::size_t i = 0; i < len; ++i) ext[half + i] = x[i];

    std::vector<double> y(len, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
        const double* src = ext.data() + t;
        double s = 0.0;
        for (std::size_t k = 0; k < h.size(); ++k) s += h[k] * src[k];
        y[t] = s;
    }
    return y;
}

std::vector<double> moving_mean(std::span<const double> x, std::size_t n_win) {
    if (n_win == 0) throw std::invalid_argument("moving_mean: window must be >= 1");
    if (x.empty()) throw std::invalid_argument("moving_mean: empty series");
    std::vector<double> y(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        const std::size_t first = t + 1 >= n_win ? t + 1 - n_win : 0;
        double s = 0.0;
        for (std::size_t j = first; j <= t; ++j) s += x[j];
        y[t] = s / static_cast<double>(t - first + 1);
    }
    return y;
}

}  // namespace nilm::preprocess
