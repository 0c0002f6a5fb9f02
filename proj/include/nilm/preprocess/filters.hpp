#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nilm::preprocess {

enum class WindowKind { hamming };

struct FilterSpec {
    double cutoff_hz = 1000.0;
    std::size_t taps = 201;
    WindowKind window = WindowKind::hamming;

    // 0 < cutoff < fs/2 and an odd tap count.
    void validate(double fs) const;
};

// Windowed-sinc low-pass kernel normalised to unit DC gain.
std::vector<double> lowpass_kernel(double fs, const FilterSpec& spec);

// Zero-phase application of the linear-phase kernel (group delay removed).
// Edges are extended by point reflection, which keeps constants and linear
// trends intact at the boundaries.
std::vector<double> lowpass(std::span<const double> x, double fs, const FilterSpec& spec);

// Trailing mean over n_win samples; the first n_win-1 outputs average the
// available prefix.
std::vector<double> moving_mean(std::span<const double> x, std::size_t n_win);

}  // namespace nilm::preprocess
