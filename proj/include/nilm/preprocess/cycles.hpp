#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nilm/synth/recording.hpp"

namespace nilm::preprocess {

// Rising zero crossings (v[n-1] < 0 <= v[n]) of the voltage. Sample 0 counts
// when the backward linear extrapolation 2 v[0] - v[1] is negative. Crossings
// closer than 90% of a nominal period to the previous boundary are treated as
// noise chatter and skipped. Throws if no crossing exists.
std::vector<std::size_t> detect_cycles(std::span<const double> v, double fs, double grid_hz = 50.0);

struct CycleTriple {
    std::vector<double> i_cyc;
    std::vector<double> v_cyc;
    std::vector<double> pf_cyc;
    std::size_t t0 = 0;  // first sample of the cycle in the source recording
    double fs = 0.0;
};

// Slices [boundary, next_boundary), builds the windowed power-factor sequence
//   pf[t] = mean(v i) / (rms(v) rms(i))   over the trailing pf_window samples,
// clamped to [-1, 1] (0 where rms(i) < 1e-6 A), and resamples all three
// sequences linearly to n_cyc points.
CycleTriple build_cycle(const synth::RawRecording& rec, std::size_t boundary, std::size_t next_boundary,
                        std::size_t pf_window, std::size_t n_cyc = 64);

struct CycleStats {
    double mu_i = 0, sigma_i = 1, mu_v = 0, sigma_v = 1, mu_pf = 0, sigma_pf = 1;
};

struct NormalizedCycle {
    std::vector<double> i_norm;
    std::vector<double> v_norm;
    std::vector<double> pf_norm;
    CycleStats stats;
    // Set per channel when the sequence was constant and sigma was replaced by 1.
    bool degenerate_i = false, degenerate_v = false, degenerate_pf = false;

    std::size_t size() const { return i_norm.size(); }
    bool degenerate() const { return degenerate_i || degenerate_v || degenerate_pf; }
};

// Per-sequence z-score with the cycle's own mean and population std.
NormalizedCycle normalize_cycle(const CycleTriple& c);

// Linear resampling onto n points spanning the first and last source samples.
std::vector<double> resample_linear(std::span<const double> x, std::size_t n);

}  // namespace nilm::preprocess
