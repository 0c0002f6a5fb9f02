#pragma once

#include <cstdint>
#include <vector>

#include "nilm/preprocess/cycles.hpp"
#include "nilm/preprocess/filters.hpp"
#include "nilm/synth/recording.hpp"

namespace nilm::preprocess {

struct PreprocessConfig {
    FilterSpec filter;
    std::size_t n_win = 5;
    std::size_t n_cyc = 64;
    std::size_t pf_window = 0;  // samples; 0 means a quarter of the nominal period
    double grid_hz = 50.0;

    std::size_t pf_window_for(double fs) const;
    void validate(double fs) const;
};

struct ProcessedCycle {
    NormalizedCycle norm;
    CycleTriple raw;
    std::vector<std::uint8_t> labels;  // state at the cycle midpoint, empty when unlabelled
    double p_total = 0.0;              // mean v*i of the unfiltered cycle, watts
    std::vector<double> p_appliance;   // per-appliance mean power, empty without ground truth
    std::size_t start = 0, end = 0;    // [start, end) in the source recording
    double duration() const { return static_cast<double>(end - start) / raw.fs; }
};

// Filter both channels, cut at rising voltage crossings and normalise every
// complete cycle. The trailing partial cycle is dropped.
std::vector<ProcessedCycle> process_recording(const synth::RawRecording& rec, const PreprocessConfig& cfg);

}  // namespace nilm::preprocess
