#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nilm/synth/simulator.hpp"

namespace nilm::synth {

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Seeded random partition of n items; |train| = round(ratio * n) clamped to [1, n-1].
SplitIndices split_indices(std::size_t n, double ratio, std::uint64_t seed);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_dataset(const std::vector<T>& samples, double ratio, std::uint64_t seed) {
    const SplitIndices idx = split_indices(samples.size(), ratio, seed);
    std::pair<std::vector<T>, std::vector<T>> out;
    for (auto i : idx.train) out.first.push_back(samples[i]);
    for (auto i : idx.test) out.second.push_back(samples[i]);
    return out;
}

// Steady-state scenario windows: every active appliance is switched on before
// the window starts, so the window holds whole settled cycles.
struct WindowSpec {
    std::vector<ApplianceProfile> profiles;
    std::size_t windows = 200;
    std::size_t cycles_per_window = 10;
    std::size_t min_active = 1;
    std::size_t max_active = 3;
    std::vector<std::size_t> required;  // appliances active in every window
    double fs = 50000.0;
    double noise_std = 0.01;
    double power_jitter = 0.1;   // relative, uniform per window and appliance
    double phase_jitter = 0.05;  // radians
    std::size_t lead_cycles = 3;
    std::uint64_t seed = 1;
};

struct Window {
    RawRecording recording;
    std::vector<std::size_t> active;
};

std::vector<Window> generate_windows(const WindowSpec& spec);

}  // namespace nilm::synth
