#include "nilm/synth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "nilm/nn/param_store.hpp"

namespace nilm::synth {

namespace {

// Fisher-Yates with a plain modulo draw: portable across standard libraries.
void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

}  // namespace

SplitIndices split_indices(std::size_t n, double ratio, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("split_dataset: need at least 2 samples, got " + std::to_string(n));
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split_dataset: ratio must lie in (0, 1)");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    shuffle(perm, rng);
    const auto n_train = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n))), 1, n - 1);
    SplitIndices out;
    out.train.assign(perm.begin(), perm.begin() + static_cast<long>(n_train));
    out.test.assign(perm.begin() + static_cast<long>(n_train), perm.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::vector<Window> generate_windows(const WindowSpec& spec) {
    const std::size_t k = spec.profiles.size();
    if (k == 0) throw std::invalid_argument("generate_windows: no appliance profiles");
    if (spec.min_active < 1 || spec.min_active > spec.max_active)
        throw std::invalid_argument("generate_windows: need 1 <= min_active <= max_active");
    for (auto r : spec.required)
        if (r >= k) throw std::invalid_argument("generate_windows: required appliance index out of range");
    const double samples_per_cycle = spec.fs / kGridHz;
    if (std::abs(samples_per_cycle - std::round(samples_per_cycle)) > 1e-9)
        throw std::invalid_argument("generate_windows: fs must be a multiple of the grid frequency");

    std::vector<Window> out;
    out.reserve(spec.windows);
    for (std::size_t w = 0; w < spec.windows; ++w) {
        std::mt19937_64 rng(nn::derive_seed(spec.seed, "window/" + std::to_string(w)));
        const std::size_t hi = std::min(spec.max_active, k);
        const std::size_t lo = std::max(std::min(spec.min_active, hi), spec.required.size());
        const std::size_t count = lo + (hi > lo ? rng() % (hi - lo + 1) : 0);

        std::vector<std::size_t> active = spec.required;
        std::vector<std::size_t> pool;
        for (std::size_t a = 0; a < k; ++a)
            if (std::find(active.begin(), active.end(), a) == active.end()) pool.push_back(a);
        shuffle(pool, rng);
        for (std::size_t i = 0; active.size() < count && i < pool.size(); ++i) active.push_back(pool[i]);
        std::sort(active.begin(), active.end());

        Scenario sc;
        sc.profiles = spec.profiles;
        for (auto& p : sc.profiles) {
            p.base_power *= uniform(rng, 1.0 - spec.power_jitter, 1.0 + spec.power_jitter);
            p.phase_shift += uniform(rng, -spec.phase_jitter, spec.phase_jitter);
        }
        const double cycles = static_cast<double>(spec.lead_cycles + spec.cycles_per_window) + 0.5;
        sc.duration = cycles / kGridHz;
        for (auto a : active) sc.schedule.push_back({a, 0.0, sc.duration});
        sc.noise_std = spec.noise_std;
        sc.seed = rng();
        sc.fs = spec.fs;

        RawRecording full = synth_recording(sc);
        const auto lead = static_cast<std::size_t>(std::llround(static_cast<double>(spec.lead_cycles) * samples_per_cycle));
        out.push_back({crop(full, lead, full.size()), std::move(active)});
    }
    return out;
}

}  // namespace nilm::synth
