#include "nilm/synth/simulator.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace nilm::synth {

void Scenario::validate() const {
    if (profiles.empty()) throw std::invalid_argument("scenario: at least one appliance profile is required");
    if (!(duration > 0.0)) throw std::invalid_argument("scenario: duration must be positive");
    if (noise_std < 0.0) throw std::invalid_argument("scenario: noise_std must be >= 0");
    if (!(fs > 0.0)) throw std::invalid_argument("scenario: fs must be positive");
    int highest = 1;
    for (const auto& p : profiles) {
        p.validate();
        highest = std::max(highest, p.highest_order());
    }
    if (!(fs > 2.0 * highest * kGridHz))
        throw std::invalid_argument("scenario: fs = " + std::to_string(fs) + " Hz is too low for harmonic order " +
                                    std::to_string(highest) + " (needs > " + std::to_string(2.0 * highest * kGridHz) + " Hz)");
    for (const auto& e : schedule) {
        if (e.appliance >= profiles.size()) throw std::invalid_argument("scenario: schedule references unknown appliance");
        if (!(e.on_time >= 0.0 && e.on_time < e.off_time && e.off_time <= duration))
            throw std::invalid_argument("scenario: schedule entries need 0 <= on < off <= duration");
    }
}

RawRecording synth_recording(const Scenario& sc) {
    sc.validate();
    using std::numbers::pi;
    const std::size_t n = static_cast<std::size_t>(std::llround(sc.duration * sc.fs));
    const std::size_t k = sc.profiles.size();
    const double w = 2.0 * pi * kGridHz;

    RawRecording rec;
    rec.fs = sc.fs;
    rec.current.assign(n, 0.0);
    rec.voltage.resize(n);
    rec.labels.assign(k, std::vector<std::uint8_t>(n, 0));
    rec.appliance_power.assign(k, std::vector<double>(n, 0.0));

    for (std::size_t i = 0; i < n; ++i) rec.voltage[i] = std::sqrt(2.0) * kGridVrms * std::sin(w * static_cast<double>(i) / sc.fs);

    std::vector<std::vector<double>> per_appliance(k, std::vector<double>(n, 0.0));
    for (const auto& e : sc.schedule) {
        const auto& p = sc.profiles[e.appliance];
        const Harmonic* h1 = nullptr;
        for (const auto& h : p.current_harmonics)
            if (h.order == 1) h1 = &h;
        // Fundamental amplitude giving mean(v * i) == base_power over whole cycles.
        const double amp = std::sqrt(2.0) * p.base_power / (kGridVrms * h1->relative_amplitude * std::cos(p.phase_shift - h1->phase));
        const double tau = p.on_transient_ms / 3000.0;  // ~95% settled after on_transient_ms
        const std::size_t i0 = static_cast<std::size_t>(std::ceil(e.on_time * sc.fs - 1e-9));
        const std::size_t i1 = std::min(n, static_cast<std::size_t>(std::ceil(e.off_time * sc.fs - 1e-9)));
        for (std::size_t i = i0; i < i1; ++i) {
            const double t = static_cast<double>(i) / sc.fs;
            const double env = tau > 0.0 ? 1.0 - std::exp(-(t - e.on_time) / tau) : 1.0;
            double s = 0.0;
            for (const auto& h : p.current_harmonics)
                s += h.relative_amplitude * std::sin(h.order * (w * t - p.phase_shift) + h.phase);
            per_appliance[e.appliance][i] = env * amp * s;
            rec.labels[e.appliance][i] = 1;
        }
    }

    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t i = 0; i < n; ++i) {
            rec.current[i] += per_appliance[a][i];
            rec.appliance_power[a][i] = rec.voltage[i] * per_appliance[a][i];
        }

    if (sc.noise_std > 0.0) {
        double full_load = 0.0;
        for (const auto& p : sc.profiles) full_load += p.base_power;
        const double i_ref = full_load / kGridVrms;
        std::mt19937_64 rng(sc.seed);
        std::normal_distribution<double> unit(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            rec.current[i] += sc.noise_std * i_ref * unit(rng);
            rec.voltage[i] += sc.noise_std * kGridVrms * unit(rng);
        }
    }
    return rec;
}

}  // namespace nilm::synth
