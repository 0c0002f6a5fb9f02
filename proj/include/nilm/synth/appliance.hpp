#pragma once

#include <string>
#include <vector>

namespace nilm::synth {

enum class Family { resistive, inductive, rectifier_nonlinear, phase_controlled };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

struct Harmonic {
    int order = 1;
    double relative_amplitude = 1.0;
    double phase = 0.0;  // radians, added after the shift: sin(h(wt - shift) + phase)
};

struct ApplianceProfile {
    std::string id;
    Family family = Family::resistive;
    double base_power = 100.0;  // watts, mean active power in steady state
    std::vector<Harmonic> current_harmonics{{1, 1.0, 0.0}};
    double phase_shift = 0.0;  // radians of the fundamental; positive lags the voltage
    double on_transient_ms = 0.0;

    // Throws std::invalid_argument naming the violated invariant.
    void validate() const;
    int highest_order() const;
};

ApplianceProfile make_resistive(std::string id, double power, double transient_ms = 0.0);
ApplianceProfile make_inductive(std::string id, double power, double lag, std::vector<Harmonic> extra = {},
                                double transient_ms = 0.0);
ApplianceProfile make_rectifier(std::string id, double power, std::vector<Harmonic> harmonics, double shift = 0.0,
                                double transient_ms = 0.0);
// Leading-edge phase-cut sine; `firing_angle` in radians within each half cycle.
// The chopped waveform is expanded into its odd harmonics up to `max_order`.
ApplianceProfile make_phase_controlled(std::string id, double power, double firing_angle, int max_order = 15,
                                       double transient_ms = 0.0);

// Six archetypes with pairwise distinct current shapes, used by the standard benchmark.
std::vector<ApplianceProfile> standard_appliances();

}  // namespace nilm::synth
