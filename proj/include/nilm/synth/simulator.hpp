#pragma once

#include <cstdint>
#include <vector>

#include "nilm/synth/appliance.hpp"
#include "nilm/synth/recording.hpp"

namespace nilm::synth {

inline constexpr double kGridHz = 50.0;
inline constexpr double kGridVrms = 230.0;

struct ScheduleEntry {
    std::size_t appliance = 0;
    double on_time = 0.0;   // seconds
    double off_time = 0.0;  // seconds
};

struct Scenario {
    std::vector<ApplianceProfile> profiles;
    std::vector<ScheduleEntry> schedule;
    double duration = 1.0;   // seconds
    double noise_std = 0.0;  // relative to nominal full-load current and to the voltage RMS
    std::uint64_t seed = 0;
    double fs = 50000.0;

    void validate() const;
};

// Bus recording for a scenario. Voltage is a 230 V RMS, 50 Hz sine; current is
// the superposition of every scheduled appliance's harmonic current.
RawRecording synth_recording(const Scenario& scenario);

}  // namespace nilm::synth
