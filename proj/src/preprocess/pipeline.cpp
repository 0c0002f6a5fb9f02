#include "nilm/preprocess/pipeline.hpp"

#include <stdexcept>
#include <string>

namespace nilm::preprocess {

std::size_t PreprocessConfig::pf_window_for(double fs) const {
    if (pf_window > 0) return pf_window;
    const auto w = static_cast<std::size_t>(fs / grid_hz / 4.0);
    return w > 0 ? w : 1;
}

void PreprocessConfig::validate(double fs) const {
    filter.validate(fs);
    if (n_win == 0) throw std::invalid_argument("preprocess: n_win must be >= 1");
    if (n_cyc < 2) throw std::invalid_argument("preprocess: n_cyc must be >= 2");
    if (!(grid_hz > 0.0)) throw std::invalid_argument("preprocess: grid frequency must be positive");
}

std::vector<ProcessedCycle> process_recording(const synth::RawRecording& rec, const PreprocessConfig& cfg) {
    rec.validate();
    cfg.validate(rec.fs);

    synth::RawRecording clean;
    clean.fs = rec.fs;
    clean.current = moving_mean(lowpass(rec.current, rec.fs, cfg.filter), cfg.n_win);
    clean.voltage = moving_mean(lowpass(rec.voltage, rec.fs, cfg.filter), cfg.n_win);

    const auto bounds = detect_cycles(clean.voltage, rec.fs, cfg.grid_hz);
    if (bounds.size() < 2)
        throw std::runtime_error("preprocess: recording of " + std::to_string(rec.size()) + " samples holds no complete cycle");
    const std::size_t pf_window = cfg.pf_window_for(rec.fs);

    std::vector<ProcessedCycle> out;
    out.reserve(bounds.size() - 1);
    for (std::size_t c = 0; c + 1 < bounds.size(); ++c) {
        const std::size_t b = bounds[c], e = bounds[c + 1];
        ProcessedCycle pc;
        pc.start = b;
        pc.end = e;
        pc.raw = build_cycle(clean, b, e, pf_window, cfg.n_cyc);
        pc.norm = normalize_cycle(pc.raw);

        const double n = static_cast<double>(e - b);
        for (std::size_t t = b; t < e; ++t) pc.p_total += rec.voltage[t] * rec.current[t];
        pc.p_total /= n;

        const std::size_t mid = b + (e - b) / 2;
        for (const auto& lab : rec.labels) pc.labels.push_back(lab[mid]);
        for (const auto& pw : rec.appliance_power) {
            double s = 0.0;
            for (std::size_t t = b; t < e; ++t) s += pw[t];
            pc.p_appliance.push_back(s / n);
        }
        out.push_back(std::move(pc));
    }
    return out;
}

}  // namespace nilm::preprocess
