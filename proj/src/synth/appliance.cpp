#include "nilm/synth/appliance.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace nilm::synth {

std::string to_string(Family f) {
    switch (f) {
        case Family::resistive: return "resistive";
        case Family::inductive: return "inductive";
        case Family::rectifier_nonlinear: return "rectifier_nonlinear";
        case Family::phase_controlled: return "phase_controlled";
    }
    return "unknown";
}

Family family_from_string(const std::string& s) {
    if (s == "resistive") return Family::resistive;
    if (s == "inductive") return Family::inductive;
    if (s == "rectifier_nonlinear") return Family::rectifier_nonlinear;
    if (s == "phase_controlled") return Family::phase_controlled;
    throw std::invalid_argument("unknown appliance family '" + s + "'");
}

void ApplianceProfile::validate() const {
    if (!(base_power > 0.0)) throw std::invalid_argument("appliance '" + id + "': base_power must be > 0");
    if (on_transient_ms < 0.0) throw std::invalid_argument("appliance '" + id + "': on_transient_ms must be >= 0");
    std::set<int> orders;
    const Harmonic* fundamental = nullptr;
    for (const auto& h : current_harmonics) {
        if (h.order < 1) throw std::invalid_argument("appliance '" + id + "': harmonic order must be >= 1");
        if (h.relative_amplitude < 0.0) throw std::invalid_argument("appliance '" + id + "': negative harmonic amplitude");
        if (!orders.insert(h.order).second) throw std::invalid_argument("appliance '" + id + "': duplicate harmonic order");
        if (h.order == 1) fundamental = &h;
    }
    if (!fundamental || fundamental->relative_amplitude <= 0.0)
        throw std::invalid_argument("appliance '" + id + "': needs a fundamental component to carry active power");
    if (std::cos(phase_shift - fundamental->phase) <= 1e-3)
        throw std::invalid_argument("appliance '" + id + "': fundamental displacement leaves no active power");
}

int ApplianceProfile::highest_order() const {
    int m = 1;
    for (const auto& h : current_harmonics) m = std::max(m, h.order);
    return m;
}

ApplianceProfile make_resistive(std::string id, double power, double transient_ms) {
    return {std::move(id), Family::resistive, power, {{1, 1.0, 0.0}}, 0.0, transient_ms};
}

ApplianceProfile make_inductive(std::string id, double power, double lag, std::vector<Harmonic> extra, double transient_ms) {
    std::vector<Harmonic> hs{{1, 1.0, 0.0}};
    hs.insert(hs.end(), extra.begin(), extra.end());
    return {std::move(id), Family::inductive, power, std::move(hs), lag, transient_ms};
}

ApplianceProfile make_rectifier(std::string id, double power, std::vector<Harmonic> harmonics, double shift, double transient_ms) {
    return {std::move(id), Family::rectifier_nonlinear, power, std::move(harmonics), shift, transient_ms};
}

ApplianceProfile make_phase_controlled(std::string id, double power, double firing_angle, int max_order, double transient_ms) {
    using std::numbers::pi;
    if (!(firing_angle >= 0.0 && firing_angle < pi)) throw std::invalid_argument("firing angle must lie in [0, pi)");
    // Fourier coefficients of i(theta) = sin(theta) where (theta mod pi) >= firing_angle, else 0.
    constexpr int kSteps = 1 << 14;
    const double dtheta = 2.0 * pi / kSteps;
    std::vector<Harmonic> hs;
    double fundamental = 0.0;
    for (int h = 1; h <= max_order; h += 2) {
        double a = 0.0, b = 0.0;
        for (int s = 0; s < kSteps; ++s) {
            const double theta = (s + 0.5) * dtheta;
            if (std::fmod(theta, pi) < firing_angle) continue;
            const double i = std::sin(theta);
            a += i * std::sin(h * theta);
            b += i * std::cos(h * theta);
        }
        a *= dtheta / pi;
        b *= dtheta / pi;
        const double r = std::hypot(a, b);
        if (h == 1) fundamental = r;
        if (r / fundamental < 1e-3) continue;
        hs.push_back({h, r / fundamental, std::atan2(b, a)});
    }
    return {std::move(id), Family::phase_controlled, power, std::move(hs), 0.0, transient_ms};
}

std::vector<ApplianceProfile> standard_appliances() {
    using std::numbers::pi;
    return {
        make_resistive("kettle", 1000.0, 5.0),
        make_inductive("motor", 600.0, 0.65, {{3, 0.06, 0.4}}, 15.0),
        make_rectifier("smps", 350.0, {{1, 1.0, 0.0}, {3, 0.80, pi}, {5, 0.55, 0.0}, {7, 0.32, pi}, {9, 0.15, 0.0}}, 0.0, 3.0),
        make_phase_controlled("dimmer", 500.0, pi / 3.0, 15, 2.0),
        make_inductive("fan", 400.0, 1.05, {{5, 0.12, 1.0}}, 10.0),
        make_rectifier("led_driver", 300.0, {{1, 1.0, 0.0}, {3, 0.45, 0.6}, {5, 0.25, -0.8}, {7, 0.12, 0.3}}, -0.35, 2.0),
    };
}

}  // namespace nilm::synth
