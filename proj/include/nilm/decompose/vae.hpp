#pragma once

#include <cstdint>
#include <vector>

#include "nilm/nn/graph.hpp"
#include "nilm/nn/param_store.hpp"

namespace nilm::decompose {

using nn::Graph;
using nn::ParamStore;
using nn::Tensor;
using nn::Var;

// M consecutive per-cycle active powers and the appliance on/off context.
struct PowerWindow {
    std::vector<double> p_total;        // watts, >= 0
    std::vector<std::uint8_t> on_off;   // K entries
    void validate(std::size_t window, std::size_t appliances) const;
};

// A window in which exactly one appliance runs; its total is that appliance's power.
struct SoloWindow {
    PowerWindow window;
    std::size_t appliance = 0;
};

struct VaeConfig {
    std::size_t window = 50;  // M cycles
    std::size_t latent = 8;
    std::size_t hidden = 64;
    std::size_t appliances = 6;
    double kl_weight = 0.01;
    double lr = 1e-2;
    std::size_t epochs = 300;
    std::size_t batch_size = 16;
    std::uint64_t seed = 1;

    void validate() const;
};

// Shared encoder, one decoder per appliance. Power enters and leaves scaled by
// the `vae.power_scale` entry, which is fixed at training time.
struct Vae {
    VaeConfig cfg;
    ParamStore params;
    double power_scale() const { return params.at("vae.power_scale")[0]; }
};

// -1/2 Σ (1 + logvar - μ² - exp(logvar)) for q = N(μ, exp(logvar)) against N(0, I).
Var kl_divergence(const Var& mu, const Var& logvar);

Vae init_vae(const VaeConfig& cfg, double power_scale);

// Minimises masked reconstruction of the total, solo supervision of each
// decoder and the weighted KL term, with reparameterised sampling.
Vae vae_train(const std::vector<SoloWindow>& solo, const std::vector<PowerWindow>& mixes, const VaeConfig& cfg);

// P_i = m_i * decoder_i(μ_z(P_total)), one series of length M per appliance.
std::vector<std::vector<double>> decompose(const Vae& vae, const PowerWindow& w);

// Σ P[m] * cycle_duration, in joules.
double energy(const std::vector<double>& power, double cycle_duration);
inline double joules_to_wh(double joules) { return joules / 3600.0; }

// Splits a per-cycle power series into consecutive windows of length M with
// the given on/off context per cycle (majority state over the window). A
// trailing remainder shorter than M is dropped. Negative noise-level totals are
// clipped to zero.
std::vector<PowerWindow> make_windows(const std::vector<double>& p_total, const std::vector<std::vector<std::uint8_t>>& on_off, std::size_t m);

}  // namespace nilm::decompose
