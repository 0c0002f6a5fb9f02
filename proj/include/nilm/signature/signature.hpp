#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "nilm/nn/graph.hpp"
#include "nilm/nn/param_store.hpp"
#include "nilm/preprocess/cycles.hpp"

namespace nilm::signature {

using nn::Graph;
using nn::ParamStore;
using nn::Tensor;
using nn::Var;

struct SignatureConfig {
    std::size_t n_cyc = 64;
    std::size_t d_i = 8, d_v = 8, d_pf = 4, d_fus = 8;
    std::size_t tcn_layers = 3;  // dilation doubles per layer: 1, 2, 4, ...
    std::size_t pf_layers = 2;
    std::size_t kernel = 3;
    std::size_t lrg_hidden = 0;  // 0: single affine map per pair
    std::size_t gg_rows = 0, gg_cols = 0;  // 0: most square factorisation of d_fus * n_cyc
    std::size_t image_side = 64;
    bool gg_only = false;

    void validate() const;
    std::pair<std::size_t, std::size_t> gg_shape() const;
    std::size_t image_channels() const { return gg_only ? 1 : 3; }
};

// Fresh extractor, fusion and signature parameters. Every entry is seeded from
// (seed, name), so the same name always receives the same initial values.
void init_signature_params(ParamStore& params, const SignatureConfig& cfg, std::uint64_t seed);

struct Features {
    Var current, voltage, pf;  // [d × n_cyc] each
};

// Inputs are [1 × n_cyc] rows.
Features extract(Graph& g, const ParamStore& params, const SignatureConfig& cfg, const Var& i_norm, const Var& v_norm, const Var& pf_norm);
// relu(W_f [F_I; F_V; F_PF] + b_f), [d_fus × n_cyc].
Var fuse(Graph& g, const ParamStore& params, const SignatureConfig& cfg, const Features& f);
// R[i][j] = relu(W_r [f_i; f_j] + b_r) over all ordered column pairs, [n_cyc × n_cyc].
Var lrg(Graph& g, const ParamStore& params, const SignatureConfig& cfg, const Var& fused);
// relu(F Fᵀ), [d_fus × d_fus].
Var lgm(const Var& fused);
// Column-major flattening of F, affine map, row-major reshape to gg_shape().
Var gg(Graph& g, const ParamStore& params, const SignatureConfig& cfg, const Var& fused);
// Resizes each map to side × side, min-max scales each independently and
// stacks them as channels (LRG, LGM, GG): [3 × side × side].
Var assemble(const Var& r, const Var& g_prime, const Var& gg_map, std::size_t side);

// Normalised cycle rows as graph constants [1 × n_cyc].
struct CycleInputs {
    Var i, v, pf;
};
CycleInputs cycle_inputs(Graph& g, const preprocess::NormalizedCycle& c);

// Fused features of one cycle.
Var fused_features(Graph& g, const ParamStore& params, const SignatureConfig& cfg, const preprocess::NormalizedCycle& c);
// Full image for one cycle: [image_channels() × side × side].
Var signature_image(Graph& g, const ParamStore& params, const SignatureConfig& cfg, const preprocess::NormalizedCycle& c);
// Forward-only convenience.
Tensor compute_signature(const ParamStore& params, const SignatureConfig& cfg, const preprocess::NormalizedCycle& c);

// Channel `channel` of a [C × S × S] image (or the whole of an S × S matrix) as
// 8-bit binary PGM. Values must lie in [0, 1].
void render_pgm(const Tensor& image, std::size_t channel, const std::filesystem::path& path);
// Pixels scaled back to [0, 1] as an [H × W] matrix.
Tensor read_pgm(const std::filesystem::path& path);

}  // namespace nilm::signature
