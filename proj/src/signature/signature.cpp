#include "nilm/signature/signature.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "nilm/nn/ops.hpp"

namespace nilm::signature {

namespace {

std::string layer_name(const std::string& stack, std::size_t layer, const char* what) {
    return "extractor." + stack + ".l" + std::to_string(layer) + "." + what;
}

void init_stack(ParamStore& p, const std::string& stack, std::size_t layers, std::size_t width, std::size_t kernel, std::uint64_t seed) {
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = l == 0 ? 1 : width;
        const auto w = layer_name(stack, l, "w"), b = layer_name(stack, l, "b");
        p.set(w, nn::init_he({width, in, kernel}, in * kernel, seed, w));
        p.set(b, Tensor({width}, 0.0));
    }
}

Var run_stack(Graph& g, const ParamStore& p, const std::string& stack, std::size_t layers, bool dilate, const Var& x) {
    Var h = x;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t dilation = dilate ? std::size_t{1} << l : 1;
        h = nn::add_bias(nn::conv1d(h, g.parameter(p, layer_name(stack, l, "w")), dilation, true),
                         g.parameter(p, layer_name(stack, l, "b")));
        if (l + 1 < layers) h = nn::relu(h);
    }
    return h;
}

void expect_rows(const Var& x, std::size_t rows, std::size_t cols, const char* what) {
    const nn::Shape want{rows, cols};
    if (x.shape() != want) throw nn::ShapeError(what, x.shape(), want);
}

}  // namespace

void SignatureConfig::validate() const {
    if (n_cyc < 2) throw std::invalid_argument("signature: n_cyc must be >= 2");
    if (d_i == 0 || d_v == 0 || d_pf == 0 || d_fus == 0) throw std::invalid_argument("signature: channel counts must be positive");
    if (tcn_layers == 0 || pf_layers == 0) throw std::invalid_argument("signature: extractor depth must be >= 1");
    if (kernel == 0) throw std::invalid_argument("signature: kernel must be >= 1");
    if (image_side < 8) throw std::invalid_argument("signature: image side must be >= 8");
    const auto [h, w] = gg_shape();
    if (h * w != d_fus * n_cyc)
        throw std::invalid_argument("signature: GG shape " + std::to_string(h) + "x" + std::to_string(w) + " does not hold d_fus*n_cyc = " +
                                    std::to_string(d_fus * n_cyc) + " values");
}

std::pair<std::size_t, std::size_t> SignatureConfig::gg_shape() const {
    if (gg_rows > 0 || gg_cols > 0) return {gg_rows, gg_cols};
    const std::size_t n = d_fus * n_cyc;
    std::size_t h = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    while (h > 1 && n % h != 0) --h;
    return {h, n / h};
}

void init_signature_params(ParamStore& p, const SignatureConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    init_stack(p, "current", cfg.tcn_layers, cfg.d_i, cfg.kernel, seed);
    init_stack(p, "voltage", cfg.tcn_layers, cfg.d_v, cfg.kernel, seed);
    init_stack(p, "pf", cfg.pf_layers, cfg.d_pf, cfg.kernel, seed);

    const std::size_t cat = cfg.d_i + cfg.d_v + cfg.d_pf;
    p.set("fusion.w", nn::init_he({cfg.d_fus, cat}, cat, seed, "fusion.w"));
    p.set("fusion.b", Tensor({cfg.d_fus}, 0.0));

    const std::size_t pair_in = 2 * cfg.d_fus;
    if (cfg.lrg_hidden > 0) {
        p.set("signature.lrg.hidden.w", nn::init_he({cfg.lrg_hidden, pair_in}, pair_in, seed, "signature.lrg.hidden.w"));
        p.set("signature.lrg.hidden.b", Tensor({cfg.lrg_hidden}, 0.0));
        p.set("signature.lrg.w", nn::init_he({1, cfg.lrg_hidden}, cfg.lrg_hidden, seed, "signature.lrg.w"));
    } else {
        p.set("signature.lrg.w", nn::init_he({1, pair_in}, pair_in, seed, "signature.lrg.w"));
    }
    p.set("signature.lrg.b", Tensor({1}, 0.0));

    const std::size_t flat = cfg.d_fus * cfg.n_cyc;
    p.set("signature.gg.w", nn::init_normal({flat, flat}, 1.0 / std::sqrt(static_cast<double>(flat)), seed, "signature.gg.w"));
    p.set("signature.gg.b", Tensor({flat}, 0.0));
}

Features extract(Graph& g, const ParamStore& p, const SignatureConfig& cfg, const Var& i_norm, const Var& v_norm, const Var& pf_norm) {
    expect_rows(i_norm, 1, cfg.n_cyc, "extract: current input");
    expect_rows(v_norm, 1, cfg.n_cyc, "extract: voltage input");
    expect_rows(pf_norm, 1, cfg.n_cyc, "extract: power-factor input");
    return {run_stack(g, p, "current", cfg.tcn_layers, true, i_norm), run_stack(g, p, "voltage", cfg.tcn_layers, true, v_norm),
            run_stack(g, p, "pf", cfg.pf_layers, false, pf_norm)};
}

Var fuse(Graph& g, const ParamStore& p, const SignatureConfig& cfg, const Features& f) {
    const std::size_t n = f.current.shape().at(1);
    if (f.voltage.shape().at(1) != n || f.pf.shape().at(1) != n)
        throw nn::ShapeError("fuse: modality lengths differ", f.voltage.shape(), f.pf.shape());
    expect_rows(f.current, cfg.d_i, n, "fuse: current features");
    expect_rows(f.voltage, cfg.d_v, n, "fuse: voltage features");
    expect_rows(f.pf, cfg.d_pf, n, "fuse: power-factor features");
    const Var cat = nn::concat_rows({f.current, f.voltage, f.pf});
    return nn::relu(nn::add_bias(nn::matmul(g.parameter(p, "fusion.w"), cat), g.parameter(p, "fusion.b")));
}

Var lrg(Graph& g, const ParamStore& p, const SignatureConfig& cfg, const Var& fused) {
    const std::size_t d = fused.shape().at(0), n = fused.shape().at(1);
    if (d != cfg.d_fus) throw nn::ShapeError("lrg: fused features", fused.shape(), {cfg.d_fus, n});
    // W [f_i; f_j] = W_left f_i + W_right f_j, evaluated once per column and broadcast over pairs.
    auto pairs = [&](const Var& w) {
        const Var left = nn::matmul(nn::slice_cols(w, 0, d), fused);
        const Var right = nn::matmul(nn::slice_cols(w, d, 2 * d), fused);
        return nn::pairwise_sum(left, right);
    };
    Var r;
    if (cfg.lrg_hidden > 0) {
        const Var hid = nn::relu(nn::add_bias(pairs(g.parameter(p, "signature.lrg.hidden.w")), g.parameter(p, "signature.lrg.hidden.b")));
        r = nn::matmul(g.parameter(p, "signature.lrg.w"), nn::reshape(hid, {cfg.lrg_hidden, n * n}));
    } else {
        r = pairs(g.parameter(p, "signature.lrg.w"));
    }
    r = nn::relu(nn::add_bias(nn::reshape(r, {1, n * n}), g.parameter(p, "signature.lrg.b")));
    return nn::reshape(r, {n, n});
}

Var lgm(const Var& fused) { return nn::relu(nn::matmul(fused, nn::transpose(fused))); }

Var gg(Graph& g, const ParamStore& p, const SignatureConfig& cfg, const Var& fused) {
    const auto [h, w] = cfg.gg_shape();
    const std::size_t flat = fused.value().size();
    if (h * w != flat) throw nn::ShapeError("gg: H*W must equal the flattened feature size", {h, w}, fused.shape());
    // Row-major flattening of Fᵀ is the column-major flattening of F.
    const Var z = nn::reshape(nn::transpose(fused), {flat, 1});
    const Var out = nn::add_bias(nn::matmul(g.parameter(p, "signature.gg.w"), z), g.parameter(p, "signature.gg.b"));
    return nn::reshape(out, {h, w});
}

Var assemble(const Var& r, const Var& g_prime, const Var& gg_map, std::size_t side) {
    if (side < 8) throw std::invalid_argument("assemble: image side must be >= 8");
    std::vector<Var> channels;
    for (const Var* m : {&r, &g_prime, &gg_map})
        if (m->valid()) channels.push_back(nn::minmax_scale(nn::resize_bilinear(*m, side, side)));
    if (channels.empty()) throw std::invalid_argument("assemble: no channels");
    const std::size_t c = channels.size();
    return nn::reshape(c == 1 ? channels[0] : nn::concat_rows(channels), {c, side, side});
}

CycleInputs cycle_inputs(Graph& g, const preprocess::NormalizedCycle& c) {
    const std::size_t n = c.size();
    return {g.constant(Tensor({1, n}, c.i_norm)), g.constant(Tensor({1, n}, c.v_norm)), g.constant(Tensor({1, n}, c.pf_norm))};
}

Var fused_features(Graph& g, const ParamStore& p, const SignatureConfig& cfg, const preprocess::NormalizedCycle& c) {
    const auto in = cycle_inputs(g, c);
    return fuse(g, p, cfg, extract(g, p, cfg, in.i, in.v, in.pf));
}

Var signature_image(Graph& g, const ParamStore& p, const SignatureConfig& cfg, const preprocess::NormalizedCycle& c) {
    const Var f = fused_features(g, p, cfg, c);
    const Var gg_map = gg(g, p, cfg, f);
    if (cfg.gg_only) return assemble(Var{}, Var{}, gg_map, cfg.image_side);
    return assemble(lrg(g, p, cfg, f), lgm(f), gg_map, cfg.image_side);
}

Tensor compute_signature(const ParamStore& p, const SignatureConfig& cfg, const preprocess::NormalizedCycle& c) {
    Graph g;
    return signature_image(g, p, cfg, c).value();
}

void render_pgm(const Tensor& image, std::size_t channel, const std::filesystem::path& path) {
    std::size_t rows = 0, cols = 0, offset = 0;
    if (image.rank() == 2) {
        if (channel != 0) throw std::out_of_range("render_pgm: a matrix has only channel 0");
        rows = image.dim(0);
        cols = image.dim(1);
    } else if (image.rank() == 3) {
        if (channel >= image.dim(0)) throw std::out_of_range("render_pgm: channel " + std::to_string(channel) + " out of range");
        rows = image.dim(1);
        cols = image.dim(2);
        offset = channel * rows * cols;
    } else {
        throw std::invalid_argument("render_pgm: expected a matrix or a [C x H x W] image, got " + nn::shape_string(image.shape()));
    }
    std::string pixels(rows * cols, '\0');
    for (std::size_t k = 0; k < rows * cols; ++k) {
        const double v = image[offset + k];
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("render_pgm: pixel value " + std::to_string(v) + " outside [0, 1]");
        pixels[k] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "P5\n" << cols << " " << rows << "\n255\n";
    out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Tensor read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string magic;
    std::size_t cols = 0, rows = 0, maxval = 0;
    in >> magic >> cols >> rows >> maxval;
    if (magic != "P5" || cols == 0 || rows == 0 || maxval != 255) throw std::runtime_error(path.string() + ": not an 8-bit binary PGM");
    in.get();
    std::string pixels(rows * cols, '\0');
    in.read(pixels.data(), static_cast<std::streamsize>(pixels.size()));
    if (!in) throw std::runtime_error(path.string() + ": truncated pixel data");
    Tensor t({rows, cols});
    for (std::size_t k = 0; k < pixels.size(); ++k) t[k] = static_cast<unsigned char>(pixels[k]) / 255.0;
    return t;
}

}  // namespace nilm::signature
