#include "nilm/train/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nilm/nn/ops.hpp"

namespace nilm::train {

namespace {

// Output side of two 3x3, stride-2, pad-1 convolutions.
std::size_t conv_side(std::size_t s) {
    const std::size_t s1 = (s - 1) / 2 + 1;
    return (s1 - 1) / 2 + 1;
}

}  // namespace

void ModelConfig::validate() const {
    signature.validate();
    if (num_classes == 0) throw std::invalid_argument("model: need at least one class");
    if (classifier.conv0 == 0 || classifier.conv1 == 0 || classifier.pool == 0)
        throw std::invalid_argument("model: classifier widths and pool size must be positive");
    const std::size_t side = conv_side(signature.image_side);
    if (side % classifier.pool != 0)
        throw std::invalid_argument("model: classifier feature map side " + std::to_string(side) + " is not divisible by pool " +
                                    std::to_string(classifier.pool));
}

std::size_t ModelConfig::head_inputs() const {
    const std::size_t side = conv_side(signature.image_side) / classifier.pool;
    return classifier.conv1 * side * side;
}

void init_classifier(Model& m, std::uint64_t seed) {
    const auto& c = m.cfg.classifier;
    const std::size_t in = m.cfg.signature.image_channels();
    auto& p = m.params;
    p.set("classifier.conv0.w", nn::init_he({c.conv0, in, 3, 3}, in * 9, seed, "classifier.conv0.w"));
    p.set("classifier.conv0.b", Tensor({c.conv0}, 0.0));
    p.set("classifier.conv1.w", nn::init_he({c.conv1, c.conv0, 3, 3}, c.conv0 * 9, seed, "classifier.conv1.w"));
    p.set("classifier.conv1.b", Tensor({c.conv1}, 0.0));
    const std::size_t h = m.cfg.head_inputs();
    p.set("classifier.head.w", nn::init_normal({m.cfg.num_classes, h}, 1.0 / std::sqrt(static_cast<double>(h)), seed, "classifier.head.w"));
    p.set("classifier.head.b", Tensor({m.cfg.num_classes}, 0.0));
}

Model make_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model m{cfg, ParamStore(seed)};
    signature::init_signature_params(m.params, cfg.signature, seed);
    init_classifier(m, seed);
    return m;
}

void widen_head(Model& m, std::size_t classes, std::uint64_t seed) {
    const std::size_t old = m.cfg.num_classes;
    if (classes < old) throw std::invalid_argument("widen_head: cannot shrink the head from " + std::to_string(old) + " to " + std::to_string(classes));
    if (classes == old) return;
    const std::size_t h = m.cfg.head_inputs();
    const Tensor& w = m.params.at("classifier.head.w");
    const Tensor& b = m.params.at("classifier.head.b");
    Tensor nw({classes, h}, 0.0), nb({classes}, 0.0);
    for (std::size_t k = 0; k < classes; ++k) {
        if (k < old) {
            for (std::size_t j = 0; j < h; ++j) nw.at(k, j) = w.at(k, j);
            nb[k] = b[k];
        } else {
            const std::string tag = "classifier.head.w.row" + std::to_string(k);
            const Tensor row = nn::init_normal({h}, 1.0 / std::sqrt(static_cast<double>(h)), seed, tag);
            for (std::size_t j = 0; j < h; ++j) nw.at(k, j) = row[j];
        }
    }
    m.params.set("classifier.head.w", std::move(nw));
    m.params.set("classifier.head.b", std::move(nb));
    m.cfg.num_classes = classes;
}

Var classify(Graph& g, const ParamStore& p, const ModelConfig& cfg, const Var& image) {
    Var x = nn::relu(nn::add_bias(nn::conv2d(image, g.parameter(p, "classifier.conv0.w"), 2, 1), g.parameter(p, "classifier.conv0.b")));
    x = nn::relu(nn::add_bias(nn::conv2d(x, g.parameter(p, "classifier.conv1.w"), 2, 1), g.parameter(p, "classifier.conv1.b")));
    x = nn::avg_pool2d(x, cfg.classifier.pool);
    const std::size_t h = x.value().size();
    x = nn::matmul(g.parameter(p, "classifier.head.w"), nn::reshape(x, {h, 1}));
    return nn::sigmoid(nn::add_bias(nn::reshape(x, {cfg.num_classes}), g.parameter(p, "classifier.head.b")));
}

Var forward(Graph& g, const Model& m, const NormalizedCycle& c) {
    return classify(g, m.params, m.cfg, signature::signature_image(g, m.params, m.cfg.signature, c));
}

Prediction predict(const Model& m, const NormalizedCycle& c, double threshold, std::size_t expected_classes) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("predict: threshold must lie in (0, 1)");
    if (expected_classes != 0 && expected_classes != m.num_classes())
        throw std::invalid_argument("predict: model has " + std::to_string(m.num_classes()) + " classes, labels have " +
                                    std::to_string(expected_classes));
    Graph g;
    const Tensor& y = forward(g, m, c).value();
    Prediction out;
    for (double v : y.values()) {
        out.probs.push_back(v);
        out.on.push_back(v >= threshold ? 1 : 0);
    }
    return out;
}

}  // namespace nilm::train
