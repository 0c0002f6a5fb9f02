#pragma once

#include <cstdint>
#include <vector>

#include "nilm/signature/signature.hpp"

namespace nilm::train {

using nn::Graph;
using nn::ParamStore;
using nn::Tensor;
using nn::Var;
using preprocess::NormalizedCycle;

// conv(3x3, stride 2) + ReLU, twice, then average pooling and a dense sigmoid head.
struct ClassifierConfig {
    std::size_t conv0 = 8;
    std::size_t conv1 = 16;
    std::size_t pool = 4;
};

struct ModelConfig {
    signature::SignatureConfig signature;
    ClassifierConfig classifier;
    std::size_t num_classes = 6;

    void validate() const;
    // Length of the flattened feature vector entering the head.
    std::size_t head_inputs() const;
};

struct Model {
    ModelConfig cfg;
    ParamStore params;

    std::size_t num_classes() const { return cfg.num_classes; }
};

// Signature and classifier parameters drawn from `seed`.
Model make_model(const ModelConfig& cfg, std::uint64_t seed);
// (Re)draws only the classifier parameters, leaving the front end untouched.
void init_classifier(Model& m, std::uint64_t seed);
// Grows the head to `classes` outputs; existing rows are kept, new rows are drawn from `seed`.
void widen_head(Model& m, std::size_t classes, std::uint64_t seed);

// Sigmoid class probabilities [K] for an image [C × S × S].
Var classify(Graph& g, const ParamStore& params, const ModelConfig& cfg, const Var& image);
// Cycle to probabilities through the full pipeline.
Var forward(Graph& g, const Model& m, const NormalizedCycle& c);

struct Prediction {
    std::vector<double> probs;
    std::vector<std::uint8_t> on;
};
// on[k] = probs[k] >= threshold. `expected_classes` (0 to skip) must match the model.
Prediction predict(const Model& m, const NormalizedCycle& c, double threshold = 0.5, std::size_t expected_classes = 0);

}  // namespace nilm::train
