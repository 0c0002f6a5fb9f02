#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nilm/nn/optim.hpp"
#include "nilm/train/model.hpp"

namespace nilm::train {

struct Sample {
    NormalizedCycle cycle;
    std::vector<std::uint8_t> labels;  // K entries in {0, 1}
};

struct TrainConfig {
    double lr = 1e-3;
    std::size_t epochs = 12;
    std::size_t batch_size = 32;
    double lambda_ewc = 100.0;
    std::uint64_t seed = 1;
    std::size_t ssl_epochs = 8;
    double ssl_lr = 2e-3;
    // Lower bound applied to stored Fisher values so that every snapshot
    // parameter feels the penalty; 0 keeps the raw estimate.
    double fisher_floor = 1e-5;

    void validate() const;
};

struct TaskSnapshot {
    ParamStore theta_star;
    ParamStore fisher;
    std::string task_id;
};

struct EpochRecord {
    std::string phase;  // "ssl", "supervised" or "continual"
    std::size_t epoch = 0;
    double loss = 0.0;
};
using EpochLogger = std::function<void(const EpochRecord&)>;

// Sum over the three channels of the mean squared error between the predicted
// and true second halves. Both are [3 × n/2] (rows: current, voltage, pf).
Var half_cycle_mse(const Var& predicted, const Tensor& truth);

// Self-supervised objective for one cycle: the first half of every channel goes
// through the extractors and fusion, a dense decoder (parameters `ssl.*` in
// `decoder`) predicts the second half.
Var ssl_loss(Graph& g, const Model& m, const ParamStore& decoder, const NormalizedCycle& c);
// Fresh decoder parameters for a model.
ParamStore init_ssl_decoder(const ModelConfig& cfg, std::uint64_t seed);

// Trains extractor and fusion weights on ssl_loss; the classifier is untouched
// and the decoder is discarded. Returns Θ₀ (the extractor.* and fusion.* entries).
ParamStore pretrain(Model& m, const std::vector<NormalizedCycle>& cycles, const TrainConfig& cfg, const EpochLogger& log = {});

// Multi-label cross entropy summed over the K outputs.
Var bce_loss(const Var& probs, const std::vector<std::uint8_t>& labels);

// Mini-batch Adam on the mean per-sample BCE. Returns Θ* and its Fisher
// diagonal, floored at cfg.fisher_floor.
TaskSnapshot train_supervised(Model& m, const std::vector<Sample>& samples, const TrainConfig& cfg, const std::string& task_id = "task",
                              const EpochLogger& log = {});

// Mean over samples of the squared gradient of log p(y|x) = -BCE, per parameter.
ParamStore fisher_diag(const Model& m, const std::vector<Sample>& samples);

// new_loss + λ/2 Σ F (Θ - Θ*)² over every entry of the snapshot. A parameter
// that has grown extra rows since the snapshot is penalised on its old rows only.
Var ewc_total_loss(Graph& g, const Var& new_loss, const ParamStore& params, const TaskSnapshot& snapshot, double lambda);

// EWC fine-tuning on new samples. A longer label vector widens the head first.
// The returned Fisher is the elementwise max of the old and the newly computed
// (floored) one.
TaskSnapshot continual_update(Model& m, const TaskSnapshot& snapshot, const std::vector<Sample>& samples, const TrainConfig& cfg,
                              const std::string& task_id = "continual", const EpochLogger& log = {});

// Largest |Θ - Θ*| over the snapshot's entries (old rows only for widened tensors).
double max_parameter_shift(const ParamStore& params, const ParamStore& theta_star);

}  // namespace nilm::train
