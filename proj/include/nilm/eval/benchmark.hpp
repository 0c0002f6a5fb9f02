#pragma once

#include <cstdint>
#include <vector>

#include "nilm/decompose/vae.hpp"
#include "nilm/eval/metrics.hpp"
#include "nilm/preprocess/pipeline.hpp"
#include "nilm/synth/dataset.hpp"

namespace nilm::eval {

// Per-cycle views of a set of windows, in window order.
struct CycleSet {
    std::vector<train::Sample> samples;
    std::vector<RawSample> raw;
    std::vector<std::size_t> window;  // source window of each cycle
    std::vector<double> p_total;
    std::vector<std::vector<double>> p_appliance;  // [cycle][K]

    std::size_t size() const { return samples.size(); }
    void append(const CycleSet& other);
};

// Preprocesses one recording; every complete cycle becomes a sample labelled
// with the schedule state at its midpoint.
CycleSet cycles_from_recording(const synth::RawRecording& rec, const preprocess::PreprocessConfig& cfg, std::size_t window_id = 0);
// Windows selected by `indices` (all when empty).
CycleSet cycles_from_windows(const std::vector<synth::Window>& windows, const preprocess::PreprocessConfig& cfg,
                             const std::vector<std::size_t>& indices = {});

// Keeps every label column listed in `classes`, in that order.
CycleSet select_classes(const CycleSet& set, const std::vector<std::size_t>& classes);
// Deterministic subset holding round(fraction * n) samples (at least one).
CycleSet subsample(const CycleSet& set, double fraction, std::uint64_t seed);

struct BenchmarkConfig {
    synth::WindowSpec data;
    preprocess::PreprocessConfig pre;
    train::ModelConfig model;
    train::TrainConfig train;
    BaselineConfig baseline;
    double split = 0.8;
    bool pretrain = true;
    bool run_baseline = true;

    BenchmarkConfig();
};

struct BenchmarkResult {
    MetricReport pipeline;
    MetricReport baseline;
    std::size_t train_cycles = 0, test_cycles = 0;
};

// Simulate, split by window, (pre)train and evaluate the pipeline and the
// raw-sequence baseline for one root seed.
BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, std::uint64_t seed);

// Label fraction experiment: pretrained vs random extractor initialisation,
// fine-tuned on the same labelled subset and scored on the test windows.
struct SslComparison {
    double f1_pretrained = 0.0;
    double f1_random = 0.0;
    std::size_t labelled = 0;
};
SslComparison run_ssl_comparison(const BenchmarkConfig& cfg, std::uint64_t seed, double label_fraction = 0.1);

// Two-phase continual protocol. Phase A uses every appliance but `new_appliance`;
// phase B windows always contain it. Old-task scores cover the phase A classes.
struct EwcProtocol {
    std::size_t new_appliance = 5;
    std::size_t phase_a_windows = 100;
    std::size_t phase_b_windows = 40;
    std::size_t epochs_a = 10;
    std::size_t epochs_b = 5;
    bool phase_b_new_only = true;  // false: old appliances may also run in phase B windows
    std::vector<double> lambdas{0.0, 100.0, 1e9};
};
struct EwcOutcome {
    double f1_before = 0.0;
    std::vector<double> f1_after;  // per lambda
    std::vector<double> drop;
    std::vector<double> max_shift;
};
EwcOutcome run_ewc_protocol(const BenchmarkConfig& cfg, const EwcProtocol& protocol, std::uint64_t seed);

// A decomposition window with the simulator's per-appliance power ([K][M]).
struct LabelledWindow {
    decompose::PowerWindow window;
    std::vector<std::vector<double>> truth;
    std::size_t source = 0;
};
// Consecutive runs of m cycles that come from the same source window.
std::vector<LabelledWindow> labelled_windows(const CycleSet& set, std::size_t m);

struct DecompositionProtocol {
    std::size_t solo_windows = 10;  // per appliance
    std::size_t mix_windows = 150;  // two-appliance windows, split 8:2
    decompose::VaeConfig vae;
};
struct DecompositionOutcome {
    std::vector<double> mean_on_power;  // per appliance, over held-out on cycles
    std::vector<double> mae;
    std::size_t off_nonzero = 0;        // entries of off appliances that were not exactly 0
    double additivity_mae = 0.0;        // mean |sum of components - P_total|
    double mean_total = 0.0;
    std::size_t test_windows = 0;
};
DecompositionOutcome run_decomposition(const BenchmarkConfig& cfg, const DecompositionProtocol& protocol, std::uint64_t seed);

}  // namespace nilm::eval
