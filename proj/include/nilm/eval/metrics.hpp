#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nilm/train/train.hpp"

namespace nilm::eval {

using LabelMatrix = std::vector<std::vector<std::uint8_t>>;  // [n][K]

struct ClassMetrics {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    std::size_t support = 0;  // positives in the reference labels
};

struct MetricReport {
    double accuracy_jaccard = 0.0;  // headline accuracy
    double accuracy_exact = 0.0;
    double accuracy_micro_recall = 0.0;  // running devices identified / running devices
    double precision_macro = 0.0, recall_macro = 0.0, f1_macro = 0.0;
    std::vector<ClassMetrics> per_class;
    double mae_power = -1.0;  // watts; negative when not measured
};

// Per-class precision/recall/F1 (0/0 -> 0), macro averages, mean Jaccard
// (empty vs empty -> 1) and exact-match accuracy.
MetricReport multilabel_metrics(const LabelMatrix& truth, const LabelMatrix& predicted);

// Mean of |est - truth| over every entry; both [M][K].
double power_mae(const std::vector<std::vector<double>>& est, const std::vector<std::vector<double>>& truth);

// Thresholded predictions of `model` on labelled samples.
LabelMatrix predict_labels(const train::Model& model, const std::vector<train::Sample>& samples, double threshold = 0.5);
MetricReport evaluate_model(const train::Model& model, const std::vector<train::Sample>& samples, double threshold = 0.5);

// Raw current sequence of one cycle with its labels.
struct RawSample {
    std::vector<double> current;
    std::vector<std::uint8_t> labels;
};

// conv1d(k5) + ReLU, twice, then a time average and a dense sigmoid head,
// trained on the same multi-label cross entropy as the full pipeline.
struct BaselineConfig {
    std::size_t channels = 16;
    std::size_t kernel = 5;
    double lr = 1e-2;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    double threshold = 0.5;
};
MetricReport baseline_rawseq(const std::vector<RawSample>& train, const std::vector<RawSample>& test, const BaselineConfig& cfg);

struct ReportRow {
    std::string method;
    MetricReport report;
};
// "Method,Accuracy,ExactMatch,Precision,Recall,F1-score,PowerMAE" followed by
// one line per row, then per-class lines "method/class_k".
void write_report_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path);
std::string format_report_table(const std::vector<ReportRow>& rows);

}  // namespace nilm::eval
