#include "nilm/eval/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "nilm/nn/ops.hpp"
#include "nilm/nn/optim.hpp"

namespace nilm::eval {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

using nn::Graph;
using nn::ParamStore;
using nn::Tensor;
using nn::Var;

ParamStore init_baseline(const BaselineConfig& cfg, std::size_t classes) {
    ParamStore p(cfg.seed);
    const std::size_t c = cfg.channels, k = cfg.kernel;
    p.set("baseline.conv0.w", nn::init_he({c, 1, k}, k, cfg.seed, "baseline.conv0.w"));
    p.set("baseline.conv0.b", Tensor({c}, 0.0));
    p.set("baseline.conv1.w", nn::init_he({c, c, k}, c * k, cfg.seed, "baseline.conv1.w"));
    p.set("baseline.conv1.b", Tensor({c}, 0.0));
    p.set("baseline.head.w", nn::init_normal({classes, c}, 1.0 / std::sqrt(static_cast<double>(c)), cfg.seed, "baseline.head.w"));
    p.set("baseline.head.b", Tensor({classes}, 0.0));
    return p;
}

Var baseline_forward(Graph& g, const ParamStore& p, const std::vector<double>& x, double inv_rms) {
    const std::size_t n = x.size();
    Tensor in({1, n});
    for (std::size_t t = 0; t < n; ++t) in[t] = x[t] * inv_rms;
    Var h = nn::relu(nn::add_bias(nn::conv1d(g.constant(std::move(in)), g.parameter(p, "baseline.conv0.w"), 1, false), g.parameter(p, "baseline.conv0.b")));
    h = nn::relu(nn::add_bias(nn::conv1d(h, g.parameter(p, "baseline.conv1.w"), 1, false), g.parameter(p, "baseline.conv1.b")));
    const Var avg = nn::matmul(h, g.constant(Tensor({n, 1}, 1.0 / static_cast<double>(n))));
    const Var logits = nn::add_bias(nn::reshape(nn::matmul(g.parameter(p, "baseline.head.w"), avg), {p.at("baseline.head.b").size()}),
                                    g.parameter(p, "baseline.head.b"));
    return nn::sigmoid(logits);
}

}  // namespace

MetricReport multilabel_metrics(const LabelMatrix& truth, const LabelMatrix& predicted) {
    if (truth.size() != predicted.size())
        throw std::invalid_argument("metrics: " + std::to_string(truth.size()) + " reference rows vs " + std::to_string(predicted.size()) + " predicted");
    if (truth.empty()) throw std::invalid_argument("metrics: no samples");
    const std::size_t k = truth.front().size();
    std::vector<double> tp(k, 0.0), fp(k, 0.0), fn(k, 0.0);
    MetricReport r;
    r.per_class.resize(k);
    double jaccard = 0.0, exact = 0.0, hits = 0.0, running = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i].size() != k || predicted[i].size() != k)
            throw std::invalid_argument("metrics: row " + std::to_string(i) + " does not have " + std::to_string(k) + " labels");
        std::size_t inter = 0, uni = 0;
        bool same = true;
        for (std::size_t c = 0; c < k; ++c) {
            const bool y = truth[i][c] != 0, p = predicted[i][c] != 0;
            tp[c] += y && p;
            fp[c] += !y && p;
            fn[c] += y && !p;
            r.per_class[c].support += y;
            inter += y && p;
            hits += y && p;
            running += y;
            uni += y || p;
            same = same && y == p;
        }
        jaccard += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
        exact += same ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(truth.size());
    r.accuracy_jaccard = jaccard / n;
    r.accuracy_exact = exact / n;
    r.accuracy_micro_recall = ratio(hits, running);
    for (std::size_t c = 0; c < k; ++c) {
        auto& m = r.per_class[c];
        m.precision = ratio(tp[c], tp[c] + fp[c]);
        m.recall = ratio(tp[c], tp[c] + fn[c]);
        m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
        r.precision_macro += m.precision / static_cast<double>(k);
        r.recall_macro += m.recall / static_cast<double>(k);
        r.f1_macro += m.f1 / static_cast<double>(k);
    }
    return r;
}

double power_mae(const std::vector<std::vector<double>>& est, const std::vector<std::vector<double>>& truth) {
    if (est.size() != truth.size() || est.empty()) throw std::invalid_argument("power_mae: row counts differ or are zero");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        if (est[i].size() != truth[i].size()) throw std::invalid_argument("power_mae: row " + std::to_string(i) + " lengths differ");
        for (std::size_t k = 0; k < est[i].size(); ++k) sum += std::abs(est[i][k] - truth[i][k]);
        count += est[i].size();
    }
    if (count == 0) throw std::invalid_argument("power_mae: no entries");
    return sum / static_cast<double>(count);
}

LabelMatrix predict_labels(const train::Model& model, const std::vector<train::Sample>& samples, double threshold) {
    LabelMatrix out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(train::predict(model, s.cycle, threshold, s.labels.size()).on);
    return out;
}

MetricReport evaluate_model(const train::Model& model, const std::vector<train::Sample>& samples, double threshold) {
    LabelMatrix truth;
    for (const auto& s : samples) truth.push_back(s.labels);
    return multilabel_metrics(truth, predict_labels(model, samples, threshold));
}

MetricReport baseline_rawseq(const std::vector<RawSample>& train, const std::vector<RawSample>& test, const BaselineConfig& cfg) {
    if (train.empty() || test.empty()) throw std::invalid_argument("baseline_rawseq: empty train or test set");
    if (cfg.batch_size == 0 || !(cfg.lr > 0.0)) throw std::invalid_argument("baseline_rawseq: invalid optimiser settings");
    if (cfg.kernel % 2 == 0) throw std::invalid_argument("baseline_rawseq: kernel must be odd");
    const std::size_t k = train.front().labels.size();
    for (const auto* set : {&train, &test})
        for (const auto& s : *set)
            if (s.labels.size() != k || s.current.size() != train.front().current.size())
                throw std::invalid_argument("baseline_rawseq: samples differ in label count or sequence length");

    double sq = 0.0, count = 0.0;
    for (const auto& s : train)
        for (double v : s.current) sq += v * v, count += 1.0;
    const double rms = std::sqrt(sq / count);
    const double inv_rms = rms > 0.0 ? 1.0 / rms : 1.0;

    ParamStore p = init_baseline(cfg, k);
    nn::AdamConfig adam;
    adam.lr = cfg.lr;
    nn::AdamState state;
    std::mt19937_64 rng(nn::derive_seed(cfg.seed, "baseline.shuffle"));
    std::vector<std::size_t> order(train.size());
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            ParamStore grads;
            for (std::size_t b = start; b < end; ++b) {
                const auto& s = train[order[b]];
                Graph g;
                const Var loss = train::bce_loss(baseline_forward(g, p, s.current, inv_rms), s.labels);
                if (!std::isfinite(loss.value()[0])) throw std::runtime_error("baseline_rawseq: non-finite loss at epoch " + std::to_string(epoch));
                g.backward(loss);
                g.accumulate_gradients(grads, 1.0 / static_cast<double>(end - start));
            }
            nn::adam_step(p, grads, adam, state);
        }
    }

    LabelMatrix truth, pred;
    for (const auto& s : test) {
        Graph g;
        const Tensor& y = baseline_forward(g, p, s.current, inv_rms).value();
        std::vector<std::uint8_t> on(k);
        for (std::size_t c = 0; c < k; ++c) on[c] = y[c] >= cfg.threshold ? 1 : 0;
        truth.push_back(s.labels);
        pred.push_back(std::move(on));
    }
    return multilabel_metrics(truth, pred);
}

void write_report_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "Method,Accuracy,ExactMatch,MicroRecall,Precision,Recall,F1-score,PowerMAE\n";
    for (const auto& row : rows) {
        const auto& r = row.report;
        out << row.method << ',' << fixed(r.accuracy_jaccard) << ',' << fixed(r.accuracy_exact) << ',' << fixed(r.accuracy_micro_recall) << ','
            << fixed(r.precision_macro) << ','
            << fixed(r.recall_macro) << ',' << fixed(r.f1_macro) << ',' << (r.mae_power >= 0.0 ? fixed(r.mae_power) : std::string("")) << '\n';
    }
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.report.per_class.size(); ++c) {
            const auto& m = row.report.per_class[c];
            out << row.method << "/class_" << c << ",,,," << fixed(m.precision) << ',' << fixed(m.recall) << ',' << fixed(m.f1) << ",\n";
        }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string format_report_table(const std::vector<ReportRow>& rows) {
    std::string s;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-20s %9s %9s %9s %9s %9s\n", "Method", "Accuracy", "Exact", "Precision", "Recall", "F1-score");
    s += buf;
    for (const auto& row : rows) {
        const auto& r = row.report;
        std::snprintf(buf, sizeof buf, "%-20s %9.4f %9.4f %9.4f %9.4f %9.4f\n", row.method.c_str(), r.accuracy_jaccard, r.accuracy_exact,
                      r.precision_macro, r.recall_macro, r.f1_macro);
        s += buf;
    }
    s += "Accuracy is the mean per-sample Jaccard index (empty vs empty counts as 1); Exact is subset accuracy.\n";
    s += "MicroRecall (share of running devices identified, in metrics.csv) is a third reading of accuracy.\n";
    s += "Precision and recall of a class with no predicted or no true positives are 0.\n";
    return s;
}

}  // namespace nilm::eval
