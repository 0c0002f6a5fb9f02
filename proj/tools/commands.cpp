#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

#include "json.hpp"
#include "nilm/decompose/vae.hpp"
#include "nilm/signature/signature.hpp"

namespace nilm::cli {

namespace {

using json = nlohmann::ordered_json;

RunConfig fresh_config(const Options& o) {
    RunConfig cfg;
    if (!o.config_file.empty()) load_config_file(cfg, o.config_file);
    for (const auto& a : o.overrides) apply_assignment(cfg, a);
    cfg.validate();
    return cfg;
}

train::ModelConfig model_config(const RunConfig& cfg, std::size_t classes) {
    train::ModelConfig mc = cfg.model;
    mc.signature.n_cyc = cfg.pre.n_cyc;
    mc.num_classes = classes;
    return mc;
}

train::Model load_model(const RunDir& dir, const RunConfig& cfg, const std::string& name = "model") {
    const fs::path path = dir.checkpoints() / (name + ".ckpt");
    if (!fs::exists(path)) throw std::runtime_error("missing checkpoint " + path.string() + " (run train first)");
    nn::ParamStore p = nn::load_checkpoint(path);
    if (!p.contains("classifier.head.b")) throw std::runtime_error(path.string() + " holds no classifier head");
    const train::ModelConfig mc = model_config(cfg, p.at("classifier.head.b").size());
    train::Model m = train::make_model(mc, cfg.stage_seed("model"));
    for (const auto& [k, t] : m.params)
        if (!p.contains(k) || p.at(k).shape() != t.shape())
            throw std::runtime_error(path.string() + " does not match the configured architecture at '" + k + "'");
    m.params = std::move(p);
    return m;
}

class JsonLog {
public:
    explicit JsonLog(fs::path path) : path_(std::move(path)) {}
    void add(const json& j) { text_ += j.dump() + "\n"; }
    train::EpochLogger epochs() {
        return [this](const train::EpochRecord& r) { add(json{{"phase", r.phase}, {"epoch", r.epoch}, {"loss", r.loss}}); };
    }
    void write() const { write_text(path_, text_); }

private:
    fs::path path_;
    std::string text_;
};

std::vector<preprocess::NormalizedCycle> unlabelled(const eval::CycleSet& set) {
    std::vector<preprocess::NormalizedCycle> out;
    for (const auto& s : set.samples) out.push_back(s.cycle);
    return out;
}

json report_json(const eval::MetricReport& r) {
    return {{"accuracy", r.accuracy_jaccard}, {"exact_match", r.accuracy_exact}, {"micro_recall", r.accuracy_micro_recall}, {"precision", r.precision_macro}, {"recall", r.recall_macro},
            {"macro_f1", r.f1_macro}};
}

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// Scores the leading `classes` outputs of a (possibly wider) model.
eval::MetricReport score_leading(const train::Model& m, const eval::CycleSet& set, std::size_t classes, double threshold) {
    eval::LabelMatrix truth, pred;
    for (const auto& s : set.samples) {
        auto on = train::predict(m, s.cycle, threshold).on;
        on.resize(classes);
        truth.emplace_back(s.labels.begin(), s.labels.begin() + static_cast<std::ptrdiff_t>(classes));
        pred.push_back(std::move(on));
    }
    return eval::multilabel_metrics(truth, pred);
}

}  // namespace

void cmd_simulate(const Options& o) {
    const RunConfig cfg = fresh_config(o);
    RunDir dir{o.run};
    synth::WindowSpec spec = cfg.data;
    const auto all = synth::standard_appliances();
    spec.profiles.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cfg.appliances));
    spec.seed = cfg.stage_seed("simulate");
    std::vector<synth::RawRecording> recs;
    for (auto& w : synth::generate_windows(spec)) recs.push_back(std::move(w.recording));
    write_dataset(dir.dataset(), recs);
    finish_run(dir, cfg);
    std::printf("simulated %zu windows of %zu cycles into %s\n", recs.size(), spec.cycles_per_window, dir.dataset().string().c_str());
}

void cmd_ingest(const Options& o) {
    const RunConfig cfg = fresh_config(o);
    if (!o.power_files.empty() && o.power_files.size() != o.inputs.size())
        throw std::invalid_argument("ingest: give one --power file per --input file or none");
    RunDir dir{o.run};
    std::vector<synth::RawRecording> recs;
    for (std::size_t i = 0; i < o.inputs.size(); ++i) {
        if (!fs::exists(o.inputs[i])) throw std::runtime_error("ingest: missing input file " + o.inputs[i].string());
        auto rec = synth::ingest_csv(o.inputs[i], cfg.ingest_fs);
        if (!o.power_files.empty()) synth::read_power_csv(o.power_files[i], rec);
        recs.push_back(std::move(rec));
    }
    write_dataset(dir.dataset(), recs);
    finish_run(dir, cfg);
    std::printf("ingested %zu recordings into %s\n", recs.size(), dir.dataset().string().c_str());
}

void cmd_pretrain(const Options& o) {
    RunDir dir{o.run};
    const RunConfig cfg = load_run_config(dir, o.overrides);
    const DatasetSplit data = load_split(dir.dataset(), cfg);
    train::Model m = train::make_model(model_config(cfg, data.classes), cfg.stage_seed("model"));
    train::TrainConfig tc = cfg.train;
    tc.seed = cfg.stage_seed("pretrain");
    JsonLog log(dir.reports() / "pretrain_log.jsonl");
    const nn::ParamStore theta0 = train::pretrain(m, unlabelled(data.train), tc, log.epochs());
    fs::create_directories(dir.checkpoints());
    nn::save_checkpoint(theta0, dir.checkpoints() / "pretrained.ckpt");
    log.write();
    finish_run(dir, cfg);
    std::printf("pretrained on %zu cycles for %zu epochs\n", data.train.size(), tc.ssl_epochs);
}

void cmd_train(const Options& o) {
    RunDir dir{o.run};
    const RunConfig cfg = load_run_config(dir, o.overrides);
    const DatasetSplit data = load_split(dir.dataset(), cfg);
    train::Model m = train::make_model(model_config(cfg, data.classes), cfg.stage_seed("model"));
    const fs::path pre = dir.checkpoints() / "pretrained.ckpt";
    const bool pretrained = fs::exists(pre);
    if (pretrained) {
        const nn::ParamStore theta0 = nn::load_checkpoint(pre);
        for (const auto& [k, t] : theta0)
            if (!m.params.contains(k) || m.params.at(k).shape() != t.shape())
                throw std::runtime_error(pre.string() + " does not match the configured architecture at '" + k + "'");
        m.params.merge_from(theta0);
    }
    train::TrainConfig tc = cfg.train;
    tc.seed = cfg.stage_seed("train");
    JsonLog log(dir.reports() / "train_log.jsonl");
    const train::TaskSnapshot snap = train::train_supervised(m, data.train.samples, tc, "task_0", log.epochs());
    const auto report = eval::evaluate_model(m, data.test.samples, cfg.threshold);
    json last = report_json(report);
    last["phase"] = "final";
    last["pretrained"] = pretrained;
    last["train_cycles"] = data.train.size();
    last["test_cycles"] = data.test.size();
    last["test_macro_f1"] = report.f1_macro;
    log.add(last);
    fs::create_directories(dir.checkpoints());
    nn::save_checkpoint(m.params, dir.checkpoints() / "model.ckpt");
    nn::save_checkpoint(snap.fisher, dir.checkpoints() / "fisher.ckpt");
    log.write();
    finish_run(dir, cfg);
    std::printf("trained on %zu cycles; test macro-F1 %.4f\n", data.train.size(), report.f1_macro);
}

void cmd_eval(const Options& o) {
    RunDir dir{o.run};
    const RunConfig cfg = load_run_config(dir, o.overrides);
    const DatasetSplit data = load_split(dir.dataset(), cfg);
    const train::Model m = load_model(dir, cfg);
    if (m.num_classes() != data.classes)
        throw std::runtime_error("eval: model predicts " + std::to_string(m.num_classes()) + " classes, dataset has " + std::to_string(data.classes));
    std::vector<eval::ReportRow> rows{{"pipeline", eval::evaluate_model(m, data.test.samples, cfg.threshold)}};
    if (cfg.baseline_enabled) {
        eval::BaselineConfig bc = cfg.baseline;
        bc.seed = cfg.stage_seed("baseline");
        bc.threshold = cfg.threshold;
        rows.push_back({"baseline_rawseq", eval::baseline_rawseq(data.train.raw, data.test.raw, bc)});
    }
    fs::create_directories(dir.reports());
    eval::write_report_csv(rows, dir.reports() / "metrics.csv");
    const std::string table = eval::format_report_table(rows);
    write_text(dir.reports() / "metrics.txt", table);
    finish_run(dir, cfg);
    std::cout << table;
}

void cmd_learn_new(const Options& o) {
    RunDir dir{o.run};
    const RunConfig cfg = load_run_config(dir, o.overrides);
    train::Model m = load_model(dir, cfg);
    const std::size_t old_classes = m.num_classes();
    const fs::path fisher = dir.checkpoints() / "fisher.ckpt";
    if (!fs::exists(fisher)) throw std::runtime_error("missing checkpoint " + fisher.string() + " (run train first)");
    const train::TaskSnapshot snap{m.params, nn::load_checkpoint(fisher), "task_0"};

    const DatasetSplit old_data = load_split(dir.dataset(), cfg);
    const DatasetSplit new_data = load_split(o.data, cfg);
    if (new_data.classes < old_classes)
        throw std::runtime_error("learn-new: " + o.data.string() + " has " + std::to_string(new_data.classes) + " labels, fewer than the model's " +
                                 std::to_string(old_classes));
    const double before = score_leading(m, old_data.test, old_classes, cfg.threshold).f1_macro;

    train::TrainConfig tc = cfg.train;
    tc.seed = cfg.stage_seed("learn-new");
    JsonLog log(dir.reports() / "learn_new_log.jsonl");
    const train::TaskSnapshot next = train::continual_update(m, snap, new_data.train.samples, tc, "task_1", log.epochs());

    const auto old_after = score_leading(m, old_data.test, old_classes, cfg.threshold);
    const auto new_after = eval::evaluate_model(m, new_data.test.samples, cfg.threshold);
    json last{{"phase", "final"},
              {"lambda_ewc", tc.lambda_ewc},
              {"old_macro_f1_before", before},
              {"old_macro_f1_after", old_after.f1_macro},
              {"new_macro_f1", new_after.f1_macro},
              {"max_parameter_shift", train::max_parameter_shift(m.params, snap.theta_star)}};
    log.add(last);
    nn::save_checkpoint(m.params, dir.checkpoints() / "model_continual.ckpt");
    nn::save_checkpoint(next.fisher, dir.checkpoints() / "fisher_continual.ckpt");
    eval::write_report_csv({{"old_task", old_after}, {"new_task", new_after}}, dir.reports() / "learn_new.csv");
    log.write();
    finish_run(dir, cfg);
    std::printf("old-task macro-F1 %.4f -> %.4f; new-task macro-F1 %.4f\n", before, old_after.f1_macro, new_after.f1_macro);
}

void cmd_decompose(const Options& o) {
    RunDir dir{o.run};
    const RunConfig cfg = load_run_config(dir, o.overrides);
    DatasetSplit data = load_split(dir.dataset(), cfg);
    const std::size_t k = data.classes, m = cfg.vae.window;

    std::vector<decompose::SoloWindow> solo;
    std::vector<decompose::PowerWindow> mixes;
    for (auto& w : eval::labelled_windows(data.train, m)) {
        const auto on = static_cast<std::size_t>(std::count(w.window.on_off.begin(), w.window.on_off.end(), 1));
        if (on == 1)
            solo.push_back({w.window, static_cast<std::size_t>(std::find(w.window.on_off.begin(), w.window.on_off.end(), 1) - w.window.on_off.begin())});
        else if (on > 1)
            mixes.push_back(w.window);
    }
    decompose::VaeConfig vc = cfg.vae;
    vc.appliances = k;
    vc.seed = cfg.stage_seed("vae");
    const decompose::Vae vae = decompose::vae_train(solo, mixes, vc);
    fs::create_directories(dir.checkpoints());
    nn::save_checkpoint(vae.params, dir.checkpoints() / "vae.ckpt");

    if (cfg.mask == "predicted") {
        const train::Model model = load_model(dir, cfg);
        const auto pred = eval::predict_labels(model, data.test.samples, cfg.threshold);
        for (std::size_t i = 0; i < data.test.size(); ++i) data.test.samples[i].labels = pred[i];
    }
    const auto windows = eval::labelled_windows(data.test, m);
    const bool truth = data.test.size() > 0 && !data.test.p_appliance.front().empty();
    const double dt = 1.0 / cfg.pre.grid_hz;

    std::string series = "window,cycle_index";
    for (std::size_t a = 0; a < k; ++a) series += ",P_" + std::to_string(a + 1);
    series += ",P_total_est,P_total_true\n";
    std::vector<std::vector<double>> est_all(k), true_all(k);
    std::vector<double> err(k, 0.0), on_power(k, 0.0), on_count(k, 0.0);
    std::size_t cycle = 0;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const auto est = decompose::decompose(vae, windows[w].window);
        for (std::size_t t = 0; t < m; ++t, ++cycle) {
            std::string row = std::to_string(windows[w].source) + "," + std::to_string(cycle);
            double sum = 0.0;
            for (std::size_t a = 0; a < k; ++a) {
                row += "," + fixed(est[a][t]);
                sum += est[a][t];
                est_all[a].push_back(est[a][t]);
                if (truth) {
                    true_all[a].push_back(windows[w].truth[a][t]);
                    if (windows[w].truth[a][t] > 0.0) {
                        err[a] += std::abs(est[a][t] - windows[w].truth[a][t]);
                        on_power[a] += windows[w].truth[a][t];
                        on_count[a] += 1.0;
                    }
                }
            }
            series += row + "," + fixed(sum) + "," + fixed(windows[w].window.p_total[t]) + "\n";
        }
    }
    write_text(dir.reports() / "decomposition.csv", series);

    std::string energy = truth ? "appliance,energy_J,energy_Wh,true_energy_J,true_energy_Wh\n" : "appliance,energy_J,energy_Wh\n";
    std::string metrics = "appliance,mae_W,mean_on_power_W,relative_mae\n";
    for (std::size_t a = 0; a < k; ++a) {
        const double e = decompose::energy(est_all[a], dt);
        energy += std::to_string(a + 1) + "," + fixed(e) + "," + fixed(decompose::joules_to_wh(e));
        if (truth) {
            const double te = decompose::energy(true_all[a], dt);
            energy += "," + fixed(te) + "," + fixed(decompose::joules_to_wh(te));
            const double mean_on = on_count[a] > 0 ? on_power[a] / on_count[a] : 0.0;
            const double mae = on_count[a] > 0 ? err[a] / on_count[a] : 0.0;
            metrics += std::to_string(a + 1) + "," + fixed(mae) + "," + fixed(mean_on) + "," + fixed(mean_on > 0 ? mae / mean_on : 0.0) + "\n";
        }
        energy += "\n";
    }
    write_text(dir.reports() / "energy.csv", energy);
    if (truth) write_text(dir.reports() / "decomposition_metrics.csv", metrics);
    finish_run(dir, cfg);
    std::printf("decomposed %zu test windows of %zu cycles (%s masks); %zu solo and %zu mixed training windows\n", windows.size(), m,
                cfg.mask.c_str(), solo.size(), mixes.size());
}

void cmd_render_signature(const Options& o) {
    RunDir dir{o.run};
    const RunConfig cfg = load_run_config(dir, o.overrides);
    const auto recs = read_dataset(dir.dataset());
    if (o.window >= recs.size()) throw std::out_of_range("render-signature: window " + std::to_string(o.window) + " not in dataset");
    const auto cycles = preprocess::process_recording(recs[o.window], cfg.pre);
    if (o.cycle >= cycles.size())
        throw std::out_of_range("render-signature: window " + std::to_string(o.window) + " has " + std::to_string(cycles.size()) + " cycles");
    const train::Model m = fs::exists(dir.checkpoints() / "model.ckpt")
                               ? load_model(dir, cfg)
                               : train::make_model(model_config(cfg, std::max<std::size_t>(1, recs[o.window].num_appliances())), cfg.stage_seed("model"));
    const nn::Tensor image = signature::compute_signature(m.params, m.cfg.signature, cycles[o.cycle].norm);
    const std::vector<std::string> names = m.cfg.signature.gg_only ? std::vector<std::string>{"gg"} : std::vector<std::string>{"lrg", "lgm", "gg"};
    char stem[64];
    std::snprintf(stem, sizeof stem, "window_%04zu_cycle_%03zu", o.window, o.cycle);
    fs::create_directories(dir.signatures());
    for (std::size_t c = 0; c < names.size(); ++c) signature::render_pgm(image, c, dir.signatures() / (std::string(stem) + "_" + names[c] + ".pgm"));
    finish_run(dir, cfg);
    std::printf("rendered %zu signature channel(s) for window %zu cycle %zu\n", names.size(), o.window, o.cycle);
}

}  // namespace nilm::cli
