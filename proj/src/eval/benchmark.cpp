#include "nilm/eval/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace nilm::eval {

void CycleSet::append(const CycleSet& o) {
    samples.insert(samples.end(), o.samples.begin(), o.samples.end());
    raw.insert(raw.end(), o.raw.begin(), o.raw.end());
    window.insert(window.end(), o.window.begin(), o.window.end());
    p_total.insert(p_total.end(), o.p_total.begin(), o.p_total.end());
    p_appliance.insert(p_appliance.end(), o.p_appliance.begin(), o.p_appliance.end());
}

CycleSet cycles_from_recording(const synth::RawRecording& rec, const preprocess::PreprocessConfig& cfg, std::size_t window_id) {
    CycleSet out;
    for (auto& c : preprocess::process_recording(rec, cfg)) {
        out.raw.push_back({c.raw.i_cyc, c.labels});
        out.window.push_back(window_id);
        out.p_total.push_back(c.p_total);
        out.p_appliance.push_back(c.p_appliance);
        out.samples.push_back({std::move(c.norm), std::move(c.labels)});
    }
    return out;
}

CycleSet cycles_from_windows(const std::vector<synth::Window>& windows, const preprocess::PreprocessConfig& cfg, const std::vector<std::size_t>& indices) {
    std::vector<std::size_t> pick = indices;
    if (pick.empty()) {
        pick.resize(windows.size());
        std::iota(pick.begin(), pick.end(), std::size_t{0});
    }
    CycleSet out;
    for (std::size_t w : pick) {
        if (w >= windows.size()) throw std::out_of_range("cycles_from_windows: window index out of range");
        out.append(cycles_from_recording(windows[w].recording, cfg, w));
    }
    return out;
}

CycleSet select_classes(const CycleSet& set, const std::vector<std::size_t>& classes) {
    CycleSet out = set;
    auto pick = [&](const auto& v) {
        std::decay_t<decltype(v)> r;
        for (std::size_t c : classes) {
            if (c >= v.size()) throw std::out_of_range("select_classes: class index out of range");
            r.push_back(v[c]);
        }
        return r;
    };
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.samples[i].labels = pick(set.samples[i].labels);
        out.raw[i].labels = pick(set.raw[i].labels);
        if (!set.p_appliance[i].empty()) out.p_appliance[i] = pick(set.p_appliance[i]);
    }
    return out;
}

CycleSet subsample(const CycleSet& set, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("subsample: fraction must lie in (0, 1]");
    if (set.size() == 0) throw std::invalid_argument("subsample: empty set");
    std::vector<std::size_t> idx(set.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(set.size()))));
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    CycleSet out;
    for (std::size_t i : idx) {
        out.samples.push_back(set.samples[i]);
        out.raw.push_back(set.raw[i]);
        out.window.push_back(set.window[i]);
        out.p_total.push_back(set.p_total[i]);
        out.p_appliance.push_back(set.p_appliance[i]);
    }
    return out;
}

BenchmarkConfig::BenchmarkConfig() {
    data.profiles = synth::standard_appliances();
    model.num_classes = data.profiles.size();
}

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, std::uint64_t seed) {
    synth::WindowSpec spec = cfg.data;
    spec.seed = nn::derive_seed(seed, "data");
    const auto windows = synth::generate_windows(spec);
    const auto split = synth::split_indices(windows.size(), cfg.split, nn::derive_seed(seed, "split"));
    const CycleSet train_set = cycles_from_windows(windows, cfg.pre, split.train);
    const CycleSet test_set = cycles_from_windows(windows, cfg.pre, split.test);

    train::ModelConfig mc = cfg.model;
    mc.num_classes = spec.profiles.size();
    train::Model model = train::make_model(mc, nn::derive_seed(seed, "model"));
    train::TrainConfig tc = cfg.train;
    tc.seed = nn::derive_seed(seed, "train");
    if (cfg.pretrain) {
        std::vector<preprocess::NormalizedCycle> unlabeled;
        for (const auto& s : train_set.samples) unlabeled.push_back(s.cycle);
        train::pretrain(model, unlabeled, tc);
    }
    train::train_supervised(model, train_set.samples, tc);

    BenchmarkResult r;
    r.train_cycles = train_set.size();
    r.test_cycles = test_set.size();
    r.pipeline = evaluate_model(model, test_set.samples);
    if (cfg.run_baseline) {
        BaselineConfig bc = cfg.baseline;
        bc.seed = nn::derive_seed(seed, "baseline");
        r.baseline = baseline_rawseq(train_set.raw, test_set.raw, bc);
    }
    return r;
}

namespace {

struct Split {
    CycleSet train, test;
};

Split simulate_split(const synth::WindowSpec& base, const preprocess::PreprocessConfig& pre, double ratio, std::uint64_t seed,
                     const std::string& tag) {
    synth::WindowSpec spec = base;
    spec.seed = nn::derive_seed(seed, tag + ".data");
    const auto windows = synth::generate_windows(spec);
    const auto idx = synth::split_indices(windows.size(), ratio, nn::derive_seed(seed, tag + ".split"));
    return {cycles_from_windows(windows, pre, idx.train), cycles_from_windows(windows, pre, idx.test)};
}

std::vector<preprocess::NormalizedCycle> unlabelled(const CycleSet& set) {
    std::vector<preprocess::NormalizedCycle> out;
    out.reserve(set.size());
    for (const auto& s : set.samples) out.push_back(s.cycle);
    return out;
}

double leading_f1(const train::Model& m, const CycleSet& set, std::size_t k) {
    LabelMatrix truth, pred;
    for (const auto& s : set.samples) {
        auto on = train::predict(m, s.cycle).on;
        on.resize(k);
        truth.emplace_back(s.labels.begin(), s.labels.begin() + static_cast<std::ptrdiff_t>(k));
        pred.push_back(std::move(on));
    }
    return multilabel_metrics(truth, pred).f1_macro;
}

}  // namespace

SslComparison run_ssl_comparison(const BenchmarkConfig& cfg, std::uint64_t seed, double label_fraction) {
    const Split data = simulate_split(cfg.data, cfg.pre, cfg.split, seed, "ssl");
    const CycleSet few = subsample(data.train, label_fraction, nn::derive_seed(seed, "ssl.labels"));
    train::ModelConfig mc = cfg.model;
    mc.num_classes = cfg.data.profiles.size();
    train::TrainConfig tc = cfg.train;
    tc.seed = nn::derive_seed(seed, "ssl.train");

    SslComparison out;
    out.labelled = few.size();
    for (bool pre : {false, true}) {
        train::Model m = train::make_model(mc, nn::derive_seed(seed, "ssl.model"));
        if (pre) train::pretrain(m, unlabelled(data.train), tc);
        train::train_supervised(m, few.samples, tc);
        (pre ? out.f1_pretrained : out.f1_random) = evaluate_model(m, data.test.samples).f1_macro;
    }
    return out;
}

EwcOutcome run_ewc_protocol(const BenchmarkConfig& cfg, const EwcProtocol& protocol, std::uint64_t seed) {
    const auto& all = cfg.data.profiles;
    if (protocol.new_appliance >= all.size()) throw std::invalid_argument("ewc protocol: new appliance index out of range");
    if (protocol.new_appliance + 1 != all.size())
        throw std::invalid_argument("ewc protocol: the new appliance must be the last profile so old classes keep their columns");

    synth::WindowSpec a = cfg.data;
    a.profiles.assign(all.begin(), all.end() - 1);
    a.windows = protocol.phase_a_windows;
    a.max_active = std::min(a.max_active, a.profiles.size());
    synth::WindowSpec b = cfg.data;
    b.windows = protocol.phase_b_windows;
    b.required = {protocol.new_appliance};
    if (protocol.phase_b_new_only) b.min_active = b.max_active = 1;
    b.seed = nn::derive_seed(seed, "ewc.b.data");
    const Split phase_a = simulate_split(a, cfg.pre, cfg.split, seed, "ewc.a");
    const CycleSet phase_b = cycles_from_windows(synth::generate_windows(b), cfg.pre);

    train::ModelConfig mc = cfg.model;
    mc.num_classes = a.profiles.size();
    train::Model model = train::make_model(mc, nn::derive_seed(seed, "ewc.model"));
    train::TrainConfig tc = cfg.train;
    tc.seed = nn::derive_seed(seed, "ewc.train");
    tc.epochs = protocol.epochs_a;
    const train::TaskSnapshot snapshot = train::train_supervised(model, phase_a.train.samples, tc, "phase_a");

    EwcOutcome out;
    out.f1_before = leading_f1(model, phase_a.test, mc.num_classes);
    for (double lambda : protocol.lambdas) {
        train::Model m = model;
        train::TrainConfig tb = tc;
        tb.epochs = protocol.epochs_b;
        tb.lambda_ewc = lambda;
        train::continual_update(m, snapshot, phase_b.samples, tb, "phase_b");
        out.f1_after.push_back(leading_f1(m, phase_a.test, mc.num_classes));
        out.drop.push_back(out.f1_before - out.f1_after.back());
        out.max_shift.push_back(train::max_parameter_shift(m.params, snapshot.theta_star));
    }
    return out;
}

std::vector<LabelledWindow> labelled_windows(const CycleSet& set, std::size_t m) {
    if (m == 0) throw std::invalid_argument("labelled_windows: window length must be >= 1");
    std::vector<LabelledWindow> out;
    for (std::size_t i = 0; i < set.size();) {
        std::size_t j = i;
        while (j < set.size() && set.window[j] == set.window[i]) ++j;
        for (std::size_t s = i; s + m <= j; s += m) {
            const std::size_t k = set.p_appliance[s].size();
            LabelledWindow w;
            w.source = set.window[s];
            w.truth.assign(k, std::vector<double>(m));
            std::vector<double> p(set.p_total.begin() + static_cast<std::ptrdiff_t>(s), set.p_total.begin() + static_cast<std::ptrdiff_t>(s + m));
            std::vector<std::vector<std::uint8_t>> on_off;
            for (std::size_t t = s; t < s + m; ++t) {
                on_off.push_back(set.samples[t].labels);
                for (std::size_t a = 0; a < k; ++a) w.truth[a][t - s] = set.p_appliance[t][a];
            }
            w.window = decompose::make_windows(p, on_off, m).front();
            out.push_back(std::move(w));
        }
        i = j;
    }
    return out;
}

DecompositionOutcome run_decomposition(const BenchmarkConfig& cfg, const DecompositionProtocol& protocol, std::uint64_t seed) {
    const std::size_t k = cfg.data.profiles.size(), m = protocol.vae.window;
    synth::WindowSpec base = cfg.data;
    base.cycles_per_window = m + 1;  // the leading partial cycle is dropped

    std::vector<decompose::SoloWindow> solo;
    for (std::size_t a = 0; a < k; ++a) {
        synth::WindowSpec spec = base;
        spec.windows = protocol.solo_windows;
        spec.min_active = spec.max_active = 1;
        spec.required = {a};
        spec.seed = nn::derive_seed(seed, "decompose.solo." + std::to_string(a));
        for (auto& w : labelled_windows(cycles_from_windows(synth::generate_windows(spec), cfg.pre), m)) solo.push_back({std::move(w.window), a});
    }
    synth::WindowSpec spec = base;
    spec.windows = protocol.mix_windows;
    spec.min_active = spec.max_active = 2;
    spec.seed = nn::derive_seed(seed, "decompose.mix");
    const auto mixes = labelled_windows(cycles_from_windows(synth::generate_windows(spec), cfg.pre), m);
    const auto idx = synth::split_indices(mixes.size(), cfg.split, nn::derive_seed(seed, "decompose.split"));
    std::vector<decompose::PowerWindow> train_mixes;
    for (std::size_t i : idx.train) train_mixes.push_back(mixes[i].window);

    decompose::VaeConfig vc = protocol.vae;
    vc.appliances = k;
    vc.seed = nn::derive_seed(seed, "decompose.vae");
    const decompose::Vae vae = decompose::vae_train(solo, train_mixes, vc);

    DecompositionOutcome out;
    out.test_windows = idx.test.size();
    std::vector<double> err(k, 0.0), on(k, 0.0), n(k, 0.0);
    for (std::size_t i : idx.test) {
        const auto& w = mixes[i];
        const auto est = decompose::decompose(vae, w.window);
        for (std::size_t t = 0; t < m; ++t) {
            double sum = 0.0;
            for (std::size_t a = 0; a < k; ++a) sum += est[a][t];
            out.additivity_mae += std::abs(sum - w.window.p_total[t]);
            out.mean_total += w.window.p_total[t];
        }
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t t = 0; t < m; ++t) {
                if (w.window.on_off[a]) {
                    err[a] += std::abs(est[a][t] - w.truth[a][t]);
                    on[a] += w.truth[a][t];
                    n[a] += 1.0;
                } else if (est[a][t] != 0.0) {
                    ++out.off_nonzero;
                }
            }
    }
    const double cells = static_cast<double>(idx.test.size() * m);
    out.additivity_mae /= cells;
    out.mean_total /= cells;
    for (std::size_t a = 0; a < k; ++a) {
        out.mean_on_power.push_back(n[a] > 0.0 ? on[a] / n[a] : 0.0);
        out.mae.push_back(n[a] > 0.0 ? err[a] / n[a] : 0.0);
    }
    return out;
}

}  // namespace nilm::eval
