#include "run_config.hpp"

#include <charconv>
#include <concepts>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nilm/nn/param_store.hpp"

namespace nilm::cli {

namespace {

struct Field {
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty()) throw ConfigError("config: bad value '" + text + "' for " + key);
    return v;
}

std::string format(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "1" || text == "true") return true;
    if (text == "0" || text == "false") return false;
    throw ConfigError("config: bad boolean '" + text + "' for " + key + " (use true/false)");
}

using Table = std::map<std::string, Field>;

template <std::unsigned_integral T>
void field(Table& t, const std::string& key, T& ref) {
    t[key] = {[&ref, key](const std::string& s) { ref = parse_number<T>(key, s); }, [&ref] { return std::to_string(ref); }};
}
void field(Table& t, const std::string& key, double& ref) {
    t[key] = {[&ref, key](const std::string& s) { ref = parse_number<double>(key, s); }, [&ref] { return format(ref); }};
}
void field(Table& t, const std::string& key, bool& ref) {
    t[key] = {[&ref, key](const std::string& s) { ref = parse_bool(key, s); }, [&ref] { return std::string(ref ? "true" : "false"); }};
}
void field(Table& t, const std::string& key, std::string& ref) {
    t[key] = {[&ref](const std::string& s) { ref = s; }, [&ref] { return ref; }};
}
void list_field(Table& t, const std::string& key, std::vector<std::size_t>& ref) {
    t[key] = {[&ref, key](const std::string& s) {
                  ref.clear();
                  std::stringstream ss(s);
                  for (std::string item; std::getline(ss, item, ',');)
                      if (!trim(item).empty()) ref.push_back(parse_number<std::size_t>(key, trim(item)));
              },
              [&ref] {
                  std::string out;
                  for (std::size_t i = 0; i < ref.size(); ++i) out += (i ? "," : "") + std::to_string(ref[i]);
                  return out;
              }};
}

// Setters and getters bound to the fields of `c`.
Table table(RunConfig& c) {
    Table t;
    field(t, "seed", c.seed);

    field(t, "data.appliances", c.appliances);
    field(t, "data.windows", c.data.windows);
    field(t, "data.cycles_per_window", c.data.cycles_per_window);
    field(t, "data.min_active", c.data.min_active);
    field(t, "data.max_active", c.data.max_active);
    list_field(t, "data.required", c.data.required);
    field(t, "data.fs", c.data.fs);
    field(t, "data.noise_std", c.data.noise_std);
    field(t, "data.power_jitter", c.data.power_jitter);
    field(t, "data.phase_jitter", c.data.phase_jitter);
    field(t, "data.lead_cycles", c.data.lead_cycles);
    field(t, "data.split", c.split);
    field(t, "ingest.fs", c.ingest_fs);

    field(t, "preprocess.cutoff_hz", c.pre.filter.cutoff_hz);
    field(t, "preprocess.taps", c.pre.filter.taps);
    field(t, "preprocess.n_win", c.pre.n_win);
    field(t, "preprocess.n_cyc", c.pre.n_cyc);
    field(t, "preprocess.pf_window", c.pre.pf_window);
    field(t, "preprocess.grid_hz", c.pre.grid_hz);

    auto& s = c.model.signature;
    field(t, "signature.d_i", s.d_i);
    field(t, "signature.d_v", s.d_v);
    field(t, "signature.d_pf", s.d_pf);
    field(t, "signature.d_fus", s.d_fus);
    field(t, "signature.tcn_layers", s.tcn_layers);
    field(t, "signature.pf_layers", s.pf_layers);
    field(t, "signature.kernel", s.kernel);
    field(t, "signature.lrg_hidden", s.lrg_hidden);
    field(t, "signature.gg_rows", s.gg_rows);
    field(t, "signature.gg_cols", s.gg_cols);
    field(t, "signature.image_side", s.image_side);
    field(t, "signature.gg_only", s.gg_only);
    field(t, "classifier.conv0", c.model.classifier.conv0);
    field(t, "classifier.conv1", c.model.classifier.conv1);
    field(t, "classifier.pool", c.model.classifier.pool);

    field(t, "train.lr", c.train.lr);
    field(t, "train.epochs", c.train.epochs);
    field(t, "train.batch_size", c.train.batch_size);
    field(t, "train.lambda_ewc", c.train.lambda_ewc);
    field(t, "train.ssl_epochs", c.train.ssl_epochs);
    field(t, "train.ssl_lr", c.train.ssl_lr);
    field(t, "train.fisher_floor", c.train.fisher_floor);
    field(t, "train.threshold", c.threshold);

    field(t, "baseline.enabled", c.baseline_enabled);
    field(t, "baseline.channels", c.baseline.channels);
    field(t, "baseline.kernel", c.baseline.kernel);
    field(t, "baseline.lr", c.baseline.lr);
    field(t, "baseline.epochs", c.baseline.epochs);
    field(t, "baseline.batch_size", c.baseline.batch_size);

    field(t, "vae.window", c.vae.window);
    field(t, "vae.latent", c.vae.latent);
    field(t, "vae.hidden", c.vae.hidden);
    field(t, "vae.kl_weight", c.vae.kl_weight);
    field(t, "vae.lr", c.vae.lr);
    field(t, "vae.epochs", c.vae.epochs);
    field(t, "vae.batch_size", c.vae.batch_size);
    field(t, "decompose.mask", c.mask);
    return t;
}

}  // namespace

RunConfig::RunConfig() {
    // dataset windows hold 10 cycles, so the decomposition window matches them
    vae.window = 10;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto t = table(*this);
    const auto it = t.find(key);
    if (it == t.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second.set(trim(value));
}

std::string RunConfig::get(const std::string& key) const {
    auto t = table(const_cast<RunConfig&>(*this));
    const auto it = t.find(key);
    if (it == t.end()) throw ConfigError("config: unknown key '" + key + "'");
    return it->second.get();
}

std::vector<std::string> RunConfig::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, f] : table(const_cast<RunConfig&>(*this))) out.push_back(k);
    return out;
}

std::map<std::string, std::string> RunConfig::to_map() const {
    std::map<std::string, std::string> out;
    for (const auto& [k, f] : table(const_cast<RunConfig&>(*this))) out[k] = f.get();
    return out;
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
    return out;
}

void RunConfig::validate() const {
    const std::size_t available = synth::standard_appliances().size();
    if (appliances == 0 || appliances > available)
        throw ConfigError("config: data.appliances must lie in [1, " + std::to_string(available) + "]");
    if (!(split > 0.0 && split < 1.0)) throw ConfigError("config: data.split must lie in (0, 1)");
    if (data.min_active > data.max_active || data.max_active > appliances)
        throw ConfigError("config: need data.min_active <= data.max_active <= data.appliances");
    for (std::size_t r : data.required)
        if (r >= appliances) throw ConfigError("config: data.required lists appliance " + std::to_string(r) + " outside data.appliances");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("config: train.threshold must lie in (0, 1)");
    if (mask != "predicted" && mask != "truth") throw ConfigError("config: decompose.mask must be 'predicted' or 'truth'");
    if (pre.n_cyc % 2 != 0) throw ConfigError("config: preprocess.n_cyc must be even (half-cycle pretraining)");
    try {
        pre.validate(data.fs);
        train::ModelConfig m = model;
        m.signature.n_cyc = pre.n_cyc;
        m.num_classes = appliances;
        m.validate();
        train.validate();
        decompose::VaeConfig v = vae;
        v.appliances = appliances;
        v.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

std::uint64_t RunConfig::stage_seed(const std::string& stage) const { return nn::derive_seed(seed, stage); }

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
        try {
            cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void apply_assignment(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("config: expected key=value, got '" + assignment + "'");
    cfg.set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

}  // namespace nilm::cli
