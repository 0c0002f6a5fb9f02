#include "run_dir.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace nilm::cli {

RunConfig load_run_config(const RunDir& dir, const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (fs::exists(dir.config())) load_config_file(cfg, dir.config());
    for (const auto& a : overrides) apply_assignment(cfg, a);
    cfg.validate();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_dataset(const fs::path& dir, const std::vector<synth::RawRecording>& recordings) {
    fs::create_directories(dir);
    std::string index = "file,power_file,fs\n";
    for (std::size_t w = 0; w < recordings.size(); ++w) {
        char name[64];
        std::snprintf(name, sizeof name, "window_%04zu", w);
        const std::string file = std::string(name) + ".csv";
        std::string power;
        synth::write_csv(recordings[w], dir / file);
        if (recordings[w].has_power()) {
            power = std::string(name) + ".power.csv";
            synth::write_power_csv(recordings[w], dir / power);
        }
        char fs_text[64];
        std::snprintf(fs_text, sizeof fs_text, "%.17g", recordings[w].fs);
        index += file + "," + power + "," + fs_text + "\n";
    }
    write_text(dir / "index.csv", index);
}

std::vector<synth::RawRecording> read_dataset(const fs::path& dir) {
    const fs::path index = dir / "index.csv";
    std::ifstream in(index);
    if (!in) throw std::runtime_error("missing dataset file " + index.string() + " (run simulate or ingest first)");
    std::string line;
    std::getline(in, line);
    if (line != "file,power_file,fs") throw synth::ParseError(index, 1, "expected header file,power_file,fs");
    std::vector<synth::RawRecording> out;
    for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string file, power, fs_text;
        if (!std::getline(ss, file, ',') || !std::getline(ss, power, ',') || !std::getline(ss, fs_text))
            throw synth::ParseError(index, line_no, "expected three fields");
        double rate = 0.0;
        try {
            rate = std::stod(fs_text);
        } catch (const std::exception&) {
            throw synth::ParseError(index, line_no, "bad sampling rate '" + fs_text + "'");
        }
        if (!fs::exists(dir / file)) throw std::runtime_error("missing dataset file " + (dir / file).string());
        auto rec = synth::ingest_csv(dir / file, rate);
        if (!power.empty()) synth::read_power_csv(dir / power, rec);
        out.push_back(std::move(rec));
    }
    if (out.empty()) throw std::runtime_error("dataset " + index.string() + " lists no recordings");
    return out;
}

DatasetSplit load_split(const fs::path& dataset_dir, const RunConfig& cfg) {
    const auto recordings = read_dataset(dataset_dir);
    DatasetSplit out;
    out.classes = recordings.front().num_appliances();
    for (const auto& r : recordings) {
        if (!r.has_labels()) throw std::runtime_error("dataset " + dataset_dir.string() + " has an unlabelled recording");
        if (r.num_appliances() != out.classes) throw std::runtime_error("dataset " + dataset_dir.string() + " mixes label counts");
    }
    if (recordings.size() < 2) throw std::runtime_error("dataset " + dataset_dir.string() + " needs at least two recordings to split");
    const auto idx = synth::split_indices(recordings.size(), cfg.split, cfg.stage_seed("split"));
    for (std::size_t w : idx.train) out.train.append(eval::cycles_from_recording(recordings[w], cfg.pre, w));
    for (std::size_t w : idx.test) out.test.append(eval::cycles_from_recording(recordings[w], cfg.pre, w));
    if (out.train.size() == 0 || out.test.size() == 0) throw std::runtime_error("dataset " + dataset_dir.string() + " yields no complete cycles");
    return out;
}

std::uint64_t fnv1a_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

void finish_run(const RunDir& dir, const RunConfig& cfg) {
    write_text(dir.config(), cfg.to_text());
    nlohmann::ordered_json m;
    m["seed"] = cfg.seed;
    m["config"] = cfg.to_map();
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir.root))
        if (e.is_regular_file() && e.path() != dir.manifest()) files.push_back(fs::relative(e.path(), dir.root).generic_string());
    std::sort(files.begin(), files.end());
    auto& artifacts = m["artifacts"] = nlohmann::ordered_json::object();
    for (const auto& f : files) {
        char hex[32];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a_file(dir.root / f)));
        artifacts[f] = std::string("fnv1a64:") + hex;
    }
    write_text(dir.manifest(), m.dump(2) + "\n");
}

}  // namespace nilm::cli
