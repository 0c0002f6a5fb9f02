#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nilm/eval/benchmark.hpp"
#include "run_config.hpp"

namespace nilm::cli {

namespace fs = std::filesystem;

struct RunDir {
    fs::path root;

    fs::path dataset() const { return root / "dataset"; }
    fs::path checkpoints() const { return root / "checkpoints"; }
    fs::path reports() const { return root / "reports"; }
    fs::path signatures() const { return root / "signatures"; }
    fs::path config() const { return root / "config.cfg"; }
    fs::path manifest() const { return root / "manifest.json"; }
};

// Defaults, then <run>/config.cfg when present, then the overrides.
RunConfig load_run_config(const RunDir& dir, const std::vector<std::string>& overrides);

// dataset/index.csv lists `file,power_file,fs`; each recording is a CSV in the
// ingest format with an optional ground-truth power companion.
void write_dataset(const fs::path& dataset_dir, const std::vector<synth::RawRecording>& recordings);
std::vector<synth::RawRecording> read_dataset(const fs::path& dataset_dir);

struct DatasetSplit {
    eval::CycleSet train, test;
    std::size_t classes = 0;
};
// Preprocessed cycles split 8:2 (or cfg.split) by recording. Requires labels.
DatasetSplit load_split(const fs::path& dataset_dir, const RunConfig& cfg);

std::uint64_t fnv1a_file(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

// Writes config.cfg and manifest.json (config, root seed and the FNV-1a hash of
// every file under the run directory).
void finish_run(const RunDir& dir, const RunConfig& cfg);

}  // namespace nilm::cli
