#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nilm/decompose/vae.hpp"
#include "nilm/eval/metrics.hpp"
#include "nilm/preprocess/pipeline.hpp"
#include "nilm/synth/dataset.hpp"
#include "nilm/train/train.hpp"

namespace nilm::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Every tunable of the pipeline. One root seed; each stage derives its own.
struct RunConfig {
    std::uint64_t seed = 1;

    std::size_t appliances = 6;  // leading entries of the standard appliance set
    synth::WindowSpec data;
    double split = 0.8;
    double ingest_fs = 0.0;  // 0 infers the rate from the timestamps

    preprocess::PreprocessConfig pre;
    train::ModelConfig model;
    train::TrainConfig train;
    double threshold = 0.5;

    bool baseline_enabled = true;
    eval::BaselineConfig baseline;

    decompose::VaeConfig vae;
    std::string mask = "predicted";  // or "truth"

    RunConfig();

    // Throws ConfigError for an unknown key or a malformed value.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    std::vector<std::string> keys() const;
    // Cross-field checks; runs before any work.
    void validate() const;
    // Sorted "key = value" lines, parseable by load().
    std::string to_text() const;
    std::map<std::string, std::string> to_map() const;

    std::uint64_t stage_seed(const std::string& stage) const;
};

// `key = value` lines; '#' starts a comment.
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);
// "key=value" assignment from the command line.
void apply_assignment(RunConfig& cfg, const std::string& assignment);

}  // namespace nilm::cli
