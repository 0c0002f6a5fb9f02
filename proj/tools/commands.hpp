#pragma once

#include <string>
#include <vector>

#include "run_dir.hpp"

namespace nilm::cli {

struct Options {
    fs::path run;
    fs::path config_file;
    std::vector<std::string> overrides;
    std::vector<fs::path> inputs;       // ingest
    std::vector<fs::path> power_files;  // ingest
    fs::path data;                      // learn-new: dataset directory of the new task
    std::size_t window = 0, cycle = 0;  // render-signature
};

void cmd_simulate(const Options& o);
void cmd_ingest(const Options& o);
void cmd_pretrain(const Options& o);
void cmd_train(const Options& o);
void cmd_eval(const Options& o);
void cmd_learn_new(const Options& o);
void cmd_decompose(const Options& o);
void cmd_render_signature(const Options& o);
// Returns the number of failed checks.
int cmd_selftest();

}  // namespace nilm::cli
