#include <cstdio>
#include <exception>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
    using namespace nilm::cli;
    CLI::App app{"Non-intrusive load monitoring pipeline"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    Options o;

    auto run_opts = [&](CLI::App* sub) {
        sub->add_option("--run", o.run, "Run directory")->required();
        sub->add_option("--set", o.overrides, "Config override key=value (repeatable)");
    };
    auto* simulate = app.add_subcommand("simulate", "Generate a labelled synthetic dataset");
    simulate->add_option("--out", o.run, "Run directory")->required();
    simulate->add_option("--config", o.config_file, "key = value config file")->check(CLI::ExistingFile);
    simulate->add_option("--set", o.overrides, "Config override key=value (repeatable)");

    auto* ingest = app.add_subcommand("ingest", "Import recordings in the t,current,voltage[,label_k] CSV format");
    ingest->add_option("--out", o.run, "Run directory")->required();
    ingest->add_option("--input", o.inputs, "Recording CSV (repeatable)")->required();
    ingest->add_option("--power", o.power_files, "Ground-truth power CSV per input (optional)");
    ingest->add_option("--config", o.config_file, "key = value config file")->check(CLI::ExistingFile);
    ingest->add_option("--set", o.overrides, "Config override key=value (repeatable)");

    auto* pretrain = app.add_subcommand("pretrain", "Self-supervised half-cycle pretraining");
    run_opts(pretrain);
    auto* train = app.add_subcommand("train", "Supervised multi-label training");
    run_opts(train);
    auto* evaluate = app.add_subcommand("eval", "Metric report on the test split, with the raw-sequence baseline");
    run_opts(evaluate);
    auto* learn = app.add_subcommand("learn-new", "Continual update on a new dataset with EWC");
    run_opts(learn);
    learn->add_option("--data", o.data, "Dataset directory of the new task")->required();
    auto* decomp = app.add_subcommand("decompose", "Per-appliance power and energy of the test split");
    run_opts(decomp);
    auto* render = app.add_subcommand("render-signature", "Write the signature channels of one cycle as PGM images");
    run_opts(render);
    render->add_option("--window", o.window, "Recording index");
    render->add_option("--cycle", o.cycle, "Cycle index within the recording");
    auto* selftest = app.add_subcommand("selftest", "Run the built-in property checks");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*simulate) cmd_simulate(o);
        else if (*ingest) cmd_ingest(o);
        else if (*pretrain) cmd_pretrain(o);
        else if (*train) cmd_train(o);
        else if (*evaluate) cmd_eval(o);
        else if (*learn) cmd_learn_new(o);
        else if (*decomp) cmd_decompose(o);
        else if (*render) cmd_render_signature(o);
        else if (*selftest) return cmd_selftest() == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
