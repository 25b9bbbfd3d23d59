// mxg: command line front end for the momentum / xG pipeline.
//
//   mxg synth --out run1
//   mxg pipeline --config cfg.json --set lstm.max_epochs=5 --threads 4
//   mxg momentum --score-only --model fixtures/appendix_a.json --out run1

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "mxg/common.hpp"
#include "pipeline.hpp"

namespace {

int exit_code_for(const mxg::Error& e) {
    if (dynamic_cast<const mxg::ConfigError*>(&e)) {
        return 2;
    }
    if (dynamic_cast<const mxg::DependencyError*>(&e)) {
        return 4;
    }
    return 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Momentum, expected goals and formation analysis for hockey event data"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
    int threads = 0;
    long long seed = -1;
    bool score_only = false;
    bool sweep = false;
    std::string model_path;
    std::string input_path;
    std::string input_format;

    std::vector<std::string> stages = mxg::pipeline::stage_names();
    stages.push_back("pipeline");
    for (const auto& s : stages) {
        auto* sub = app.add_subcommand(s, s == "pipeline" ? "run every stage in order" : "run the " + s + " stage");
        sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--set", sets, "override one key, e.g. --set xg.max_depth=6");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "master seed")->check(CLI::NonNegativeNumber);
        if (s == "momentum") {
            sub->add_flag("--score-only", score_only, "score windows with a fixed model");
            sub->add_option("--model", model_path, "model JSON for --score-only");
        }
        if (s == "xg" || s == "pipeline") {
            sub->add_flag("--sweep", sweep, "grid search over depth, learning rate and rounds");
        }
        if (s == "ingest" || s == "pipeline") {
            sub->add_option("--input", input_path, "event file (csv or jsonl)");
            sub->add_option("--format", input_format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const std::string stage = app.get_subcommands().front()->get_name();
    try {
        // Flags win over --set, which wins over the file.
        if (!out_dir.empty()) {
            sets.push_back("output_dir=" + mxg::pipeline::Json(out_dir).dump());
        }
        if (threads > 0) {
            sets.push_back("threads=" + std::to_string(threads));
        }
        if (seed >= 0) {
            sets.push_back("seed=" + std::to_string(seed));
        }
        if (sweep) {
            sets.push_back("xg.sweep=true");
        }
        if (!input_path.empty()) {
            sets.push_back("input.events=" + mxg::pipeline::Json(input_path).dump());
        }
        if (!input_format.empty()) {
            sets.push_back("input.format=" + mxg::pipeline::Json(input_format).dump());
        }
        std::optional<std::filesystem::path> file;
        if (!config_path.empty()) {
            file = config_path;
        }
        const auto cfg = mxg::pipeline::resolve_config(file, sets);
        mxg::pipeline::StageOptions opt;
        opt.score_only = score_only;
        if (!model_path.empty()) {
            opt.model_path = model_path;
        }
        mxg::pipeline::run(stage, cfg, opt);
        std::fprintf(stderr, "mxg %s: done, artifacts in %s\n", stage.c_str(), cfg["output_dir"].get<std::string>().c_str());
        return 0;
    } catch (const mxg::Error& e) {
        std::fprintf(stderr, "mxg %s: error: %s\n", stage.c_str(), e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mxg %s: error: %s\n", stage.c_str(), e.what());
        return 3;
    }
}
