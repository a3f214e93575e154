// geocsi command-line driver.
//
//   geocsi <stage> --config run.cfg [--out-dir DIR] [--seed N] [--origin x,y,z] [--force]
//   geocsi run --config run.cfg --stages preprocess,trace,cluster
//   geocsi plotdata --config run.cfg --kind validity [--output file.csv]
//
// Exit status: 0 on success, 2 for a dependency error, 1 for anything else.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geocsi/pipeline.hpp"

namespace {

struct CommonOptions {
    std::string config;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> origin;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "Run configuration file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out-dir", o.out_dir, "Artifact directory (default: out_dir from the config, else ./artifacts)");
    cmd->add_option("--seed", o.seed, "Root seed, overrides the config");
    cmd->add_option("--origin", o.origin, "Scene origin x,y,z in meters, overrides the config");
    cmd->add_flag("--force", o.force, "Re-run even when up to date or upstream is stale");
}

std::vector<geocsi::Stage> parse_stage_list(const std::string& text) {
    std::vector<geocsi::Stage> out;
    if (text == "all") return {geocsi::kAllStages.begin(), geocsi::kAllStages.end()};
    for (const auto& name : geocsi::split_csv_line(text)) out.push_back(geocsi::parse_stage(geocsi::KeyValueConfig::trim(name)));
    return out;
}

geocsi::Pipeline make_pipeline(const CommonOptions& o) {
    auto raw = geocsi::KeyValueConfig::load(o.config);
    std::filesystem::path dir = o.out_dir;
    if (dir.empty()) dir = raw.has("out_dir") ? raw.get_path("out_dir") : std::filesystem::path("artifacts");
    auto cfg = geocsi::RunConfig::from(std::move(raw), o.seed, o.origin);
    return geocsi::Pipeline(std::move(cfg), dir, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geometry-based group CSI toolkit"};
    app.require_subcommand(1);

    std::vector<std::pair<CLI::App*, geocsi::Stage>> stage_cmds;
    std::vector<CommonOptions> opts(geocsi::kAllStages.size() + 1);
    std::size_t i = 0;
    for (geocsi::Stage s : geocsi::kAllStages) {
        if (s == geocsi::Stage::PlotData) continue;
        auto* cmd = app.add_subcommand(geocsi::stage_name(s), std::string("Run the ") + geocsi::stage_name(s) + " stage");
        add_common(cmd, opts[i++]);
        stage_cmds.emplace_back(cmd, s);
    }

    CommonOptions& plot_opts = opts[i++];
    std::string kind, output;
    auto* plot = app.add_subcommand("plotdata", "Emit plot tables (all kinds, or one with --kind)");
    add_common(plot, plot_opts);
    plot->add_option("--kind", kind, "validity, zones, sumrate or clusters");
    plot->add_option("--output", output, "Write the table here instead of stdout");

    CommonOptions& run_opts = opts[i++];
    std::string stages = "all";
    auto* run = app.add_subcommand("run", "Run several stages in pipeline order");
    add_common(run, run_opts);
    run->add_option("--stages", stages, "Comma-separated stage names, or 'all'");

    CLI11_PARSE(app, argc, argv);

    try {
        for (std::size_t k = 0; k < stage_cmds.size(); ++k) {
            if (!stage_cmds[k].first->parsed()) continue;
            auto p = make_pipeline(opts[k]);
            p.run(stage_cmds[k].second, opts[k].force);
        }
        if (plot->parsed()) {
            auto p = make_pipeline(plot_opts);
            if (kind.empty()) {
                p.run(geocsi::Stage::PlotData, plot_opts.force);
            } else if (output.empty()) {
                p.emit_plot_data(kind, std::cout);
            } else {
                std::ostringstream table;
                p.emit_plot_data(kind, table);
                geocsi::write_file(output, table.str());
            }
        }
        if (run->parsed()) {
            auto p = make_pipeline(run_opts);
            p.run_all(parse_stage_list(stages), run_opts.force);
        }
    } catch (const geocsi::DependencyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
