// bpsim: simulate SPDC photon-counting frame stacks and recover spatial
// entanglement quantities from them. See README.md for the workflow.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "biphoton/config.hpp"
#include "biphoton/pipeline.hpp"
#include "biphoton/results_io.hpp"
#include "biphoton/simulator.hpp"
#include "biphoton/stack_io.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::uint64_t frames = 0;
    bool frames_set = false;
    unsigned workers = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Config JSON path (defaults used if omitted)");
    cmd->add_option("--seed", opts.seed, "Override the config seed")
        ->each([&](const std::string&) { opts.seed_set = true; });
    cmd->add_option("--frames", opts.frames, "Override the signal frame count")
        ->each([&](const std::string&) { opts.frames_set = true; });
    cmd->add_option("--workers", opts.workers, "Worker threads (default: hardware)");
}

biphoton::ExperimentConfig load(const CommonOpts& opts) {
    biphoton::ExperimentConfig cfg;
    if (!opts.config_path.empty()) cfg = biphoton::load_config(opts.config_path);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (opts.frames_set) cfg.signal_frames = opts.frames;
    cfg.validate();
    return cfg;
}

unsigned workers_of(const CommonOpts& opts) {
    return opts.workers == 0 ? biphoton::default_workers() : opts.workers;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"biphoton frame-stack simulator and entanglement analysis"};
    app.require_subcommand(1);

    CommonOpts sim_opts, dark_opts, analyze_opts, pipeline_opts, sweep_opts, theory_opts;

    auto* sim = app.add_subcommand("simulate", "Simulate a signal stack and write a BPFS file");
    std::string sim_mode = "near", sim_out;
    sim->add_option("--mode", sim_mode, "Imaging configuration: near | far")
        ->check(CLI::IsMember({"near", "far"}));
    sim->add_option("--out", sim_out, "Output BPFS path")->required();
    add_common(sim, sim_opts);

    auto* dark = app.add_subcommand("simulate-dark", "Simulate a shutter-closed stack");
    std::string dark_out;
    dark->add_option("--out", dark_out, "Output BPFS path")->required();
    add_common(dark, dark_opts);

    auto* analyze = app.add_subcommand("analyze", "Analyze existing BPFS stacks");
    std::string an_dark, an_near, an_far, an_out;
    bool an_plots = false;
    analyze->add_option("--dark", an_dark, "Dark stack path")->required();
    analyze->add_option("--near", an_near, "Near-field stack path")->required();
    analyze->add_option("--far", an_far, "Far-field stack path")->required();
    analyze->add_option("--out", an_out, "Output directory")->required();
    analyze->add_flag("--plots", an_plots, "Also write SVG plots");
    add_common(analyze, analyze_opts);

    auto* pipeline = app.add_subcommand("pipeline", "Simulate and analyze in one run");
    std::string pl_out;
    bool pl_plots = false;
    pipeline->add_option("--out", pl_out, "Output directory")->required();
    pipeline->add_flag("--plots", pl_plots, "Also write SVG plots");
    add_common(pipeline, pipeline_opts);

    auto* sweep = app.add_subcommand("sweep", "Pipeline once per asymmetry value");
    std::string sw_out;
    std::vector<double> sw_betas;
    bool sw_plots = false;
    sweep->add_option("--betas", sw_betas, "Asymmetry values in (0, 1]")
        ->required()
        ->delimiter(',');
    sweep->add_option("--out", sw_out, "Output directory")->required();
    sweep->add_flag("--plots", sw_plots, "Also write SVG plots");
    add_common(sweep, sweep_opts);

    auto* theory = app.add_subcommand("theory", "Print closed-form model predictions");
    std::string th_out;
    theory->add_option("--out", th_out, "Write theory.json here instead of stdout");
    add_common(theory, theory_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) {
            const auto cfg = load(sim_opts);
            const auto model = cfg.model();
            const auto optics = sim_mode == "near" ? cfg.near_optics() : cfg.far_optics();
            const auto kind = sim_mode == "near" ? biphoton::StackKind::Near
                                                 : biphoton::StackKind::Far;
            const std::uint64_t seed = biphoton::mix64(
                cfg.seed ^ (kind == biphoton::StackKind::Near ? biphoton::kNearSeedSalt
                                                              : biphoton::kFarSeedSalt));
            biphoton::write_stack_stream(
                sim_out, cfg.camera.width_px, cfg.camera.height_px, kind, seed,
                cfg.signal_frames,
                [&](std::size_t i) {
                    return biphoton::simulate_frame(model, cfg.camera, optics, cfg.source, seed, i);
                },
                workers_of(sim_opts));
            std::cout << "wrote " << cfg.signal_frames << " " << sim_mode << "-field frames to "
                      << sim_out << "\n";
        } else if (dark->parsed()) {
            biphoton::ExperimentConfig cfg;
            if (!dark_opts.config_path.empty()) cfg = biphoton::load_config(dark_opts.config_path);
            if (dark_opts.seed_set) cfg.seed = dark_opts.seed;
            if (dark_opts.frames_set) cfg.dark_frames = dark_opts.frames; // frame count of this stack
            cfg.validate();
            const std::uint64_t seed = biphoton::mix64(cfg.seed ^ biphoton::kDarkSeedSalt);
            biphoton::write_stack_stream(
                dark_out, cfg.camera.width_px, cfg.camera.height_px, biphoton::StackKind::Dark,
                seed, cfg.dark_frames,
                [&](std::size_t i) { return biphoton::simulate_dark_frame(cfg.camera, seed, i); },
                workers_of(dark_opts));
            std::cout << "wrote " << cfg.dark_frames << " dark frames to " << dark_out << "\n";
        } else if (analyze->parsed()) {
            const auto cfg = load(analyze_opts);
            const auto dark_src =
                biphoton::file_source(an_dark, cfg.camera, biphoton::StackKind::Dark);
            const auto near_src =
                biphoton::file_source(an_near, cfg.camera, biphoton::StackKind::Near);
            const auto far_src =
                biphoton::file_source(an_far, cfg.camera, biphoton::StackKind::Far);
            const auto report =
                biphoton::run_analysis(cfg, dark_src, near_src, far_src, workers_of(analyze_opts));
            biphoton::emit_outputs(report, an_out, an_plots);
            std::cout << "analysis written to " << an_out << "\n";
        } else if (pipeline->parsed()) {
            const auto cfg = load(pipeline_opts);
            const auto report = biphoton::run_pipeline(cfg, workers_of(pipeline_opts));
            biphoton::emit_outputs(report, pl_out, pl_plots);
            std::cout << "pipeline results written to " << pl_out << "\n";
        } else if (sweep->parsed()) {
            const auto cfg = load(sweep_opts);
            const auto reports = biphoton::sweep_beta(cfg, sw_betas, workers_of(sweep_opts));
            biphoton::emit_sweep_outputs(reports, sw_out, sw_plots);
            std::cout << "sweep results written to " << sw_out << "\n";
        } else if (theory->parsed()) {
            const auto cfg = load(theory_opts);
            const auto t = biphoton::theory_block(cfg.pump, cfg.crystal_spec());
            nlohmann::json j{{"schema", "bpsim-theory/1"},
                             {"beta", t.beta},
                             {"sigma_minus", biphoton::results::length_json(t.sigma_minus_m)},
                             {"sigma_plus_x", biphoton::results::length_json(t.sigma_plus_x_m)},
                             {"sigma_plus_y", biphoton::results::length_json(t.sigma_plus_y_m)},
                             {"delta_x", biphoton::results::length_json(t.delta_x_m)},
                             {"delta_y", biphoton::results::length_json(t.delta_y_m)},
                             {"delta_px", biphoton::results::momentum_json(t.delta_px_hbar_per_m)},
                             {"delta_py", biphoton::results::momentum_json(t.delta_py_hbar_per_m)},
                             {"gamma_x", biphoton::results::action_json(t.gamma_x_hbar)},
                             {"gamma_y", biphoton::results::action_json(t.gamma_y_hbar)},
                             {"modes_x", t.modes_x},
                             {"modes_y", t.modes_y},
                             {"entangled_x", biphoton::epr_entangled(t.gamma_x_hbar)},
                             {"entangled_y", biphoton::epr_entangled(t.gamma_y_hbar)}};
            if (th_out.empty()) {
                std::cout << j.dump(2) << "\n";
            } else {
                std::error_code ec;
                std::filesystem::create_directories(th_out, ec);
                std::ofstream os(std::filesystem::path(th_out) / "theory.json");
                os << j.dump(2) << "\n";
                if (!os) throw biphoton::IoError("cannot write theory.json");
            }
        }
    } catch (const biphoton::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
