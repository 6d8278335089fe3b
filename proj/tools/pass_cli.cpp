// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: solve, sweep and trace.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <pass/pass.hpp>

namespace {

pass::ScenarioConfig load_config(const std::string &path) {
    pass::ScenarioConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config " + path);
    pass::from_json(nlohmann::json::parse(f), cfg);
    return cfg;
}

void print_summary(const pass::ResultTable &t, const std::string &axis) {
    std::printf("%-8s %12s %6s %5s %10s %10s\n", "method", axis.c_str(), "count", "fail", "mean", "std");
    for (const auto &a : t.aggregate)
        std::printf("%-8s %12g %6d %5d %10.4f %10.4f\n", a.method.c_str(), a.value, a.count, a.failures, a.mean,
                    a.stddev);
    for (const auto &r : t.rows)
        if (r.failed)
            std::fprintf(stderr, "failed: %s %g seed %llu: %s\n", r.method.c_str(), r.value,
                         static_cast<unsigned long long>(r.seed), r.error.c_str());
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Pinching-antenna multi-user beamforming"};
    app.require_subcommand(1);

    std::string structure, config_path, figure, out_dir;
    std::uint64_t seed = 1;
    int realizations = 50;
    bool seed_given = false;

    const std::vector<std::string> structures{"wm", "wd", "ws", "ws-fast"};

    auto *solve = app.add_subcommand("solve", "Solve one realization at every configured power");
    solve->add_option("--structure", structure, "Transmission structure")
        ->required()
        ->check(CLI::IsMember(structures));
    solve->add_option("--config", config_path, "Scenario JSON")->check(CLI::ExistingFile);
    solve->add_option("--seed", seed, "Realization seed")->required();
    solve->add_option("--out", out_dir, "Output directory")->required();

    auto *sweep = app.add_subcommand("sweep", "Monte-Carlo sweep for one figure");
    sweep->add_option("--figure", figure, "Figure preset")
        ->required()
        ->check(CLI::IsMember({"3", "4a", "4b", "5", "6", "7"}));
    sweep->add_option("--config", config_path, "Scenario JSON")->check(CLI::ExistingFile);
    sweep->add_option("--realizations", realizations, "Realizations per sweep point")->check(CLI::PositiveNumber);
    sweep->add_option("--out", out_dir, "Output directory")->required();

    auto *trace = app.add_subcommand("trace", "Convergence trace of one iterative structure");
    trace->add_option("--structure", structure, "Transmission structure")
        ->required()
        ->check(CLI::IsMember({"wm", "wd", "ws"}));
    trace->add_option("--config", config_path, "Scenario JSON")->check(CLI::ExistingFile);
    trace->add_option("--seed", seed, "Realization seed (default: first configured seed)")
        ->each([&](const std::string &) { seed_given = true; });
    trace->add_option("--out", out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const pass::ScenarioConfig cfg = load_config(config_path);
        const std::filesystem::path out(out_dir);
        const int workers = pass::worker_count();

        if (*solve) {
            pass::ExperimentSpec spec;
            spec.base = cfg;
            spec.axis = pass::SweepAxis::Power;
            spec.values = cfg.p_max_dbm_list;
            spec.methods = {pass::parse_method(structure)};
            spec.realizations = 1;
            spec.base_seed = seed;
            spec.keep_traces = true;
            const auto table = pass::run_experiment(spec, workers);
            pass::write_outputs(out, spec, table, {{"command", "solve"}});
            print_summary(table, pass::axis_name(spec.axis));
        } else if (*sweep) {
            const auto spec = pass::figure_spec(figure, cfg, realizations);
            const auto table = pass::run_experiment(spec, workers);
            pass::write_outputs(out, spec, table, {{"command", "sweep"}, {"figure", figure}});
            print_summary(table, pass::axis_name(spec.axis));
        } else {
            if (!seed_given) seed = cfg.seeds.empty() ? 1 : cfg.seeds.front();
            const double p = pass::fixed_power_dbm(cfg);
            const auto method = pass::parse_method(structure);
            const auto file = out / "traces" / pass::trace_file_name(structure, p, seed);
            const auto rows = pass::emit_convergence_trace(method, cfg, p, seed, file);
            nlohmann::json j;
            pass::to_json(j, cfg);
            std::ofstream(out / "config.json")
                << nlohmann::json{{"command", "trace"}, {"structure", structure}, {"seed", seed}, {"power_dbm", p},
                                  {"scenario", j}, {"pdd", pass::to_json(pass::PddConfig{})}}
                       .dump(2)
                << '\n';
            if (!rows.empty())
                std::printf("%zu iterations, final min rate %.4f bps/Hz, final residual %.3e\n", rows.size(),
                            rows.back().min_rate, rows.back().max_residual);
            std::printf("wrote %s\n", file.string().c_str());
        }
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
