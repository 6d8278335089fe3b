// SPDX-License-Identifier: Apache-2.0
//
// pass - pinching-antenna multi-user beamforming toolkit
//
// Monte-Carlo experiment runner: paired-seed realizations over one sweep axis, a small
// worker pool, schedule-independent CSV output and convergence traces.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "baselines.hpp"
#include "pdd.hpp"
#include "scenario.hpp"
#include "ws_unicast.hpp"

namespace pass {

enum class Method { WM, WD, WS, WSFast, FullDigital, Hybrid };

inline std::string method_name(Method m) {
    switch (m) {
    case Method::WM: return "wm";
    case Method::WD: return "wd";
    case Method::WS: return "ws";
    case Method::WSFast: return "ws-fast";
    case Method::FullDigital: return "fd";
    case Method::Hybrid: return "hybrid";
    }
    return "?";
}

inline Method parse_method(const std::string &s) {
    for (Method m : {Method::WM, Method::WD, Method::WS, Method::WSFast, Method::FullDigital, Method::Hybrid})
        if (method_name(m) == s) return m;
    throw std::invalid_argument("unknown method: " + s);
}

enum class SweepAxis { Power, Antennas, RegionWidth, WaveguideSpacing };

inline std::string axis_name(SweepAxis a) {
    switch (a) {
    case SweepAxis::Power: return "p_max_dbm";
    case SweepAxis::Antennas: return "n_pas";
    case SweepAxis::RegionWidth: return "s_x_m";
    case SweepAxis::WaveguideSpacing: return "w_m";
    }
    return "?";
}

struct ExperimentSpec {
    ScenarioConfig base;
    SweepAxis axis = SweepAxis::Power;
    std::vector<double> values;        // sweep points
    double power_dbm = 20.0;           // transmit power when the axis is not power
    std::vector<Method> methods;
    int realizations = 50;
    std::uint64_t base_seed = 1;       // realization r uses seed base_seed + r
    PddConfig pdd;
    MmfOptions mmf;
    bool keep_traces = false;

    void validate() const {
        if (realizations < 1) throw std::invalid_argument("need at least one realization");
        if (values.empty()) throw std::invalid_argument("no sweep values");
        if (methods.empty()) throw std::invalid_argument("no methods");
        pdd.validate();
    }

    std::uint64_t seed(int r) const { return base_seed + static_cast<std::uint64_t>(r); }
};

/// Scenario config and transmit power at one sweep point.
inline std::pair<ScenarioConfig, double> sweep_point(const ExperimentSpec &spec, double value) {
    ScenarioConfig cfg = spec.base;
    double p = spec.power_dbm;
    switch (spec.axis) {
    case SweepAxis::Power: p = value; break;
    case SweepAxis::Antennas:
        if (value < 1 || value != std::floor(value)) throw std::invalid_argument("antenna count must be a positive integer");
        cfg.n_pas = static_cast<int>(value);
        break;
    case SweepAxis::RegionWidth: cfg.s_x_m = value; break;
    case SweepAxis::WaveguideSpacing: cfg.w_m = value; break;
    }
    return {cfg, p};
}

struct ResultRow {
    std::string method;
    double value = 0.0;
    std::uint64_t seed = 0;
    double min_rate = 0.0;
    int outer_iterations = 0;
    int inner_iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
    bool capped = false;   // hit the outer iteration cap
    bool failed = false;
    std::string error;
    double wall_time_s = 0.0;
    std::vector<TraceRow> trace;
};

struct AggregateRow {
    std::string method;
    double value = 0.0;
    int count = 0;     // successful realizations
    int failures = 0;
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation
};

struct ResultTable {
    std::vector<ResultRow> rows;
    std::vector<AggregateRow> aggregate;
};

inline std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow> &rows) {
    std::map<std::pair<std::string, double>, std::vector<const ResultRow *>> groups;
    std::vector<std::pair<std::string, double>> order;
    for (const auto &r : rows) {
        auto key = std::make_pair(r.method, r.value);
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(&r);
    }
    std::vector<AggregateRow> out;
    for (const auto &key : order) {
        AggregateRow a{key.first, key.second};
        double sum = 0.0;
        for (const auto *r : groups[key]) {
            if (r->failed) ++a.failures;
            else ++a.count, sum += r->min_rate;
        }
        if (a.count > 0) {
            a.mean = sum / a.count;
            double ss = 0.0;
            for (const auto *r : groups[key])
                if (!r->failed) ss += (r->min_rate - a.mean) * (r->min_rate - a.mean);
            a.stddev = a.count > 1 ? std::sqrt(ss / (a.count - 1)) : 0.0;
        } else {
            a.mean = a.stddev = std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(a);
    }
    return out;
}

/// One method on one realization. Throws on solver or setup failure.
inline ResultRow run_method(Method m, const Scenario &s, const UserLayout &users, const PddConfig &pdd,
                            const MmfOptions &mmf, bool keep_trace) {
    ResultRow row;
    row.method = method_name(m);
    row.converged = true;
    switch (m) {
    case Method::WM:
    case Method::WD:
    case Method::WS: {
        const Structure st = m == Method::WM ? Structure::WM : m == Method::WD ? Structure::WD : Structure::WS;
        auto r = pdd_solve(s, users, st, pdd);
        row.min_rate = r.report.min_rate;
        row.outer_iterations = r.outer_iterations;
        row.inner_iterations = r.inner_iterations;
        row.final_residual = r.final_residual;
        row.converged = r.converged;
        row.capped = !r.converged && r.outer_iterations >= pdd.max_outer;
        if (keep_trace) row.trace = std::move(r.trace);
        break;
    }
    case Method::WSFast:
        row.min_rate = solve_unicast_ws(s, users).report.min_rate;
        break;
    case Method::FullDigital: {
        const auto r = fulldigital_ula(s, users, mmf);
        row.min_rate = r.report.min_rate;
        row.inner_iterations = r.iterations;
        break;
    }
    case Method::Hybrid:
        row.min_rate = hybrid_ula(s, users, mmf).report.min_rate;
        break;
    }
    return row;
}

/// Worker count from PASS_WORKERS, else the hardware concurrency.
inline int worker_count() {
    if (const char *env = std::getenv("PASS_WORKERS")) {
        char *end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n >= 1) return static_cast<int>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls job(i) for i in [0, count) on up to `workers` threads.
template <class Job> void parallel_for(int count, int workers, Job &&job) {
    std::atomic<int> next{0};
    auto loop = [&] {
        for (int i = next++; i < count; i = next++) job(i);
    };
    const int extra = std::min(workers, count) - 1;
    std::vector<std::thread> pool;
    for (int t = 0; t < extra; ++t) pool.emplace_back(loop);
    loop();
    for (auto &t : pool) t.join();
}

inline ResultTable run_experiment(const ExperimentSpec &spec, int workers = worker_count()) {
    spec.validate();
    struct Job {
        Method method;
        double value;
        int realization;
    };
    std::vector<Job> jobs;
    for (double v : spec.values)
        for (int r = 0; r < spec.realizations; ++r)
            for (Method m : spec.methods) jobs.push_back({m, v, r});

    ResultTable table;
    table.rows.resize(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), workers, [&](int i) {
        const Job &job = jobs[i];
        const std::uint64_t seed = spec.seed(job.realization);
        const auto t0 = std::chrono::steady_clock::now();
        ResultRow row;
        try {
            const auto [cfg, p_dbm] = sweep_point(spec, job.value);
            // placements depend on the seed and geometry only, so every method sees the same users
            const Scenario s = build_scenario(cfg, p_dbm);
            const UserLayout users = sample_users(cfg, seed);
            row = run_method(job.method, s, users, spec.pdd, spec.mmf, spec.keep_traces);
        } catch (const std::exception &e) {
            row = ResultRow{};
            row.failed = true;
            row.error = e.what();
            row.min_rate = std::numeric_limits<double>::quiet_NaN();
        }
        row.method = method_name(job.method);
        row.value = job.value;
        row.seed = seed;
        row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        table.rows[i] = std::move(row);
    });
    std::sort(table.rows.begin(), table.rows.end(), [](const ResultRow &a, const ResultRow &b) {
        return std::tie(a.method, a.value, a.seed) < std::tie(b.method, b.value, b.seed);
    });
    table.aggregate = aggregate_rows(table.rows);
    return table;
}

// ---------------------------------------------------------------------------
// Figure presets

struct FigurePreset {
    std::string id;
    SweepAxis axis = SweepAxis::Power;
    std::vector<double> values;
    std::vector<Method> methods;
    int users_per_group = 0; // 0 keeps the config value
    bool traces = false;
};

inline FigurePreset figure_preset(const std::string &id, const ScenarioConfig &cfg) {
    const std::vector<Method> pass_methods{Method::WM, Method::WD, Method::WS};
    const std::vector<Method> with_arrays{Method::WM, Method::WD, Method::WS, Method::FullDigital, Method::Hybrid};
    if (id == "3") return {id, SweepAxis::Power, {}, pass_methods, 0, true};
    if (id == "4a")
        return {id, SweepAxis::Power, cfg.p_max_dbm_list,
                {Method::WM, Method::WD, Method::WS, Method::WSFast, Method::FullDigital, Method::Hybrid}, 1, false};
    if (id == "4b") return {id, SweepAxis::Power, cfg.p_max_dbm_list, with_arrays, 0, false};
    if (id == "5") return {id, SweepAxis::Antennas, {4, 6, 8, 10, 12}, pass_methods, 0, false};
    if (id == "6") return {id, SweepAxis::RegionWidth, {2, 4, 6, 8, 10}, with_arrays, 0, false};
    if (id == "7") return {id, SweepAxis::WaveguideSpacing, {5, 10, 15, 20, 25, 30, 35, 40}, with_arrays, 0, false};
    throw std::invalid_argument("unknown figure: " + id);
}

/// Transmit power used when the sweep axis is not power: the largest configured value.
inline double fixed_power_dbm(const ScenarioConfig &cfg) {
    if (cfg.p_max_dbm_list.empty()) throw std::invalid_argument("p_max_dbm_list is empty");
    return *std::max_element(cfg.p_max_dbm_list.begin(), cfg.p_max_dbm_list.end());
}

inline ExperimentSpec figure_spec(const std::string &id, const ScenarioConfig &cfg, int realizations) {
    const FigurePreset f = figure_preset(id, cfg);
    ExperimentSpec spec;
    spec.base = cfg;
    if (f.users_per_group > 0) spec.base.g_users = f.users_per_group;
    spec.axis = f.axis;
    spec.power_dbm = fixed_power_dbm(cfg);
    spec.values = f.values.empty() ? std::vector<double>{spec.power_dbm} : f.values;
    spec.methods = f.methods;
    spec.realizations = realizations;
    spec.base_seed = cfg.seeds.empty() ? 1 : cfg.seeds.front();
    spec.keep_traces = f.traces;
    return spec;
}

// ---------------------------------------------------------------------------
// Output

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

/// Raw rows. Wall time is excluded so that reruns produce identical files.
inline void write_results_csv(std::ostream &os, const std::vector<ResultRow> &rows, const std::string &axis) {
    os << "method," << axis
       << ",seed,min_rate_bps_hz,outer_iterations,inner_iterations,final_residual,converged,capped,failed,error\n";
    for (const auto &r : rows) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << r.method << ',' << format_number(r.value) << ',' << r.seed << ',' << format_number(r.min_rate) << ','
           << r.outer_iterations << ',' << r.inner_iterations << ',' << format_number(r.final_residual) << ','
           << r.converged << ',' << r.capped << ',' << r.failed << ',' << err << '\n';
    }
}

inline void write_aggregate_csv(std::ostream &os, const std::vector<AggregateRow> &rows, const std::string &axis) {
    os << "method," << axis << ",count,failures,mean_min_rate_bps_hz,std_min_rate_bps_hz\n";
    for (const auto &a : rows)
        os << a.method << ',' << format_number(a.value) << ',' << a.count << ',' << a.failures << ','
           << format_number(a.mean) << ',' << format_number(a.stddev) << '\n';
}

inline void write_timings_csv(std::ostream &os, const std::vector<ResultRow> &rows, const std::string &axis) {
    os << "method," << axis << ",seed,wall_time_s\n";
    for (const auto &r : rows)
        os << r.method << ',' << format_number(r.value) << ',' << r.seed << ',' << format_number(r.wall_time_s)
           << '\n';
}

/// Both counters are kept: `iteration` counts inner steps across the whole run.
inline void write_trace_csv(std::ostream &os, const std::vector<TraceRow> &trace) {
    os << "group,outer,inner,iteration,min_rate_bps_hz,objective,max_residual,rho\n";
    int it = 0;
    for (const auto &t : trace)
        os << t.group << ',' << t.outer << ',' << t.inner << ',' << ++it << ',' << format_number(t.min_rate) << ','
           << format_number(t.objective) << ',' << format_number(t.max_residual) << ',' << format_number(t.rho)
           << '\n';
}

inline nlohmann::json to_json(const PddConfig &c) {
    return {{"initial_layout", c.initial_layout == InitialLayout::Uniform ? "uniform" : "user_centred"},
            {"residual_tol", c.residual_tol},
            {"improvement_tol", c.improvement_tol},
            {"initial_penalty", c.initial_penalty},
            {"relative_penalty", c.relative_penalty},
            {"penalty_shrink", c.penalty_shrink},
            {"residual_improvement", c.residual_improvement},
            {"max_outer", c.max_outer},
            {"max_inner", c.max_inner}};
}

inline nlohmann::json spec_json(const ExperimentSpec &spec) {
    nlohmann::json methods = nlohmann::json::array();
    for (Method m : spec.methods) methods.push_back(method_name(m));
    nlohmann::json scenario;
    to_json(scenario, spec.base);
    return {{"scenario", scenario},
            {"axis", axis_name(spec.axis)},
            {"values", spec.values},
            {"power_dbm", spec.power_dbm},
            {"methods", methods},
            {"realizations", spec.realizations},
            {"base_seed", spec.base_seed},
            {"pdd", to_json(spec.pdd)},
            {"mmf", {{"improvement_tol", spec.mmf.improvement_tol}, {"max_iterations", spec.mmf.max_iterations}}}};
}

inline std::string trace_file_name(const std::string &method, double value, std::uint64_t seed) {
    return method + "_" + format_number(value) + "_seed" + std::to_string(seed) + ".csv";
}

/// results.csv, results_agg.csv, timings.csv, config.json and traces/*.csv under `dir`.
inline void write_outputs(const std::filesystem::path &dir, const ExperimentSpec &spec, const ResultTable &table,
                          const nlohmann::json &extra = nlohmann::json::object()) {
    std::filesystem::create_directories(dir / "traces");
    const std::string axis = axis_name(spec.axis);
    auto open = [](const std::filesystem::path &p) {
        std::ofstream f(p);
        if (!f) throw std::runtime_error("cannot write " + p.string());
        return f;
    };
    {
        auto f = open(dir / "results.csv");
        write_results_csv(f, table.rows, axis);
    }
    {
        auto f = open(dir / "results_agg.csv");
        write_aggregate_csv(f, table.aggregate, axis);
    }
    {
        auto f = open(dir / "timings.csv");
        write_timings_csv(f, table.rows, axis);
    }
    {
        nlohmann::json j = spec_json(spec);
        for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
        auto f = open(dir / "config.json");
        f << j.dump(2) << '\n';
    }
    for (const auto &r : table.rows)
        if (!r.trace.empty()) {
            auto f = open(dir / "traces" / trace_file_name(r.method, r.value, r.seed));
            write_trace_csv(f, r.trace);
        }
}

/// Solves one PDD structure on one realization and writes its per-iteration trace.
inline std::vector<TraceRow> emit_convergence_trace(Method method, const ScenarioConfig &cfg, double p_max_dbm,
                                                    std::uint64_t seed, const std::filesystem::path &file,
                                                    const PddConfig &pdd = {}) {
    if (method != Method::WM && method != Method::WD && method != Method::WS)
        throw std::invalid_argument("traces exist for the iterative structures only");
    const Scenario s = build_scenario(cfg, p_max_dbm);
    const UserLayout users = sample_users(cfg, seed);
    auto row = run_method(method, s, users, pdd, {}, true);
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream f(file);
    if (!f) throw std::runtime_error("cannot write " + file.string());
    write_trace_csv(f, row.trace);
    return row.trace;
}

} // namespace pass
