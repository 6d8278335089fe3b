// SPDX-License-Identifier: Apache-2.0
//
// Default multicast scenario at 20 dBm: the three pinching structures next to the fixed arrays,
// then the unicast switching shortcut with one user per waveguide.

#include <cstdio>

#include <pass/pass.hpp>

int main() {
    pass::ScenarioConfig cfg; // K = 2 waveguides, 2 users per group, N = 8
    const pass::Scenario s = pass::build_scenario(cfg, 20.0);
    const pass::UserLayout users = pass::sample_users(cfg, 7);

    for (auto st : {pass::Structure::WM, pass::Structure::WD, pass::Structure::WS}) {
        const auto r = pass::pdd_solve(s, users, st);
        std::printf("%-3s min rate %7.3f bps/Hz  (%d outer, residual %.1e)\n", pass::to_string(st).c_str(),
                    r.report.min_rate, r.outer_iterations, r.final_residual);
    }
    std::printf("fully-digital ULA  %7.3f bps/Hz\n", pass::fulldigital_ula(s, users).report.min_rate);
    std::printf("hybrid ULA         %7.3f bps/Hz\n", pass::hybrid_ula(s, users).report.min_rate);

    cfg.g_users = 1;
    const pass::UserLayout unicast = pass::sample_users(cfg, 7);
    const auto fast = pass::solve_unicast_ws(s, unicast);
    std::printf("unicast switching  %7.3f bps/Hz  (time shares %.3f / %.3f)\n", fast.report.min_rate,
                fast.time_shares[0], fast.time_shares[1]);
}
