// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <pass/pdd.hpp>
#include <pass/rates.hpp>
#include <pass/scenario.hpp>

#include <cmath>
#include <numbers>

using Catch::Approx;
using pass::cd;

namespace {

Eigen::MatrixXcd random_complex(int rows, int cols, pass::Rng &rng) {
    Eigen::MatrixXcd M(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) M(i, j) = cd(rng.normal(), rng.normal());
    return M;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

/// Single waveguide, single antenna, single user.
pass::ScenarioConfig single_config() {
    pass::ScenarioConfig cfg;
    cfg.k_waveguides = 1;
    cfg.n_pas = 1;
    cfg.g_users = 1;
    return cfg;
}

pass::AntennaSurrogate random_surrogate(pass::Rng &rng, double xt, double &lo, double &hi) {
    const double k1 = 2.0 * std::numbers::pi / 0.0107, k2 = 1.4 * k1;
    const double rho = std::pow(10.0, rng.uniform(-4, 0));
    pass::AntennaSurrogate s(rho, k1, k2, xt);
    const int users = 1 + static_cast<int>(rng.uniform(0, 4));
    for (int j = 0; j < users; ++j) {
        const cd u = std::polar(rng.uniform(0.05, 0.5), rng.uniform(-3.2, 3.2));
        const cd v = std::polar(rng.uniform(0.1, 2.0), rng.uniform(-3.2, 3.2));
        const double ux = rng.uniform(0, 10), dy = rng.uniform(-5, 5);
        const double r = std::sqrt((xt - ux) * (xt - ux) + dy * dy + 9.0);
        // phase target near the true phase at x_t so both branches are exercised
        const double s_target = k1 * r + k2 * xt + rng.uniform(-50, 50);
        s.add_user({ux, dy * dy + 9.0, std::norm(u), (std::conj(u) * v).real(), std::norm(v), s_target});
    }
    lo = 0.0;
    hi = 10.0;
    return s;
}

} // namespace

TEST_CASE("quadratic transform at the closed-form multiplier equals the SINR") {
    pass::Rng rng(11);
    for (int inst = 0; inst < 1000; ++inst) {
        const int K = 1 + inst % 4, S = 1 + (inst / 4) % 3, J = 1 + inst % 5;
        const Eigen::MatrixXcd H = random_complex(J, K, rng), W = random_complex(K, S, rng);
        std::vector<int> stream;
        std::vector<double> noise;
        for (int j = 0; j < J; ++j) {
            stream.push_back(j % S);
            noise.push_back(rng.uniform(0.01, 2.0));
        }
        const auto mu = pass::mu_update(H, W, stream, noise);
        const auto sinr = pass::system_sinr(H, W, stream, noise);
        for (int j = 0; j < J; ++j) {
            const double y = pass::transform_value(mu(j), H.row(j), W, stream[j], noise[j]);
            REQUIRE(std::abs(y - sinr[j]) <= 1e-9 * std::max(1.0, sinr[j]));
            // any other multiplier gives a lower bound
            const cd other = mu(j) + cd(rng.normal(), rng.normal()) * 0.1 * (std::abs(mu(j)) + 1e-3);
            REQUIRE(pass::transform_value(other, H.row(j), W, stream[j], noise[j]) <= sinr[j] + 1e-12);
        }
    }
}

TEST_CASE("transform quadratic in vec(W) reproduces the scalar transform") {
    pass::Rng rng(12);
    for (int inst = 0; inst < 50; ++inst) {
        const int A = 1 + inst % 4, S = 1 + inst % 3;
        const Eigen::RowVectorXcd h = random_complex(1, A, rng);
        const Eigen::MatrixXcd W = random_complex(A, S, rng);
        const cd mu(rng.normal(), rng.normal());
        const int own = inst % S;
        const double n = rng.uniform(0.1, 1.0);
        const auto f = pass::transform_quadratic(h, mu, own, S, n);
        const Eigen::VectorXcd w = Eigen::Map<const Eigen::VectorXcd>(W.data(), W.size());
        const double direct = pass::transform_value(mu, h, W, own, n);
        CHECK(f.realify().value(pass::realify(w)) == Approx(direct).epsilon(1e-10).margin(1e-10));
    }
}

TEST_CASE("antenna position surrogate majorizes and touches the exact term") {
    pass::Rng rng(13);
    for (int inst = 0; inst < 200; ++inst) {
        double lo = 0, hi = 0;
        const double xt = rng.uniform(0, 10);
        const auto s = random_surrogate(rng, xt, lo, hi);
        const double f0 = s.exact(xt);
        REQUIRE(rel_err(s.value(xt), f0) <= 1e-9);
        // first derivative of the exact term by central differences
        const double h = 1e-6;
        const double d_exact = (s.exact(xt + h) - s.exact(xt - h)) / (2 * h);
        REQUIRE(std::abs(s.derivative(xt) - d_exact) <= 1e-4 * std::max(1.0, std::abs(d_exact)));
        for (int k = 0; k < 100; ++k) {
            const double x = rng.uniform(lo, hi);
            REQUIRE(s.value(x) >= s.exact(x) - 1e-9 * std::max(1.0, std::abs(s.exact(x))));
        }
        // convexity: second derivative non-negative and consistent with the first
        for (int k = 0; k < 10; ++k) {
            const double x = rng.uniform(lo, hi);
            REQUIRE(s.second_derivative(x) >= 0.0);
            const double d2 = (s.derivative(x + h) - s.derivative(x - h)) / (2 * h);
            REQUIRE(std::abs(s.second_derivative(x) - d2) <= 1e-3 * std::max(1.0, std::abs(d2)));
        }
    }
}

TEST_CASE("closed-form phase update matches a fine grid minimizer of its majorizer") {
    pass::Rng rng(14);
    for (int inst = 0; inst < 1000; ++inst) {
        const cd ur = std::polar(rng.uniform(0.2, 2.0), rng.uniform(-3.2, 3.2));
        const cd du(rng.normal(), rng.normal());
        const double de = rng.normal(), theta = rng.uniform(-100, 100);
        const double rho = std::pow(10.0, rng.uniform(-3, 0));
        const double e_prev = theta + rng.uniform(-1, 1);
        const double e_new = pass::e_entry_update(ur, du, de, theta, rho, e_prev);
        auto sur = [&](double e) { return pass::e_entry_surrogate(ur, du, de, theta, rho, e_prev, e); };
        // coarse scan, then 1e-6 resolution around the best coarse point
        double best = e_prev, best_v = sur(e_prev);
        for (double e = e_prev - 10; e <= e_prev + 10; e += 1e-3)
            if (const double v = sur(e); v < best_v) best_v = v, best = e;
        const double centre = best;
        for (double e = centre - 2e-3; e <= centre + 2e-3; e += 1e-6)
            if (const double v = sur(e); v < best_v) best_v = v, best = e;
        REQUIRE(std::abs(e_new - best) <= 2e-6);
        // the majorizer touches at e_prev, sits above everywhere and the step descends
        const auto obj = [&](double e) { return pass::e_entry_objective(ur, du, de, theta, rho, e); };
        REQUIRE(rel_err(sur(e_prev), obj(e_prev)) <= 1e-9);
        for (int k = 0; k < 20; ++k) {
            const double e = e_prev + rng.uniform(-5, 5);
            REQUIRE(sur(e) >= obj(e) - 1e-9 * std::max(1.0, obj(e)));
        }
        REQUIRE(obj(e_new) <= obj(e_prev) + 1e-12);
    }
}

TEST_CASE("augmented Lagrangian of a consistent start is zero and matches the explicit sum") {
    const pass::ScenarioConfig cfg;
    const auto s = pass::build_scenario(cfg, 20.0);
    const auto users = pass::sample_users(cfg, 3);
    std::vector<int> stream;
    for (int j = 0; j < users.size(); ++j) stream.push_back(users.group_of(j));
    const auto sys = pass::make_system(s, users.positions, stream, users.noise_power_w, 2, pass::Baseband::Full);
    auto st = pass::initial_state(sys, {});
    CHECK(pass::residuals(sys, st).max_inf_norm <= 1e-12);
    CHECK(pass::al_value(sys, st) == Approx(0.0).margin(1e-20));

    pass::Rng rng(15);
    for (auto &d : st.dual_u) d = random_complex(2, 8, rng) * 0.01;
    for (auto &d : st.dual_e) d = Eigen::MatrixXd::Random(2, 8) * 0.01;
    for (auto &u : st.u) u += random_complex(2, 8, rng) * 1e-3;
    double explicit_sum = 0.0;
    for (int j = 0; j < sys.num_users(); ++j)
        for (int i = 0; i < 2; ++i)
            for (int n = 0; n < 8; ++n) {
                const double r = pass::antenna_user_distance(sys.users[j], st.x(i, n), s.geometry.waveguide_y_coords_m[i],
                                                             s.geometry.height_m);
                const double phi = s.rf.wavenumber() * r + s.rf.guided_wavenumber() * st.x(i, n);
                const cd a = st.u[j](i, n) * r - std::polar(1.0, -st.e[j](i, n)) + st.rho * st.dual_u[j](i, n);
                const double b = st.e[j](i, n) - phi + st.rho * st.dual_e[j](i, n);
                explicit_sum += std::norm(a) + b * b;
            }
    CHECK(pass::al_value(sys, st) == Approx(explicit_sum / (2 * st.rho)).epsilon(1e-10));
}

TEST_CASE("normalized channels reproduce the physical SINR") {
    const pass::ScenarioConfig cfg;
    const auto s = pass::build_scenario(cfg, 20.0);
    const auto users = pass::sample_users(cfg, 4);
    std::vector<int> stream;
    for (int j = 0; j < users.size(); ++j) stream.push_back(users.group_of(j));
    const auto sys = pass::make_system(s, users.positions, stream, users.noise_power_w, 2, pass::Baseband::Full);
    const auto layout = pass::uniform_layout(s.geometry);
    pass::Rng rng(16);
    Eigen::MatrixXcd W = random_complex(2, 2, rng);
    W /= W.norm();
    const auto sinr = pass::system_sinr(pass::layout_channels(sys, layout.x_positions_m), W, sys.stream, sys.noise);
    const auto phys = pass::rate_wm(layout, W * std::sqrt(s.rf.max_transmit_power_w), users, s);
    for (int j = 0; j < users.size(); ++j) CHECK(std::log2(1 + sinr[j]) == Approx(phys.rate[j]).epsilon(1e-10));
}

TEST_CASE("position step does not increase the augmented Lagrangian") {
    const pass::ScenarioConfig cfg;
    const auto s = pass::build_scenario(cfg, 20.0);
    const auto users = pass::sample_users(cfg, 5);
    std::vector<int> stream;
    for (int j = 0; j < users.size(); ++j) stream.push_back(users.group_of(j));
    const auto sys = pass::make_system(s, users.positions, stream, users.noise_power_w, 2, pass::Baseband::Full);
    auto st = pass::initial_state(sys, {});
    for (int it = 0; it < 5; ++it) {
        pass::mu_step(sys, st);
        pass::subproblem_w(sys, st);
        pass::subproblem_u(sys, st);
        const double before = pass::al_value(sys, st);
        pass::subproblem_x(sys, st);
        const double after = pass::al_value(sys, st);
        CHECK(after <= before * (1 + 1e-9) + 1e-12);
        CHECK(pass::layout_violation({st.x}, s.geometry) <= 1e-9);
        const double before_e = after;
        pass::e_step(sys, st);
        CHECK(pass::al_value(sys, st) <= before_e * (1 + 1e-9) + 1e-12);
    }
}

TEST_CASE("single antenna single user goes to the user's projection") {
    const auto cfg = single_config();
    const auto s = pass::build_scenario(cfg, 20.0);
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto users = pass::sample_users(cfg, seed);
        const auto r = pass::pdd_solve(s, users, pass::Structure::WM);
        const auto &u = users.positions[0];
        CHECK(r.converged);
        CHECK(r.final_residual <= 1e-6);
        CHECK(r.layouts[0](0, 0) == Approx(std::clamp(u.x, 0.0, cfg.l_m)).margin(1e-3));
        const double eta = s.rf.reference_gain;
        const double dy = u.y - s.geometry.waveguide_y_coords_m[0];
        const double expected = std::log2(1 + s.rf.max_transmit_power_w * eta * eta /
                                                  (s.rf.noise_power_w * (dy * dy + cfg.d_m * cfg.d_m)));
        CHECK(r.report.min_rate == Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("all structures converge on the default multicast scenario") {
    const pass::ScenarioConfig cfg;
    const auto s = pass::build_scenario(cfg, 20.0);
    const auto users = pass::sample_users(cfg, 2);
    for (auto st : {pass::Structure::WM, pass::Structure::WD, pass::Structure::WS}) {
        INFO(pass::to_string(st));
        const auto r = pass::pdd_solve(s, users, st);
        CHECK(r.converged);
        CHECK(r.final_residual <= 1e-6);
        CHECK(r.trace.back().max_residual <= 1e-6);
        CHECK(r.report.min_rate > 5.0);
        for (const auto &layout : r.layouts) CHECK(pass::layout_violation(layout, s.geometry) <= 1e-9);
        if (st == pass::Structure::WS)
            for (int k = 0; k < 2; ++k)
                CHECK(r.beamformers.col(k).squaredNorm() <= s.rf.max_transmit_power_w * (1 + 1e-9));
        else
            CHECK(r.beamformers.squaredNorm() <= s.rf.max_transmit_power_w * (1 + 1e-9));
        if (st == pass::Structure::WD) {
            CHECK(std::abs(r.beamformers(0, 1)) == 0.0);
            CHECK(std::abs(r.beamformers(1, 0)) == 0.0);
        }
    }
}

TEST_CASE("solver beats its evenly spread starting layout") {
    const pass::ScenarioConfig cfg;
    const auto s = pass::build_scenario(cfg, 20.0);
    const auto users = pass::sample_users(cfg, 3);
    pass::PddConfig uniform;
    uniform.initial_layout = pass::InitialLayout::Uniform;
    std::vector<int> stream;
    for (int j = 0; j < users.size(); ++j) stream.push_back(users.group_of(j));
    const auto sys = pass::make_system(s, users.positions, stream, users.noise_power_w, 2, pass::Baseband::Full);
    const double start = std::log2(1 + pass::true_min_sinr(sys, pass::initial_state(sys, uniform)));
    const auto r = pass::pdd_solve(s, users, pass::Structure::WM, uniform);
    CHECK(r.report.min_rate > start);
}

TEST_CASE("invalid solver settings are rejected") {
    pass::PddConfig c;
    c.penalty_shrink = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.residual_tol = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.max_outer = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    const pass::ScenarioConfig cfg;
    const auto s = pass::build_scenario(cfg, 20.0);
    auto users = pass::sample_users(cfg, 1);
    users.group_count = 3;
    CHECK_THROWS_AS(pass::pdd_solve(s, users, pass::Structure::WM), std::invalid_argument);
}

TEST_CASE("a run that hits the zero-SINR fixed point backs off and recovers") {
    pass::ScenarioConfig cfg;
    cfg.n_pas = 10;
    const auto s = pass::build_scenario(cfg, 20.0);
    const auto users = pass::sample_users(cfg, 8);
    const auto r = pass::pdd_solve(s, users, pass::Structure::WM);
    CHECK(r.converged);
    CHECK(r.final_residual <= 1e-6);
    // far from zero, and at least the consistent start
    const auto sys = pass::make_system(s, users.positions, {0, 0, 1, 1}, users.noise_power_w, 2, pass::Baseband::Full);
    const double start = std::log2(1.0 + pass::true_min_sinr(sys, pass::initial_state(sys, {})));
    CHECK(r.report.min_rate >= start);
    CHECK(r.report.min_rate > 5.0);
}
