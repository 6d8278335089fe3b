// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <pass/convex_kernel.hpp>
#include <pass/scenario.hpp>

#include <cmath>

using Catch::Approx;

namespace {

pass::ConcaveQuadratic quad(std::initializer_list<double> a, Eigen::MatrixXd Q, double c) {
    pass::ConcaveQuadratic f;
    f.a = Eigen::Map<const Eigen::VectorXd>(a.begin(), static_cast<Eigen::Index>(a.size()));
    f.Q = std::move(Q);
    f.c = c;
    return f;
}

pass::ConcaveQuadratic random_quadratic(int dim, pass::Rng &rng) {
    pass::ConcaveQuadratic f;
    f.a = Eigen::VectorXd(dim);
    Eigen::MatrixXd B(dim, dim);
    for (int i = 0; i < dim; ++i) {
        f.a(i) = rng.uniform(-1, 1);
        for (int j = 0; j < dim; ++j) B(i, j) = rng.uniform(-0.7, 0.7);
    }
    f.Q = B.transpose() * B;
    f.c = rng.uniform(-0.5, 0.5);
    return f;
}

double min_of(const std::vector<pass::ConcaveQuadratic> &fs, const Eigen::VectorXd &z) {
    double m = 1e300;
    for (const auto &f : fs) m = std::min(m, f.value(z));
    return m;
}

} // namespace

TEST_CASE("single quadratic with interior maximizer") {
    const auto rep = pass::maxmin_quadratics_ball({quad({1.0}, Eigen::MatrixXd::Identity(1, 1), 0.0)}, 4.0);
    CHECK(rep.converged);
    CHECK(rep.optimizer(0) == Approx(1.0).margin(1e-6));
    CHECK(rep.gamma == Approx(1.0).margin(1e-6));
}

TEST_CASE("two mirrored quadratics meet at zero") {
    const auto I = Eigen::MatrixXd::Identity(1, 1);
    const auto rep = pass::maxmin_quadratics_ball({quad({1.0}, I, 0.0), quad({-1.0}, I, 0.0)}, 4.0);
    CHECK(rep.optimizer(0) == Approx(0.0).margin(1e-6));
    CHECK(rep.gamma == Approx(0.0).margin(1e-6));
}

TEST_CASE("max-min over the ball matches a dense 2-D grid") {
    pass::Rng rng(2024);
    for (int inst = 0; inst < 5; ++inst) {
        std::vector<pass::ConcaveQuadratic> fs;
        for (int k = 0; k < 3; ++k) fs.push_back(random_quadratic(2, rng));
        const double radius = 1.0;
        const auto rep = pass::maxmin_quadratics_ball(fs, radius * radius);
        REQUIRE(rep.converged);
        CHECK(rep.feasibility <= 1e-8);
        CHECK(rep.optimizer.squaredNorm() <= radius * radius + 1e-12);
        CHECK(rep.gamma == Approx(min_of(fs, rep.optimizer)).margin(1e-9));

        const double h = 1e-3 * radius;
        double best = -1e300;
        Eigen::VectorXd z(2);
        for (double x = -radius; x <= radius; x += h)
            for (double y = -radius; y <= radius; y += h) {
                if (x * x + y * y > radius * radius) continue;
                z << x, y;
                best = std::max(best, min_of(fs, z));
            }
        CHECK(rep.gamma >= best - 1e-9);
        CHECK(rep.gamma - best <= 1e-3);
    }
}

TEST_CASE("max-min over the ball matches a refined 3-D grid") {
    pass::Rng rng(99);
    for (int inst = 0; inst < 3; ++inst) {
        std::vector<pass::ConcaveQuadratic> fs;
        for (int k = 0; k < 3; ++k) fs.push_back(random_quadratic(3, rng));
        const auto rep = pass::maxmin_quadratics_ball(fs, 1.0);
        REQUIRE(rep.converged);
        // coarse pass, then a fine pass around the coarse winner (the objective is concave)
        auto search = [&](Eigen::Vector3d centre, double half, double h) {
            double best = -1e300;
            Eigen::Vector3d arg = centre;
            for (double x = centre(0) - half; x <= centre(0) + half; x += h)
                for (double y = centre(1) - half; y <= centre(1) + half; y += h)
                    for (double w = centre(2) - half; w <= centre(2) + half; w += h) {
                        const Eigen::Vector3d z(x, y, w);
                        if (z.squaredNorm() > 1.0) continue;
                        const double v = min_of(fs, z);
                        if (v > best) {
                            best = v;
                            arg = z;
                        }
                    }
            return std::make_pair(best, arg);
        };
        const auto coarse = search(Eigen::Vector3d::Zero(), 1.0, 0.02);
        const auto fine = search(coarse.second, 0.03, 1e-3);
        CHECK(rep.gamma >= fine.first - 1e-9);
        CHECK(rep.gamma - fine.first <= 1e-3);
    }
}

TEST_CASE("complex quadratics realify consistently") {
    pass::Rng rng(5);
    pass::ComplexConcaveQuadratic f;
    f.a = Eigen::VectorXcd(2);
    f.a << std::complex<double>(0.3, -0.2), std::complex<double>(-0.1, 0.4);
    Eigen::MatrixXcd B(2, 2);
    B << std::complex<double>(0.5, 0.1), std::complex<double>(0.2, -0.3), std::complex<double>(-0.4, 0.2),
        std::complex<double>(0.1, 0.6);
    f.Q = B.adjoint() * B;
    f.c = 0.7;
    const auto r = f.realify();
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r.Q).eigenvalues().minCoeff() >= -1e-10);
    for (int t = 0; t < 20; ++t) {
        Eigen::VectorXcd z(2);
        z << std::complex<double>(rng.normal(), rng.normal()), std::complex<double>(rng.normal(), rng.normal());
        CHECK(r.value(pass::realify(z)) == Approx(f.value(z)).epsilon(1e-12));
        CHECK((pass::complexify(pass::realify(z)) - z).norm() == 0.0);
    }
}

TEST_CASE("power budget examples") {
    // y_k = 2 a s_k - b s_other^2 - n
    const double a = 3.0, b = 2.0, n = 0.5, P = 1.0;
    Eigen::MatrixXd Q1 = Eigen::MatrixXd::Zero(2, 2), Q2 = Eigen::MatrixXd::Zero(2, 2);
    Q1(1, 1) = b;
    Q2(0, 0) = b;
    auto rep = pass::maxmin_power_budget({quad({a, 0.0}, Q1, -n), quad({0.0, a}, Q2, -n)}, P);
    CHECK(rep.optimizer(0) == Approx(P / 2).margin(1e-6));
    CHECK(rep.optimizer(1) == Approx(P / 2).margin(1e-6));

    rep = pass::maxmin_power_budget({quad({a}, Eigen::MatrixXd::Zero(1, 1), -n)}, P);
    CHECK(rep.optimizer(0) == Approx(P).margin(1e-6));

    // group one has no useful channel: grid over the simplex in p
    std::vector<pass::ConcaveQuadratic> fs{quad({0.0, 0.0}, Q1, -n), quad({0.0, a}, Q2, -n)};
    rep = pass::maxmin_power_budget(fs, P);
    double best = -1e300;
    const double h = 1e-3;
    for (double p1 = 0.0; p1 <= P; p1 += h)
        for (double p2 = 0.0; p1 + p2 <= P + 1e-12; p2 += h) {
            Eigen::Vector2d s(std::sqrt(p1), std::sqrt(p2));
            best = std::max(best, min_of(fs, s));
        }
    CHECK(rep.gamma >= best - 1e-9);
    CHECK(rep.gamma - best <= 1e-3);
    CHECK(rep.optimizer.sum() <= P + 1e-9);
}

TEST_CASE("ordered placement: separated targets are returned unchanged") {
    const std::vector<double> t{1.0, 2.0, 3.5, 7.0};
    const auto x = pass::box_ordered_qp(t, 10.0, 0.5);
    for (size_t n = 0; n < t.size(); ++n) CHECK(x[n] == Approx(t[n]).margin(1e-12));
}

TEST_CASE("ordered placement: two equal targets split symmetrically") {
    const double t = 4.0, delta = 0.3;
    const auto x = pass::box_ordered_qp({t, t}, 10.0, delta);
    CHECK(x[0] == Approx(t - delta / 2).margin(1e-9));
    CHECK(x[1] == Approx(t + delta / 2).margin(1e-9));
    // grid check of the two-point problem along the active constraint
    double best = 1e300, arg = 0.0;
    for (double a = 3.0; a <= 5.0; a += 1e-5) {
        const double v = (a - t) * (a - t) + (a + delta - t) * (a + delta - t);
        if (v < best) {
            best = v;
            arg = a;
        }
    }
    CHECK(x[0] == Approx(arg).margin(1e-5));
}

TEST_CASE("ordered placement: targets outside the box clamp with spacing kept") {
    auto x = pass::box_ordered_qp({-1.0, -0.8, -0.2}, 10.0, 0.5);
    CHECK(x[0] == 0.0);
    CHECK(x[1] == Approx(0.5).margin(1e-12));
    CHECK(x[2] == Approx(1.0).margin(1e-12));
    x = pass::box_ordered_qp({12.0, 13.0}, 10.0, 0.5);
    CHECK(x[1] == 10.0);
    CHECK(x[0] == Approx(9.5).margin(1e-12));
    CHECK_THROWS_AS(pass::box_ordered_qp({1.0, 2.0, 3.0}, 1.0, 0.6), std::invalid_argument);
}

TEST_CASE("ordered placement with a non-quadratic convex objective matches a grid") {
    // f_n(x) = w_n cosh(x - t_n), three points, brute force on the feasible triangle
    struct Cosh {
        std::vector<double> t, w;
        double value(int n, double x) const { return w[n] * std::cosh(x - t[n]); }
        double derivative(int n, double x) const { return w[n] * std::sinh(x - t[n]); }
        double second_derivative(int n, double x) const { return w[n] * std::cosh(x - t[n]); }
    } f{{1.0, 0.9, 1.1}, {1.0, 2.0, 0.5}};
    const double L = 3.0, delta = 0.4;
    const auto x = pass::box_ordered_minimize(f, 3, L, delta);
    double best = 1e300;
    const double h = 2e-3;
    for (double a = 0.0; a <= L; a += h)
        for (double b = a + delta; b <= L; b += h)
            for (double c = b + delta; c <= L; c += h)
                best = std::min(best, f.value(0, a) + f.value(1, b) + f.value(2, c));
    const double got = f.value(0, x[0]) + f.value(1, x[1]) + f.value(2, x[2]);
    CHECK(got <= best + 1e-9);
    CHECK(best - got <= 1e-3);
    CHECK(x[1] - x[0] >= delta - 1e-12);
    CHECK(x[2] - x[1] >= delta - 1e-12);
}

TEST_CASE("time allocation closed form") {
    auto ta = pass::time_allocation({2.0, 2.0});
    CHECK(ta.time_shares[0] == Approx(0.5));
    CHECK(ta.common_rate == Approx(1.0));
    ta = pass::time_allocation({1.0, 3.0});
    CHECK(ta.time_shares[0] == Approx(0.75));
    CHECK(ta.time_shares[1] == Approx(0.25));
    CHECK(ta.common_rate == Approx(0.75));
    ta = pass::time_allocation({4.2});
    CHECK(ta.time_shares[0] == 1.0);
    CHECK(ta.common_rate == Approx(4.2));
    ta = pass::time_allocation({0.0, 3.0});
    CHECK(ta.common_rate == 0.0);
    CHECK(ta.time_shares[0] == 0.5);
    CHECK_THROWS_AS(pass::time_allocation({-1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(pass::time_allocation({}), std::invalid_argument);
}

TEST_CASE("time allocation equalizes and matches a simplex grid") {
    pass::Rng rng(8);
    for (int inst = 0; inst < 5; ++inst) {
        const std::vector<double> R{rng.uniform(0.5, 10), rng.uniform(0.5, 10)};
        const auto ta = pass::time_allocation(R);
        for (size_t k = 0; k < R.size(); ++k) CHECK(ta.time_shares[k] * R[k] == Approx(ta.common_rate).epsilon(1e-12));
        double best = 0.0;
        const double h = 1e-7;
        for (double l = 0.0; l <= 1.0; l += h) best = std::max(best, std::min(l * R[0], (1.0 - l) * R[1]));
        CHECK(ta.common_rate == Approx(best).margin(1e-6));
    }
}
