// SPDX-License-Identifier: Apache-2.0
//
// pass - pinching-antenna multi-user beamforming toolkit
//
// In-waveguide propagation and free-space line-of-sight channels.
// The 1/sqrt(N) power split lives in waveguide_response and nowhere else.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "scenario.hpp"

namespace pass {

using cd = std::complex<double>;
using RowVectorXcd = Eigen::RowVectorXcd;

/// Antenna x-positions; row k holds waveguide k, ascending.
struct PinchingLayout {
    Eigen::MatrixXd x_positions_m;

    int num_waveguides() const { return static_cast<int>(x_positions_m.rows()); }
    int antennas_per_waveguide() const { return static_cast<int>(x_positions_m.cols()); }
    double operator()(int i, int n) const { return x_positions_m(i, n); }
};

/// Largest violation of the box and spacing constraints (0 when feasible).
inline double layout_violation(const PinchingLayout &layout, const Geometry &g) {
    double worst = 0.0;
    const auto &X = layout.x_positions_m;
    for (int i = 0; i < X.rows(); ++i)
        for (int n = 0; n < X.cols(); ++n) {
            worst = std::max({worst, -X(i, n), X(i, n) - g.waveguide_length_m});
            if (n + 1 < X.cols()) worst = std::max(worst, g.min_antenna_spacing_m - (X(i, n + 1) - X(i, n)));
        }
    return worst;
}

inline void validate_layout(const PinchingLayout &layout, const Geometry &g, double tol = 1e-9) {
    if (layout.num_waveguides() != g.num_waveguides || layout.antennas_per_waveguide() != g.antennas_per_waveguide)
        throw std::invalid_argument("layout shape does not match geometry");
    if (!layout.x_positions_m.allFinite()) throw std::invalid_argument("layout contains non-finite positions");
    if (layout_violation(layout, g) > tol) throw std::invalid_argument("layout violates box or spacing constraints");
}

/// Evenly spaced block of N antennas per waveguide, centred on the waveguide.
inline PinchingLayout uniform_layout(const Geometry &g) {
    const int N = g.antennas_per_waveguide;
    const double step = N > 1 ? std::max(g.min_antenna_spacing_m, g.waveguide_length_m / N) : 0.0;
    const double span = step * (N - 1);
    PinchingLayout layout{Eigen::MatrixXd(g.num_waveguides, N)};
    for (int i = 0; i < g.num_waveguides; ++i)
        for (int n = 0; n < N; ++n) layout.x_positions_m(i, n) = 0.5 * (g.waveguide_length_m - span) + n * step;
    return layout;
}

/// Feed-point to antenna response of one waveguide: entry n = exp(-j 2 pi x_n / lambda_g) / sqrt(N).
inline Eigen::VectorXcd waveguide_response(const Eigen::VectorXd &x_row, const RfConfig &rf,
                                           double length_m = std::numeric_limits<double>::infinity()) {
    const auto N = x_row.size();
    if (N < 1) throw std::invalid_argument("empty waveguide");
    Eigen::VectorXcd out(N);
    const double scale = 1.0 / std::sqrt(static_cast<double>(N));
    for (Eigen::Index n = 0; n < N; ++n) {
        if (!(x_row(n) >= 0.0 && x_row(n) <= length_m)) throw std::invalid_argument("antenna outside waveguide");
        out(n) = std::polar(scale, -rf.guided_wavenumber() * x_row(n));
    }
    return out;
}

/// Block-diagonal M x K matrix; column k carries waveguide k's response.
inline Eigen::MatrixXcd stacked_response(const PinchingLayout &layout, const RfConfig &rf) {
    const int K = layout.num_waveguides(), N = layout.antennas_per_waveguide();
    Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(K * N, K);
    for (int k = 0; k < K; ++k) G.block(k * N, k, N, 1) = waveguide_response(layout.x_positions_m.row(k).transpose(), rf);
    return G;
}

inline double antenna_user_distance(const Point3 &user, double x_antenna, double y_waveguide, double height) {
    const double dx = user.x - x_antenna, dy = user.y - y_waveguide;
    return std::sqrt(dx * dx + dy * dy + height * height);
}

inline double antenna_user_distance(const Point3 &user, const PinchingLayout &layout, const Geometry &g, int i,
                                    int n) {
    return antenna_user_distance(user, layout(i, n), g.waveguide_y_coords_m.at(i), g.height_m);
}

/// Free-space row from all M antennas to the user, waveguide-major.
inline RowVectorXcd user_channel(const Point3 &user, const PinchingLayout &layout, const Scenario &s) {
    const int K = layout.num_waveguides(), N = layout.antennas_per_waveguide();
    RowVectorXcd h(K * N);
    for (int i = 0; i < K; ++i)
        for (int n = 0; n < N; ++n) {
            const double r = antenna_user_distance(user, layout, s.geometry, i, n);
            h(i * N + n) = std::polar(s.rf.reference_gain / r, -s.rf.wavenumber() * r);
        }
    return h;
}

/// Total phase from feed point to user through antenna (i, n). Not wrapped.
inline double phase_phi(const Point3 &user, const PinchingLayout &layout, int i, int n, const Scenario &s) {
    return s.rf.wavenumber() * antenna_user_distance(user, layout, s.geometry, i, n) +
           s.rf.guided_wavenumber() * layout(i, n);
}

/// h G as a 1 x K row.
inline RowVectorXcd effective_channel(const Point3 &user, const PinchingLayout &layout, const Scenario &s) {
    return user_channel(user, layout, s) * stacked_response(layout, s.rf);
}

/// Same quantity as effective_channel, evaluated as an explicit per-waveguide sum.
inline RowVectorXcd effective_channel_sum(const Point3 &user, const PinchingLayout &layout, const Scenario &s) {
    const int K = layout.num_waveguides(), N = layout.antennas_per_waveguide();
    const double amp = s.rf.reference_gain / std::sqrt(static_cast<double>(N));
    RowVectorXcd out = RowVectorXcd::Zero(K);
    for (int i = 0; i < K; ++i)
        for (int n = 0; n < N; ++n) {
            const double r = antenna_user_distance(user, layout, s.geometry, i, n);
            out(i) += std::polar(amp / r, -phase_phi(user, layout, i, n, s));
        }
    return out;
}

/// Effective channels of all users, one row each (J x K).
inline Eigen::MatrixXcd effective_channels(const UserLayout &users, const PinchingLayout &layout,
                                           const Scenario &s) {
    Eigen::MatrixXcd H(users.size(), layout.num_waveguides());
    for (int j = 0; j < users.size(); ++j) H.row(j) = effective_channel_sum(users.positions[j], layout, s);
    return H;
}

/// Wrap to [-pi, pi]. Only used when checking phase alignment.
inline double wrap_phase(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

} // namespace pass
