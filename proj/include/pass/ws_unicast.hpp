// SPDX-License-Identifier: Apache-2.0
//
// pass - pinching-antenna multi-user beamforming toolkit
//
// Low-complexity unicast switching: per-user antenna placement, MRT and
// closed-form time sharing.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "channel.hpp"
#include "convex_kernel.hpp"
#include "rates.hpp"

namespace pass {

/// w = sqrt(P) h^H / ||h||.
inline Eigen::VectorXcd mrt_beamformer(const Eigen::RowVectorXcd &h, double p_max_w) {
    const double norm = h.norm();
    if (!(norm > 0.0)) throw std::invalid_argument("MRT needs a nonzero channel");
    if (!(p_max_w >= 0.0)) throw std::invalid_argument("negative power");
    return std::sqrt(p_max_w) * h.adjoint() / norm;
}

/// Phase of one antenna as seen from one user, as a function of its position on waveguide (y, height).
struct PhaseProfile {
    Point3 user;
    double y = 0.0;
    double height = 0.0;
    double k_free = 0.0;
    double k_guided = 0.0;

    double distance(double x) const { return antenna_user_distance(user, x, y, height); }
    double operator()(double x) const { return k_free * distance(x) + k_guided * x; }
    /// Upper bound on the x-distance between consecutive 2 pi aligned positions (slope >= k_g - k).
    double max_period() const { return 2.0 * std::numbers::pi / (k_guided - k_free); }
};

/// Root of the increasing function phi(x) = target inside [lo, hi] (phi(lo) <= target <= phi(hi)).
inline double solve_increasing(const PhaseProfile &phi, double target, double lo, double hi) {
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        (phi(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// First x >= a (dir > 0) or last x <= a (dir < 0) with phi(x) = ref mod 2 pi.
inline double next_aligned(const PhaseProfile &phi, double ref, double a, int dir) {
    const double two_pi = 2.0 * std::numbers::pi;
    const double period = phi.max_period();
    const double m = (phi(a) - ref) / two_pi;
    if (dir > 0) return solve_increasing(phi, ref + two_pi * std::ceil(m), a, a + period);
    return solve_increasing(phi, ref + two_pi * std::floor(m), a - period, a);
}

struct PlacementResult {
    PinchingLayout layout;
    std::vector<double> phase_residual; // per waveguide, max wrapped deviation from the reference antenna
    double path_loss_objective = 0.0;   // sum of 1/r over all antennas
};

/// Lowest allowed block centre. Leaves room for phase snapping to stretch the block when it fits.
inline double block_centre_margin(const Geometry &g, const RfConfig &rf) {
    const int N = g.antennas_per_waveguide;
    const double period = 2.0 * std::numbers::pi / (rf.guided_wavenumber() - rf.wavenumber());
    const double stretched = 0.5 * (N - 1) * (g.min_antenna_spacing_m + period);
    const double tight = 0.5 * (N - 1) * g.min_antenna_spacing_m;
    return 2.0 * stretched < g.waveguide_length_m ? stretched : tight;
}

inline double clamp_block_centre(double x, const Geometry &g, const RfConfig &rf) {
    const double m = block_centre_margin(g, rf);
    return std::clamp(x, m, g.waveguide_length_m - m);
}

/// Index of the antenna nearest the middle of the block.
inline int reference_antenna(int n) { return (n - 1) / 2; }

/// Large-scale centring at the user followed by snapping every antenna onto the reference phase.
inline PlacementResult two_stage_placement(const Point3 &user, const Scenario &s) {
    const auto &g = s.geometry;
    const int K = g.num_waveguides, N = g.antennas_per_waveguide;
    const double L = g.waveguide_length_m, delta = g.min_antenna_spacing_m;
    PlacementResult out;
    out.layout.x_positions_m.resize(K, N);
    if (N == 1) {
        for (int i = 0; i < K; ++i) out.layout.x_positions_m(i, 0) = std::clamp(user.x, 0.0, L);
    } else {
        const double centre = clamp_block_centre(user.x, g, s.rf);
        const int ref = reference_antenna(N);
        for (int i = 0; i < K; ++i) {
            const PhaseProfile phi{user, g.waveguide_y_coords_m[i], g.height_m, s.rf.wavenumber(),
                                   s.rf.guided_wavenumber()};
            auto nominal = [&](int n) { return centre + (n - 0.5 * (N - 1)) * delta; };
            Eigen::RowVectorXd row(N);
            row(ref) = nominal(ref);
            const double phi_ref = phi(row(ref));
            auto nearest = [&](double p) {
                const double up = next_aligned(phi, phi_ref, p, +1), down = next_aligned(phi, phi_ref, p, -1);
                return up - p < p - down ? up : down;
            };
            for (int n = ref + 1; n < N; ++n) {
                double x = nearest(nominal(n));
                if (x < row(n - 1) + delta) x = next_aligned(phi, phi_ref, row(n - 1) + delta, +1);
                row(n) = x;
            }
            for (int n = ref - 1; n >= 0; --n) {
                double x = nearest(nominal(n));
                if (x > row(n + 1) - delta) x = next_aligned(phi, phi_ref, row(n + 1) - delta, -1);
                row(n) = x;
            }
            if (row(0) < 0.0 || row(N - 1) > L)
                throw std::runtime_error("no phase-aligned placement fits on the waveguide");
            out.layout.x_positions_m.row(i) = row;
        }
    }
    for (int i = 0; i < K; ++i) {
        const PhaseProfile phi{user, g.waveguide_y_coords_m[i], g.height_m, s.rf.wavenumber(),
                               s.rf.guided_wavenumber()};
        const double phi_ref = phi(out.layout(i, reference_antenna(N)));
        double worst = 0.0;
        for (int n = 0; n < N; ++n) {
            worst = std::max(worst, std::abs(wrap_phase(phi(out.layout(i, n)) - phi_ref)));
            out.path_loss_objective += 1.0 / phi.distance(out.layout(i, n));
        }
        out.phase_residual.push_back(worst);
    }
    return out;
}

struct UnicastResult {
    std::vector<PinchingLayout> layouts; // one per user
    Eigen::MatrixXcd beamformers;        // K x K, column k serves user k
    std::vector<double> time_shares;
    std::vector<double> slot_rates;      // rate of each user during its own slot
    RateReport report;
};

/// Switching with given per-user layouts: MRT per slot, then time sharing.
inline UnicastResult unicast_ws_with_layouts(const Scenario &s, const UserLayout &users,
                                             std::vector<PinchingLayout> layouts) {
    const int K = s.geometry.num_waveguides;
    if (users.users_per_group != 1 || users.group_count != K)
        throw std::invalid_argument("unicast switching needs one user per waveguide (g_users = 1)");
    UnicastResult out;
    out.layouts = std::move(layouts);
    out.beamformers.resize(K, K);
    for (int k = 0; k < K; ++k) {
        const Eigen::RowVectorXcd h = effective_channel_sum(users.positions[k], out.layouts[k], s);
        out.beamformers.col(k) = mrt_beamformer(h, s.rf.max_transmit_power_w);
        out.slot_rates.push_back(
            std::log2(1.0 + std::norm((h * out.beamformers.col(k))(0)) / users.noise_power_w[k]));
    }
    const TimeAllocation ta = time_allocation(out.slot_rates);
    out.time_shares = ta.time_shares;
    out.report = rate_ws(out.layouts, out.beamformers, out.time_shares, users, s);
    return out;
}

/// Placement, MRT and closed-form time allocation.
inline UnicastResult solve_unicast_ws(const Scenario &s, const UserLayout &users) {
    std::vector<PinchingLayout> layouts;
    for (const auto &u : users.positions) layouts.push_back(two_stage_placement(u, s).layout);
    return unicast_ws_with_layouts(s, users, std::move(layouts));
}

/// Same pipeline with every slot using the evenly spread layout.
inline UnicastResult uniform_unicast_ws(const Scenario &s, const UserLayout &users) {
    return unicast_ws_with_layouts(s, users,
                                   std::vector<PinchingLayout>(users.positions.size(), uniform_layout(s.geometry)));
}

} // namespace pass
