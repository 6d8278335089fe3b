// SPDX-License-Identifier: Apache-2.0
//
// pass - pinching-antenna multi-user beamforming toolkit
//
// Fixed-position MIMO references: a fully-digital ULA and a sub-connected hybrid ULA.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "convex_kernel.hpp"
#include "pdd.hpp"
#include "rates.hpp"

namespace pass {

/// Linear array along x.
struct UlaGeometry {
    Point3 centroid{5.0, 0.0, 3.0};
    double spacing_m = 0.0;
    int count = 0;

    Point3 element(int m) const {
        return {centroid.x + (m - 0.5 * (count - 1)) * spacing_m, centroid.y, centroid.z};
    }
};

/// Half-wavelength array of `count` elements at the default centroid.
inline UlaGeometry half_wave_ula(const RfConfig &rf, int count, Point3 centroid = {5.0, 0.0, 3.0}) {
    if (count < 1) throw std::invalid_argument("array needs at least one element");
    return {centroid, 0.5 * rf.free_space_wavelength_m, count};
}

inline Eigen::RowVectorXcd ula_channel(const Point3 &user, const UlaGeometry &ula, const RfConfig &rf) {
    if (!(ula.spacing_m > 0.0) && ula.count > 1) throw std::invalid_argument("array spacing must be positive");
    Eigen::RowVectorXcd h(ula.count);
    for (int m = 0; m < ula.count; ++m) {
        const Point3 p = ula.element(m);
        const double r = std::sqrt((user.x - p.x) * (user.x - p.x) + (user.y - p.y) * (user.y - p.y) +
                                   (user.z - p.z) * (user.z - p.z));
        h(m) = std::polar(rf.reference_gain / r, -rf.wavenumber() * r);
    }
    return h;
}

/// All users' array channels (J x count).
inline Eigen::MatrixXcd ula_channels(const UserLayout &users, const UlaGeometry &ula, const RfConfig &rf) {
    Eigen::MatrixXcd H(users.size(), ula.count);
    for (int j = 0; j < users.size(); ++j) H.row(j) = ula_channel(users.positions[j], ula, rf);
    return H;
}

struct MmfOptions {
    double improvement_tol = 1e-3;
    int max_iterations = 100;
};

struct DigitalResult {
    Eigen::MatrixXcd beamformers; // antennas x groups, physical units
    RateReport report;
    int iterations = 0;
};

/// Max-min fair precoding for fixed channels H (J x A): alternate the quadratic-transform multipliers and the
/// ball-constrained max-min kernel. One stream per group; unicast is one user per group.
inline DigitalResult fulldigital_mmf(const Eigen::MatrixXcd &H, const UserLayout &users, double p_max_w,
                                     const MmfOptions &opt = {}) {
    if (H.rows() != users.size()) throw std::invalid_argument("channel count does not match users");
    if (!(p_max_w > 0.0)) throw std::invalid_argument("power budget must be positive");
    const int S = users.group_count;
    const auto A = H.cols();
    std::vector<int> stream;
    for (int j = 0; j < users.size(); ++j) stream.push_back(users.group_of(j));
    const double noise_ref = *std::min_element(users.noise_power_w.begin(), users.noise_power_w.end());
    std::vector<double> noise;
    for (double n : users.noise_power_w) noise.push_back(n / noise_ref);
    const Eigen::MatrixXcd Hn = H * std::sqrt(p_max_w / noise_ref);

    auto min_sinr = [&](const Eigen::MatrixXcd &W) {
        const auto s = system_sinr(Hn, W, stream, noise);
        return *std::min_element(s.begin(), s.end());
    };
    Eigen::MatrixXcd W = matched_beamformers(Hn, stream, S);
    double prev = min_sinr(W);
    DigitalResult out;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        const Eigen::VectorXcd mu = mu_update(Hn, W, stream, noise);
        BlockMaxMinProblem p;
        p.blocks.push_back({static_cast<int>(2 * A * S), {}, {}, 1.0});
        for (int j = 0; j < users.size(); ++j)
            p.constraints.push_back({0, transform_quadratic(Hn.row(j), mu(j), stream[j], S, noise[j]).realify()});
        const Eigen::VectorXcd w0 = Eigen::Map<const Eigen::VectorXcd>(W.data(), W.size());
        Eigen::VectorXcd w = complexify(solve_block_maxmin(p, realify(w0)).optimizer);
        if (w.squaredNorm() > 1.0) w /= w.norm();
        const Eigen::MatrixXcd candidate = Eigen::Map<Eigen::MatrixXcd>(w.data(), A, S);
        const double cur = min_sinr(candidate);
        out.iterations = it;
        if (cur >= prev) W = candidate;
        if (std::abs(cur - prev) <= opt.improvement_tol * std::max(std::abs(prev), 1e-12)) break;
        prev = std::max(prev, cur);
    }
    out.beamformers = W * std::sqrt(p_max_w);
    out.report = rates_from_channels(H, out.beamformers, users);
    return out;
}

/// Fully-digital array with one element per group at the default centroid.
inline DigitalResult fulldigital_ula(const Scenario &s, const UserLayout &users, const MmfOptions &opt = {}) {
    const UlaGeometry ula = half_wave_ula(s.rf, users.group_count);
    return fulldigital_mmf(ula_channels(users, ula, s.rf), users, s.rf.max_transmit_power_w, opt);
}

struct HybridResult {
    Eigen::MatrixXcd analog;  // M x K, unit modulus on the diagonal blocks
    Eigen::MatrixXcd digital; // K x K
    Eigen::MatrixXcd target;  // M x K fully-digital reference
    RateReport report;
    double fit_residual = 0.0; // ||F - analog digital||_F before rescaling
};

/// Sub-connected hybrid fit to the fully-digital solution: RF chain k drives antennas [k N, (k+1) N).
inline HybridResult hybrid_fit(const Eigen::MatrixXcd &F, int block, int alternations = 20) {
    const auto M = F.rows(), K = F.cols();
    if (block < 1 || M != K * block) throw std::invalid_argument("antenna count must equal RF chains times block");
    HybridResult out;
    out.target = F;
    out.analog = Eigen::MatrixXcd::Zero(M, K);
    // start from the dominant column combination of each block: the rank-one part of F's rows on that chain
    out.digital.resize(K, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(F.middleRows(k * block, block), Eigen::ComputeThinV);
        out.digital.row(k) = svd.singularValues()(0) * svd.matrixV().col(0).adjoint();
    }
    for (int it = 0; it < alternations; ++it) {
        // phase of each antenna's row correlated with its chain's digital row
        for (Eigen::Index k = 0; k < K; ++k)
            for (int n = 0; n < block; ++n) {
                const Eigen::Index m = k * block + n;
                const cd c = out.digital.row(k).dot(F.row(m)); // sum_i F(m, i) conj(D(k, i))
                out.analog(m, k) = std::abs(c) > 0.0 ? c / std::abs(c) : cd(1.0, 0.0);
            }
        // least squares; the analog columns are orthogonal with squared norm `block`
        out.digital = out.analog.adjoint() * F / static_cast<double>(block);
    }
    out.fit_residual = (F - out.analog * out.digital).norm();
    return out;
}

/// Hybrid baseline with K RF chains and K N antennas: analog stage fitted to the fully-digital solution, then
/// the digital stage re-solved for max-min fairness on the effective channel H W_RF (kept only if better).
inline HybridResult hybrid_mmf(const Eigen::MatrixXcd &H, const UserLayout &users, double p_max_w, int block,
                               const MmfOptions &opt = {}) {
    const auto full = fulldigital_mmf(H, users, p_max_w, opt);
    HybridResult out = hybrid_fit(full.beamformers, block);
    const double nrm = (out.analog * out.digital).norm();
    if (nrm > 0.0) out.digital *= std::sqrt(p_max_w) / nrm;
    out.report = rates_from_channels(H, out.analog * out.digital, users);
    // analog columns are orthogonal with squared norm `block`, so ||W_RF D||^2 = block ||D||^2
    const auto refit = fulldigital_mmf(H * out.analog, users, p_max_w / block, opt);
    if (refit.report.min_rate > out.report.min_rate) {
        out.digital = refit.beamformers;
        out.report = rates_from_channels(H, out.analog * out.digital, users);
    }
    return out;
}

inline HybridResult hybrid_ula(const Scenario &s, const UserLayout &users, const MmfOptions &opt = {}) {
    const int K = users.group_count, N = s.geometry.antennas_per_waveguide;
    const UlaGeometry ula = half_wave_ula(s.rf, K * N);
    return hybrid_mmf(ula_channels(users, ula, s.rf), users, s.rf.max_transmit_power_w, N, opt);
}

} // namespace pass
