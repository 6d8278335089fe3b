// SPDX-License-Identifier: Apache-2.0
//
// pass - pinching-antenna multi-user beamforming toolkit
//
// Penalty dual decomposition for max-min fair pinching beamforming.
//
// Internally every quantity is dimensionless:
//   aux coefficient  u~ = u sqrt(N) / eta            (u~ = exp(-j e) / r when consistent)
//   beamformer       W~ = W / sqrt(P_max)            (||W~||_F <= 1)
//   channel          h~ = c sum_n u~,  c = eta sqrt(P_max) / (sqrt(N) sigma_ref)
//   noise            n_j = sigma_j^2 / sigma_ref^2
// so SINRs are unchanged and the coupling residuals are  A = u~ r - exp(-j e),  B = e - phi.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "channel.hpp"
#include "convex_kernel.hpp"
#include "rates.hpp"
#include "ws_unicast.hpp"

namespace pass {

/// Where the antennas start.
enum class InitialLayout {
    Uniform,      // evenly spread over the whole waveguide
    UserCentred,  // a tightly spaced block per waveguide at the x-centroid of the users it serves
};

struct PddConfig {
    InitialLayout initial_layout = InitialLayout::UserCentred;
    double residual_tol = 1e-6;        // outer stop on the max constraint residual
    double improvement_tol = 1e-3;     // inner stop on fractional objective improvement
    double initial_penalty = 0.1;
    bool relative_penalty = true;      // divide the initial penalty by the initial min SINR
    double penalty_shrink = 0.5;
    double residual_improvement = 0.9;
    int max_outer = 200;
    int max_inner = 100;

    void validate() const {
        if (!(residual_tol > 0.0) || !(improvement_tol > 0.0) || !(initial_penalty > 0.0))
            throw std::invalid_argument("tolerances and penalty must be positive");
        if (!(penalty_shrink > 0.0 && penalty_shrink < 1.0)) throw std::invalid_argument("shrink must be in (0,1)");
        if (!(residual_improvement > 0.0 && residual_improvement < 1.0))
            throw std::invalid_argument("residual improvement factor must be in (0,1)");
        if (max_outer < 1 || max_inner < 1) throw std::invalid_argument("iteration caps must be positive");
    }
};

/// How the streams map onto the waveguides.
enum class Baseband {
    Full,     // any K x S beamformer (multiplexing, or one switching slot with S = 1)
    Diagonal, // stream k only on waveguide k, power allocation only
};

/// One set of users sharing a single antenna layout.
struct PddSystem {
    Scenario scenario;
    std::vector<Point3> users;
    std::vector<int> stream;      // stream decoded by each user
    std::vector<double> noise;    // relative noise n_j
    int streams = 0;
    Baseband baseband = Baseband::Full;
    double amp = 0.0;             // c
    double noise_ref = 0.0;       // sigma_ref^2 in W

    int num_users() const { return static_cast<int>(users.size()); }
    int K() const { return scenario.geometry.num_waveguides; }
    int N() const { return scenario.geometry.antennas_per_waveguide; }
    double k_free() const { return scenario.rf.wavenumber(); }
    double k_guided() const { return scenario.rf.guided_wavenumber(); }
};

inline PddSystem make_system(const Scenario &s, const std::vector<Point3> &users, const std::vector<int> &stream,
                             const std::vector<double> &noise_w, int streams, Baseband baseband) {
    if (users.empty()) throw std::invalid_argument("no users");
    if (stream.size() != users.size() || noise_w.size() != users.size())
        throw std::invalid_argument("per-user data size mismatch");
    if (baseband == Baseband::Diagonal && streams != s.geometry.num_waveguides)
        throw std::invalid_argument("division needs one stream per waveguide");
    PddSystem sys;
    sys.scenario = s;
    sys.users = users;
    sys.stream = stream;
    sys.streams = streams;
    sys.baseband = baseband;
    sys.noise_ref = *std::min_element(noise_w.begin(), noise_w.end());
    for (double n : noise_w) sys.noise.push_back(n / sys.noise_ref);
    for (int st : stream)
        if (st < 0 || st >= streams) throw std::invalid_argument("stream index out of range");
    sys.amp = s.rf.reference_gain * std::sqrt(s.rf.max_transmit_power_w) /
              (std::sqrt(static_cast<double>(s.geometry.antennas_per_waveguide)) * std::sqrt(sys.noise_ref));
    return sys;
}

struct PddState {
    Eigen::MatrixXd x;                     // K x N positions
    Eigen::MatrixXcd w;                    // K x S normalized beamformers
    std::vector<Eigen::MatrixXcd> u;       // per user, K x N
    std::vector<Eigen::MatrixXd> e;        // per user, K x N phases
    std::vector<Eigen::MatrixXcd> dual_u;
    std::vector<Eigen::MatrixXd> dual_e;
    Eigen::VectorXcd mu;
    double gamma = 0.0;
    double rho = 1e-3;
};

// ---------------------------------------------------------------------------
// Geometry helpers

inline Eigen::MatrixXd user_distances(const PddSystem &sys, const Eigen::MatrixXd &x, int j) {
    const auto &g = sys.scenario.geometry;
    Eigen::MatrixXd r(sys.K(), sys.N());
    for (int i = 0; i < sys.K(); ++i)
        for (int n = 0; n < sys.N(); ++n)
            r(i, n) = antenna_user_distance(sys.users[j], x(i, n), g.waveguide_y_coords_m[i], g.height_m);
    return r;
}

/// phi = k r + k_g x for every antenna, given distances r.
inline Eigen::MatrixXd total_phase(const PddSystem &sys, const Eigen::MatrixXd &x, const Eigen::MatrixXd &r) {
    return (sys.k_free() * r + sys.k_guided() * x).eval();
}

/// Normalized channels from the auxiliary coefficients (J x K).
inline Eigen::MatrixXcd aux_channels(const PddSystem &sys, const PddState &st) {
    Eigen::MatrixXcd H(sys.num_users(), sys.K());
    for (int j = 0; j < sys.num_users(); ++j) H.row(j) = sys.amp * st.u[j].rowwise().sum().transpose();
    return H;
}

/// Normalized channels from the true geometry (J x K).
inline Eigen::MatrixXcd layout_channels(const PddSystem &sys, const Eigen::MatrixXd &x) {
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(sys.num_users(), sys.K());
    for (int j = 0; j < sys.num_users(); ++j) {
        const Eigen::MatrixXd r = user_distances(sys, x, j);
        const Eigen::MatrixXd phi = total_phase(sys, x, r);
        for (int i = 0; i < sys.K(); ++i)
            for (int n = 0; n < sys.N(); ++n) H(j, i) += std::polar(sys.amp / r(i, n), -phi(i, n));
    }
    return H;
}

// ---------------------------------------------------------------------------
// Quadratic transform

inline std::vector<double> system_sinr(const Eigen::MatrixXcd &H, const Eigen::MatrixXcd &W,
                                       const std::vector<int> &stream, const std::vector<double> &noise) {
    std::vector<double> out;
    for (Eigen::Index j = 0; j < H.rows(); ++j) {
        const Eigen::RowVectorXcd y = H.row(j) * W;
        double interf = 0.0;
        for (Eigen::Index s = 0; s < W.cols(); ++s)
            if (s != stream[j]) interf += std::norm(y(s));
        out.push_back(std::norm(y(stream[j])) / (interf + noise[j]));
    }
    return out;
}

/// Closed-form multiplier: desired amplitude over interference plus noise.
inline Eigen::VectorXcd mu_update(const Eigen::MatrixXcd &H, const Eigen::MatrixXcd &W, const std::vector<int> &stream,
                                  const std::vector<double> &noise) {
    Eigen::VectorXcd mu(H.rows());
    for (Eigen::Index j = 0; j < H.rows(); ++j) {
        const Eigen::RowVectorXcd y = H.row(j) * W;
        double interf = 0.0;
        for (Eigen::Index s = 0; s < W.cols(); ++s)
            if (s != stream[j]) interf += std::norm(y(s));
        mu(j) = y(stream[j]) / (interf + noise[j]);
    }
    return mu;
}

/// y = 2 Re{mu* h w_s} - |mu|^2 (sum_{s' != s} |h w_s'|^2 + n).
inline double transform_value(cd mu, const Eigen::RowVectorXcd &h, const Eigen::MatrixXcd &W, int stream, double noise) {
    const Eigen::RowVectorXcd y = h * W;
    double interf = 0.0;
    for (Eigen::Index s = 0; s < W.cols(); ++s)
        if (s != stream) interf += std::norm(y(s));
    return 2.0 * (std::conj(mu) * y(stream)).real() - std::norm(mu) * (interf + noise);
}

inline double min_transform_value(const PddSystem &sys, const PddState &st) {
    const Eigen::MatrixXcd H = aux_channels(sys, st);
    double m = std::numeric_limits<double>::infinity();
    for (int j = 0; j < sys.num_users(); ++j)
        m = std::min(m, transform_value(st.mu(j), H.row(j), st.w, sys.stream[j], sys.noise[j]));
    return m;
}

// ---------------------------------------------------------------------------
// Augmented Lagrangian and residuals

struct ResidualPack {
    std::vector<Eigen::MatrixXcd> a; // per user: u~ r - exp(-j e)
    std::vector<Eigen::MatrixXd> b;  // per user: e - phi
    double max_inf_norm = 0.0;
};

inline ResidualPack residuals(const PddSystem &sys, const PddState &st) {
    ResidualPack out;
    for (int j = 0; j < sys.num_users(); ++j) {
        const Eigen::MatrixXd r = user_distances(sys, st.x, j);
        Eigen::MatrixXcd A(sys.K(), sys.N());
        for (int i = 0; i < sys.K(); ++i)
            for (int n = 0; n < sys.N(); ++n) A(i, n) = st.u[j](i, n) * r(i, n) - std::polar(1.0, -st.e[j](i, n));
        Eigen::MatrixXd B = st.e[j] - total_phase(sys, st.x, r);
        out.max_inf_norm = std::max({out.max_inf_norm, A.cwiseAbs().maxCoeff(), B.cwiseAbs().maxCoeff()});
        out.a.push_back(std::move(A));
        out.b.push_back(std::move(B));
    }
    return out;
}

/// (1 / 2 rho) sum_j ( ||A_j + rho dual_u||^2 + ||B_j + rho dual_e||^2 )
inline double al_value(const PddSystem &sys, const PddState &st) {
    const auto res = residuals(sys, st);
    double acc = 0.0;
    for (int j = 0; j < sys.num_users(); ++j) {
        acc += (res.a[j] + st.rho * st.dual_u[j]).squaredNorm();
        acc += (res.b[j] + st.rho * st.dual_e[j]).squaredNorm();
    }
    return acc / (2.0 * st.rho);
}

// ---------------------------------------------------------------------------
// Block updates

/// Quadratic y(mu, h, .) as a function of the stacked beamformer vec(W) (A x S, column-major) for a user
/// with channel h (1 x A) decoding stream `own` under noise n.
inline ComplexConcaveQuadratic transform_quadratic(const Eigen::RowVectorXcd &h, cd mu, int own, int streams,
                                               double noise) {
    const auto A = h.size();
    ComplexConcaveQuadratic f;
    f.a = Eigen::VectorXcd::Zero(A * streams);
    f.Q = Eigen::MatrixXcd::Zero(A * streams, A * streams);
    f.a.segment(own * A, A) = mu * h.adjoint();
    const Eigen::MatrixXcd hh = std::norm(mu) * (h.adjoint() * h);
    for (int t = 0; t < streams; ++t)
        if (t != own) f.Q.block(t * A, t * A, A, A) = hh;
    f.c = -std::norm(mu) * noise;
    return f;
}

inline ComplexConcaveQuadratic beamformer_quadratic(const PddSystem &sys, const Eigen::RowVectorXcd &h, cd mu,
                                                    int j) {
    return transform_quadratic(h, mu, sys.stream[j], sys.streams, sys.noise[j]);
}

/// Quadratic y_j as a function of the per-waveguide amplitudes sqrt(p~) (division).
inline ConcaveQuadratic amplitude_quadratic(const PddSystem &sys, const Eigen::RowVectorXcd &h, cd mu, int j) {
    const int K = sys.K(), s = sys.stream[j];
    ConcaveQuadratic f;
    f.a = Eigen::VectorXd::Zero(K);
    f.Q = Eigen::MatrixXd::Zero(K, K);
    f.a(s) = (std::conj(mu) * h(s)).real();
    for (int k = 0; k < K; ++k)
        if (k != s) f.Q(k, k) = std::norm(mu) * std::norm(h(k));
    f.c = -std::norm(mu) * sys.noise[j];
    return f;
}

inline void mu_step(const PddSystem &sys, PddState &st) {
    st.mu = mu_update(layout_channels(sys, st.x), st.w, sys.stream, sys.noise);
}

/// {gamma, W} (or {gamma, p}) for fixed mu and U.
inline SolveReport subproblem_w(const PddSystem &sys, PddState &st) {
    const Eigen::MatrixXcd H = aux_channels(sys, st);
    SolveReport rep;
    if (sys.baseband == Baseband::Diagonal) {
        std::vector<ConcaveQuadratic> fs;
        for (int j = 0; j < sys.num_users(); ++j) fs.push_back(amplitude_quadratic(sys, H.row(j), st.mu(j), j));
        BlockMaxMinProblem p;
        p.blocks.push_back({sys.K(), {}, {}, 1.0});
        for (auto &f : fs) p.constraints.push_back({0, std::move(f)});
        rep = solve_block_maxmin(p, st.w.diagonal().real().cwiseAbs());
        Eigen::VectorXd s = rep.optimizer.cwiseAbs();
        if (s.squaredNorm() > 1.0) s /= s.norm();
        const Eigen::MatrixXcd w_new = s.cast<cd>().asDiagonal();
        st.w = w_new;
    } else {
        BlockMaxMinProblem p;
        p.blocks.push_back({2 * sys.K() * sys.streams, {}, {}, 1.0});
        for (int j = 0; j < sys.num_users(); ++j)
            p.constraints.push_back({0, beamformer_quadratic(sys, H.row(j), st.mu(j), j).realify()});
        const Eigen::VectorXcd w0 = Eigen::Map<const Eigen::VectorXcd>(st.w.data(), st.w.size());
        rep = solve_block_maxmin(p, realify(w0));
        Eigen::VectorXcd w = complexify(rep.optimizer);
        if (w.squaredNorm() > 1.0) w /= w.norm();
        st.w = Eigen::Map<Eigen::MatrixXcd>(w.data(), sys.K(), sys.streams);
    }
    st.gamma = min_transform_value(sys, st);
    return rep;
}

/// {gamma, U} for fixed mu, W, X, E and duals.
///
/// y_j depends on u~_j only through the per-waveguide sums q_ji = sum_n u~_jin, so the
/// penalty is minimized in closed form for each q and the solver only sees q.
inline SolveReport subproblem_u(const PddSystem &sys, PddState &st) {
    const int K = sys.K(), N = sys.N(), J = sys.num_users();
    BlockMaxMinProblem p;
    std::vector<Eigen::MatrixXd> dist(J);
    std::vector<Eigen::MatrixXcd> target(J); // t_ji
    std::vector<Eigen::VectorXd> omega(J);
    Eigen::VectorXd start(2 * K * J);
    for (int j = 0; j < J; ++j) {
        dist[j] = user_distances(sys, st.x, j);
        omega[j] = dist[j].array().square().inverse().rowwise().sum().inverse().matrix();
        Eigen::VectorXcd t(K);
        for (int i = 0; i < K; ++i) {
            cd acc = 0.0;
            for (int n = 0; n < N; ++n)
                acc += (std::polar(1.0, -st.e[j](i, n)) - st.rho * st.dual_u[j](i, n)) / dist[j](i, n);
            t(i) = acc;
        }
        target[j] = t;

        MaxMinBlock blk;
        blk.dim = 2 * K;
        blk.prox_weight.resize(2 * K);
        blk.prox_weight << omega[j] / st.rho, omega[j] / st.rho;
        blk.prox_center = realify(t);
        p.blocks.push_back(blk);

        const int s = sys.stream[j];
        ComplexConcaveQuadratic f;
        f.a = st.mu(j) * sys.amp * st.w.col(s).conjugate();
        f.Q = Eigen::MatrixXcd::Zero(K, K);
        for (int t2 = 0; t2 < sys.streams; ++t2)
            if (t2 != s) f.Q += st.w.col(t2).conjugate() * st.w.col(t2).transpose();
        f.Q *= std::norm(st.mu(j)) * sys.amp * sys.amp;
        f.c = -std::norm(st.mu(j)) * sys.noise[j];
        p.constraints.push_back({j, f.realify()});
        start.segment(2 * K * j, 2 * K) = realify(st.u[j].rowwise().sum().eval());
    }
    const SolveReport rep = solve_block_maxmin(p, start);
    for (int j = 0; j < J; ++j) {
        const Eigen::VectorXcd q = complexify(rep.optimizer.segment(2 * K * j, 2 * K));
        for (int i = 0; i < K; ++i) {
            const cd nu = omega[j](i) * (q(i) - target[j](i, 0));
            for (int n = 0; n < N; ++n) {
                const double r = dist[j](i, n);
                const cd zeta = st.rho * st.dual_u[j](i, n) - std::polar(1.0, -st.e[j](i, n));
                st.u[j](i, n) = nu / (r * r) - zeta / r;
            }
        }
    }
    st.gamma = min_transform_value(sys, st);
    return rep;
}

/// Terms of one antenna's share of the augmented Lagrangian as a function of its position,
/// plus a convex majorizer tangent at the expansion point.
class AntennaSurrogate {
  public:
    struct UserTerm {
        double ux;       // user x
        double dist2;    // squared lateral+vertical offset
        double u_abs2;   // |u~|^2
        double re_uv;    // Re{conj(u~) v},  v = exp(-j e) - rho dual_u
        double v_abs2;   // |v|^2
        double s;        // e + rho dual_e
    };

    AntennaSurrogate(double rho, double k_free, double k_guided, double x_expand)
        : rho_(rho), k1_(k_free), k2_(k_guided), xt_(x_expand) {}

    void add_user(const UserTerm &t) { terms_.push_back(t); }

    /// Exact augmented-Lagrangian contribution.
    double exact(double x) const {
        double acc = 0.0;
        for (const auto &t : terms_) {
            const double r = std::sqrt((x - t.ux) * (x - t.ux) + t.dist2);
            const double ph = t.s - k1_ * r - k2_ * x;
            acc += t.u_abs2 * r * r - 2.0 * r * t.re_uv + t.v_abs2 + ph * ph;
        }
        return acc / (2.0 * rho_);
    }

    double value(double x) const { return eval(x, 0); }
    double derivative(double x) const { return eval(x, 1); }
    double second_derivative(double x) const { return eval(x, 2); }

  private:
    // Per user: the amplitude part keeps |u~|^2 r^2 exactly and linearizes -2 Re{u~* v} r when it is
    // concave. The phase part uses phi convex, so phi >= its tangent T and
    // (s - phi)^2 <= max(0, s - T)^2 + max(0, phi - s)^2, both convex and tangent at x_t.
    double eval(double x, int order) const {
        double acc = 0.0;
        for (const auto &t : terms_) {
            const double a = t.ux;
            const double r = std::sqrt((x - a) * (x - a) + t.dist2);
            const double rp = (x - a) / r, rpp = t.dist2 / (r * r * r);
            const double rt = std::sqrt((xt_ - a) * (xt_ - a) + t.dist2);
            const double rtp = (xt_ - a) / rt;

            const double quad[3] = {t.u_abs2 * r * r + t.v_abs2, 2.0 * t.u_abs2 * (x - a), 2.0 * t.u_abs2};
            acc += quad[order];
            if (t.re_uv > 0.0) {
                const double lin[3] = {rt + rtp * (x - xt_), rtp, 0.0};
                acc -= 2.0 * t.re_uv * lin[order];
            } else {
                const double ex[3] = {r, rp, rpp};
                acc -= 2.0 * t.re_uv * ex[order];
            }

            const double slope_t = k1_ * rtp + k2_;
            const double below = t.s - (k1_ * rt + k2_ * xt_ + slope_t * (x - xt_));
            if (below > 0.0) {
                const double v[3] = {below * below, -2.0 * below * slope_t, 2.0 * slope_t * slope_t};
                acc += v[order];
            }
            const double above = k1_ * r + k2_ * x - t.s;
            if (above > 0.0) {
                const double slope = k1_ * rp + k2_;
                const double v[3] = {above * above, 2.0 * above * slope, 2.0 * (slope * slope + above * k1_ * rpp)};
                acc += v[order];
            }
        }
        return acc / (2.0 * rho_);
    }

    double rho_, k1_, k2_, xt_;
    std::vector<UserTerm> terms_;
};

/// Majorizers for every antenna of waveguide i, expanded at the current positions.
inline std::vector<AntennaSurrogate> position_surrogates(const PddSystem &sys, const PddState &st, int i) {
    const auto &g = sys.scenario.geometry;
    std::vector<AntennaSurrogate> out;
    for (int n = 0; n < sys.N(); ++n) {
        AntennaSurrogate sur(st.rho, sys.k_free(), sys.k_guided(), st.x(i, n));
        for (int j = 0; j < sys.num_users(); ++j) {
            const double dy = sys.users[j].y - g.waveguide_y_coords_m[i];
            const cd u = st.u[j](i, n);
            const cd v = std::polar(1.0, -st.e[j](i, n)) - st.rho * st.dual_u[j](i, n);
            sur.add_user({sys.users[j].x, dy * dy + g.height_m * g.height_m, std::norm(u), (std::conj(u) * v).real(),
                          std::norm(v), st.e[j](i, n) + st.rho * st.dual_e[j](i, n)});
        }
        out.push_back(std::move(sur));
    }
    return out;
}

/// One majorize-minimize pass over the antenna positions.
inline void subproblem_x(const PddSystem &sys, PddState &st) {
    const auto &g = sys.scenario.geometry;
    for (int i = 0; i < sys.K(); ++i) {
        const auto sur = position_surrogates(sys, st, i);
        struct Objective {
            const std::vector<AntennaSurrogate> &s;
            double derivative(int n, double x) const { return s[n].derivative(x); }
            double second_derivative(int n, double x) const { return s[n].second_derivative(x); }
        } obj{sur};
        std::vector<double> hint(sys.N());
        for (int n = 0; n < sys.N(); ++n) hint[n] = st.x(i, n);
        const auto x = box_ordered_minimize(obj, sys.N(), g.waveguide_length_m, g.min_antenna_spacing_m, hint);
        // keep the old row if rounding made the surrogate step worse
        double old_v = 0.0, new_v = 0.0;
        for (int n = 0; n < sys.N(); ++n) {
            old_v += sur[n].value(st.x(i, n));
            new_v += sur[n].value(x[n]);
        }
        if (new_v <= old_v)
            for (int n = 0; n < sys.N(); ++n) st.x(i, n) = x[n];
    }
}

/// Closed-form phase update from the Lipschitz majorizer of the exp(-j e) coupling.
inline double e_entry_update(cd u_times_r, cd dual_u, double dual_e, double theta, double rho, double e_prev) {
    const cd Z = dual_u + u_times_r / rho;
    const double varrho = std::abs(Z);
    const double grad = (Z * std::polar(1.0, e_prev)).imag();
    return (varrho * e_prev + theta / rho - dual_e - grad) / (varrho + 1.0 / rho);
}

/// The per-entry objective the E update majorizes (for testing).
inline double e_entry_objective(cd u_times_r, cd dual_u, double dual_e, double theta, double rho, double e) {
    return (std::norm(u_times_r - std::polar(1.0, -e) + rho * dual_u) +
            std::pow(e - theta + rho * dual_e, 2)) /
           (2.0 * rho);
}

/// Majorizer of e_entry_objective at e_prev (for testing).
inline double e_entry_surrogate(cd u_times_r, cd dual_u, double dual_e, double theta, double rho, double e_prev,
                                double e) {
    const cd Z = dual_u + u_times_r / rho;
    const double varrho = std::abs(Z);
    const double grad = (Z * std::polar(1.0, e_prev)).imag();
    const double at_prev = e_entry_objective(u_times_r, dual_u, dual_e, theta, rho, e_prev) -
                           std::pow(e_prev - theta + rho * dual_e, 2) / (2.0 * rho);
    return at_prev + grad * (e - e_prev) + 0.5 * varrho * (e - e_prev) * (e - e_prev) +
           std::pow(e - theta + rho * dual_e, 2) / (2.0 * rho);
}

inline void e_step(const PddSystem &sys, PddState &st) {
    for (int j = 0; j < sys.num_users(); ++j) {
        const Eigen::MatrixXd r = user_distances(sys, st.x, j);
        const Eigen::MatrixXd theta = total_phase(sys, st.x, r);
        for (int i = 0; i < sys.K(); ++i)
            for (int n = 0; n < sys.N(); ++n)
                st.e[j](i, n) = e_entry_update(st.u[j](i, n) * r(i, n), st.dual_u[j](i, n), st.dual_e[j](i, n),
                                               theta(i, n), st.rho, st.e[j](i, n));
    }
}

// ---------------------------------------------------------------------------
// Driver

/// Coefficients consistent with the layout so that every residual is zero.
inline void sync_aux_to_layout(const PddSystem &sys, PddState &st) {
    st.u.assign(sys.num_users(), Eigen::MatrixXcd(sys.K(), sys.N()));
    st.e.assign(sys.num_users(), Eigen::MatrixXd(sys.K(), sys.N()));
    for (int j = 0; j < sys.num_users(); ++j) {
        const Eigen::MatrixXd r = user_distances(sys, st.x, j);
        st.e[j] = total_phase(sys, st.x, r);
        for (int i = 0; i < sys.K(); ++i)
            for (int n = 0; n < sys.N(); ++n) st.u[j](i, n) = std::polar(1.0 / r(i, n), -st.e[j](i, n));
    }
}

/// Sum of the normalized channels of each stream's users, every column at power 1/S.
inline Eigen::MatrixXcd matched_beamformers(const Eigen::MatrixXcd &H, const std::vector<int> &stream, int streams) {
    const auto A = H.cols();
    Eigen::MatrixXcd W = Eigen::MatrixXcd::Zero(A, streams);
    for (Eigen::Index j = 0; j < H.rows(); ++j) {
        const double nrm = H.row(j).norm();
        if (nrm > 0.0) W.col(stream[j]) += H.row(j).adjoint() / nrm;
    }
    for (int s = 0; s < streams; ++s) {
        const double nrm = W.col(s).norm();
        if (nrm > 0.0) W.col(s) /= nrm * std::sqrt(static_cast<double>(streams));
        else W(s % A, s) = 1.0 / std::sqrt(static_cast<double>(streams));
    }
    return W;
}

/// Best position in [lo, hi] for adding one antenna to the running per-user sums:
/// maximizes the weakest user's combined amplitude (grid, then golden-section polish).
inline double best_addition(const std::vector<PhaseProfile> &phis, const std::vector<cd> &sums, double lo,
                            double hi) {
    auto score = [&](double x) {
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < phis.size(); ++j)
            worst = std::min(worst, std::abs(sums[j] + std::polar(1.0 / phis[j].distance(x), -phis[j](x))));
        return worst;
    };
    constexpr int grid = 128;
    const double step = (hi - lo) / grid;
    int best = 0;
    double best_score = -1.0;
    for (int k = 0; k <= grid; ++k)
        if (const double v = score(lo + k * step); v > best_score) best_score = v, best = k;
    double a = lo + std::max(0, best - 1) * step, b = lo + std::min(grid, best + 1) * step;
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 40; ++it) {
        const double c = b - ratio * (b - a), d = a + ratio * (b - a);
        if (score(c) > score(d)) b = d;
        else a = c;
    }
    const double x = 0.5 * (a + b);
    return score(x) >= best_score ? x : lo + best * step;
}

/// Antenna block on waveguide i for a set of users: centred at their mean x, then grown outward from the
/// middle antenna so each addition keeps the weakest user's signals as coherent as possible.
inline Eigen::RowVectorXd coherent_group_block(const std::vector<Point3> &users, int i, const Scenario &s) {
    const auto &g = s.geometry;
    const int N = g.antennas_per_waveguide;
    const double L = g.waveguide_length_m, delta = g.min_antenna_spacing_m;
    double mean_x = 0.0;
    std::vector<PhaseProfile> phis;
    for (const auto &u : users) {
        mean_x += u.x / users.size();
        phis.push_back({u, g.waveguide_y_coords_m[i], g.height_m, s.rf.wavenumber(), s.rf.guided_wavenumber()});
    }
    Eigen::RowVectorXd row(N);
    if (N == 1) {
        row(0) = best_addition(phis, std::vector<cd>(users.size()), std::max(0.0, mean_x - phis[0].max_period()),
                               std::min(L, mean_x + phis[0].max_period()));
        return row;
    }
    const double centre = clamp_block_centre(mean_x, g, s.rf);
    const int ref = reference_antenna(N);
    row(ref) = centre + (ref - 0.5 * (N - 1)) * delta;
    std::vector<cd> sums;
    auto add = [&](double x) {
        for (std::size_t j = 0; j < phis.size(); ++j) {
            if (sums.size() <= j) sums.emplace_back(0.0);
            sums[j] += std::polar(1.0 / phis[j].distance(x), -phis[j](x));
        }
    };
    add(row(ref));
    const double period = phis[0].max_period();
    for (int n = ref + 1; n < N; ++n) {
        const double lo = row(n - 1) + delta, hi = std::min(L - (N - 1 - n) * delta, lo + period);
        if (lo > hi) throw std::runtime_error("antenna block does not fit on the waveguide");
        add(row(n) = best_addition(phis, sums, lo, hi));
    }
    for (int n = ref - 1; n >= 0; --n) {
        const double hi = row(n + 1) - delta, lo = std::max(n * delta, hi - period);
        if (lo > hi) throw std::runtime_error("antenna block does not fit on the waveguide");
        add(row(n) = best_addition(phis, sums, lo, hi));
    }
    return row;
}

/// Waveguide i serves stream i when there is one stream per waveguide, otherwise every user.
inline Eigen::MatrixXd user_centred_layout(const PddSystem &sys) {
    Eigen::MatrixXd x(sys.K(), sys.N());
    for (int i = 0; i < sys.K(); ++i) {
        std::vector<Point3> served;
        for (int j = 0; j < sys.num_users(); ++j)
            if (sys.streams != sys.K() || sys.stream[j] == i) served.push_back(sys.users[j]);
        if (served.empty()) served = sys.users;
        x.row(i) = coherent_group_block(served, i, sys.scenario);
    }
    return x;
}

inline PddState initial_state(const PddSystem &sys, const PddConfig &cfg) {
    PddState st;
    st.x = cfg.initial_layout == InitialLayout::Uniform ? uniform_layout(sys.scenario.geometry).x_positions_m
                                                        : user_centred_layout(sys);
    st.rho = cfg.initial_penalty;
    sync_aux_to_layout(sys, st);
    st.dual_u.assign(sys.num_users(), Eigen::MatrixXcd::Zero(sys.K(), sys.N()));
    st.dual_e.assign(sys.num_users(), Eigen::MatrixXd::Zero(sys.K(), sys.N()));
    if (sys.baseband == Baseband::Diagonal)
        st.w = Eigen::MatrixXcd::Identity(sys.K(), sys.K()) / std::sqrt(static_cast<double>(sys.K()));
    else
        st.w = matched_beamformers(layout_channels(sys, st.x), sys.stream, sys.streams);
    mu_step(sys, st);
    st.gamma = min_transform_value(sys, st);
    if (cfg.relative_penalty) st.rho /= std::max(st.gamma, 1e-12);
    return st;
}

struct TraceRow {
    int group = -1;      // switching slot, -1 for joint systems
    int outer = 0;
    int inner = 0;
    double min_rate = 0.0;  // true rate of the current layout and beamformer
    double objective = 0.0; // min y - augmented Lagrangian
    double max_residual = 0.0;
    double rho = 0.0;
};

struct SystemResult {
    PddState state;
    std::vector<double> sinr;  // true SINRs of the returned layout/beamformer
    int outer_iterations = 0;
    int inner_iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
    std::vector<TraceRow> trace;
};

inline double true_min_sinr(const PddSystem &sys, const PddState &st) {
    const auto s = system_sinr(layout_channels(sys, st.x), st.w, sys.stream, sys.noise);
    return *std::min_element(s.begin(), s.end());
}

inline SystemResult run_pdd(const PddSystem &sys, const PddConfig &cfg, int group_tag = -1) {
    cfg.validate();
    SystemResult out;
    PddState st = initial_state(sys, cfg);
    double prev_residual = std::numeric_limits<double>::infinity();
    PddState best = st;
    double best_sinr = true_min_sinr(sys, st);

    for (int outer = 1; outer <= cfg.max_outer; ++outer) {
        double prev_obj = -std::numeric_limits<double>::infinity();
        // zero SINR is a fixed point (mu = 0 makes every transformed SINR vanish); back off instead
        const PddState start = st;
        const double start_sinr = true_min_sinr(sys, st);
        bool collapsed = false;
        for (int inner = 1; inner <= cfg.max_inner; ++inner) {
            mu_step(sys, st);
            subproblem_w(sys, st);
            subproblem_u(sys, st);
            subproblem_x(sys, st);
            e_step(sys, st);
            const double obj = st.gamma - al_value(sys, st);
            ++out.inner_iterations;
            const double ms = true_min_sinr(sys, st);
            out.trace.push_back({group_tag, outer, inner, std::log2(1.0 + ms), obj, residuals(sys, st).max_inf_norm,
                                 st.rho});
            if (ms <= 1e-6 * start_sinr) {
                collapsed = true;
                break;
            }
            const bool done = std::isfinite(prev_obj) &&
                              std::abs(obj - prev_obj) <= cfg.improvement_tol * std::max(std::abs(prev_obj), 1e-12);
            prev_obj = obj;
            if (done) break;
        }
        out.outer_iterations = outer;
        if (collapsed) {
            st = start;
            st.rho *= cfg.penalty_shrink;
            continue;
        }
        const auto res = residuals(sys, st);
        out.final_residual = res.max_inf_norm;
        const double ms = true_min_sinr(sys, st);
        if (ms > best_sinr) {
            best_sinr = ms;
            best = st;
        }
        if (res.max_inf_norm <= cfg.residual_tol) {
            out.converged = true;
            break;
        }
        if (res.max_inf_norm <= cfg.residual_improvement * prev_residual) {
            for (int j = 0; j < sys.num_users(); ++j) {
                st.dual_u[j] += res.a[j] / st.rho;
                st.dual_e[j] += res.b[j] / st.rho;
            }
        } else {
            st.rho *= cfg.penalty_shrink;
        }
        prev_residual = res.max_inf_norm;
    }
    out.state = out.converged ? st : best;
    out.sinr = system_sinr(layout_channels(sys, out.state.x), out.state.w, sys.stream, sys.noise);
    return out;
}

// ---------------------------------------------------------------------------
// Public entry point

struct PddResult {
    Structure structure = Structure::WM;
    std::vector<PinchingLayout> layouts;  // one for WM/WD, one per group for WS
    Eigen::MatrixXcd beamformers;         // K x K physical; column k serves group k
    Eigen::VectorXd power;                // WD power allocation
    std::vector<double> time_shares;      // WS
    RateReport report;
    int outer_iterations = 0;
    int inner_iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
    std::vector<TraceRow> trace;
};

inline PddResult pdd_solve(const Scenario &s, const UserLayout &users, Structure structure,
                           const PddConfig &cfg = {}) {
    const int K = s.geometry.num_waveguides;
    if (users.group_count != K) throw std::invalid_argument("one user group per waveguide required");
    const double sqrt_p = std::sqrt(s.rf.max_transmit_power_w);
    PddResult out;
    out.structure = structure;
    std::vector<int> stream;
    for (int j = 0; j < users.size(); ++j) stream.push_back(users.group_of(j));

    if (structure != Structure::WS) {
        const auto sys = make_system(s, users.positions, stream, users.noise_power_w, K,
                                     structure == Structure::WD ? Baseband::Diagonal : Baseband::Full);
        auto r = run_pdd(sys, cfg);
        out.layouts.push_back({r.state.x});
        out.beamformers = r.state.w * sqrt_p;
        if (structure == Structure::WD) {
            out.power = r.state.w.diagonal().cwiseAbs2().real() * s.rf.max_transmit_power_w;
            out.report = rate_wd(out.layouts[0], out.power, users, s);
        } else {
            out.report = rate_wm(out.layouts[0], out.beamformers, users, s);
        }
        out.outer_iterations = r.outer_iterations;
        out.inner_iterations = r.inner_iterations;
        out.final_residual = r.final_residual;
        out.converged = r.converged;
        out.trace = std::move(r.trace);
        return out;
    }

    // Switching: each group gets its own slot, layout and single-stream beamformer.
    out.beamformers = Eigen::MatrixXcd::Zero(K, K);
    out.converged = true;
    std::vector<double> slot_rates;
    for (int k = 0; k < K; ++k) {
        std::vector<Point3> pos;
        std::vector<double> noise;
        for (int g = 0; g < users.users_per_group; ++g) {
            pos.push_back(users.positions[users.index(k, g)]);
            noise.push_back(users.noise_power_w[users.index(k, g)]);
        }
        const auto sys = make_system(s, pos, std::vector<int>(pos.size(), 0), noise, 1, Baseband::Full);
        auto r = run_pdd(sys, cfg, k);
        out.layouts.push_back({r.state.x});
        out.beamformers.col(k) = r.state.w.col(0) * sqrt_p;
        slot_rates.push_back(std::log2(1.0 + *std::min_element(r.sinr.begin(), r.sinr.end())));
        out.outer_iterations = std::max(out.outer_iterations, r.outer_iterations);
        out.inner_iterations += r.inner_iterations;
        out.final_residual = std::max(out.final_residual, r.final_residual);
        out.converged = out.converged && r.converged;
        out.trace.insert(out.trace.end(), r.trace.begin(), r.trace.end());
    }
    out.time_shares = time_allocation(slot_rates).time_shares;
    out.report = rate_ws(out.layouts, out.beamformers, out.time_shares, users, s);
    return out;
}

} // namespace pass
