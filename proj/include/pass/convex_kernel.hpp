// SPDX-License-Identifier: Apache-2.0
//
// pass - pinching-antenna multi-user beamforming toolkit
//
// Small dense convex solvers: an epigraph log-barrier method for max-min of
// concave quadratics, an exact ordered-placement solver, and the closed-form
// time split.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace pass {

/// f(z) = 2 a^T z - z^T Q z + c over real z, Q symmetric PSD.
struct ConcaveQuadratic {
    Eigen::VectorXd a;
    Eigen::MatrixXd Q;
    double c = 0.0;

    int dim() const { return static_cast<int>(a.size()); }
    double value(const Eigen::VectorXd &z) const { return 2.0 * a.dot(z) - z.dot(Q * z) + c; }
    Eigen::VectorXd gradient(const Eigen::VectorXd &z) const { return 2.0 * (a - Q * z); }
};

/// f(z) = 2 Re{a^H z} - z^H Q z + c over complex z, Q Hermitian PSD.
struct ComplexConcaveQuadratic {
    Eigen::VectorXcd a;
    Eigen::MatrixXcd Q;
    double c = 0.0;

    double value(const Eigen::VectorXcd &z) const {
        return 2.0 * a.dot(z).real() - z.dot(Q * z).real() + c;
    }

    /// Same function over [Re z; Im z].
    ConcaveQuadratic realify() const {
        const auto n = a.size();
        ConcaveQuadratic out;
        out.a.resize(2 * n);
        out.a << a.real(), a.imag();
        out.Q.resize(2 * n, 2 * n);
        out.Q << Q.real(), -Q.imag(), Q.imag(), Q.real();
        out.c = c;
        return out;
    }
};

inline Eigen::VectorXd realify(const Eigen::VectorXcd &z) {
    Eigen::VectorXd out(2 * z.size());
    out << z.real(), z.imag();
    return out;
}

inline Eigen::VectorXcd complexify(const Eigen::VectorXd &z) {
    const auto n = z.size() / 2;
    Eigen::VectorXcd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out(i) = {z(i), z(n + i)};
    return out;
}

struct SolveReport {
    double value = 0.0;          // optimum objective
    double gamma = 0.0;          // epigraph level (min of the quadratics at the optimizer)
    Eigen::VectorXd optimizer;   // all blocks concatenated
    double feasibility = 0.0;    // largest constraint violation at the optimizer
    double gap = 0.0;            // duality-gap bound m / t
    int iterations = 0;          // Newton steps
    bool converged = false;
};

// ---------------------------------------------------------------------------
// Block max-min problem
//
//   maximize    gamma - sum_b 1/2 sum_i d_i (z_i - c_i)^2
//   subject to  f_k(z_{b(k)}) >= gamma          for each constraint k
//               ||z_b||^2 <= R_b                 for blocks with a ball
//
// Blocks only interact through gamma, so each Newton system is solved by a
// Schur complement on gamma.

struct MaxMinBlock {
    int dim = 0;
    Eigen::VectorXd prox_weight; // d, empty = no proximal term
    Eigen::VectorXd prox_center; // c
    double ball_radius_sq = std::numeric_limits<double>::infinity();
};

struct MaxMinConstraint {
    int block = 0;
    ConcaveQuadratic f;
};

struct BlockMaxMinProblem {
    std::vector<MaxMinBlock> blocks;
    std::vector<MaxMinConstraint> constraints;
};

struct BarrierOptions {
    double tol_abs = 1e-10;
    double tol_rel = 1e-11;
    double t_growth = 10.0;
    int max_newton = 600;
};

namespace detail {

struct BlockView {
    int offset = 0;
    int dim = 0;
};

inline std::vector<BlockView> block_views(const BlockMaxMinProblem &p) {
    std::vector<BlockView> v;
    int off = 0;
    for (const auto &b : p.blocks) {
        v.push_back({off, b.dim});
        off += b.dim;
    }
    return v;
}

inline double prox_value(const BlockMaxMinProblem &p, const std::vector<BlockView> &views, const Eigen::VectorXd &z) {
    double out = 0.0;
    for (size_t b = 0; b < p.blocks.size(); ++b) {
        const auto &blk = p.blocks[b];
        if (blk.prox_weight.size() == 0) continue;
        const auto diff = z.segment(views[b].offset, views[b].dim) - blk.prox_center;
        out += 0.5 * (blk.prox_weight.array() * diff.array().square()).sum();
    }
    return out;
}

} // namespace detail

/// Objective gamma - prox at (gamma, z); for reporting.
inline double block_maxmin_objective(const BlockMaxMinProblem &p, double gamma, const Eigen::VectorXd &z) {
    return gamma - detail::prox_value(p, detail::block_views(p), z);
}

/// Log-barrier interior-point solve. `start` must lie strictly inside every ball.
inline SolveReport solve_block_maxmin(const BlockMaxMinProblem &p, Eigen::VectorXd start,
                                      const BarrierOptions &opt = {}) {
    using Eigen::VectorXd;
    using Eigen::MatrixXd;
    const auto views = detail::block_views(p);
    const int nb = static_cast<int>(p.blocks.size());
    const int n = views.empty() ? 0 : views.back().offset + views.back().dim;
    if (p.constraints.empty()) throw std::invalid_argument("max-min problem needs at least one constraint");
    if (start.size() != n) throw std::invalid_argument("start point has wrong dimension");
    for (const auto &c : p.constraints)
        if (c.block < 0 || c.block >= nb || c.f.dim() != p.blocks[c.block].dim)
            throw std::invalid_argument("constraint does not match its block");

    // Pull the start strictly inside each ball.
    for (int b = 0; b < nb; ++b) {
        const double R = p.blocks[b].ball_radius_sq;
        if (!std::isfinite(R)) continue;
        if (!(R > 0.0)) throw std::invalid_argument("ball radius must be positive");
        auto seg = start.segment(views[b].offset, views[b].dim);
        const double nrm2 = seg.squaredNorm();
        if (nrm2 > 0.999 * R) seg *= std::sqrt(0.999 * R / nrm2);
    }

    int m = static_cast<int>(p.constraints.size());
    for (const auto &b : p.blocks)
        if (std::isfinite(b.ball_radius_sq)) ++m;

    auto fvals = [&](const VectorXd &z) {
        VectorXd f(p.constraints.size());
        for (size_t k = 0; k < p.constraints.size(); ++k) {
            const auto &c = p.constraints[k];
            f(k) = c.f.value(z.segment(views[c.block].offset, views[c.block].dim));
        }
        return f;
    };
    auto ball_slack = [&](const VectorXd &z, int b) {
        return p.blocks[b].ball_radius_sq - z.segment(views[b].offset, views[b].dim).squaredNorm();
    };

    VectorXd z = start;
    VectorXd f0 = fvals(z);
    const double fmin0 = f0.minCoeff();
    const double spread = std::max(1e-8, f0.maxCoeff() - fmin0);
    // Initial gap: how far gamma could plausibly move from the start, judged by each
    // constraint's gradient and the size of its block's feasible region.
    double reach = 0.0;
    for (const auto &c : p.constraints) {
        const auto &blk = p.blocks[c.block];
        const double g = c.f.gradient(z.segment(views[c.block].offset, views[c.block].dim)).norm();
        double r = std::numeric_limits<double>::infinity();
        if (std::isfinite(blk.ball_radius_sq)) r = 2.0 * g * std::sqrt(blk.ball_radius_sq);
        if (blk.prox_weight.size() && blk.prox_weight.minCoeff() > 0.0)
            r = std::min(r, g * g / blk.prox_weight.minCoeff());
        reach = std::max(reach, std::isfinite(r) ? r : g);
    }
    const double delta = std::max({1e-6, 1e-3 * std::abs(fmin0), spread, reach});
    double gamma = fmin0 - delta;
    double t = m / delta;

    // barrier function value; +inf outside the domain
    auto barrier = [&](double g, const VectorXd &zz, double tt) {
        double val = tt * (-g + detail::prox_value(p, views, zz));
        const VectorXd f = fvals(zz);
        for (Eigen::Index k = 0; k < f.size(); ++k) {
            const double s = f(k) - g;
            if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
            val -= std::log(s);
        }
        for (int b = 0; b < nb; ++b) {
            if (!std::isfinite(p.blocks[b].ball_radius_sq)) continue;
            const double s = ball_slack(zz, b);
            if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
            val -= std::log(s);
        }
        return val;
    };

    SolveReport rep;
    std::vector<MatrixXd> Hb(nb);
    std::vector<VectorXd> gb(nb), bb(nb);
    for (;;) {
        // centering
        for (int it = 0; it < 100 && rep.iterations < opt.max_newton; ++it) {
            ++rep.iterations;
            double hgg = 0.0, gg = -t;
            for (int b = 0; b < nb; ++b) {
                Hb[b] = MatrixXd::Zero(views[b].dim, views[b].dim);
                gb[b] = VectorXd::Zero(views[b].dim);
                bb[b] = VectorXd::Zero(views[b].dim);
                const auto &blk = p.blocks[b];
                const auto zb = z.segment(views[b].offset, views[b].dim);
                if (blk.prox_weight.size()) {
                    Hb[b].diagonal() += t * blk.prox_weight;
                    gb[b] += t * (blk.prox_weight.array() * (zb - blk.prox_center).array()).matrix();
                }
                if (std::isfinite(blk.ball_radius_sq)) {
                    const double s = ball_slack(z, b);
                    gb[b] += 2.0 * zb / s;
                    Hb[b] += 4.0 * zb * zb.transpose() / (s * s);
                    Hb[b].diagonal().array() += 2.0 / s;
                }
            }
            for (const auto &c : p.constraints) {
                const auto zb = z.segment(views[c.block].offset, views[c.block].dim);
                const double s = c.f.value(zb) - gamma;
                const VectorXd df = c.f.gradient(zb);
                gg += 1.0 / s;
                hgg += 1.0 / (s * s);
                gb[c.block] -= df / s;
                bb[c.block] -= df / (s * s);
                Hb[c.block] += df * df.transpose() / (s * s) + 2.0 * c.f.Q / s;
            }
            // Schur complement on gamma
            double schur = hgg, rhs = gg;
            std::vector<VectorXd> Hg(nb), Hbv(nb);
            for (int b = 0; b < nb; ++b) {
                const double reg = 1e-14 * std::max(1.0, Hb[b].diagonal().cwiseAbs().maxCoeff());
                Hb[b].diagonal().array() += reg;
                Eigen::LDLT<MatrixXd> ldlt(Hb[b]);
                Hg[b] = ldlt.solve(gb[b]);
                Hbv[b] = ldlt.solve(bb[b]);
                schur -= bb[b].dot(Hbv[b]);
                rhs -= bb[b].dot(Hg[b]);
            }
            const double dgamma = -rhs / schur;
            VectorXd dz(n);
            for (int b = 0; b < nb; ++b) dz.segment(views[b].offset, views[b].dim) = -(Hg[b] + Hbv[b] * dgamma);
            double slope = gg * dgamma;
            for (int b = 0; b < nb; ++b) slope += gb[b].dot(dz.segment(views[b].offset, views[b].dim));
            const double decrement2 = -slope;
            if (!(decrement2 > 1e-12)) break;

            const double f_cur = barrier(gamma, z, t);
            double step = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 80; ++ls, step *= 0.5) {
                const double f_new = barrier(gamma + step * dgamma, z + step * dz, t);
                if (f_new <= f_cur + 0.25 * step * slope) {
                    gamma += step * dgamma;
                    z += step * dz;
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
            if (decrement2 < 1e-10) break;
        }
        rep.gap = m / t;
        if (rep.gap <= opt.tol_abs + opt.tol_rel * std::abs(gamma)) {
            rep.converged = true;
            break;
        }
        if (rep.iterations >= opt.max_newton) break;
        t *= opt.t_growth;
    }

    const VectorXd f = fvals(z);
    rep.gamma = f.minCoeff();
    rep.optimizer = z;
    rep.value = rep.gamma - detail::prox_value(p, views, z);
    double viol = 0.0;
    for (int b = 0; b < nb; ++b)
        if (std::isfinite(p.blocks[b].ball_radius_sq)) viol = std::max(viol, -ball_slack(z, b));
    rep.feasibility = viol;
    return rep;
}

/// max_z min_i f_i(z) subject to ||z||^2 <= radius_sq.
inline SolveReport maxmin_quadratics_ball(const std::vector<ConcaveQuadratic> &fs, double radius_sq,
                                          const BarrierOptions &opt = {}) {
    if (fs.empty()) throw std::invalid_argument("need at least one quadratic");
    if (!(radius_sq > 0.0)) throw std::invalid_argument("ball radius must be positive");
    BlockMaxMinProblem p;
    p.blocks.push_back({fs.front().dim(), {}, {}, radius_sq});
    for (const auto &f : fs) {
        if (f.dim() != fs.front().dim()) throw std::invalid_argument("quadratics differ in dimension");
        p.constraints.push_back({0, f});
    }
    return solve_block_maxmin(p, Eigen::VectorXd::Zero(fs.front().dim()), opt);
}

inline SolveReport maxmin_quadratics_ball(const std::vector<ComplexConcaveQuadratic> &fs, double radius_sq,
                                          const BarrierOptions &opt = {}) {
    std::vector<ConcaveQuadratic> real;
    for (const auto &f : fs) real.push_back(f.realify());
    return maxmin_quadratics_ball(real, radius_sq, opt);
}

/// Power split: each f_i is a concave quadratic in the amplitudes s_k = sqrt(p_k).
/// Maximizes min_i f_i subject to sum_k p_k <= p_max; returns optimizer = p.
inline SolveReport maxmin_power_budget(const std::vector<ConcaveQuadratic> &fs, double p_max,
                                       const BarrierOptions &opt = {}) {
    SolveReport rep = maxmin_quadratics_ball(fs, p_max, opt);
    rep.optimizer = rep.optimizer.array().square().matrix();
    return rep;
}

// ---------------------------------------------------------------------------
// Ordered placement
//
//   minimize sum_n f_n(x_n)  s.t.  0 <= x_1,  x_{n+1} - x_n >= delta,  x_N <= length
//
// With z_n = x_n - n delta this is isotonic regression with separable convex
// terms, solved exactly by pooling adjacent violators.

/// Minimizer of a convex function on [lo, hi] given its first and second derivative.
template <typename D1, typename D2>
double minimize_convex_1d(D1 &&deriv, D2 &&second, double lo, double hi, double start) {
    if (deriv(lo) >= 0.0) return lo;
    if (deriv(hi) <= 0.0) return hi;
    double a = lo, b = hi;
    double x = std::clamp(start, lo, hi);
    for (int it = 0; it < 200; ++it) {
        const double g = deriv(x);
        if (g == 0.0) return x;
        (g < 0.0 ? a : b) = x;
        if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) break;
        const double h = second(x);
        double next = h > 0.0 ? x - g / h : 0.5 * (a + b);
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        // Newton creeping at one end of a wide bracket; force a bisection.
        if (it % 8 == 7) next = 0.5 * (a + b);
        if (next == x) break;
        x = next;
    }
    return x;
}

/// Objective must provide derivative(n, x) and second_derivative(n, x) of the n-th term,
/// both valid on [0, length]; each term convex.
template <typename Objective>
std::vector<double> box_ordered_minimize(const Objective &obj, int count, double length, double delta,
                                         const std::vector<double> &hint = {}) {
    if (count < 1) throw std::invalid_argument("need at least one position");
    if (!(delta >= 0.0)) throw std::invalid_argument("spacing must be non-negative");
    const double zmax = length - (count - 1) * delta;
    if (zmax < 0.0) throw std::invalid_argument("infeasible placement: length shorter than (N-1) spacing");

    struct Pool {
        int first, last;
        double z;
    };
    auto solve_pool = [&](int first, int last) {
        auto d1 = [&](double z) {
            double s = 0.0;
            for (int k = first; k <= last; ++k) s += obj.derivative(k, z + k * delta);
            return s;
        };
        auto d2 = [&](double z) {
            double s = 0.0;
            for (int k = first; k <= last; ++k) s += obj.second_derivative(k, z + k * delta);
            return s;
        };
        double start = 0.5 * zmax;
        if (static_cast<int>(hint.size()) == count) {
            start = 0.0;
            for (int k = first; k <= last; ++k) start += hint[k] - k * delta;
            start /= (last - first + 1);
        }
        return minimize_convex_1d(d1, d2, 0.0, zmax, start);
    };

    std::vector<Pool> pools;
    for (int k = 0; k < count; ++k) {
        pools.push_back({k, k, solve_pool(k, k)});
        while (pools.size() > 1 && pools[pools.size() - 2].z >= pools.back().z) {
            const int first = pools[pools.size() - 2].first, last = pools.back().last;
            pools.pop_back();
            pools.back() = {first, last, solve_pool(first, last)};
        }
    }
    std::vector<double> x(count);
    for (const auto &pl : pools)
        for (int k = pl.first; k <= pl.last; ++k) x[k] = pl.z + k * delta;
    // Guarantee exact feasibility against rounding.
    x[0] = std::clamp(x[0], 0.0, zmax);
    for (int k = 1; k < count; ++k) x[k] = std::max(x[k], x[k - 1] + delta);
    for (int k = count - 1; k >= 0; --k) {
        const double upper = k + 1 < count ? x[k + 1] - delta : length;
        x[k] = std::min(x[k], upper);
    }
    return x;
}

/// min sum_n w_n (x_n - t_n)^2 under the same constraints.
inline std::vector<double> box_ordered_qp(const std::vector<double> &targets, double length, double delta,
                                          std::vector<double> weights = {}) {
    if (weights.empty()) weights.assign(targets.size(), 1.0);
    if (weights.size() != targets.size()) throw std::invalid_argument("one weight per target required");
    for (double w : weights)
        if (!(w > 0.0)) throw std::invalid_argument("weights must be positive");
    struct Quad {
        const std::vector<double> &t, &w;
        double derivative(int n, double x) const { return 2.0 * w[n] * (x - t[n]); }
        double second_derivative(int n, double) const { return 2.0 * w[n]; }
    } q{targets, weights};
    return box_ordered_minimize(q, static_cast<int>(targets.size()), length, delta, targets);
}

// ---------------------------------------------------------------------------
// Time allocation

struct TimeAllocation {
    std::vector<double> time_shares;
    double common_rate = 0.0; // min_k share_k * R_k at the optimum
};

/// max min_k share_k R_k s.t. shares on the simplex; equalizes share_k R_k.
/// A zero rate forces the optimum to zero; shares are then returned uniform.
inline TimeAllocation time_allocation(const std::vector<double> &rates) {
    if (rates.empty()) throw std::invalid_argument("need at least one rate");
    for (double r : rates)
        if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("rates must be finite and non-negative");
    TimeAllocation out;
    const auto K = rates.size();
    if (std::any_of(rates.begin(), rates.end(), [](double r) { return r == 0.0; })) {
        out.time_shares.assign(K, 1.0 / K);
        return out;
    }
    double inv_sum = 0.0;
    for (double r : rates) inv_sum += 1.0 / r;
    out.common_rate = 1.0 / inv_sum;
    for (double r : rates) out.time_shares.push_back((1.0 / r) / inv_sum);
    return out;
}

} // namespace pass
