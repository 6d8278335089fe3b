// SPDX-License-Identifier: Apache-2.0
//
// pass - pinching-antenna multi-user beamforming toolkit
//
// Achievable rates for the three transmission structures.

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "channel.hpp"

namespace pass {

enum class Structure { WM, WD, WS };

inline std::string to_string(Structure s) {
    switch (s) {
    case Structure::WM: return "wm";
    case Structure::WD: return "wd";
    case Structure::WS: return "ws";
    }
    return "?";
}

struct RateReport {
    std::vector<double> rate;         // bps/Hz, index = user
    std::vector<double> sinr;
    std::vector<double> interference; // W, zero for WS
    double min_rate = 0.0;
};

inline double min_rate(const RateReport &r) {
    if (r.rate.empty()) throw std::invalid_argument("empty rate report");
    return *std::min_element(r.rate.begin(), r.rate.end());
}

/// Rates from precomputed effective channels H (J x K) and beamformers W (K x S, column s = stream s).
/// Every user j decodes stream users.group_of(j); every other column interferes.
inline RateReport rates_from_channels(const Eigen::MatrixXcd &H, const Eigen::MatrixXcd &W, const UserLayout &users,
                                      const std::vector<double> &time_shares = {}) {
    RateReport out;
    const int J = users.size();
    if (H.rows() != J) throw std::invalid_argument("channel count does not match users");
    if (H.cols() != W.rows()) throw std::invalid_argument("beamformer dimension does not match channel");
    for (int j = 0; j < J; ++j) {
        const int own = users.group_of(j);
        if (own >= W.cols()) throw std::invalid_argument("user group has no stream");
        const Eigen::RowVectorXcd y = H.row(j) * W;
        double interference = 0.0;
        for (int s = 0; s < W.cols(); ++s)
            if (s != own) interference += std::norm(y(s));
        const double sinr = std::norm(y(own)) / (interference + users.noise_power_w.at(j));
        const double share = time_shares.empty() ? 1.0 : time_shares.at(own);
        out.sinr.push_back(sinr);
        out.interference.push_back(interference);
        out.rate.push_back(share * std::log2(1.0 + sinr));
    }
    out.min_rate = min_rate(out);
    return out;
}

/// W is K x K with column k = beamformer of group k.
inline RateReport rate_wm(const PinchingLayout &layout, const Eigen::MatrixXcd &W, const UserLayout &users,
                          const Scenario &s) {
    if (W.cols() != users.group_count) throw std::invalid_argument("one beamformer per group required");
    return rates_from_channels(effective_channels(users, layout, s), W, users);
}

inline Eigen::MatrixXcd diagonal_beamformer(const Eigen::VectorXd &p) {
    if ((p.array() < 0.0).any()) throw std::invalid_argument("negative power");
    Eigen::MatrixXcd W = Eigen::MatrixXcd::Zero(p.size(), p.size());
    for (Eigen::Index k = 0; k < p.size(); ++k) W(k, k) = std::sqrt(p(k));
    return W;
}

/// Waveguide k carries only group k's stream with power p_k.
inline RateReport rate_wd(const PinchingLayout &layout, const Eigen::VectorXd &p, const UserLayout &users,
                          const Scenario &s) {
    const Eigen::MatrixXcd H = effective_channels(users, layout, s);
    RateReport out;
    for (int j = 0; j < users.size(); ++j) {
        const int own = users.group_of(j);
        double interference = 0.0;
        for (int k = 0; k < p.size(); ++k)
            if (k != own) interference += p(k) * std::norm(H(j, k));
        const double sinr = p(own) * std::norm(H(j, own)) / (interference + users.noise_power_w.at(j));
        out.sinr.push_back(sinr);
        out.interference.push_back(interference);
        out.rate.push_back(std::log2(1.0 + sinr));
    }
    out.min_rate = min_rate(out);
    return out;
}

/// Group k is served alone during its time share with its own layout and beamformer (column k of W).
inline RateReport rate_ws(const std::vector<PinchingLayout> &layouts, const Eigen::MatrixXcd &W,
                          const std::vector<double> &time_shares, const UserLayout &users, const Scenario &s) {
    const int K = users.group_count;
    if (static_cast<int>(layouts.size()) != K || W.cols() != K || static_cast<int>(time_shares.size()) != K)
        throw std::invalid_argument("one layout, beamformer and time share per group required");
    RateReport out;
    for (int j = 0; j < users.size(); ++j) {
        const int own = users.group_of(j);
        const cd y = (effective_channel_sum(users.positions[j], layouts[own], s) * W.col(own))(0);
        const double sinr = std::norm(y) / users.noise_power_w.at(j);
        out.sinr.push_back(sinr);
        out.interference.push_back(0.0);
        out.rate.push_back(time_shares[own] * std::log2(1.0 + sinr));
    }
    out.min_rate = min_rate(out);
    return out;
}

} // namespace pass
