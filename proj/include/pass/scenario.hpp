// SPDX-License-Identifier: Apache-2.0
//
// pass - pinching-antenna multi-user beamforming toolkit
//
// Physical constants, waveguide geometry and random user placement.
// All quantities are SI (m, W, Hz); dBm only appears at the config boundary.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pass {

inline constexpr double kSpeedOfLight = 2.99792458e8;

inline double dbm_to_watts(double p_dbm) { return std::pow(10.0, (p_dbm - 30.0) / 10.0); }

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    bool operator==(const Point3 &) const = default;
};

struct RfParams {
    double carrier_frequency_hz = 28e9;
    double effective_refractive_index = 1.4;
    double noise_power_w = 1e-12;
    double max_transmit_power_w = 0.1;
};

struct RfConfig {
    double carrier_frequency_hz = 0.0;
    double free_space_wavelength_m = 0.0;
    double effective_refractive_index = 1.0;
    double guided_wavelength_m = 0.0;
    double reference_gain = 0.0; // amplitude gain at 1 m
    double noise_power_w = 0.0;
    double max_transmit_power_w = 0.0;

    double wavenumber() const { return 2.0 * std::numbers::pi / free_space_wavelength_m; }
    double guided_wavenumber() const { return 2.0 * std::numbers::pi / guided_wavelength_m; }
    bool operator==(const RfConfig &) const = default;
};

struct GeometryParams {
    int num_waveguides = 2;
    int antennas_per_waveguide = 8;
    double waveguide_length_m = 10.0;
    double height_m = 3.0;
    std::vector<double> waveguide_y_coords_m = {-2.5, 2.5};
    double min_antenna_spacing_m = 0.0;
};

struct Geometry {
    int num_waveguides = 0;
    int antennas_per_waveguide = 0;
    int total_antennas = 0;
    double waveguide_length_m = 0.0;
    double height_m = 0.0;
    std::vector<double> waveguide_y_coords_m;
    double min_antenna_spacing_m = 0.0;
    bool operator==(const Geometry &) const = default;
};

struct Scenario {
    RfConfig rf;
    Geometry geometry;
    bool operator==(const Scenario &) const = default;
};

inline RfConfig build_rf(const RfParams &p) {
    if (!(p.carrier_frequency_hz > 0.0) || !std::isfinite(p.carrier_frequency_hz))
        throw std::invalid_argument("carrier frequency must be positive");
    if (!(p.effective_refractive_index >= 1.0))
        throw std::invalid_argument("effective refractive index must be >= 1");
    if (!(p.noise_power_w > 0.0)) throw std::invalid_argument("noise power must be positive");
    if (!(p.max_transmit_power_w > 0.0)) throw std::invalid_argument("transmit power must be positive");
    RfConfig rf;
    rf.carrier_frequency_hz = p.carrier_frequency_hz;
    rf.free_space_wavelength_m = kSpeedOfLight / p.carrier_frequency_hz;
    rf.effective_refractive_index = p.effective_refractive_index;
    rf.guided_wavelength_m = rf.free_space_wavelength_m / p.effective_refractive_index;
    rf.reference_gain = rf.free_space_wavelength_m / (4.0 * std::numbers::pi);
    rf.noise_power_w = p.noise_power_w;
    rf.max_transmit_power_w = p.max_transmit_power_w;
    return rf;
}

inline Geometry build_geometry(const GeometryParams &p) {
    if (p.num_waveguides < 1) throw std::invalid_argument("need at least one waveguide");
    if (p.antennas_per_waveguide < 1) throw std::invalid_argument("need at least one antenna per waveguide");
    if (static_cast<int>(p.waveguide_y_coords_m.size()) != p.num_waveguides)
        throw std::invalid_argument("one y coordinate per waveguide required");
    if (!(p.height_m > 0.0)) throw std::invalid_argument("waveguide height must be positive");
    if (!(p.min_antenna_spacing_m >= 0.0)) throw std::invalid_argument("antenna spacing must be non-negative");
    if (!(p.waveguide_length_m > (p.antennas_per_waveguide - 1) * p.min_antenna_spacing_m))
        throw std::invalid_argument("waveguide too short for the requested antennas and spacing");
    Geometry g;
    g.num_waveguides = p.num_waveguides;
    g.antennas_per_waveguide = p.antennas_per_waveguide;
    g.total_antennas = p.num_waveguides * p.antennas_per_waveguide;
    g.waveguide_length_m = p.waveguide_length_m;
    g.height_m = p.height_m;
    g.waveguide_y_coords_m = p.waveguide_y_coords_m;
    g.min_antenna_spacing_m = p.min_antenna_spacing_m;
    return g;
}

inline Scenario build_scenario(const RfParams &rf, const GeometryParams &geometry) {
    return Scenario{build_rf(rf), build_geometry(geometry)};
}

/// Recover the raw parameters a scenario was built from.
inline RfParams rf_params(const RfConfig &rf) {
    return {rf.carrier_frequency_hz, rf.effective_refractive_index, rf.noise_power_w, rf.max_transmit_power_w};
}

inline GeometryParams geometry_params(const Geometry &g) {
    return {g.num_waveguides, g.antennas_per_waveguide, g.waveguide_length_m, g.height_m, g.waveguide_y_coords_m,
            g.min_antenna_spacing_m};
}

inline Scenario with_power(Scenario s, double p_max_w) {
    auto params = rf_params(s.rf);
    params.max_transmit_power_w = p_max_w;
    s.rf = build_rf(params);
    return s;
}

// ---------------------------------------------------------------------------
// Users

/// Users are stored group-major: user (k, g) lives at index k * users_per_group + g.
/// Unicast is the special case users_per_group == 1.
struct UserLayout {
    int group_count = 0;
    int users_per_group = 0;
    std::vector<Point3> positions;
    std::vector<double> noise_power_w;

    int size() const { return static_cast<int>(positions.size()); }
    int index(int group, int user) const { return group * users_per_group + user; }
    int group_of(int idx) const { return idx / users_per_group; }
};

struct Rectangle {
    double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
    bool contains_strictly(const Point3 &p) const {
        return p.x > x_min && p.x < x_max && p.y > y_min && p.y < y_max && p.z == 0.0;
    }
};

/// One rectangle per group (S_1, S_2, ... in the usual two-waveguide setup).
struct PlacementRegions {
    std::vector<Rectangle> rectangles;
};

/// Waveguides spaced `spacing` apart in y, centred on y = 0.
inline std::vector<double> waveguide_y_coords(int num_waveguides, double spacing) {
    std::vector<double> y(num_waveguides);
    for (int k = 0; k < num_waveguides; ++k) y[k] = (k - 0.5 * (num_waveguides - 1)) * spacing;
    return y;
}

/// Rectangles of width s_x centred at x = center_x and height s_y centred on each waveguide.
inline PlacementRegions default_regions(const std::vector<double> &waveguide_y, double center_x, double s_x,
                                        double s_y) {
    PlacementRegions regions;
    for (double y : waveguide_y)
        regions.rectangles.push_back({center_x - 0.5 * s_x, center_x + 0.5 * s_x, y - 0.5 * s_y, y + 0.5 * s_y});
    return regions;
}

/// splitmix64; used to derive independent per-realization streams from one base seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Small deterministic generator with a platform-independent uniform draw.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(mix_seed(seed)) {}
    std::uint64_t next() {
        state_ = mix_seed(state_);
        return state_;
    }
    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

  private:
    std::uint64_t state_;
};

inline UserLayout sample_users(const PlacementRegions &regions, int users_per_group, std::uint64_t seed,
                               double noise_power_w = 1e-12) {
    if (regions.rectangles.empty()) throw std::invalid_argument("no placement regions");
    if (users_per_group < 1) throw std::invalid_argument("need at least one user per group");
    for (const auto &r : regions.rectangles)
        if (!(r.x_max > r.x_min) || !(r.y_max > r.y_min))
            throw std::invalid_argument("degenerate placement rectangle");

    Rng rng(seed);
    UserLayout users;
    users.group_count = static_cast<int>(regions.rectangles.size());
    users.users_per_group = users_per_group;
    for (const auto &r : regions.rectangles) {
        for (int g = 0; g < users_per_group; ++g) {
            Point3 p;
            do {
                p = {rng.uniform(r.x_min, r.x_max), rng.uniform(r.y_min, r.y_max), 0.0};
            } while (!r.contains_strictly(p));
            users.positions.push_back(p);
            users.noise_power_w.push_back(noise_power_w);
        }
    }
    return users;
}

// ---------------------------------------------------------------------------
// Configuration file

struct ScenarioConfig {
    double f_c_ghz = 28.0;
    double n_eff = 1.4;
    int k_waveguides = 2;
    int n_pas = 8;
    double l_m = 10.0;
    double d_m = 3.0;
    double delta_over_lambda = 0.5;
    double w_m = 5.0;
    double s_x_m = 6.0;
    double s_y_m = 5.0;
    std::vector<double> p_max_dbm_list = {0.0, 5.0, 10.0, 15.0, 20.0};
    double noise_dbm = -90.0;
    int g_users = 2;
    std::vector<std::uint64_t> seeds = {1};

    bool operator==(const ScenarioConfig &) const = default;
};

inline void to_json(nlohmann::json &j, const ScenarioConfig &c) {
    j = {{"f_c_ghz", c.f_c_ghz},
         {"n_eff", c.n_eff},
         {"k_waveguides", c.k_waveguides},
         {"n_pas", c.n_pas},
         {"l_m", c.l_m},
         {"d_m", c.d_m},
         {"delta_over_lambda", c.delta_over_lambda},
         {"w_m", c.w_m},
         {"s_x_m", c.s_x_m},
         {"s_y_m", c.s_y_m},
         {"p_max_dbm_list", c.p_max_dbm_list},
         {"noise_dbm", c.noise_dbm},
         {"g_users", c.g_users},
         {"seeds", c.seeds}};
}

/// Missing keys keep their defaults; unknown keys are an error.
inline void from_json(const nlohmann::json &j, ScenarioConfig &c) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto &k = it.key();
        const auto &v = it.value();
        if (k == "f_c_ghz") v.get_to(c.f_c_ghz);
        else if (k == "n_eff") v.get_to(c.n_eff);
        else if (k == "k_waveguides") v.get_to(c.k_waveguides);
        else if (k == "n_pas") v.get_to(c.n_pas);
        else if (k == "l_m") v.get_to(c.l_m);
        else if (k == "d_m") v.get_to(c.d_m);
        else if (k == "delta_over_lambda") v.get_to(c.delta_over_lambda);
        else if (k == "w_m") v.get_to(c.w_m);
        else if (k == "s_x_m") v.get_to(c.s_x_m);
        else if (k == "s_y_m") v.get_to(c.s_y_m);
        else if (k == "p_max_dbm_list") v.get_to(c.p_max_dbm_list);
        else if (k == "noise_dbm") v.get_to(c.noise_dbm);
        else if (k == "g_users") v.get_to(c.g_users);
        else if (k == "seeds") v.get_to(c.seeds);
        else throw std::invalid_argument("unknown config key: " + k);
    }
}

inline Scenario build_scenario(const ScenarioConfig &cfg, double p_max_dbm) {
    RfParams rf;
    rf.carrier_frequency_hz = cfg.f_c_ghz * 1e9;
    rf.effective_refractive_index = cfg.n_eff;
    rf.noise_power_w = dbm_to_watts(cfg.noise_dbm);
    rf.max_transmit_power_w = dbm_to_watts(p_max_dbm);
    GeometryParams g;
    g.num_waveguides = cfg.k_waveguides;
    g.antennas_per_waveguide = cfg.n_pas;
    g.waveguide_length_m = cfg.l_m;
    g.height_m = cfg.d_m;
    g.waveguide_y_coords_m = waveguide_y_coords(cfg.k_waveguides, cfg.w_m);
    if (!(cfg.f_c_ghz > 0.0)) throw std::invalid_argument("carrier frequency must be positive");
    g.min_antenna_spacing_m = cfg.delta_over_lambda * kSpeedOfLight / rf.carrier_frequency_hz;
    return build_scenario(rf, g);
}

inline PlacementRegions build_regions(const ScenarioConfig &cfg) {
    if (!(cfg.s_y_m > 0.0)) throw std::invalid_argument("S_y must be positive");
    return default_regions(waveguide_y_coords(cfg.k_waveguides, cfg.w_m), 0.5 * cfg.l_m, cfg.s_x_m, cfg.s_y_m);
}

inline UserLayout sample_users(const ScenarioConfig &cfg, std::uint64_t seed) {
    return sample_users(build_regions(cfg), cfg.g_users, seed, dbm_to_watts(cfg.noise_dbm));
}

inline nlohmann::json to_json(const Scenario &s) {
    return {{"rf",
             {{"carrier_frequency_hz", s.rf.carrier_frequency_hz},
              {"effective_refractive_index", s.rf.effective_refractive_index},
              {"noise_power_w", s.rf.noise_power_w},
              {"max_transmit_power_w", s.rf.max_transmit_power_w}}},
            {"geometry",
             {{"num_waveguides", s.geometry.num_waveguides},
              {"antennas_per_waveguide", s.geometry.antennas_per_waveguide},
              {"waveguide_length_m", s.geometry.waveguide_length_m},
              {"height_m", s.geometry.height_m},
              {"waveguide_y_coords_m", s.geometry.waveguide_y_coords_m},
              {"min_antenna_spacing_m", s.geometry.min_antenna_spacing_m}}}};
}

inline Scenario scenario_from_json(const nlohmann::json &j) {
    RfParams rf;
    const auto &r = j.at("rf");
    rf.carrier_frequency_hz = r.at("carrier_frequency_hz").get<double>();
    rf.effective_refractive_index = r.at("effective_refractive_index").get<double>();
    rf.noise_power_w = r.at("noise_power_w").get<double>();
    rf.max_transmit_power_w = r.at("max_transmit_power_w").get<double>();
    GeometryParams g;
    const auto &gj = j.at("geometry");
    g.num_waveguides = gj.at("num_waveguides").get<int>();
    g.antennas_per_waveguide = gj.at("antennas_per_waveguide").get<int>();
    g.waveguide_length_m = gj.at("waveguide_length_m").get<double>();
    g.height_m = gj.at("height_m").get<double>();
    g.waveguide_y_coords_m = gj.at("waveguide_y_coords_m").get<std::vector<double>>();
    g.min_antenna_spacing_m = gj.at("min_antenna_spacing_m").get<double>();
    return build_scenario(rf, g);
}

} // namespace pass
