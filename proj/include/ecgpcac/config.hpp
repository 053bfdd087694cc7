#pragma once

/**
 * @file config.hpp
 * @brief Flat `key = value` scenario files with dotted keys.
 *
 *   # comment
 *   plant.preset = exp_unstable
 *   pcac.ell = 30
 *   plant.A = [[0, 1], [1, 0]]
 *
 * `plant.preset` picks the base scenario (default undamped_oscillator) and is
 * applied first wherever it appears; every other key overrides that base in
 * file order. Matrices are JSON arrays of rows.
 */

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ecgpcac/errors.hpp"
#include "ecgpcac/scenario.hpp"

namespace ecgpcac {

namespace config_detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
    if (v == "inf" || v == "+inf")
        return std::numeric_limits<double>::infinity();
    if (v == "-inf")
        return -std::numeric_limits<double>::infinity();
    double out = 0.0;
    const char* first = v.data();
    const char* last = v.data() + v.size();
    if (first != last && *first == '+')
        ++first;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last || std::isnan(out))
        throw ConfigError(key, "expected a number, got '" + v + "'");
    return out;
}

inline long long parse_integer(const std::string& key, const std::string& v) {
    const double d = parse_double(key, v);
    if (!std::isfinite(d) || d != std::floor(d) || std::abs(d) > 9.0e15)
        throw ConfigError(key, "expected an integer, got '" + v + "'");
    return static_cast<long long>(d);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline MatrixXd parse_matrix(const std::string& key, const std::string& v) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(v);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(key, std::string("malformed matrix: ") + ex.what());
    }
    if (!j.is_array() || j.empty())
        throw ConfigError(key, "matrix must be a non-empty array");
    // A flat array is a column vector.
    if (!j.front().is_array()) {
        MatrixXd out(Index(j.size()), 1);
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_number())
                throw ConfigError(key, "matrix entries must be numbers");
            out(Index(i), 0) = j[i].get<double>();
        }
        return out;
    }
    const std::size_t cols = j.front().size();
    MatrixXd out(Index(j.size()), Index(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw ConfigError(key, "matrix rows must all have the same length");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[i][c].is_number())
                throw ConfigError(key, "matrix entries must be numbers");
            out(Index(i), Index(c)) = j[i][c].get<double>();
        }
    }
    return out;
}

template <class E>
E parse_enum(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, E>> table) {
    std::string names;
    for (const auto& [name, value] : table) {
        if (v == name)
            return value;
        names += names.empty() ? name : std::string(", ") + name;
    }
    throw ConfigError(key, "unknown value '" + v + "' (expected one of: " + names + ")");
}

using Setter = std::function<void(ScenarioConfig&, const std::string& key, const std::string& value)>;

#define ECGPCAC_DOUBLE(field) [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.field = parse_double(k, v); }
#define ECGPCAC_INT(field) \
    [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.field = static_cast<decltype(c.field)>(parse_integer(k, v)); }
#define ECGPCAC_BOOL(field) [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.field = parse_bool(k, v); }

inline const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"plant.A", [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.plant.A = parse_matrix(k, v); }},
        {"plant.B", [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.plant.B = parse_matrix(k, v); }},
        {"plant.Bw", [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.plant.Bw = parse_matrix(k, v); }},
        {"plant.C", [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.plant.C = parse_matrix(k, v); }},
        {"plant.x0", [](ScenarioConfig& c, const std::string& k, const std::string& v) {
             const MatrixXd m = parse_matrix(k, v);
             if (m.cols() != 1 && m.rows() != 1)
                 throw ConfigError(k, "initial state must be a vector");
             c.plant.x = Eigen::Map<const VectorXd>(m.data(), m.size());
         }},

        {"sim.T_s", ECGPCAC_DOUBLE(T_s)},
        {"sim.n_steps", ECGPCAC_INT(n_steps)},
        {"sim.w", ECGPCAC_DOUBLE(w)},
        {"sim.seed", ECGPCAC_INT(seed)},
        {"sim.divergence_bound", ECGPCAC_DOUBLE(divergence_bound)},
        {"sim.log_theta", ECGPCAC_BOOL(log_theta)},

        {"ecg.omega_h", ECGPCAC_DOUBLE(ecg.omega_h)},
        {"ecg.omega_l", ECGPCAC_DOUBLE(ecg.omega_l)},
        {"ecg.omega_es", ECGPCAC_DOUBLE(ecg.omega_es)},
        {"ecg.a_es", ECGPCAC_DOUBLE(ecg.a_es)},
        {"ecg.b_es", ECGPCAC_DOUBLE(ecg.b_es)},
        {"ecg.K_es", ECGPCAC_DOUBLE(ecg.K_es)},
        {"ecg.figure_form", ECGPCAC_BOOL(ecg.figure_form)},
        {"ecg.demod_tracks_amplitude", ECGPCAC_BOOL(ecg.demod_tracks_amplitude)},
        {"ecg.modulation", [](ScenarioConfig& c, const std::string& k, const std::string& v) {
             c.modulation.kind = parse_enum<ModulationKind>(k, v,
                 {{"none", ModulationKind::none},
                  {"threshold_decay", ModulationKind::threshold_decay},
                  {"smooth_attenuation", ModulationKind::smooth_attenuation},
                  {"zero_dither", ModulationKind::zero_dither}});
         }},
        {"ecg.k_switch", ECGPCAC_DOUBLE(modulation.k_switch)},
        {"ecg.a_min", ECGPCAC_DOUBLE(modulation.a_min)},
        {"ecg.alpha", ECGPCAC_DOUBLE(modulation.alpha)},
        {"ecg.beta", ECGPCAC_DOUBLE(modulation.beta)},
        {"ecg.K_min", ECGPCAC_DOUBLE(modulation.K_min)},
        {"ecg.gamma_a", ECGPCAC_DOUBLE(modulation.gamma_a)},
        {"ecg.gamma_K", ECGPCAC_DOUBLE(modulation.gamma_K)},
        {"ecg.y_l_ref", ECGPCAC_DOUBLE(modulation.y_l_ref)},
        {"ecg.gain", [](ScenarioConfig& c, const std::string& k, const std::string& v) {
             c.gain.kind = parse_enum<GainKind>(k, v, {{"constant", GainKind::constant}, {"normalized", GainKind::normalized}});
         }},
        {"ecg.eps_norm", ECGPCAC_DOUBLE(gain.eps_norm)},
        {"ecg.product_form", ECGPCAC_BOOL(gain.product_form)},

        {"pcac.n_hat", ECGPCAC_INT(pcac.n_hat)},
        {"pcac.ell", ECGPCAC_INT(pcac.ell)},
        {"pcac.p0_bar", ECGPCAC_DOUBLE(pcac.p0_bar)},
        {"pcac.id_variant", [](ScenarioConfig& c, const std::string& k, const std::string& v) {
             c.pcac.id_variant = parse_enum<IdVariant>(k, v,
                 {{"plain", IdVariant::plain}, {"er", IdVariant::exponential_resetting}});
         }},
        {"pcac.eta", ECGPCAC_DOUBLE(pcac.vrf.eta)},
        {"pcac.tau_n", ECGPCAC_INT(pcac.vrf.tau_n)},
        {"pcac.tau_d", ECGPCAC_INT(pcac.vrf.tau_d)},
        {"pcac.alpha_sig", ECGPCAC_DOUBLE(pcac.vrf.alpha_sig)},
        {"pcac.q", ECGPCAC_DOUBLE(pcac.q)},
        {"pcac.q_i", ECGPCAC_DOUBLE(pcac.q_i)},
        {"pcac.r", ECGPCAC_DOUBLE(pcac.r)},
        {"pcac.r_delta", ECGPCAC_DOUBLE(pcac.r_delta)},
        {"pcac.s", ECGPCAC_DOUBLE(pcac.s)},
        {"pcac.u_min", ECGPCAC_DOUBLE(pcac.u_min)},
        {"pcac.u_max", ECGPCAC_DOUBLE(pcac.u_max)},
        {"pcac.du_min", ECGPCAC_DOUBLE(pcac.du_min)},
        {"pcac.du_max", ECGPCAC_DOUBLE(pcac.du_max)},
        {"pcac.y_max", ECGPCAC_DOUBLE(pcac.y_max)},
        {"pcac.theta0_g1", ECGPCAC_DOUBLE(pcac.theta0_g1)},
        {"pcac.warmup", ECGPCAC_INT(pcac.warmup)},

        {"cost.kind", [](ScenarioConfig& c, const std::string& k, const std::string& v) {
             c.cost.kind = parse_enum<CostKind>(k, v,
                 {{"abs_linear", CostKind::abs_linear}, {"sqrt_abs", CostKind::sqrt_abs}, {"gaussian", CostKind::gaussian}});
         }},
        {"cost.r_star", ECGPCAC_DOUBLE(cost.r_star)},
        {"cost.eval_signal", [](ScenarioConfig& c, const std::string& k, const std::string& v) {
             c.cost.eval_signal = parse_enum<CostSignal>(k, v, {{"command", CostSignal::command}, {"output", CostSignal::output}});
         }},
    };
    return table;
}

#undef ECGPCAC_DOUBLE
#undef ECGPCAC_INT
#undef ECGPCAC_BOOL

inline void check(bool ok, const char* key, const char* what) {
    if (!ok)
        throw ConfigError(key, what);
}

} // namespace config_detail

/// Every recognized key, sorted (plant.preset included).
inline std::vector<std::string> config_keys() {
    std::vector<std::string> keys{"plant.preset"};
    for (const auto& [k, _] : config_detail::setters())
        keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    return keys;
}

/// Applies one `key = value` override. plant.preset replaces the whole config.
inline void apply_setting(ScenarioConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "plant.preset") {
        auto preset = find_preset(value);
        if (!preset)
            throw ConfigError(key, "unknown preset '" + value + "'");
        cfg = std::move(*preset);
        return;
    }
    const auto& table = config_detail::setters();
    const auto it = table.find(key);
    if (it == table.end())
        throw ConfigError(key, "unknown configuration key");
    if (value.empty())
        throw ConfigError(key, "missing value");
    it->second(cfg, key, value);
}

/// Parses `key=value` (as given to --set).
inline std::pair<std::string, std::string> split_assignment(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos)
        throw ConfigError(config_detail::trim(text), "expected key = value");
    return {config_detail::trim(text.substr(0, eq)), config_detail::trim(text.substr(eq + 1))};
}

/// Checks every field and names the offending key.
inline void validate_config(const ScenarioConfig& cfg) {
    using config_detail::check;
    const auto& p = cfg.plant;
    const Index n = p.A.rows();
    check(n > 0 && p.A.cols() == n, "plant.A", "must be square and non-empty");
    check(p.B.rows() == n && p.B.cols() == 1, "plant.B", "must be n_x by 1");
    check(p.Bw.rows() == n && p.Bw.cols() == 1, "plant.Bw", "must be n_x by 1");
    check(p.C.cols() == n && p.C.rows() == 1, "plant.C", "must be 1 by n_x");
    check(p.x.size() == n, "plant.x0", "must have n_x entries");
    check(p.A.allFinite() && p.B.allFinite() && p.Bw.allFinite() && p.C.allFinite() && p.x.allFinite(), "plant.A",
          "plant matrices must be finite");

    check(cfg.T_s > 0.0 && std::isfinite(cfg.T_s), "sim.T_s", "must be positive");
    check(cfg.n_steps >= 1, "sim.n_steps", "must be at least 1");
    check(std::isfinite(cfg.w), "sim.w", "must be finite");
    check(cfg.divergence_bound > 0.0, "sim.divergence_bound", "must be positive");

    const auto& e = cfg.ecg;
    check(e.omega_h * cfg.T_s > 0.0 && e.omega_h * cfg.T_s < 1.0, "ecg.omega_h", "omega_h * T_s must lie in (0, 1)");
    check(e.omega_l * cfg.T_s > 0.0 && e.omega_l * cfg.T_s < 1.0, "ecg.omega_l", "omega_l * T_s must lie in (0, 1)");
    check(std::isfinite(e.omega_es), "ecg.omega_es", "must be finite");
    check(e.a_es > 0.0 && std::isfinite(e.a_es), "ecg.a_es", "must be positive");
    check(e.b_es > 0.0 && std::isfinite(e.b_es), "ecg.b_es", "must be positive");
    check(std::isfinite(e.K_es), "ecg.K_es", "must be finite");

    const auto& m = cfg.modulation;
    check(m.k_switch >= 0.0, "ecg.k_switch", "must be non-negative");
    if (m.kind == ModulationKind::threshold_decay) {
        check(m.a_min > 0.0, "ecg.a_min", "must be positive");
        check(m.alpha > 0.0 && m.alpha < 1.0, "ecg.alpha", "must lie in (0, 1)");
        check(m.beta >= 0.0, "ecg.beta", "must be non-negative");
    }
    if (m.kind == ModulationKind::smooth_attenuation) {
        check(m.a_min > 0.0, "ecg.a_min", "must be positive");
        check(m.K_min >= 0.0, "ecg.K_min", "must be non-negative");
        check(m.gamma_a > 0.0 && m.gamma_a < 1.0, "ecg.gamma_a", "must lie in (0, 1)");
        check(m.gamma_K > 0.0 && m.gamma_K < 1.0, "ecg.gamma_K", "must lie in (0, 1)");
        check(m.y_l_ref > 0.0, "ecg.y_l_ref", "must be positive");
    }
    check(cfg.gain.eps_norm > 0.0, "ecg.eps_norm", "must be positive");

    const auto& c = cfg.pcac;
    check(c.n_hat >= 1, "pcac.n_hat", "must be at least 1");
    check(c.ell >= 1, "pcac.ell", "must be at least 1");
    check(c.p0_bar > 0.0, "pcac.p0_bar", "must be positive");
    check(c.vrf.eta >= 0.0, "pcac.eta", "must be non-negative");
    check(c.vrf.tau_n >= 1, "pcac.tau_n", "must be at least 1");
    check(c.vrf.tau_d > c.vrf.tau_n && c.vrf.tau_d > 4, "pcac.tau_d", "must exceed tau_n and 4");
    check(c.vrf.alpha_sig > 0.0 && c.vrf.alpha_sig < 1.0, "pcac.alpha_sig", "must lie in (0, 1)");
    check(c.q > 0.0, "pcac.q", "must be positive");
    check(c.q_i >= 0.0, "pcac.q_i", "must be non-negative");
    check(c.r >= 0.0, "pcac.r", "must be non-negative");
    check(c.r_delta >= 0.0, "pcac.r_delta", "must be non-negative");
    check(c.s >= 0.0, "pcac.s", "must be non-negative");
    check(c.u_min <= 0.0, "pcac.u_min", "must be non-positive");
    check(c.u_max >= 0.0, "pcac.u_max", "must be non-negative");
    check(c.du_min <= 0.0, "pcac.du_min", "must be non-positive");
    check(c.du_max >= 0.0, "pcac.du_max", "must be non-negative");
    check(c.y_max > 0.0, "pcac.y_max", "must be positive");
    check(std::isfinite(c.theta0_g1), "pcac.theta0_g1", "must be finite");

    check(std::isfinite(cfg.cost.r_star), "cost.r_star", "must be finite");

    try {
        cfg.validate();
    } catch (const ContractViolation& ex) {
        throw ConfigError("", ex.what());
    }
}

/// Parses config text on top of the default preset. Line numbers appear in errors.
inline ScenarioConfig parse_config(std::string_view text) {
    struct Entry {
        std::string key, value;
        int line;
    };
    std::vector<Entry> entries;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = config_detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(line, "line " + std::to_string(line_no) + ": expected key = value");
        entries.push_back({config_detail::trim(line.substr(0, eq)), config_detail::trim(line.substr(eq + 1)), line_no});
    }

    ScenarioConfig cfg = preset_undamped_oscillator();
    for (const auto& e : entries)
        if (e.key == "plant.preset")
            apply_setting(cfg, e.key, e.value);
    for (const auto& e : entries)
        if (e.key != "plant.preset")
            apply_setting(cfg, e.key, e.value);
    return cfg;
}

/// Reads, applies overrides (`key=value` strings), and validates.
inline ScenarioConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("", "cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    ScenarioConfig cfg = parse_config(buf.str());
    for (const auto& o : overrides) {
        auto [k, v] = split_assignment(o);
        apply_setting(cfg, k, v);
    }
    validate_config(cfg);
    return cfg;
}

} // namespace ecgpcac
