#pragma once

/**
 * @file log_io.hpp
 * @brief CSV trajectory output and the sibling summary file.
 *
 * Floating-point values are written with 17 significant digits so they read
 * back bit-exactly.
 */

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <system_error>

#include <json.hpp>

#include "ecgpcac/scenario.hpp"

namespace ecgpcac {

inline constexpr const char* log_header = "k,t,u,y,r,J,e,y_h,y_d,y_l,y_es,a_es,K_es,lambda";

inline std::string format_double(double v) {
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
    if (res.ec != std::errc())
        throw std::runtime_error("format_double: conversion failed");
    return std::string(buf.data(), res.ptr);
}

inline void write_csv(const SimLog& log, std::ostream& out) {
    out << log_header;
    for (std::size_t i = 0; i < log.theta_size; ++i)
        out << ",theta_" << i;
    out << '\n';
    for (const auto& row : log.rows) {
        out << row.k;
        for (double v : {row.t, row.u, row.y, row.r, row.J, row.e, row.y_h, row.y_d, row.y_l, row.y_es, row.a_es,
                         row.K_es, row.lambda})
            out << ',' << format_double(v);
        for (std::size_t i = 0; i < log.theta_size; ++i)
            out << ',' << format_double(i < row.theta.size() ? row.theta[i] : std::nan(""));
        out << '\n';
    }
}

inline nlohmann::ordered_json summary_json(const SimLog& log) {
    nlohmann::ordered_json j;
    j["final_command_error"] = log.summary.final_command_error;
    j["rms_tracking_error_tail"] = log.summary.rms_tracking_error_tail;
    if (log.summary.convergence_step >= 0)
        j["convergence_step"] = log.summary.convergence_step;
    else
        j["convergence_step"] = nullptr;
    j["steps"] = log.rows.size();
    j["diverged"] = log.diverged;
    if (log.diverged)
        j["divergence_step"] = log.divergence_step;
    j["qp_solves"] = log.qp.solves;
    j["qp_non_optimal"] = log.qp.non_optimal;
    j["qp_infeasible"] = log.qp.infeasible;
    return j;
}

/// `out.csv` -> `out.summary.json`
inline std::filesystem::path summary_path(const std::filesystem::path& csv) {
    std::filesystem::path p = csv;
    p.replace_extension(".summary.json");
    return p;
}

/// Writes the CSV and its summary. Throws std::runtime_error on I/O failure.
inline void write_log(const SimLog& log, const std::filesystem::path& path) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot open '" + path.string() + "' for writing");
        write_csv(log, out);
        if (!out)
            throw std::runtime_error("write to '" + path.string() + "' failed");
    }
    const auto spath = summary_path(path);
    std::ofstream out(spath, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + spath.string() + "' for writing");
    out << summary_json(log).dump(2) << '\n';
    if (!out)
        throw std::runtime_error("write to '" + spath.string() + "' failed");
}

} // namespace ecgpcac
