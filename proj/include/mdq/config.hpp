#pragma once

// key = value configuration files for TrainConfig. Blank lines and text
// after '#' are ignored; every key is optional.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mdq/error.hpp"
#include "mdq/training.hpp"

namespace mdq {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    require(res.ec == std::errc{} && res.ptr == v.data() + v.size(), Errc::invalid_argument,
            "config " + key + ": not a number: '" + v + "'");
    return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    require(res.ec == std::errc{} && res.ptr == v.data() + v.size(), Errc::invalid_argument,
            "config " + key + ": not a non-negative integer: '" + v + "'");
    return out;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
    return out;
}

} // namespace detail

// Applies one setting; unknown keys are an error.
inline void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "alpha") cfg.alpha = parse_double(key, value);
    else if (key == "lambda") cfg.lambda1 = cfg.lambda2 = parse_double(key, value);
    else if (key == "lambda1") cfg.lambda1 = parse_double(key, value);
    else if (key == "lambda2") cfg.lambda2 = parse_double(key, value);
    else if (key == "iterations") cfg.iterations = parse_uint(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "lr_latent") cfg.lr_latent = parse_double(key, value);
    else if (key == "lr_synthesis") cfg.lr_synthesis = parse_double(key, value);
    else if (key == "lr_arm") cfg.lr_arm = parse_double(key, value);
    else if (key == "decay_fraction") cfg.decay_fraction = parse_double(key, value);
    else if (key == "levels") cfg.levels = parse_uint(key, value);
    else if (key == "seed") cfg.seed = parse_uint(key, value);
    else if (key == "latent_steps") cfg.latent_steps = parse_list(key, value);
    else if (key == "context_count") cfg.context_count = parse_uint(key, value);
    else if (key == "descriptions") cfg.descriptions = parse_uint(key, value);
    else fail(Errc::invalid_argument, "unknown config key '" + key + "'");
}

inline TrainConfig parse_config(const std::string& text, TrainConfig cfg = {}) {
    std::stringstream ss(text);
    std::string line;
    for (int n = 1; std::getline(ss, line); ++n) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, Errc::invalid_argument, "config line " + std::to_string(n) + ": expected key = value");
        apply_setting(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline TrainConfig load_config(const std::string& path, TrainConfig cfg = {}) {
    std::ifstream in(path);
    require(static_cast<bool>(in), Errc::io, "cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(cfg));
}

} // namespace mdq
