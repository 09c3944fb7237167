// SPDX-License-Identifier: Apache-2.0
//
// One flat key=value config file (TOML-style subset) drives every subcommand.
// Strict: unknown keys, type mismatches, and out-of-range values are errors.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "medfleet/detail/strings.hpp"
#include "medfleet/distill.hpp"
#include "medfleet/sim.hpp"

namespace medfleet {

// ---------------------------------------------------------------------------
// Errors

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingFileError : public ConfigError {
public:
    explicit MissingFileError(const std::string& path)
        : ConfigError("config file not found: " + path) {}
};

class UnknownKeyError : public ConfigError {
public:
    explicit UnknownKeyError(std::string key)
        : ConfigError("unknown config key: " + key), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

class ConfigTypeError : public ConfigError {
public:
    ConfigTypeError(std::string key, const std::string& what)
        : ConfigError("config key '" + key + "': " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// ---------------------------------------------------------------------------
// Config

struct Config {
    // paths
    std::string cache_dir = "cache";
    std::string corpus_dir = "corpus";
    std::string catalog_path = "catalog.csv";
    std::string output_dir = "out";
    // ingest
    int min_year = kDefaultMinYear;
    double rate_limit_rps = 3.0;
    bool offline_only = false;
    std::string eutils_base;  // empty → MEDFLEET_EUTILS_BASE or the public host
    int page_size = 200;
    // partition
    std::string tokenizer = "whitespace";
    // distill
    std::vector<std::string> filter_keywords = default_filter_keywords();
    std::string filter_mode = "whole_word";  // whole_word | substring
    std::string completion_client = "mock";  // mock | replay | live
    std::string completion_trace;            // replay source / recording sink
    double price_per_1k_prompt = kDefaultPromptPricePer1k;
    double price_per_1k_completion = kDefaultCompletionPricePer1k;
    int finding_attempts = 1;
    int workers = 1;
    // simulation / bench
    int capacity = 5;
    int requests = 100;
    std::uint64_t seed = 1;
    int runs = 5;
    double full_model_load_s = 5.0;
    double adapter_swap_overhead_s = 0.90;
    double unload_s = 0.0;
    std::string infer_dist = "mean_matched";  // fixed | triangular | mean_matched | empirical
    double infer_fixed_s = 2.25;
    double infer_min_s = 0.36;
    double infer_mode_s = 2.24;
    double infer_max_s = 6.40;
    double infer_mean_s = 2.25;
    std::string infer_trace_path;
    bool count_warmup = false;
    bool literal_protocol = false;
    // fleet
    double bytes_per_param = kDefaultBytesPerParam;
    double memory_budget_gb = 40.0;
    long long model_params = 7'000'000'000;
    std::uint64_t fleet_seed = 42;
};

// ---------------------------------------------------------------------------
// Parser

namespace detail_config {

using Value = std::variant<std::string, long long, double, bool, std::vector<std::string>>;

inline std::string parse_quoted(std::string_view raw, const std::string& key, std::size_t& i) {
    // raw[i] == '"'
    std::string out;
    for (++i; i < raw.size(); ++i) {
        char c = raw[i];
        if (c == '"') {
            ++i;
            return out;
        }
        if (c == '\\') {
            if (++i >= raw.size()) break;
            switch (raw[i]) {
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                default: throw ConfigTypeError(key, "unsupported escape in string");
            }
        } else {
            out.push_back(c);
        }
    }
    throw ConfigTypeError(key, "unterminated string");
}

inline Value parse_value(std::string_view raw, const std::string& key) {
    raw = detail::trim(raw);
    if (raw.empty()) throw ConfigTypeError(key, "missing value");
    if (raw.front() == '"') {
        std::size_t i = 0;
        auto s = parse_quoted(raw, key, i);
        if (!detail::trim(raw.substr(i)).empty())
            throw ConfigTypeError(key, "trailing content after string");
        return s;
    }
    if (raw.front() == '[') {
        if (raw.back() != ']') throw ConfigTypeError(key, "unterminated array");
        std::vector<std::string> items;
        std::string_view body = raw.substr(1, raw.size() - 2);
        std::size_t i = 0;
        bool expecting_item = false;
        while (i < body.size()) {
            if (std::isspace(static_cast<unsigned char>(body[i]))) {
                ++i;
                continue;
            }
            if (body[i] == '"') {
                items.push_back(parse_quoted(body, key, i));
                expecting_item = false;
                while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
                if (i < body.size()) {
                    if (body[i] != ',') throw ConfigTypeError(key, "expected ',' in array");
                    ++i;
                    expecting_item = true;
                }
            } else {
                throw ConfigTypeError(key, "arrays may contain only strings");
            }
        }
        if (expecting_item) throw ConfigTypeError(key, "trailing comma in array");
        return items;
    }
    if (raw == "true") return true;
    if (raw == "false") return false;
    // integer?
    {
        std::size_t i = (raw[0] == '+' || raw[0] == '-') ? 1 : 0;
        bool all_digits = i < raw.size();
        for (std::size_t k = i; k < raw.size(); ++k)
            if (!std::isdigit(static_cast<unsigned char>(raw[k]))) all_digits = false;
        if (all_digits) {
            try {
                return static_cast<long long>(std::stoll(std::string(raw)));
            } catch (const std::exception&) {
                throw ConfigTypeError(key, "integer out of range");
            }
        }
    }
    try {
        std::size_t consumed = 0;
        double d = std::stod(std::string(raw), &consumed);
        if (consumed != raw.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigTypeError(key, "unparseable value '" + std::string(raw) + "'");
    }
}

// Strips a trailing comment, respecting quoted strings.
inline std::string_view strip_comment(std::string_view line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

inline std::map<std::string, Value> parse_key_values(std::istream& in) {
    std::map<std::string, Value> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto body = detail::trim(strip_comment(line));
        if (body.empty()) continue;
        if (body.front() == '[')
            throw ConfigError("line " + std::to_string(line_no) +
                              ": sections are not supported (flat keys only)");
        auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        std::string key(detail::trim(body.substr(0, eq)));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        for (char c : key)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' && c != '-')
                throw ConfigError("line " + std::to_string(line_no) + ": bad key '" + key + "'");
        if (out.count(key))
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        out.emplace(std::move(key), parse_value(body.substr(eq + 1), std::string(detail::trim(body.substr(0, eq)))));
    }
    return out;
}

template <typename T>
struct Setter {
    std::function<void(Config&, const Value&, const std::string&)> apply;
};

inline long long as_int(const Value& v, const std::string& key) {
    if (const auto* i = std::get_if<long long>(&v)) return *i;
    throw ConfigTypeError(key, "expected an integer");
}

inline double as_double(const Value& v, const std::string& key) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<long long>(&v)) return static_cast<double>(*i);
    throw ConfigTypeError(key, "expected a number");
}

inline bool as_bool(const Value& v, const std::string& key) {
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    throw ConfigTypeError(key, "expected true or false");
}

inline std::string as_string(const Value& v, const std::string& key) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw ConfigTypeError(key, "expected a string");
}

inline std::vector<std::string> as_string_array(const Value& v, const std::string& key) {
    if (const auto* a = std::get_if<std::vector<std::string>>(&v)) return *a;
    throw ConfigTypeError(key, "expected an array of strings");
}

inline std::uint64_t as_seed(const Value& v, const std::string& key) {
    auto i = as_int(v, key);
    if (i < 0) throw ConfigTypeError(key, "seed must be ≥ 0");
    return static_cast<std::uint64_t>(i);
}

}  // namespace detail_config

inline Config config_from_key_values(const std::map<std::string, detail_config::Value>& kv) {
    using detail_config::Value;
    namespace dc = detail_config;
    Config cfg;

    using Apply = std::function<void(Config&, const Value&, const std::string&)>;
    static const std::map<std::string, Apply> setters = {
        {"cache_dir", [](Config& c, const Value& v, const std::string& k) { c.cache_dir = dc::as_string(v, k); }},
        {"corpus_dir", [](Config& c, const Value& v, const std::string& k) { c.corpus_dir = dc::as_string(v, k); }},
        {"catalog_path", [](Config& c, const Value& v, const std::string& k) { c.catalog_path = dc::as_string(v, k); }},
        {"output_dir", [](Config& c, const Value& v, const std::string& k) { c.output_dir = dc::as_string(v, k); }},
        {"min_year", [](Config& c, const Value& v, const std::string& k) { c.min_year = static_cast<int>(dc::as_int(v, k)); }},
        {"rate_limit_rps", [](Config& c, const Value& v, const std::string& k) { c.rate_limit_rps = dc::as_double(v, k); }},
        {"offline_only", [](Config& c, const Value& v, const std::string& k) { c.offline_only = dc::as_bool(v, k); }},
        {"eutils_base", [](Config& c, const Value& v, const std::string& k) { c.eutils_base = dc::as_string(v, k); }},
        {"page_size", [](Config& c, const Value& v, const std::string& k) { c.page_size = static_cast<int>(dc::as_int(v, k)); }},
        {"tokenizer", [](Config& c, const Value& v, const std::string& k) { c.tokenizer = dc::as_string(v, k); }},
        {"filter_keywords", [](Config& c, const Value& v, const std::string& k) { c.filter_keywords = dc::as_string_array(v, k); }},
        {"filter_mode", [](Config& c, const Value& v, const std::string& k) { c.filter_mode = dc::as_string(v, k); }},
        {"completion_client", [](Config& c, const Value& v, const std::string& k) { c.completion_client = dc::as_string(v, k); }},
        {"completion_trace", [](Config& c, const Value& v, const std::string& k) { c.completion_trace = dc::as_string(v, k); }},
        {"price_per_1k_prompt", [](Config& c, const Value& v, const std::string& k) { c.price_per_1k_prompt = dc::as_double(v, k); }},
        {"price_per_1k_completion", [](Config& c, const Value& v, const std::string& k) { c.price_per_1k_completion = dc::as_double(v, k); }},
        {"finding_attempts", [](Config& c, const Value& v, const std::string& k) { c.finding_attempts = static_cast<int>(dc::as_int(v, k)); }},
        {"workers", [](Config& c, const Value& v, const std::string& k) { c.workers = static_cast<int>(dc::as_int(v, k)); }},
        {"capacity", [](Config& c, const Value& v, const std::string& k) { c.capacity = static_cast<int>(dc::as_int(v, k)); }},
        {"requests", [](Config& c, const Value& v, const std::string& k) { c.requests = static_cast<int>(dc::as_int(v, k)); }},
        {"seed", [](Config& c, const Value& v, const std::string& k) { c.seed = dc::as_seed(v, k); }},
        {"runs", [](Config& c, const Value& v, const std::string& k) { c.runs = static_cast<int>(dc::as_int(v, k)); }},
        {"full_model_load_s", [](Config& c, const Value& v, const std::string& k) { c.full_model_load_s = dc::as_double(v, k); }},
        {"adapter_swap_overhead_s", [](Config& c, const Value& v, const std::string& k) { c.adapter_swap_overhead_s = dc::as_double(v, k); }},
        {"unload_s", [](Config& c, const Value& v, const std::string& k) { c.unload_s = dc::as_double(v, k); }},
        {"infer_dist", [](Config& c, const Value& v, const std::string& k) { c.infer_dist = dc::as_string(v, k); }},
        {"infer_fixed_s", [](Config& c, const Value& v, const std::string& k) { c.infer_fixed_s = dc::as_double(v, k); }},
        {"infer_min_s", [](Config& c, const Value& v, const std::string& k) { c.infer_min_s = dc::as_double(v, k); }},
        {"infer_mode_s", [](Config& c, const Value& v, const std::string& k) { c.infer_mode_s = dc::as_double(v, k); }},
        {"infer_max_s", [](Config& c, const Value& v, const std::string& k) { c.infer_max_s = dc::as_double(v, k); }},
        {"infer_mean_s", [](Config& c, const Value& v, const std::string& k) { c.infer_mean_s = dc::as_double(v, k); }},
        {"infer_trace_path", [](Config& c, const Value& v, const std::string& k) { c.infer_trace_path = dc::as_string(v, k); }},
        {"count_warmup", [](Config& c, const Value& v, const std::string& k) { c.count_warmup = dc::as_bool(v, k); }},
        {"literal_protocol", [](Config& c, const Value& v, const std::string& k) { c.literal_protocol = dc::as_bool(v, k); }},
        {"bytes_per_param", [](Config& c, const Value& v, const std::string& k) { c.bytes_per_param = dc::as_double(v, k); }},
        {"memory_budget_gb", [](Config& c, const Value& v, const std::string& k) { c.memory_budget_gb = dc::as_double(v, k); }},
        {"model_params", [](Config& c, const Value& v, const std::string& k) { c.model_params = dc::as_int(v, k); }},
        {"fleet_seed", [](Config& c, const Value& v, const std::string& k) { c.fleet_seed = dc::as_seed(v, k); }},
    };

    for (const auto& [key, value] : kv) {
        auto it = setters.find(key);
        if (it == setters.end()) throw UnknownKeyError(key);
        it->second(cfg, value, key);
    }
    return cfg;
}

inline void validate_config(const Config& cfg) {
    auto bad = [](const std::string& key, const std::string& what) {
        throw ConfigTypeError(key, what);
    };
    if (cfg.min_year < 0) bad("min_year", "must be ≥ 0");
    if (!(cfg.rate_limit_rps > 0)) bad("rate_limit_rps", "must be > 0");
    if (cfg.page_size < 1 || cfg.page_size > 10000) bad("page_size", "must be in [1, 10000]");
    if (cfg.tokenizer != "whitespace") bad("tokenizer", "unknown tokenizer");
    if (cfg.filter_mode != "whole_word" && cfg.filter_mode != "substring")
        bad("filter_mode", "must be whole_word or substring");
    if (cfg.completion_client != "mock" && cfg.completion_client != "replay" &&
        cfg.completion_client != "live")
        bad("completion_client", "must be mock, replay, or live");
    if (cfg.price_per_1k_prompt < 0 || cfg.price_per_1k_completion < 0)
        bad("price_per_1k_prompt", "prices must be ≥ 0");
    if (cfg.finding_attempts < 1) bad("finding_attempts", "must be ≥ 1");
    if (cfg.workers < 1) bad("workers", "must be ≥ 1");
    if (cfg.capacity < 1 || cfg.capacity > static_cast<int>(kAllSpecialties.size()))
        bad("capacity", "must be in [1, 11]");
    if (cfg.requests < 1) bad("requests", "must be ≥ 1");
    if (cfg.runs < 1) bad("runs", "must be ≥ 1");
    if (!(cfg.full_model_load_s > 0)) bad("full_model_load_s", "must be > 0");
    if (!(cfg.adapter_swap_overhead_s > 0)) bad("adapter_swap_overhead_s", "must be > 0");
    if (cfg.unload_s < 0) bad("unload_s", "must be ≥ 0");
    if (cfg.infer_dist != "fixed" && cfg.infer_dist != "triangular" &&
        cfg.infer_dist != "mean_matched" && cfg.infer_dist != "empirical")
        bad("infer_dist", "must be fixed, triangular, mean_matched, or empirical");
    if (!(cfg.bytes_per_param > 0)) bad("bytes_per_param", "must be > 0");
    if (!(cfg.memory_budget_gb > 0)) bad("memory_budget_gb", "must be > 0");
    if (cfg.model_params < 1) bad("model_params", "must be ≥ 1");
}

inline Config parse_config(std::istream& in) {
    auto cfg = config_from_key_values(detail_config::parse_key_values(in));
    validate_config(cfg);
    return cfg;
}

inline Config parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError(path.string());
    return parse_config(in);
}

// ---------------------------------------------------------------------------
// Derived objects

inline InferDist make_infer_dist(const Config& cfg) {
    if (cfg.infer_dist == "fixed") return InferDist::fixed(cfg.infer_fixed_s);
    if (cfg.infer_dist == "triangular")
        return InferDist::triangular(cfg.infer_min_s, cfg.infer_mode_s, cfg.infer_max_s);
    if (cfg.infer_dist == "mean_matched")
        return InferDist::mean_matched(cfg.infer_min_s, cfg.infer_mode_s, cfg.infer_max_s,
                                       cfg.infer_mean_s);
    // empirical
    if (cfg.infer_trace_path.empty())
        throw ConfigTypeError("infer_trace_path", "required for the empirical distribution");
    std::ifstream in(cfg.infer_trace_path);
    if (!in) throw ConfigTypeError("infer_trace_path", "cannot open " + cfg.infer_trace_path);
    std::vector<double> samples;
    std::string line;
    while (std::getline(in, line)) {
        auto body = detail::trim(line);
        if (body.empty()) continue;
        try {
            samples.push_back(std::stod(std::string(body)));
        } catch (const std::exception&) {
            throw ConfigTypeError("infer_trace_path", "non-numeric line '" + std::string(body) + "'");
        }
    }
    return InferDist::empirical(std::move(samples));
}

inline TimingModel make_timing_model(const Config& cfg) {
    TimingModel timing;
    timing.full_model_load_s = cfg.full_model_load_s;
    timing.adapter_swap_overhead_s = cfg.adapter_swap_overhead_s;
    timing.unload_s = cfg.unload_s;
    timing.infer = make_infer_dist(cfg);
    timing.validate();
    return timing;
}

inline KeywordFilter make_filter(const Config& cfg) {
    return KeywordFilter(cfg.filter_keywords, cfg.filter_mode == "substring"
                                                  ? KeywordFilter::Mode::Substring
                                                  : KeywordFilter::Mode::WholeWord);
}

}  // namespace medfleet
