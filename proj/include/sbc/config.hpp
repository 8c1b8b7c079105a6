#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sbc/errors.hpp"

namespace sbc {

// Flat key-value config with dotted sections:
//   noise.n_modes = 8
//   study.mesh_levels = 4,8,16
// '#' starts a comment; blank lines are ignored.

struct ConfigMap {
    std::map<std::string, std::string> kv;

    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        const auto b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    static ConfigMap parse_string(const std::string& text) {
        ConfigMap m;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string val = trim(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            m.kv[key] = val;
        }
        return m;
    }

    static ConfigMap parse_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot read config file: " + path);
        std::ostringstream buf;
        buf << f.rdbuf();
        return parse_string(buf.str());
    }
};

/// Typed, fully resolved configuration. Every key has a default; the schema
/// is the set of keys below.
struct RunConfig {
    // problem
    double T = 1.0;
    int J = 16;
    int mesh_n = 8;
    std::string yd = "const:1";
    // noise
    int n_modes = 8;
    double lambda_exponent = 2.0;
    double mu = 1.0;
    std::uint64_t seed = 12345;
    int samples = 1000;
    // tree
    int tree_m = 2;
    std::int64_t tree_budget = 1000000;
    // ce
    std::string ce_kind = "lsmc";
    int ce_degree = 1;
    int ce_modes = 4;
    double ce_ridge = 1e-10;
    // control
    double nu = 1.0;
    double lower = -1.0;
    double upper = 1.0;
    double step = 0.0;  // 0 means 1/nu
    double tol = 1e-8;
    int max_iter = 100;
    // studies
    std::vector<int> mesh_levels = {4, 8, 16};
    int mesh_ref = 64;
    std::vector<int> j_levels = {8, 16, 32, 64};
    int j_ref = 512;
    int study_samples = 1000;
    // duality check
    int duality_pairs = 20;
    std::vector<int> duality_mesh = {1, 2, 4};
    std::vector<int> duality_j = {1, 4, 16};
    // tree-vs-mc
    std::vector<int> treemc_samples = {1000, 10000};

    std::string serialize() const;
};

namespace detail {

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = ConfigMap::trim(item);
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            const int x = std::stoi(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(x);
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": bad integer '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("config key " + key + ": empty list");
    return out;
}

inline std::string int_list_to_string(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

inline std::string fmt_double_cfg(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline std::string RunConfig::serialize() const {
    std::ostringstream o;
    using detail::fmt_double_cfg;
    o << "problem.T = " << fmt_double_cfg(T) << "\n";
    o << "problem.J = " << J << "\n";
    o << "problem.mesh_n = " << mesh_n << "\n";
    o << "problem.yd = " << yd << "\n";
    o << "noise.n_modes = " << n_modes << "\n";
    o << "noise.lambda_exponent = " << fmt_double_cfg(lambda_exponent) << "\n";
    o << "noise.mu = " << fmt_double_cfg(mu) << "\n";
    o << "noise.seed = " << seed << "\n";
    o << "noise.samples = " << samples << "\n";
    o << "tree.m = " << tree_m << "\n";
    o << "tree.budget = " << tree_budget << "\n";
    o << "ce.kind = " << ce_kind << "\n";
    o << "ce.degree = " << ce_degree << "\n";
    o << "ce.modes = " << ce_modes << "\n";
    o << "ce.ridge = " << fmt_double_cfg(ce_ridge) << "\n";
    o << "control.nu = " << fmt_double_cfg(nu) << "\n";
    o << "control.lower = " << fmt_double_cfg(lower) << "\n";
    o << "control.upper = " << fmt_double_cfg(upper) << "\n";
    o << "control.step = " << fmt_double_cfg(step) << "\n";
    o << "control.tol = " << fmt_double_cfg(tol) << "\n";
    o << "control.max_iter = " << max_iter << "\n";
    o << "study.mesh_levels = " << detail::int_list_to_string(mesh_levels) << "\n";
    o << "study.mesh_ref = " << mesh_ref << "\n";
    o << "study.j_levels = " << detail::int_list_to_string(j_levels) << "\n";
    o << "study.j_ref = " << j_ref << "\n";
    o << "study.samples = " << study_samples << "\n";
    o << "duality.pairs = " << duality_pairs << "\n";
    o << "duality.mesh_list = " << detail::int_list_to_string(duality_mesh) << "\n";
    o << "duality.j_list = " << detail::int_list_to_string(duality_j) << "\n";
    o << "treemc.samples = " << detail::int_list_to_string(treemc_samples) << "\n";
    return o.str();
}

/// Resolve and validate a parsed config against the schema. Unknown keys are
/// fatal in strict mode and collected as warnings otherwise.
inline RunConfig resolve_config(const ConfigMap& m, bool strict = true,
                                std::vector<std::string>* warnings = nullptr) {
    RunConfig c;
    std::map<std::string, bool> seen;
    auto fetch = [&](const char* key) -> const std::string* {
        seen[key] = true;
        const auto it = m.kv.find(key);
        return it == m.kv.end() ? nullptr : &it->second;
    };
    auto get_double = [&](const char* key, double& slot) {
        if (const auto* v = fetch(key)) {
            try {
                std::size_t used = 0;
                slot = std::stod(*v, &used);
                if (used != v->size()) throw std::invalid_argument(*v);
            } catch (const std::exception&) {
                throw ConfigError(std::string("config key ") + key + ": bad number '" + *v + "'");
            }
        }
    };
    auto get_int = [&](const char* key, int& slot) {
        if (const auto* v = fetch(key)) {
            try {
                std::size_t used = 0;
                slot = std::stoi(*v, &used);
                if (used != v->size()) throw std::invalid_argument(*v);
            } catch (const std::exception&) {
                throw ConfigError(std::string("config key ") + key + ": bad integer '" + *v + "'");
            }
        }
    };
    auto get_i64 = [&](const char* key, std::int64_t& slot) {
        if (const auto* v = fetch(key)) {
            try {
                slot = std::stoll(*v);
            } catch (const std::exception&) {
                throw ConfigError(std::string("config key ") + key + ": bad integer '" + *v + "'");
            }
        }
    };
    auto get_u64 = [&](const char* key, std::uint64_t& slot) {
        if (const auto* v = fetch(key)) {
            try {
                slot = std::stoull(*v);
            } catch (const std::exception&) {
                throw ConfigError(std::string("config key ") + key + ": bad integer '" + *v + "'");
            }
        }
    };
    auto get_string = [&](const char* key, std::string& slot) {
        if (const auto* v = fetch(key)) slot = *v;
    };
    auto get_list = [&](const char* key, std::vector<int>& slot) {
        if (const auto* v = fetch(key)) slot = detail::parse_int_list(key, *v);
    };

    get_double("problem.T", c.T);
    get_int("problem.J", c.J);
    get_int("problem.mesh_n", c.mesh_n);
    get_string("problem.yd", c.yd);
    get_int("noise.n_modes", c.n_modes);
    get_double("noise.lambda_exponent", c.lambda_exponent);
    get_double("noise.mu", c.mu);
    get_u64("noise.seed", c.seed);
    get_int("noise.samples", c.samples);
    get_int("tree.m", c.tree_m);
    get_i64("tree.budget", c.tree_budget);
    get_string("ce.kind", c.ce_kind);
    get_int("ce.degree", c.ce_degree);
    get_int("ce.modes", c.ce_modes);
    get_double("ce.ridge", c.ce_ridge);
    get_double("control.nu", c.nu);
    get_double("control.lower", c.lower);
    get_double("control.upper", c.upper);
    get_double("control.step", c.step);
    get_double("control.tol", c.tol);
    get_int("control.max_iter", c.max_iter);
    get_list("study.mesh_levels", c.mesh_levels);
    get_int("study.mesh_ref", c.mesh_ref);
    get_list("study.j_levels", c.j_levels);
    get_int("study.j_ref", c.j_ref);
    get_int("study.samples", c.study_samples);
    get_int("duality.pairs", c.duality_pairs);
    get_list("duality.mesh_list", c.duality_mesh);
    get_list("duality.j_list", c.duality_j);
    get_list("treemc.samples", c.treemc_samples);

    for (const auto& [key, val] : m.kv) {
        if (!seen.count(key)) {
            if (strict) throw ConfigError("unknown config key: " + key);
            if (warnings) warnings->push_back("ignoring unknown config key: " + key);
        }
    }

    // cross-field validation
    if (!(c.lower < c.upper))
        throw ConfigError("infeasible bounds: control.lower = " +
                          detail::fmt_double_cfg(c.lower) +
                          " must be < control.upper = " + detail::fmt_double_cfg(c.upper));
    if (!(c.nu > 0.0)) throw ConfigError("config key control.nu: must be positive");
    if (c.T <= 0.0) throw ConfigError("config key problem.T: must be positive");
    if (c.J < 1) throw ConfigError("config key problem.J: must be >= 1");
    if (c.mesh_n < 1) throw ConfigError("config key problem.mesh_n: must be >= 1");
    if (c.n_modes < 1) throw ConfigError("config key noise.n_modes: must be >= 1");
    if (c.samples < 1) throw ConfigError("config key noise.samples: must be >= 1");
    if (c.tree_m != 2 && c.tree_m != 3) throw ConfigError("config key tree.m: must be 2 or 3");
    if (c.ce_kind != "tree" && c.ce_kind != "lsmc" && c.ce_kind != "mean")
        throw ConfigError("config key ce.kind: must be tree, lsmc or mean");
    if (c.ce_degree != 1 && c.ce_degree != 2)
        throw ConfigError("config key ce.degree: must be 1 or 2");
    if (c.ce_ridge < 0.0) throw ConfigError("config key ce.ridge: must be >= 0");
    if (c.step < 0.0) throw ConfigError("config key control.step: must be >= 0");
    if (c.step > 1.0 / c.nu + 1e-15)
        throw ConfigError("config key control.step: must be <= 1/nu");
    return c;
}

} // namespace sbc
