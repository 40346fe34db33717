#pragma once

#include "dunkl/errors.hpp"
#include "dunkl/heatkernel.hpp"
#include "dunkl/potential.hpp"
#include "dunkl/rootsystems.hpp"
#include "dunkl/schrodinger.hpp"
#include "dunkl/theorem.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace dunkl::cli {

using json = nlohmann::json;

inline constexpr std::string_view kSubcommands[] = {"lambda", "heat", "schrodinger", "green", "fk", "verify-theorem"};
inline constexpr std::size_t kMaxGridNodes = 8192;

/// Schema violations, all of them, each prefixed with its field path.
class ConfigError : public ValidationError {
public:
    explicit ConfigError(std::vector<std::string> violations)
        : ValidationError(join(violations)), violations_(std::move(violations)) {}
    const std::vector<std::string>& violations() const { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "invalid config:";
        for (const auto& e : v) s += "\n  " + e;
        return s;
    }
    std::vector<std::string> violations_;
};

/// Defaults for every section; sections whose shape depends on a kind tag
/// (system, potential, fk.f) are replaced wholesale rather than merged.
inline const json& default_config() {
    static const json defaults = json::parse(R"({
      "system": {"family": "product_z2", "multiplicities": [1.5]},
      "grid": {"radius": 12, "nodes": 2048},
      "potential": {"kind": "ball_indicator", "radius": 1, "height": 1},
      "times": [0.25, 1, 4],
      "lambda": {"method": "dp"},
      "bounds": {"c_upper": 0.2, "c_lower": 0.3, "C_upper": 1, "C_lower": 1},
      "trotter": {"tol": 1e-3, "max_steps": 4096},
      "duhamel": {"steps": 64, "s_nodes": 32, "max_tau": 0.015625},
      "green": {"s_max": 1000, "s_min": 1e-4, "per_decade": 64, "x_min": -6, "x_max": 6, "x_points": 13},
      "fk": {"t": 1, "steps": 64, "paths": 20000, "radius": 12, "resolution": 4096, "clip_tol": 1e-6,
             "f": {"kind": "constant", "value": 1}},
      "theorem": {"t_min": 0.1, "t_max": 100, "t_points": 20, "x_min": -6, "x_max": 6, "x_points": 13,
                  "c_values": [0.25, 0.5, 1], "flag_c": 0.25, "delta_floor": 1e-3, "grid_nodes": 2048,
                  "min_radius": 12, "step": 0.05, "spectral_min_steps": 40, "s_max": 1000,
                  "green_tol": 1e-3, "fit_tol": 0.05},
      "seed": 1,
      "threads": 1
    })");
    return defaults;
}

struct SystemSpec {
    std::string family;
    std::vector<double> multiplicities;
    int m = 0;
    std::vector<std::vector<double>> roots;

    RootSystem build() const {
        if (family == "product_z2") return RootSystem::product_z2(multiplicities);
        if (family == "dihedral")
            return RootSystem::dihedral(m, multiplicities.front(), multiplicities.size() > 1 ? multiplicities[1] : multiplicities.front());
        std::vector<Vector> rs;
        for (const auto& r : roots) {
            Vector v(static_cast<Eigen::Index>(r.size()));
            for (std::size_t i = 0; i < r.size(); ++i) v(static_cast<Eigen::Index>(i)) = r[i];
            rs.push_back(v);
        }
        return RootSystem(std::move(rs), multiplicities);
    }
};

struct PotentialSpec {
    json source;
    Potential potential = Potential::constant(0.0);
};

struct ExperimentConfig {
    json effective;
    SystemSpec system_spec;
    std::optional<RootSystem> system;
    std::optional<HeatKernelEvaluator> evaluator; // product families only
    double grid_radius = 12.0;
    std::size_t grid_nodes = 2048;
    PotentialSpec potential;
    std::vector<double> times;
    std::vector<std::pair<Vector, Vector>> points;
    LambdaMethod lambda_method = LambdaMethod::dp;
    BoundParams bounds;
    double trotter_tol = 1e-3;
    std::size_t trotter_max_steps = 4096;
    std::size_t duhamel_steps = 64, duhamel_s_nodes = 32;
    double duhamel_max_tau = 1.0 / 64.0;
    double green_s_max = 1e3, green_s_min = 1e-4;
    int green_per_decade = 64;
    std::vector<Vector> green_points;
    Vector fk_x;
    double fk_t = 1.0;
    std::size_t fk_steps = 64, fk_paths = 20000, fk_resolution = 4096;
    double fk_radius = 12.0, fk_clip_tol = 1e-6;
    PotentialSpec fk_f;
    TheoremConfig theorem;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::string out;

    std::size_t dimension() const { return system ? system->dimension() : 0; }
};

/// FNV-1a over the canonical dump of the effective config, without the output path.
inline std::uint64_t config_hash(const json& effective) {
    json hashed = effective;
    hashed.erase("out");
    const std::string text = hashed.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

class Checker {
public:
    std::vector<std::string> errors;

    void fail(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

    bool object(const json& node, const std::string& path, std::initializer_list<std::string_view> allowed) {
        if (!node.is_object()) {
            fail(path, "expected an object");
            return false;
        }
        for (const auto& [key, _] : node.items())
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(join(path, key), "unknown field");
        return true;
    }

    std::optional<double> real(const json& node, const std::string& path) {
        if (!node.is_number()) {
            fail(path, "expected a number");
            return std::nullopt;
        }
        return node.get<double>();
    }

    double positive(const json& parent, const std::string& path, const std::string& key, double fallback) {
        const auto v = field_real(parent, path, key);
        if (!v) return fallback;
        if (!(*v > 0.0) || !std::isfinite(*v)) {
            fail(join(path, key), "must be positive");
            return fallback;
        }
        return *v;
    }

    double non_negative(const json& parent, const std::string& path, const std::string& key, double fallback) {
        const auto v = field_real(parent, path, key);
        if (!v) return fallback;
        if (!(*v >= 0.0) || !std::isfinite(*v)) {
            fail(join(path, key), "must be >= 0");
            return fallback;
        }
        return *v;
    }

    double any_real(const json& parent, const std::string& path, const std::string& key, double fallback) {
        const auto v = field_real(parent, path, key);
        return v ? *v : fallback;
    }

    std::size_t count(const json& parent, const std::string& path, const std::string& key, std::size_t min,
                      std::size_t fallback) {
        const std::string p = join(path, key);
        if (!parent.contains(key)) {
            fail(p, "missing");
            return fallback;
        }
        const json& node = parent.at(key);
        if (!node.is_number_integer() || node.get<long long>() < static_cast<long long>(min)) {
            fail(p, "must be an integer >= " + std::to_string(min));
            return fallback;
        }
        return static_cast<std::size_t>(node.get<long long>());
    }

    std::vector<double> reals(const json& node, const std::string& path, bool positive_only) {
        std::vector<double> out;
        if (!node.is_array()) {
            fail(path, "expected an array of numbers");
            return out;
        }
        for (std::size_t i = 0; i < node.size(); ++i) {
            const std::string p = path + "[" + std::to_string(i) + "]";
            const auto v = real(node[i], p);
            if (!v) continue;
            if (positive_only && !(*v > 0.0)) fail(p, "must be positive");
            out.push_back(*v);
        }
        return out;
    }

    std::string text(const json& parent, const std::string& path, const std::string& key,
                     std::initializer_list<std::string_view> choices) {
        const std::string p = join(path, key);
        if (!parent.contains(key) || !parent.at(key).is_string()) {
            fail(p, "expected a string");
            return {};
        }
        const auto s = parent.at(key).get<std::string>();
        if (std::find(choices.begin(), choices.end(), s) == choices.end()) {
            std::string list;
            for (auto c : choices) list += (list.empty() ? "" : ", ") + std::string(c);
            fail(p, "must be one of " + list);
            return {};
        }
        return s;
    }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }

private:
    std::optional<double> field_real(const json& parent, const std::string& path, const std::string& key) {
        if (!parent.contains(key)) {
            fail(join(path, key), "missing");
            return std::nullopt;
        }
        return real(parent.at(key), join(path, key));
    }
};

inline std::optional<Vector> point(Checker& ck, const json& node, const std::string& path, std::size_t dim) {
    if (node.is_number() && dim == 1) return make_vector({node.get<double>()});
    const auto coords = ck.reals(node, path, false);
    if (!node.is_array()) return std::nullopt;
    if (coords.size() != node.size()) return std::nullopt;
    if (dim > 0 && coords.size() != dim) {
        ck.fail(path, "expected " + std::to_string(dim) + " coordinates");
        return std::nullopt;
    }
    Vector v(static_cast<Eigen::Index>(coords.size()));
    for (std::size_t i = 0; i < coords.size(); ++i) v(static_cast<Eigen::Index>(i)) = coords[i];
    return v;
}

inline json vector_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline void parse_system(Checker& ck, const json& node, ExperimentConfig& cfg) {
    const std::string path = "system";
    if (!node.is_object()) {
        ck.fail(path, "expected an object");
        return;
    }
    auto& spec = cfg.system_spec;
    spec.family = ck.text(node, path, "family", {"product_z2", "dihedral", "explicit"});
    const std::size_t before = ck.errors.size();
    if (spec.family == "product_z2") {
        ck.object(node, path, {"family", "multiplicities"});
        if (!node.contains("multiplicities")) ck.fail(path + ".multiplicities", "missing");
        else spec.multiplicities = ck.reals(node["multiplicities"], path + ".multiplicities", true);
        if (node.contains("multiplicities") && node["multiplicities"].is_array() && node["multiplicities"].empty())
            ck.fail(path + ".multiplicities", "must not be empty");
    } else if (spec.family == "dihedral") {
        ck.object(node, path, {"family", "m", "multiplicities"});
        spec.m = static_cast<int>(ck.count(node, path, "m", 1, 3));
        if (!node.contains("multiplicities")) ck.fail(path + ".multiplicities", "missing");
        else spec.multiplicities = ck.reals(node["multiplicities"], path + ".multiplicities", true);
        if (spec.multiplicities.empty() || spec.multiplicities.size() > 2)
            ck.fail(path + ".multiplicities", "dihedral systems take one or two multiplicities");
    } else if (spec.family == "explicit") {
        ck.object(node, path, {"family", "roots", "multiplicities"});
        if (!node.contains("roots") || !node["roots"].is_array() || node["roots"].empty()) {
            ck.fail(path + ".roots", "expected a non-empty array of root coordinate arrays");
        } else {
            for (std::size_t i = 0; i < node["roots"].size(); ++i)
                spec.roots.push_back(ck.reals(node["roots"][i], path + ".roots[" + std::to_string(i) + "]", false));
        }
        if (!node.contains("multiplicities")) ck.fail(path + ".multiplicities", "missing");
        else spec.multiplicities = ck.reals(node["multiplicities"], path + ".multiplicities", true);
    }
    if (ck.errors.size() != before || spec.family.empty()) return;
    try {
        cfg.system = spec.build();
        (void)build_group(*cfg.system);
    } catch (const std::exception& e) {
        ck.fail(path, e.what());
        cfg.system.reset();
        return;
    }
    if (cfg.system->is_coordinate_product()) cfg.evaluator.emplace(ProductRank1System::from_roots(*cfg.system));
}

inline std::optional<PotentialSpec> parse_potential(Checker& ck, const json& node, const std::string& path,
                                                    std::size_t dim) {
    if (!node.is_object()) {
        ck.fail(path, "expected an object");
        return std::nullopt;
    }
    const std::string kind = ck.text(node, path, "kind", {"constant", "ball_indicator", "radial_power", "table"});
    const std::size_t before = ck.errors.size();
    json eff = {{"kind", kind}};
    std::optional<Potential> pot;
    if (kind == "constant") {
        ck.object(node, path, {"kind", "value", "truncate"});
        const double value = ck.non_negative(node, path, "value", 0.0);
        eff["value"] = value;
        pot = Potential::constant(value);
    } else if (kind == "ball_indicator") {
        ck.object(node, path, {"kind", "center", "radius", "height", "truncate"});
        Vector center = Vector::Zero(static_cast<Eigen::Index>(std::max<std::size_t>(dim, 1)));
        if (node.contains("center")) {
            if (auto c = point(ck, node["center"], path + ".center", dim)) center = *c;
        }
        const double radius = ck.positive(node, path, "radius", 1.0);
        const double height = node.contains("height") ? ck.non_negative(node, path, "height", 1.0) : 1.0;
        eff["center"] = vector_json(center);
        eff["radius"] = radius;
        eff["height"] = height;
        pot = Potential::ball_indicator(center, radius, height);
    } else if (kind == "radial_power") {
        ck.object(node, path, {"kind", "exponent", "cutoff", "scale", "truncate"});
        const double exponent = ck.non_negative(node, path, "exponent", 0.0);
        const double cutoff = ck.positive(node, path, "cutoff", 1.0);
        const double scale = node.contains("scale") ? ck.non_negative(node, path, "scale", 1.0) : 1.0;
        eff["exponent"] = exponent;
        eff["cutoff"] = cutoff;
        eff["scale"] = scale;
        pot = Potential::radial_power(exponent, cutoff, scale);
    } else if (kind == "table") {
        ck.object(node, path, {"kind", "nodes", "values", "truncate"});
        const auto nodes = node.contains("nodes") ? ck.reals(node["nodes"], path + ".nodes", false) : std::vector<double>{};
        const auto values = node.contains("values") ? ck.reals(node["values"], path + ".values", false) : std::vector<double>{};
        eff["nodes"] = nodes;
        eff["values"] = values;
        if (ck.errors.size() == before) {
            try {
                pot = Potential::table(nodes, values);
            } catch (const ValidationError& e) {
                ck.fail(path, e.what());
            }
        }
    }
    if (node.contains("truncate") && pot) {
        const double level = ck.positive(node, path, "truncate", 1.0);
        eff["truncate"] = level;
        pot = pot->truncated(level);
    }
    if (ck.errors.size() != before || !pot) return std::nullopt;
    if (dim > 0) {
        try {
            pot->check_dimension(dim);
        } catch (const ValidationError& e) {
            ck.fail(path, e.what());
            return std::nullopt;
        }
    }
    return PotentialSpec{eff, *pot};
}

inline std::vector<std::pair<Vector, Vector>> default_points(std::size_t dim) {
    if (dim == 1)
        return {{make_vector({0.0}), make_vector({0.0})}, {make_vector({0.5}), make_vector({1.0})},
                {make_vector({1.0}), make_vector({-1.0})}, {make_vector({-2.0}), make_vector({3.0})},
                {make_vector({3.0}), make_vector({3.0})}};
    std::vector<std::pair<Vector, Vector>> pts;
    const double xs[][2] = {{0.0, 0.0}, {1.0, 0.5}, {1.0, 1.0}, {2.0, -1.0}};
    const double ys[][2] = {{0.0, 0.0}, {0.5, 1.0}, {-1.0, -1.0}, {-0.5, 1.5}};
    for (std::size_t i = 0; i < 4; ++i) {
        Vector x = Vector::Zero(static_cast<Eigen::Index>(dim)), y = x;
        x(0) = xs[i][0];
        x(1) = xs[i][1];
        y(0) = ys[i][0];
        y(1) = ys[i][1];
        pts.emplace_back(x, y);
    }
    return pts;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

/// Checks that depend on which subcommand will run.
inline void check_subcommand(Checker& ck, const ExperimentConfig& cfg, std::string_view sub) {
    if (!cfg.system) return;
    const bool needs_kernel = sub != "lambda";
    if (needs_kernel && !cfg.evaluator) {
        ck.fail("system", "exact kernel unsupported for this family");
        return;
    }
    const std::size_t dim = cfg.dimension();
    const bool needs_grid = sub == "schrodinger" || sub == "fk" || (sub == "green" && dim > 1);
    if (needs_grid) {
        if (dim > 2) ck.fail("system", "grid-based subcommands support dimension 1 or 2");
        else {
            double total = 1.0;
            for (std::size_t i = 0; i < dim; ++i) total *= static_cast<double>(cfg.grid_nodes);
            if (total > static_cast<double>(kMaxGridNodes))
                ck.fail("grid.nodes", "total grid size " + std::to_string(static_cast<long long>(total)) +
                                          " exceeds the dense-kernel limit of " + std::to_string(kMaxGridNodes) +
                                          " nodes (use nodes <= " +
                                          std::to_string(static_cast<int>(std::pow(kMaxGridNodes, 1.0 / static_cast<double>(dim)))) +
                                          " per axis)");
        }
    }
    if (sub == "verify-theorem") {
        if (cfg.evaluator && !(cfg.evaluator->homogeneous_dimension() > 2.0))
            ck.fail("system.multiplicities", "verify-theorem requires homogeneous dimension N > 2 (got " +
                                                 std::to_string(cfg.evaluator->homogeneous_dimension()) + ")");
        if (dim != 1) ck.fail("system", "verify-theorem supports rank-one systems only");
        if (!cfg.potential.potential.is_bounded()) ck.fail("potential", "verify-theorem requires a bounded potential");
    }
    if ((sub == "fk" || sub == "green") && cfg.evaluator) {
        if (sub == "fk" && !cfg.potential.potential.is_bounded()) ck.fail("potential", "fk requires a bounded potential");
        if (sub == "fk" && !cfg.fk_f.potential.is_bounded()) ck.fail("fk.f", "f must be bounded");
    }
    if (cfg.evaluator && (sub == "schrodinger" || sub == "green")) {
        try {
            cfg.potential.potential.check_integrable(cfg.evaluator->homogeneous_dimension());
        } catch (const ValidationError& e) {
            ck.fail("potential", e.what());
        }
    }
}

} // namespace detail

/// Merges the user JSON over the defaults and validates it; every violation is reported.
inline ExperimentConfig parse_config(const json& user, std::string_view subcommand) {
    detail::Checker ck;
    if (std::find(std::begin(kSubcommands), std::end(kSubcommands), subcommand) == std::end(kSubcommands))
        throw ValidationError("unknown subcommand '" + std::string(subcommand) + "'");
    if (!user.is_object()) throw ConfigError({"<root>: expected a JSON object"});
    ck.object(user, "", {"system", "grid", "potential", "times", "points", "lambda", "bounds", "trotter", "duhamel",
                         "green", "fk", "theorem", "seed", "threads", "out"});

    json merged = default_config();
    merged.merge_patch(user);
    for (const char* key : {"system", "potential"})
        if (user.contains(key)) merged[key] = user[key];
    if (user.contains("fk") && user["fk"].is_object() && user["fk"].contains("f")) merged["fk"]["f"] = user["fk"]["f"];

    ExperimentConfig cfg;
    json eff;

    detail::parse_system(ck, merged["system"], cfg);
    const std::size_t dim = cfg.dimension();
    {
        json sys = {{"family", cfg.system_spec.family}, {"multiplicities", cfg.system_spec.multiplicities}};
        if (cfg.system_spec.family == "dihedral") sys["m"] = cfg.system_spec.m;
        if (cfg.system_spec.family == "explicit") sys["roots"] = cfg.system_spec.roots;
        eff["system"] = sys;
    }

    if (ck.object(merged["grid"], "grid", {"radius", "nodes"})) {
        cfg.grid_radius = ck.positive(merged["grid"], "grid", "radius", 12.0);
        cfg.grid_nodes = ck.count(merged["grid"], "grid", "nodes", 8, 2048);
    }
    eff["grid"] = {{"radius", cfg.grid_radius}, {"nodes", cfg.grid_nodes}};

    if (auto p = detail::parse_potential(ck, merged["potential"], "potential", dim)) cfg.potential = *p;
    eff["potential"] = cfg.potential.source;

    cfg.times = ck.reals(merged["times"], "times", true);
    if (merged["times"].is_array() && merged["times"].empty()) ck.fail("times", "must not be empty");
    eff["times"] = cfg.times;

    if (merged.contains("points")) {
        const json& pts = merged["points"];
        if (!pts.is_array()) {
            ck.fail("points", "expected an array of {x, y} objects");
        } else {
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const std::string p = "points[" + std::to_string(i) + "]";
                if (!ck.object(pts[i], p, {"x", "y"})) continue;
                if (!pts[i].contains("x") || !pts[i].contains("y")) {
                    ck.fail(p, "needs both x and y");
                    continue;
                }
                auto x = detail::point(ck, pts[i]["x"], p + ".x", dim);
                auto y = detail::point(ck, pts[i]["y"], p + ".y", dim);
                if (x && y) cfg.points.emplace_back(*x, *y);
            }
        }
    } else if (dim > 0) {
        cfg.points = detail::default_points(dim);
    }
    eff["points"] = json::array();
    for (const auto& [x, y] : cfg.points) eff["points"].push_back({{"x", detail::vector_json(x)}, {"y", detail::vector_json(y)}});

    if (ck.object(merged["lambda"], "lambda", {"method"}))
        cfg.lambda_method = ck.text(merged["lambda"], "lambda", "method", {"dp", "naive"}) == "naive" ? LambdaMethod::naive
                                                                                                    : LambdaMethod::dp;
    eff["lambda"] = {{"method", cfg.lambda_method == LambdaMethod::naive ? "naive" : "dp"}};

    if (ck.object(merged["bounds"], "bounds", {"c_upper", "c_lower", "C_upper", "C_lower"})) {
        const json& b = merged["bounds"];
        cfg.bounds.c_upper = ck.positive(b, "bounds", "c_upper", 0.2);
        cfg.bounds.c_lower = ck.positive(b, "bounds", "c_lower", 0.3);
        cfg.bounds.C_upper = ck.positive(b, "bounds", "C_upper", 1.0);
        cfg.bounds.C_lower = ck.positive(b, "bounds", "C_lower", 1.0);
        if (!(cfg.bounds.c_upper < 0.25)) ck.fail("bounds.c_upper", "must be < 1/4");
        if (!(cfg.bounds.c_lower > 0.25)) ck.fail("bounds.c_lower", "must be > 1/4");
    }
    eff["bounds"] = {{"c_upper", cfg.bounds.c_upper}, {"c_lower", cfg.bounds.c_lower},
                     {"C_upper", cfg.bounds.C_upper}, {"C_lower", cfg.bounds.C_lower}};

    if (ck.object(merged["trotter"], "trotter", {"tol", "max_steps"})) {
        const json& t = merged["trotter"];
        cfg.trotter_tol = ck.positive(t, "trotter", "tol", 1e-3);
        cfg.trotter_max_steps = ck.count(t, "trotter", "max_steps", 2, 4096);
    }
    eff["trotter"] = {{"tol", cfg.trotter_tol}, {"max_steps", cfg.trotter_max_steps}};

    if (ck.object(merged["duhamel"], "duhamel", {"steps", "s_nodes", "max_tau"})) {
        cfg.duhamel_steps = ck.count(merged["duhamel"], "duhamel", "steps", 2, 64);
        cfg.duhamel_s_nodes = ck.count(merged["duhamel"], "duhamel", "s_nodes", 2, 32);
        cfg.duhamel_max_tau = ck.positive(merged["duhamel"], "duhamel", "max_tau", 1.0 / 64.0);
    }
    eff["duhamel"] = {{"steps", cfg.duhamel_steps}, {"s_nodes", cfg.duhamel_s_nodes}, {"max_tau", cfg.duhamel_max_tau}};

    {
        const json& g = merged["green"];
        double x_min = -6.0, x_max = 6.0;
        std::size_t x_points = 13;
        if (ck.object(g, "green", {"s_max", "s_min", "per_decade", "x_min", "x_max", "x_points"})) {
            cfg.green_s_max = ck.positive(g, "green", "s_max", 1e3);
            cfg.green_s_min = ck.positive(g, "green", "s_min", 1e-4);
            cfg.green_per_decade = static_cast<int>(ck.count(g, "green", "per_decade", 2, 64));
            x_min = ck.any_real(g, "green", "x_min", -6.0);
            x_max = ck.any_real(g, "green", "x_max", 6.0);
            x_points = ck.count(g, "green", "x_points", 1, 13);
            if (!(cfg.green_s_min < cfg.green_s_max)) ck.fail("green.s_min", "must be below s_max");
            if (x_points > 1 && !(x_min < x_max)) ck.fail("green.x_min", "must be below x_max");
        }
        for (double x : detail::linspace(x_min, x_max, x_points)) {
            Vector p = Vector::Zero(static_cast<Eigen::Index>(std::max<std::size_t>(dim, 1)));
            p(0) = x;
            cfg.green_points.push_back(p);
        }
        eff["green"] = {{"s_max", cfg.green_s_max}, {"s_min", cfg.green_s_min}, {"per_decade", cfg.green_per_decade},
                        {"x_min", x_min}, {"x_max", x_max}, {"x_points", x_points}};
    }

    {
        const json& f = merged["fk"];
        cfg.fk_x = Vector::Zero(static_cast<Eigen::Index>(std::max<std::size_t>(dim, 1)));
        if (ck.object(f, "fk", {"x", "t", "steps", "paths", "radius", "resolution", "clip_tol", "f"})) {
            if (f.contains("x"))
                if (auto x = detail::point(ck, f["x"], "fk.x", dim)) cfg.fk_x = *x;
            cfg.fk_t = ck.positive(f, "fk", "t", 1.0);
            cfg.fk_steps = ck.count(f, "fk", "steps", 1, 64);
            cfg.fk_paths = ck.count(f, "fk", "paths", 2, 20000);
            cfg.fk_radius = ck.positive(f, "fk", "radius", 12.0);
            cfg.fk_resolution = ck.count(f, "fk", "resolution", 16, 4096);
            cfg.fk_clip_tol = ck.positive(f, "fk", "clip_tol", 1e-6);
            if (auto p = detail::parse_potential(ck, f["f"], "fk.f", dim)) cfg.fk_f = *p;
        }
        eff["fk"] = {{"x", detail::vector_json(cfg.fk_x)}, {"t", cfg.fk_t}, {"steps", cfg.fk_steps},
                     {"paths", cfg.fk_paths}, {"radius", cfg.fk_radius}, {"resolution", cfg.fk_resolution},
                     {"clip_tol", cfg.fk_clip_tol}, {"f", cfg.fk_f.source}};
    }

    {
        const json& t = merged["theorem"];
        auto& th = cfg.theorem;
        if (ck.object(t, "theorem", {"t_min", "t_max", "t_points", "x_min", "x_max", "x_points", "c_values", "flag_c",
                                     "delta_floor", "grid_nodes", "min_radius", "step", "spectral_min_steps", "s_max",
                                     "green_tol", "fit_tol"})) {
            th.t_min = ck.positive(t, "theorem", "t_min", th.t_min);
            th.t_max = ck.positive(t, "theorem", "t_max", th.t_max);
            th.t_points = ck.count(t, "theorem", "t_points", 2, th.t_points);
            th.x_min = ck.any_real(t, "theorem", "x_min", th.x_min);
            th.x_max = ck.any_real(t, "theorem", "x_max", th.x_max);
            th.x_points = ck.count(t, "theorem", "x_points", 2, th.x_points);
            th.c_values = ck.reals(t["c_values"], "theorem.c_values", true);
            th.flag_c = ck.positive(t, "theorem", "flag_c", th.flag_c);
            th.delta_floor = ck.positive(t, "theorem", "delta_floor", th.delta_floor);
            th.grid_nodes = ck.count(t, "theorem", "grid_nodes", 16, th.grid_nodes);
            th.min_radius = ck.positive(t, "theorem", "min_radius", th.min_radius);
            th.step = ck.positive(t, "theorem", "step", th.step);
            th.spectral_min_steps = ck.count(t, "theorem", "spectral_min_steps", 2, th.spectral_min_steps);
            th.s_max = ck.positive(t, "theorem", "s_max", th.s_max);
            th.green_tol = ck.positive(t, "theorem", "green_tol", th.green_tol);
            th.fit_tol = ck.positive(t, "theorem", "fit_tol", th.fit_tol);
            try {
                th.validate();
            } catch (const ValidationError& e) {
                ck.fail("theorem", e.what());
            }
        }
        eff["theorem"] = {{"t_min", th.t_min}, {"t_max", th.t_max}, {"t_points", th.t_points}, {"x_min", th.x_min},
                          {"x_max", th.x_max}, {"x_points", th.x_points}, {"c_values", th.c_values},
                          {"flag_c", th.flag_c}, {"delta_floor", th.delta_floor}, {"grid_nodes", th.grid_nodes},
                          {"min_radius", th.min_radius}, {"step", th.step},
                          {"spectral_min_steps", th.spectral_min_steps}, {"s_max", th.s_max},
                          {"green_tol", th.green_tol}, {"fit_tol", th.fit_tol}};
    }

    const json& seed = merged["seed"];
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
        ck.fail("seed", "must be a non-negative integer");
    else cfg.seed = seed.get<std::uint64_t>();
    cfg.threads = static_cast<unsigned>(ck.count(merged, "", "threads", 1, 1));
    cfg.theorem.threads = cfg.threads;
    eff["seed"] = cfg.seed;
    eff["threads"] = cfg.threads;
    if (merged.contains("out")) {
        if (!merged["out"].is_string()) ck.fail("out", "expected a path string");
        else cfg.out = merged["out"].get<std::string>();
        eff["out"] = cfg.out;
    }

    if (ck.errors.empty()) detail::check_subcommand(ck, cfg, subcommand);
    if (!ck.errors.empty()) throw ConfigError(std::move(ck.errors));
    cfg.effective = std::move(eff);
    return cfg;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

inline ExperimentConfig parse_config(const std::string& path, std::string_view subcommand) {
    return parse_config(read_json_file(path), subcommand);
}

} // namespace dunkl::cli
