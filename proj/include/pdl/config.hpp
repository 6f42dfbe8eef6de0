#pragma once

/// YAML experiment configuration. Every key lives in a two-level
/// `section: {key: value}` layout; unknown sections or keys are rejected
/// with their line number, and every seed must be given explicitly.

#include <pdl/harness.hpp>

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace pdl::config {

namespace detail {

inline std::string where(const YAML::Node& n, const std::string& origin)
{
    if (!origin.empty()) return origin;
    if (n.Mark().is_null()) return "config";
    return "line " + std::to_string(n.Mark().line + 1);
}

[[noreturn]] inline void fail(const YAML::Node& n, const std::string& origin, const std::string& path,
                              const std::string& msg)
{
    throw ConfigError(where(n, origin) + ": " + path + ": " + msg);
}

inline std::string scalar_text(const YAML::Node& n, const std::string& origin, const std::string& path)
{
    if (!n.IsScalar()) fail(n, origin, path, "expected a scalar value");
    return n.Scalar();
}

inline double to_double(const YAML::Node& n, const std::string& origin, const std::string& path)
{
    const auto s = scalar_text(n, origin, path);
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    fail(n, origin, path, "expected a finite number, got '" + s + "'");
}

inline std::uint64_t to_unsigned(const YAML::Node& n, const std::string& origin, const std::string& path)
{
    const auto s = scalar_text(n, origin, path);
    if (!s.empty() && s.find_first_not_of("0123456789") == std::string::npos) {
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
        }
    }
    fail(n, origin, path, "expected a non-negative integer, got '" + s + "'");
}

inline bool to_bool(const YAML::Node& n, const std::string& origin, const std::string& path)
{
    const auto s = scalar_text(n, origin, path);
    if (s == "true") return true;
    if (s == "false") return false;
    fail(n, origin, path, "expected true or false, got '" + s + "'");
}

struct Field {
    std::function<void(const YAML::Node&, const std::string& origin, const std::string& path)> set;
    std::function<YAML::Node()> get;
};

using FieldTable = std::map<std::string, std::map<std::string, Field>>;

inline Field real(double& ref)
{
    return {[&ref](const YAML::Node& n, const std::string& o, const std::string& p) { ref = to_double(n, o, p); },
            [&ref] { return YAML::Node(ref); }};
}

template <class T>
Field count(T& ref)
{
    return {[&ref](const YAML::Node& n, const std::string& o, const std::string& p) {
                ref = static_cast<T>(to_unsigned(n, o, p));
            },
            [&ref] { return YAML::Node(ref); }};
}

inline Field flag(bool& ref)
{
    return {[&ref](const YAML::Node& n, const std::string& o, const std::string& p) { ref = to_bool(n, o, p); },
            [&ref] { return YAML::Node(ref); }};
}

template <class E>
Field choice(E& ref, std::vector<std::pair<std::string, E>> names)
{
    auto set = [&ref, names](const YAML::Node& n, const std::string& o, const std::string& p) {
        const auto s = scalar_text(n, o, p);
        std::string allowed;
        for (const auto& [k, v] : names) {
            if (k == s) {
                ref = v;
                return;
            }
            allowed += (allowed.empty() ? "" : ", ") + k;
        }
        fail(n, o, p, "unknown value '" + s + "' (expected one of: " + allowed + ")");
    };
    auto get = [&ref, names] {
        for (const auto& [k, v] : names)
            if (v == ref) return YAML::Node(k);
        return YAML::Node();
    };
    return {set, get};
}

template <class E>
Field choice_list(std::vector<E>& ref, std::vector<std::pair<std::string, E>> names)
{
    auto set = [&ref, names](const YAML::Node& n, const std::string& o, const std::string& p) {
        if (!n.IsSequence()) fail(n, o, p, "expected a list");
        std::vector<E> out;
        for (const auto& item : n) {
            E v{};
            choice(v, names).set(item, o, p);
            if (std::find(out.begin(), out.end(), v) != out.end()) fail(item, o, p, "duplicate entry");
            out.push_back(v);
        }
        ref = std::move(out);
    };
    auto get = [&ref, names] {
        YAML::Node seq(YAML::NodeType::Sequence);
        for (const auto& v : ref) {
            E copy = v;
            seq.push_back(choice(copy, names).get());
        }
        return seq;
    };
    return {set, get};
}

inline const std::vector<std::pair<std::string, OptimizerKind>>& optimizer_names()
{
    static const std::vector<std::pair<std::string, OptimizerKind>> n{
        {"gd", OptimizerKind::gd}, {"rmsprop", OptimizerKind::rmsprop}, {"adam", OptimizerKind::adam}};
    return n;
}

inline FieldTable fields(ExperimentConfig& c)
{
    FieldTable t;
    t["grid"] = {{"nx", count(c.grid.nx)}, {"ny", count(c.grid.ny)}, {"nz", count(c.grid.nz)},
                 {"lx", real(c.grid.lx)},  {"ly", real(c.grid.ly)},  {"lz", real(c.grid.lz)}};
    t["scenario"] = {{"initial_psi", real(c.scenario.initial_psi)},
                     {"top_psi", real(c.scenario.top_psi)},
                     {"bottom_psi", real(c.scenario.bottom_psi)}};
    t["solver"] = {{"t_end", real(c.solver.t_end)},
                   {"n_saves", count(c.solver.n_saves)},
                   {"substeps_per_save", count(c.solver.substeps_per_save)},
                   {"picard_tol", real(c.solver.picard_tol)},
                   {"max_picard", count(c.solver.max_picard)}};
    t["soil"] = {{"theta_r", real(c.soil.theta_r)},
                 {"theta_s", real(c.soil.theta_s)},
                 {"alpha", real(c.soil.alpha)},
                 {"n", real(c.soil.n)},
                 {"k_s", real(c.soil.k_s)}};
    t["seeds"] = {{"sensors", count(c.seeds.sensors)},
                  {"noise", count(c.seeds.noise)},
                  {"collocation", count(c.seeds.collocation)},
                  {"network", count(c.seeds.network)},
                  {"batches", count(c.seeds.batches)}};
    t["sensors"] = {{"columns", count(c.sensors.columns)},
                    {"depths", count(c.sensors.depths)},
                    {"anchor", choice(c.sensors.anchor, {{"surface", DepthAnchor::surface},
                                                         {"bottom", DepthAnchor::bottom}})}};
    t["noise"] = {{"sigma", real(c.noise_sigma)},
                  {"scale", choice(c.noise_scale, {{"normalized", NoiseScale::normalized}, {"raw", NoiseScale::raw}})}};
    t["collocation"] = {{"points", count(c.collocation_points)}};
    t["network"] = {{"hidden_layers", count(c.network.hidden_layers)},
                    {"hidden_width", count(c.network.hidden_width)},
                    {"activation", choice(c.network.activation, {{"tanh", Activation::tanh}})}};
    t["loss"] = {{"data_weight", real(c.weights.data)},
                 {"rre_weight", real(c.weights.rre)},
                 {"residual_scale", real(c.residual_scale)}};
    auto& tr = c.training;
    t["training"] = {{"optimizers", choice_list(tr.optimizers, optimizer_names())},
                     {"regimes", choice_list(tr.regimes, {{"mini", Regime::mini}, {"full", Regime::full}})},
                     {"iterations", count(tr.iterations)},
                     {"epochs", count(tr.epochs)},
                     {"batch_size", count(tr.batch_size)},
                     {"collocation_batching", choice(tr.collocation_batching,
                                                     {{"proportional", CollocationBatching::proportional},
                                                      {"all", CollocationBatching::all}})},
                     {"eval_every", count(tr.eval_every)},
                     {"plateau_stop", flag(tr.plateau.enabled)},
                     {"plateau_window", count(tr.plateau.window)},
                     {"plateau_min_delta", real(tr.plateau.min_delta)}};
    t["optimizer"] = {{"lr_gd", real(tr.lr_gd)},
                      {"lr_rmsprop", real(tr.lr_rmsprop)},
                      {"lr_adam", real(tr.lr_adam)},
                      {"rmsprop_beta", real(tr.rmsprop_beta)},
                      {"adam_beta1", real(tr.adam_beta1)},
                      {"adam_beta2", real(tr.adam_beta2)},
                      {"epsilon", real(tr.epsilon)}};
    t["report"] = {{"discrepancy_time_index", count(c.discrepancy_time_index)},
                   {"curve_points", count(c.curve_points)}};
    return t;
}

}  // namespace detail

/// Parses a YAML document on top of the built-in defaults. Does not
/// validate cross-field constraints; call ExperimentConfig::validate.
inline ExperimentConfig parse(const std::string& text)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    ExperimentConfig cfg;
    auto table = detail::fields(cfg);
    std::set<std::string> seeds_given;
    if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    if (!root.IsMap()) throw ConfigError(detail::where(root, "") + ": top level must be a mapping of sections");
    for (const auto& sec : root) {
        const auto name = sec.first.as<std::string>();
        const auto it = table.find(name);
        if (it == table.end()) detail::fail(sec.first, "", name, "unknown section");
        if (sec.second.IsNull()) continue;
        if (!sec.second.IsMap()) detail::fail(sec.second, "", name, "section must be a mapping");
        for (const auto& kv : sec.second) {
            const auto key = kv.first.as<std::string>();
            const auto path = name + "." + key;
            const auto f = it->second.find(key);
            if (f == it->second.end()) detail::fail(kv.first, "", path, "unknown key");
            f->second.set(kv.second, "", path);
            if (name == "seeds") seeds_given.insert(key);
        }
    }
    std::string missing;
    for (const auto& [key, _] : table.at("seeds"))
        if (!seeds_given.count(key)) missing += (missing.empty() ? "" : ", ") + ("seeds." + key);
    if (!missing.empty()) throw ConfigError("missing mandatory seed(s): " + missing);
    return cfg;
}

inline ExperimentConfig load(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    try {
        return parse(io::read_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// Applies one `section.key=value` override; the value is read as YAML,
/// so lists are written `[adam, gd]`.
inline void apply_override(ExperimentConfig& cfg, const std::string& assignment)
{
    const auto origin = "--set " + assignment;
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw ConfigError(origin + ": expected section.key=value");
    const auto section = assignment.substr(0, dot);
    const auto key = assignment.substr(dot + 1, eq - dot - 1);
    auto table = detail::fields(cfg);
    const auto s = table.find(section);
    if (s == table.end()) throw ConfigError(origin + ": unknown section '" + section + "'");
    const auto f = s->second.find(key);
    if (f == s->second.end()) throw ConfigError(origin + ": unknown key '" + section + "." + key + "'");
    YAML::Node value;
    try {
        value = YAML::Load(assignment.substr(eq + 1));
    } catch (const YAML::Exception& e) {
        throw ConfigError(origin + ": " + e.msg);
    }
    f->second.set(value, origin, section + "." + key);
}

/// The fully resolved configuration as YAML, sections and keys in
/// alphabetical order. parse(to_yaml(c)) reproduces c.
inline std::string to_yaml(const ExperimentConfig& cfg)
{
    ExperimentConfig copy = cfg;
    const auto table = detail::fields(copy);
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    for (const auto& [section, keys] : table) {
        out << YAML::Key << section << YAML::Value << YAML::BeginMap;
        for (const auto& [key, field] : keys) out << YAML::Key << key << YAML::Value << field.get();
        out << YAML::EndMap;
    }
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace pdl::config
