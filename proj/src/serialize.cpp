#include "svem/serialize.hpp"

#include "svem/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace svem {

namespace {

template <typename T>
T get(const Json& j, const char* key, T fallback) {
    if (!j.is_object()) throw ConfigError("expected a JSON object around '" + std::string(key) + "'");
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError("bad value for '" + std::string(key) + "': " + e.what());
    }
}

template <typename T>
T require(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) {
        throw ConfigError("missing required key '" + std::string(key) + "'");
    }
    return get<T>(j, key, T{});
}

std::optional<double> optional_number(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return get<double>(j, key, 0.0);
}

void check_document(const Json& j, const std::string& kind) {
    if (!j.is_object()) throw ConfigError(kind + " document must be a JSON object");
    const auto format = get<std::string>(j, "format", "");
    if (format != kind) throw ConfigError("expected a '" + kind + "' document, found '" + format + "'");
    const int version = get<int>(j, "version", 0);
    if (version < 1 || version > kDocumentVersion) {
        throw ConfigError(kind + " document version " + std::to_string(version) + " is not supported");
    }
}

std::string to_string(ContrastCoding c) { return c == ContrastCoding::treatment ? "treatment" : "sum"; }

ContrastCoding coding_from_string(const std::string& s) {
    if (s == "treatment") return ContrastCoding::treatment;
    if (s == "sum") return ContrastCoding::sum;
    throw ConfigError("unknown contrast coding '" + s + "'");
}

Json to_json(const FactorInfo& f) {
    Json j;
    j["name"] = f.name;
    j["kind"] = f.kind == ColumnKind::numeric ? "numeric" : "categorical";
    j["blocking"] = f.blocking;
    if (f.kind == ColumnKind::numeric) {
        j["min"] = f.min;
        j["max"] = f.max;
    } else {
        j["levels"] = f.levels;
        j["mode_level"] = f.mode_level;
    }
    return j;
}

FactorInfo factor_from_json(const Json& j) {
    FactorInfo f;
    f.name = require<std::string>(j, "name");
    const auto kind = require<std::string>(j, "kind");
    if (kind != "numeric" && kind != "categorical") throw ConfigError("unknown factor kind '" + kind + "'");
    f.kind = kind == "numeric" ? ColumnKind::numeric : ColumnKind::categorical;
    f.blocking = get<bool>(j, "blocking", false);
    if (f.kind == ColumnKind::numeric) {
        f.min = require<double>(j, "min");
        f.max = require<double>(j, "max");
    } else {
        f.levels = require<std::vector<std::string>>(j, "levels");
        f.mode_level = get<std::string>(j, "mode_level", f.levels.empty() ? "" : f.levels.front());
        if (f.levels.size() < 2) throw ConfigError("categorical factor '" + f.name + "' needs two or more levels");
    }
    return f;
}

Json to_json(const ReplicateSelection& s) {
    return Json{{"alpha", s.alpha},         {"lambda", s.lambda},       {"gamma", s.gamma},
                {"k_lambda", s.k_lambda},   {"criterion", std::isfinite(s.criterion) ? Json(s.criterion) : Json()},
                {"n_eff_adm", s.n_eff_adm}, {"fallback", s.fallback},   {"degenerate", s.degenerate}};
}

ReplicateSelection selection_from_json(const Json& j) {
    ReplicateSelection s;
    s.alpha = get<double>(j, "alpha", 1.0);
    s.lambda = get<double>(j, "lambda", 0.0);
    s.gamma = get<double>(j, "gamma", 1.0);
    s.k_lambda = get<int>(j, "k_lambda", 1);
    s.criterion = get<double>(j, "criterion", std::numeric_limits<double>::infinity());
    s.n_eff_adm = get<double>(j, "n_eff_adm", 0.0);
    s.fallback = get<bool>(j, "fallback", false);
    s.degenerate = get<bool>(j, "degenerate", false);
    return s;
}

}  // namespace

std::string package_version() { return SVEM_VERSION; }

std::string config_hash(const Json& config) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_json_file(const std::string& path, const Json& doc) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << doc.dump(2) << '\n';
}

Json to_json(const ExpansionOptions& o) {
    return Json{{"main_effects", o.main_effects},
                {"blocking", o.blocking},
                {"factorial_order", o.factorial_order},
                {"polynomial_order", o.polynomial_order},
                {"include_pc_2way", o.include_pc_2way},
                {"coding", to_string(o.coding)}};
}

ExpansionOptions expansion_options_from_json(const Json& j) {
    ExpansionOptions o;
    o.main_effects = require<std::vector<std::string>>(j, "main_effects");
    o.blocking = get<std::vector<std::string>>(j, "blocking", {});
    o.factorial_order = get<int>(j, "factorial_order", o.factorial_order);
    o.polynomial_order = get<int>(j, "polynomial_order", o.polynomial_order);
    o.include_pc_2way = get<bool>(j, "include_pc_2way", o.include_pc_2way);
    o.coding = coding_from_string(get<std::string>(j, "coding", "treatment"));
    return o;
}

Json to_json(const ExpansionSpec& spec) {
    Json j;
    j["format"] = "svem.expansion";
    j["version"] = kDocumentVersion;
    j["options"] = to_json(spec.options);
    j["factors"] = Json::array();
    for (const auto& f : spec.factors) j["factors"].push_back(to_json(f));
    j["terms"] = spec.column_names();
    return j;
}

ExpansionSpec expansion_spec_from_json(const Json& j) {
    check_document(j, "svem.expansion");
    ExpansionSpec spec;
    spec.options = expansion_options_from_json(j.at("options"));
    if (!j.contains("factors") || !j.at("factors").is_array()) throw ConfigError("expansion document has no factors");
    for (const auto& f : j.at("factors")) spec.factors.push_back(factor_from_json(f));
    try {
        spec.terms = derive_terms(spec.factors, spec.options);
    } catch (const DataError& e) {
        throw ConfigError(std::string("expansion document is inconsistent: ") + e.what());
    }
    const auto stored = get<std::vector<std::string>>(j, "terms", {});
    if (!stored.empty() && stored != spec.column_names()) {
        throw ConfigError("stored expansion terms differ from the terms derived from its factors and options");
    }
    return spec;
}

Json to_json(const SvemModel& m) {
    Json j;
    j["format"] = "svem.model";
    j["version"] = kDocumentVersion;
    j["package_version"] = package_version();
    j["response"] = m.response;
    j["family"] = to_string(m.family);
    j["objective"] = to_string(m.objective);
    j["relax"] = m.relax;
    j["alpha_grid"] = m.alpha_grid;
    j["gamma_grid"] = m.gamma_grid;
    j["B"] = m.B;
    j["seed"] = m.seed;
    j["n_train"] = m.n_train;
    j["spec"] = to_json(m.spec);
    Json coef = Json::array();
    for (Eigen::Index b = 0; b < m.coefficients.rows(); ++b) {
        std::vector<double> row(static_cast<std::size_t>(m.coefficients.cols()));
        for (Eigen::Index c = 0; c < m.coefficients.cols(); ++c) row[static_cast<std::size_t>(c)] = m.coefficients(b, c);
        coef.push_back(std::move(row));
    }
    j["coefficients"] = std::move(coef);
    j["selections"] = Json::array();
    for (const auto& s : m.selections) j["selections"].push_back(to_json(s));
    j["debias"] = m.debias ? Json{{"intercept", m.debias->intercept}, {"slope", m.debias->slope}} : Json();
    return j;
}

SvemModel svem_model_from_json(const Json& j) {
    check_document(j, "svem.model");
    SvemModel m;
    m.spec = expansion_spec_from_json(j.at("spec"));
    m.response = require<std::string>(j, "response");
    m.family = family_from_string(require<std::string>(j, "family"));
    m.objective = objective_from_string(require<std::string>(j, "objective"));
    m.relax = get<bool>(j, "relax", false);
    m.alpha_grid = get<std::vector<double>>(j, "alpha_grid", {});
    m.gamma_grid = get<std::vector<double>>(j, "gamma_grid", {});
    m.B = require<int>(j, "B");
    m.seed = get<std::uint64_t>(j, "seed", 0);
    m.n_train = get<std::size_t>(j, "n_train", 0);
    const auto rows = require<std::vector<std::vector<double>>>(j, "coefficients");
    const std::size_t p = term_count(m.spec);
    if (rows.size() != static_cast<std::size_t>(m.B)) throw ConfigError("model has B = " + std::to_string(m.B) +
                                                                        " but " + std::to_string(rows.size()) +
                                                                        " coefficient rows");
    m.coefficients.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    for (std::size_t b = 0; b < rows.size(); ++b) {
        if (rows[b].size() != p) throw ConfigError("coefficient row " + std::to_string(b) + " has the wrong length");
        for (std::size_t c = 0; c < p; ++c) {
            m.coefficients(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) = rows[b][c];
        }
    }
    if (j.contains("selections") && j.at("selections").is_array()) {
        for (const auto& s : j.at("selections")) m.selections.push_back(selection_from_json(s));
    }
    if (j.contains("debias") && !j.at("debias").is_null()) {
        if (m.family != Family::gaussian) throw ConfigError("debias calibration on a non-gaussian model");
        m.debias = Calibration{require<double>(j.at("debias"), "intercept"), require<double>(j.at("debias"), "slope")};
    }
    return m;
}

Json to_json(const WmtResult& r) {
    Json j;
    j["format"] = "svem.wmt";
    j["version"] = kDocumentVersion;
    j["n_perm"] = r.n_perm;
    j["n_eval_points"] = r.n_eval_points;
    j["seed"] = r.seed;
    j["responses"] = Json::array();
    for (const auto& x : r.responses) {
        j["responses"].push_back(Json{{"response", x.response},
                                      {"p_value", x.p_value},
                                      {"multiplier", x.multiplier},
                                      {"original_distance", x.original_distance},
                                      {"permuted_distances", x.permuted_distances},
                                      {"degenerate", x.degenerate}});
    }
    return j;
}

WmtResult wmt_result_from_json(const Json& j) {
    check_document(j, "svem.wmt");
    WmtResult r;
    r.n_perm = get<int>(j, "n_perm", 0);
    r.n_eval_points = get<int>(j, "n_eval_points", 0);
    r.seed = get<std::uint64_t>(j, "seed", 0);
    if (!j.contains("responses") || !j.at("responses").is_array()) throw ConfigError("WMT document has no responses");
    for (const auto& x : j.at("responses")) {
        WmtResponse w;
        w.response = require<std::string>(x, "response");
        w.p_value = require<double>(x, "p_value");
        w.multiplier = require<double>(x, "multiplier");
        w.original_distance = get<double>(x, "original_distance", 0.0);
        w.permuted_distances = get<std::vector<double>>(x, "permuted_distances", {});
        w.degenerate = get<bool>(x, "degenerate", false);
        if (!(w.p_value > 0.0 && w.p_value <= 1.0)) throw ConfigError("WMT p-value out of (0, 1]");
        if (!(w.multiplier >= 0.0)) throw ConfigError("WMT multiplier must be non-negative");
        r.responses.push_back(std::move(w));
    }
    return r;
}

SvemOptions svem_options_from_json(const Json& j, SvemOptions o) {
    if (j.is_null()) return o;
    if (j.contains("family")) o.family = family_from_string(get<std::string>(j, "family", "gaussian"));
    o.B = get<int>(j, "B", o.B);
    if (o.B < 1) throw ConfigError("B must be >= 1");
    o.alpha_grid = get<std::vector<double>>(j, "alpha_grid", o.alpha_grid);
    o.gamma_grid = get<std::vector<double>>(j, "gamma_grid", o.gamma_grid);
    if (j.contains("relax") && !j.at("relax").is_null()) o.relax = get<bool>(j, "relax", false);
    if (j.contains("objective") && !j.at("objective").is_null()) {
        o.objective = objective_from_string(get<std::string>(j, "objective", ""));
    }
    o.debias = get<bool>(j, "debias", o.debias);
    o.seed = get<std::uint64_t>(j, "seed", o.seed);
    o.path.nlambda = get<int>(j, "nlambda", o.path.nlambda);
    if (auto r = optional_number(j, "lambda_min_ratio")) o.path.lambda_min_ratio = *r;
    return o;
}

Json to_json(const SvemOptions& o) {
    Json j{{"family", to_string(o.family)},
           {"B", o.B},
           {"alpha_grid", o.alpha_grid},
           {"gamma_grid", o.gamma_grid},
           {"relax", o.resolved_relax()},
           {"objective", to_string(o.resolved_objective())},
           {"debias", o.debias},
           {"seed", o.seed},
           {"nlambda", o.path.nlambda}};
    j["lambda_min_ratio"] = o.path.lambda_min_ratio ? Json(*o.path.lambda_min_ratio) : Json();
    return j;
}

std::vector<ResponseGoal> goals_from_json(const Json& j) {
    std::vector<ResponseGoal> out;
    auto one = [&](const std::string& response, const Json& g) {
        ResponseGoal r;
        r.response = response;
        r.goal = goal_from_string(require<std::string>(g, "goal"));
        r.weight = get<double>(g, "weight", 1.0);
        r.target = optional_number(g, "target");
        if (!(r.weight > 0.0)) throw ConfigError("goal weight for '" + response + "' must be positive");
        if (r.goal == Goal::target && !r.target) throw ConfigError("target goal for '" + response + "' needs a target");
        out.push_back(std::move(r));
    };
    if (j.is_object()) {
        for (const auto& [name, g] : j.items()) one(name, g);
    } else if (j.is_array()) {
        for (const auto& g : j) one(require<std::string>(g, "response"), g);
    } else {
        throw ConfigError("goals must be an object or an array");
    }
    if (out.empty()) throw ConfigError("no goals given");
    return out;
}

std::vector<SpecLimit> specs_from_json(const Json& j) {
    std::vector<SpecLimit> out;
    if (j.is_null()) return out;
    auto one = [&](const std::string& response, const Json& s) {
        SpecLimit l{response, optional_number(s, "lower"), optional_number(s, "upper")};
        if (!l.lower && !l.upper) throw ConfigError("spec limit for '" + response + "' needs lower or upper");
        if (l.lower && l.upper && *l.lower > *l.upper) throw ConfigError("spec limit for '" + response + "' has lower > upper");
        out.push_back(std::move(l));
    };
    if (j.is_object()) {
        for (const auto& [name, s] : j.items()) one(name, s);
    } else if (j.is_array()) {
        for (const auto& s : j) one(require<std::string>(s, "response"), s);
    } else {
        throw ConfigError("specs must be an object or an array");
    }
    return out;
}

std::vector<MixtureGroup> mixture_groups_from_json(const Json& j) {
    std::vector<MixtureGroup> out;
    if (j.is_null()) return out;
    if (!j.is_array()) throw ConfigError("mixture_groups must be an array");
    for (const auto& g : j) {
        MixtureGroup m;
        m.vars = require<std::vector<std::string>>(g, "vars");
        m.lower = get<std::vector<double>>(g, "lower", std::vector<double>(m.vars.size(), 0.0));
        m.upper = get<std::vector<double>>(g, "upper", std::vector<double>(m.vars.size(), 1.0));
        m.total = get<double>(g, "total", 1.0);
        m.validate();
        out.push_back(std::move(m));
    }
    return out;
}

CandidateQuery query_from_json(const Json& j) {
    CandidateQuery q;
    q.target = get<std::string>(j, "target", q.target);
    q.direction = direction_from_string(get<std::string>(j, "direction", "max"));
    const int k = get<int>(j, "k", static_cast<int>(q.k));
    if (k < 1) throw ConfigError("k must be >= 1");
    q.k = static_cast<std::size_t>(k);
    q.top_type = top_type_from_string(get<std::string>(j, "top_type", "frac"));
    q.top = get<double>(j, "top", q.top);
    q.label = get<std::string>(j, "label", q.target);
    return q;
}

std::vector<SimCell> sim_cells_from_json(const Json& j) {
    SimCell base;
    base.family = family_from_string(get<std::string>(j, "family", "gaussian"));
    base.n_reps = get<int>(j, "n_reps", base.n_reps);
    base.B = get<int>(j, "B", base.B);
    base.alpha_grid = get<std::vector<double>>(j, "alpha_grid", base.alpha_grid);
    base.nlambda = get<int>(j, "nlambda", base.nlambda);
    if (auto r = optional_number(j, "lambda_min_ratio")) base.lambda_min_ratio = *r;
    base.cv_k = get<int>(j, "cv_k", base.cv_k);
    base.cv_repeats = get<int>(j, "cv_repeats", base.cv_repeats);
    base.holdout_size = get<std::size_t>(j, "holdout_size", base.holdout_size);
    base.noise_scale = get<double>(j, "noise_scale", base.noise_scale);
    const auto seed = get<std::uint64_t>(j, "seed", 1);
    if (base.n_reps < 1 || base.B < 1) throw ConfigError("n_reps and B must be >= 1");

    const auto defaults = default_settings(base.family);
    if (j.contains("settings") && !j.at("settings").is_null()) {
        for (const auto& s : j.at("settings")) {
            if (s.is_string()) {
                const auto name = s.get<std::string>();
                const auto it = std::find_if(defaults.begin(), defaults.end(),
                                             [&](const SimSetting& d) { return d.name == name; });
                if (it == defaults.end()) throw ConfigError("unknown simulation setting '" + name + "'");
                base.settings.push_back(*it);
            } else {
                SimSetting t;
                const auto method = require<std::string>(s, "method");
                if (method != "svem" && method != "cv") throw ConfigError("unknown method '" + method + "'");
                t.method = method == "svem" ? Method::svem : Method::cv;
                t.objective = objective_from_string(get<std::string>(s, "objective", "wAIC"));
                t.relax = get<bool>(s, "relax", false);
                t.debias = get<bool>(s, "debias", false);
                t.name = get<std::string>(s, "name", method + (t.method == Method::svem ? "_" + to_string(t.objective) : "") +
                                                         (t.relax ? "_relax" : "_norelax") + (t.debias ? "_debias" : ""));
                base.settings.push_back(std::move(t));
            }
        }
    } else {
        base.settings = defaults;
    }
    if (base.settings.empty()) throw ConfigError("no simulation settings");

    const auto ns = get<std::vector<std::size_t>>(j, "n_total", {15, 20, 25, 30, 35, 40, 45, 50});
    const auto r2s = get<std::vector<double>>(j, "target_r2", {0.5, 0.9});
    const auto orders = get<std::vector<int>>(j, "order", {2});
    std::vector<SimCell> cells;
    for (int order : orders) {
        for (double r2 : r2s) {
            for (std::size_t n : ns) {
                SimCell c = base;
                c.n_total = n;
                c.target_r2 = r2;
                c.fit_order = order;
                // seed depends on the cell, not on its position in the grid
                c.seed = mix64(seed ^ mix64((static_cast<std::uint64_t>(n) << 32) ^
                                            (static_cast<std::uint64_t>(order) << 24) ^
                                            static_cast<std::uint64_t>(std::llround(r2 * 1e6))));
                cells.push_back(std::move(c));
            }
        }
    }
    return cells;
}

}  // namespace svem
