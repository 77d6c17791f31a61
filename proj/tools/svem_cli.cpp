#include "svem/error.hpp"
#include "svem/lnp.hpp"
#include "svem/medoids.hpp"
#include "svem/optimize.hpp"
#include "svem/serialize.hpp"
#include "svem/simulate.hpp"
#include "svem/svem.hpp"
#include "svem/wmt.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace svem;

namespace {

struct Common {
    int threads = 1;
};

// seed, version and config hash for the first comment row of every output
std::string provenance(const std::string& command, std::uint64_t seed, const Json& config) {
    return "svem " + package_version() + " command=" + command + " seed=" + std::to_string(seed) +
           " config_hash=" + config_hash(config);
}

Json provenance_json(const std::string& command, std::uint64_t seed, const Json& config) {
    return Json{{"command", command},
                {"package_version", package_version()},
                {"seed", seed},
                {"config_hash", config_hash(config)}};
}

Json optional_config(const std::string& path) { return path.empty() ? Json::object() : read_json_file(path); }

// NAME=path pairs; a bare path takes the model's own response name
std::vector<std::pair<std::string, SvemModel>> load_models(const std::vector<std::string>& args) {
    std::vector<std::pair<std::string, SvemModel>> out;
    for (const auto& a : args) {
        const auto eq = a.find('=');
        const std::string path = eq == std::string::npos ? a : a.substr(eq + 1);
        SvemModel m = svem_model_from_json(read_json_file(path));
        const std::string name = eq == std::string::npos ? m.response : a.substr(0, eq);
        if (std::any_of(out.begin(), out.end(), [&](const auto& p) { return p.first == name; })) {
            throw ConfigError("model for '" + name + "' given twice");
        }
        out.emplace_back(name, std::move(m));
    }
    if (out.empty()) throw ConfigError("no models given");
    return out;
}

std::set<std::string> categorical_factors(const ExpansionSpec& spec) {
    std::set<std::string> out;
    for (const auto& f : spec.factors) {
        if (f.kind == ColumnKind::categorical) out.insert(f.name);
    }
    return out;
}

// comment rows of a CSV written by this tool, without the leading "# "
std::map<std::string, std::string> csv_metadata(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::map<std::string, std::string> meta;
    std::string line;
    while (std::getline(in, line) && !line.empty() && line[0] == '#') {
        const auto colon = line.find(':');
        if (colon == std::string::npos || colon < 2) continue;
        auto value = line.substr(colon + 1);
        if (!value.empty() && value[0] == ' ') value.erase(0, 1);
        meta[line.substr(2, colon - 2)] = value;
    }
    return meta;
}

// seed recorded in the provenance row of a CSV written by this tool
std::uint64_t score_seed(const std::string& path) {
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# svem ", 0) != 0) return 0;
    const auto pos = line.find(" seed=");
    if (pos == std::string::npos) return 0;
    return std::strtoull(line.c_str() + pos + 6, nullptr, 10);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string join(const std::vector<std::string>& v, char sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : "") + v[i];
    return out;
}

// row-wise union of tables; a column is numeric only if numeric everywhere it appears
Dataset concat_tables(const std::vector<Dataset>& tables) {
    std::vector<std::string> names;
    std::map<std::string, ColumnKind> kinds;
    for (const auto& t : tables) {
        for (const auto& c : t.columns()) {
            auto [it, inserted] = kinds.emplace(c.name, c.kind);
            if (inserted) {
                names.push_back(c.name);
            } else if (it->second != c.kind) {
                it->second = ColumnKind::categorical;
            }
        }
    }
    Dataset out;
    for (const auto& name : names) {
        if (kinds[name] == ColumnKind::numeric) {
            std::vector<double> v;
            for (const auto& t : tables) {
                for (std::size_t r = 0; r < t.n_rows(); ++r) {
                    v.push_back(t.has(name) ? t.column(name).numbers[r] : std::numeric_limits<double>::quiet_NaN());
                }
            }
            out.add_numeric(name, std::move(v));
        } else {
            std::vector<std::string> v;
            for (const auto& t : tables) {
                for (std::size_t r = 0; r < t.n_rows(); ++r) {
                    if (!t.has(name)) {
                        v.emplace_back();
                        continue;
                    }
                    const Column& c = t.column(name);
                    v.push_back(c.kind == ColumnKind::numeric ? format_double(c.numbers[r]) : c.labels[r]);
                }
            }
            out.add_categorical(name, std::move(v));
        }
    }
    return out;
}

// ---------------------------------------------------------------- gen-lnp

struct GenLnpArgs {
    LnpOptions options;
    std::string out;
};

void cmd_gen_lnp(const GenLnpArgs& a) {
    const Dataset d = gen_lnp(a.options);
    const Json config{{"n_runs", a.options.n_runs}, {"seed", a.options.seed}, {"noise_scale", a.options.noise_scale}};
    d.write_csv(a.out, {provenance("gen-lnp", a.options.seed, config)});
    std::cout << "wrote " << d.n_rows() << " runs to " << a.out << '\n';
}

// ---------------------------------------------------------------- expand

struct ExpandArgs {
    std::string data, config, out, design;
};

void cmd_expand(const ExpandArgs& a) {
    const Json config = read_json_file(a.config);
    const auto categorical = config.value("categorical", std::vector<std::string>{});
    const Dataset d = Dataset::read_csv(a.data, {categorical.begin(), categorical.end()});
    const ExpansionSpec spec = build_expansion_spec(d, expansion_options_from_json(config));
    Json doc = to_json(spec);
    doc["provenance"] = provenance_json("expand", 0, config);
    write_json_file(a.out, doc);
    std::cout << "expansion with " << term_count(spec) << " columns written to " << a.out << '\n';
    if (!a.design.empty()) {
        const DesignMatrix X = expand_rows(spec, d);
        Dataset t;
        for (std::size_t c = 0; c < X.column_names.size(); ++c) {
            const auto col = X.values.col(static_cast<Eigen::Index>(c));
            t.add_numeric(X.column_names[c], std::vector<double>(col.data(), col.data() + col.size()));
        }
        t.write_csv(a.design, {provenance("expand", 0, config)});
    }
}

// ---------------------------------------------------------------- fit

struct FitArgs {
    std::string data, spec, config, response, out;
    std::optional<std::uint64_t> seed;
};

void cmd_fit(const FitArgs& a, const Common& common) {
    const Json config = optional_config(a.config);
    const ExpansionSpec spec = expansion_spec_from_json(read_json_file(a.spec));
    SvemOptions o = svem_options_from_json(config);
    if (a.seed) o.seed = *a.seed;
    o.threads = common.threads;
    const Dataset d = Dataset::read_csv(a.data, categorical_factors(spec));
    const SvemModel m = fit_svem(spec, d, a.response, o);
    Json effective = to_json(o);
    effective["response"] = a.response;
    effective["spec_hash"] = config_hash(to_json(spec));
    Json doc = to_json(m);
    doc["provenance"] = provenance_json("fit", o.seed, effective);
    write_json_file(a.out, doc);

    double k = 0.0;
    int fallback = 0;
    for (const auto& s : m.selections) {
        k += s.k_lambda;
        fallback += s.fallback ? 1 : 0;
    }
    std::printf("%s: %s, objective %s%s, B = %d, mean k_lambda %.2f", a.response.c_str(), to_string(m.family).c_str(),
                to_string(m.objective).c_str(), m.relax ? " (relaxed)" : "", m.B,
                k / static_cast<double>(std::max<std::size_t>(1, m.selections.size())));
    if (fallback) std::printf(", %d fallback selections", fallback);
    std::printf("\n");
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
    std::string model, data, out;
    double level = 0.95;
};

void cmd_predict(const PredictArgs& a) {
    const SvemModel m = svem_model_from_json(read_json_file(a.model));
    const Dataset d = Dataset::read_csv(a.data, categorical_factors(m.spec));
    const SvemPrediction p = predict_svem(m, d, a.level);
    Dataset out = d;
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    out.set_numeric(m.response + "_pred", vec(p.mean));
    out.set_numeric(m.response + "_lower", vec(*p.lower));
    out.set_numeric(m.response + "_upper", vec(*p.upper));
    const Json config{{"model", a.model}, {"level", a.level}};
    out.write_csv(a.out, {provenance("predict", m.seed, config)});
}

// ---------------------------------------------------------------- wmt

struct WmtArgs {
    std::string data, config, out, distances;
    std::vector<std::string> models;
};

void cmd_wmt(const WmtArgs& a, const Common& common) {
    const Json config = optional_config(a.config);
    const auto models = load_models(a.models);
    WmtOptions w;
    w.n_perm = config.value("n_perm", w.n_perm);
    w.n_eval_points = config.value("n_eval_points", w.n_eval_points);
    w.seed = config.value("seed", std::uint64_t{0});
    w.threads = common.threads;
    const auto groups = mixture_groups_from_json(config.value("mixture_groups", Json()));

    std::set<std::string> categorical;
    for (const auto& [name, m] : models) {
        const auto c = categorical_factors(m.spec);
        categorical.insert(c.begin(), c.end());
    }
    const Dataset d = Dataset::read_csv(a.data, categorical);

    WmtResult result;
    result.n_perm = w.n_perm;
    result.n_eval_points = w.n_eval_points;
    result.seed = w.seed;
    std::vector<double> p;
    for (const auto& [name, m] : models) {
        SvemOptions o;
        o.family = m.family;
        o.B = config.value("B", m.B);
        o.alpha_grid = m.alpha_grid;
        o.gamma_grid = m.gamma_grid;
        o.relax = m.relax;
        o.objective = m.objective;
        o.seed = m.seed;
        result.responses.push_back(wmt_single(m.spec, d, name, groups, o, w));
        p.push_back(result.responses.back().p_value);
        std::printf("%s: p = %.4g\n", name.c_str(), p.back());
    }
    const auto mult = wmt_multipliers(p);
    for (std::size_t r = 0; r < mult.size(); ++r) result.responses[r].multiplier = mult[r];

    Json doc = to_json(result);
    doc["provenance"] = provenance_json("wmt", w.seed, config);
    write_json_file(a.out, doc);
    if (!a.distances.empty()) wmt_distance_table(result).write_csv(a.distances, {provenance("wmt", w.seed, config)});
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
    std::string config, wmt, candidates, out;
    std::vector<std::string> models;
    std::optional<std::uint64_t> seed;
};

void cmd_score(const ScoreArgs& a) {
    Json config = read_json_file(a.config);
    const auto loaded = load_models(a.models);
    ModelMap models;
    for (const auto& [name, m] : loaded) models.emplace(name, m);
    const auto goals = goals_from_json(config.at("goals"));
    const auto specs = specs_from_json(config.value("specs", Json()));
    const auto groups = mixture_groups_from_json(config.value("mixture_groups", Json()));
    const std::uint64_t seed = a.seed ? *a.seed : config.value("seed", std::uint64_t{0});
    config["seed"] = seed;

    ScoreOptions so;
    so.interval_level = config.value("interval_level", so.interval_level);
    const auto wn = config.value("width_normalization", std::string("width_quantiles"));
    if (wn == "width_quantiles") {
        so.width_normalization = WidthNormalization::width_quantiles;
    } else if (wn == "response_range") {
        so.width_normalization = WidthNormalization::response_range;
    } else {
        throw ConfigError("unknown width_normalization '" + wn + "'");
    }

    const ExpansionSpec& spec = loaded.front().second.spec;
    Dataset candidates;
    if (!a.candidates.empty()) {
        std::set<std::string> categorical;
        for (const auto& [name, m] : loaded) {
            const auto c = categorical_factors(m.spec);
            categorical.insert(c.begin(), c.end());
        }
        candidates = Dataset::read_csv(a.candidates, categorical);
    } else {
        const auto policy = config.value("blocking", std::string("most_common"));
        if (policy != "most_common" && policy != "sampled") throw ConfigError("unknown blocking policy '" + policy + "'");
        const auto n = config.value("n_candidates", std::size_t{25000});
        candidates = sample_candidates(spec, groups, n, seed,
                                       policy == "sampled" ? BlockingPolicy::sampled : BlockingPolicy::most_common);
    }

    std::optional<WmtResult> wmt;
    if (!a.wmt.empty()) wmt = wmt_result_from_json(read_json_file(a.wmt));
    const ScoreTable t = score_candidates(models, goals, candidates, wmt ? &*wmt : nullptr, specs, so);
    t.table.write_csv(a.out, {provenance("score", seed, config), "factors: " + join(t.factor_columns, ','),
                              "responses: " + join(t.responses, ',')});
    std::cout << "scored " << t.table.n_rows() << " candidates into " << a.out << '\n';
}

// ---------------------------------------------------------------- select

struct SelectArgs {
    std::string scores, config, out;
};

void cmd_select(const SelectArgs& a) {
    const Json config = read_json_file(a.config);
    const auto meta = csv_metadata(a.scores);
    ScoreTable t;
    const auto factors = meta.count("factors") ? split(meta.at("factors"), ',') : std::vector<std::string>{};
    if (factors.empty()) throw DataError("'" + a.scores + "' has no factors row; was it written by svem score?");
    t.factor_columns = factors;
    t.table = Dataset::read_csv(a.scores);
    std::vector<CandidateQuery> queries;
    if (config.contains("queries")) {
        for (const auto& q : config.at("queries")) queries.push_back(query_from_json(q));
    } else {
        queries.push_back(query_from_json(config));
    }
    std::vector<SelectionResult> sel;
    for (const auto& q : queries) {
        sel.push_back(select_from_score_table(t, q));
        const auto& r = sel.back();
        std::printf("%s: best row %zu (%s = %.4g), %zu medoids\n", r.label.c_str(), r.best_row, q.target.c_str(),
                    t.table.numeric(q.target)[r.best_row], r.medoid_rows.size());
    }
    const std::uint64_t seed = score_seed(a.scores);
    export_candidates(sel, a.out, {provenance("select", seed, config), "factors: " + join(factors, ',')});
}

// ---------------------------------------------------------------- export

struct ExportArgs {
    std::vector<std::string> selections;
    std::string out;
};

void cmd_export(const ExportArgs& a) {
    std::vector<Dataset> tables;
    Json inputs = Json::array();
    for (const auto& path : a.selections) {
        tables.push_back(Dataset::read_csv(path, {"label", "candidate_type"}));
        if (!tables.back().has("label") || !tables.back().has("candidate_type")) {
            throw DataError("'" + path + "' is not a selection table");
        }
        inputs.push_back(path);
    }
    const Dataset out = concat_tables(tables);
    const Json config{{"selections", inputs}};
    out.write_csv(a.out, {provenance("export", score_seed(a.selections.front()), config)});
    std::cout << "exported " << out.n_rows() << " candidates to " << a.out << '\n';
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config, records, summary;
};

void cmd_simulate(const SimulateArgs& a, const Common& common) {
    const Json config = read_json_file(a.config);
    const auto cells = sim_cells_from_json(config);
    std::vector<RepRecord> all;
    int skipped = 0;
    for (const auto& cell : cells) {
        auto rec = run_cell(cell, common.threads);
        for (const auto& r : rec) skipped += r.ok ? 0 : 1;
        std::fprintf(stderr, "cell %s n=%zu R2=%g order=%d done\n", to_string(cell.family).c_str(), cell.n_total,
                     cell.target_r2, cell.fit_order);
        all.insert(all.end(), rec.begin(), rec.end());
    }
    const std::uint64_t seed = config.value("seed", std::uint64_t{1});
    std::vector<std::string> header{provenance("simulate", seed, config)};
    if (!cells.empty() && cells.front().family == Family::binomial) {
        header.push_back("binomial linear predictor standardized to unit holdout sd before scaling");
    }
    records_table(all).write_csv(a.records, header);
    if (!a.summary.empty()) summary_table(summarize(all)).write_csv(a.summary, header);
    if (skipped) std::fprintf(stderr, "%d replicate records skipped after fit errors\n", skipped);
}

int exit_code(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::config: return 2;
        case ErrorKind::data: return 3;
        case ErrorKind::numeric: return 4;
    }
    return 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-validated ensemble models: fit, test, score and select"};
    app.set_version_flag("--version", package_version());
    app.require_subcommand(1);
    Common common;
    app.add_option("--threads", common.threads, "Worker threads for replicate-level parallelism")
        ->check(CLI::Range(1, 256));

    GenLnpArgs gen;
    auto* c_gen = app.add_subcommand("gen-lnp", "Write a synthetic LNP-style screening data set");
    c_gen->add_option("--n", gen.options.n_runs, "Number of runs");
    c_gen->add_option("--seed", gen.options.seed, "Random seed");
    c_gen->add_option("--noise-scale", gen.options.noise_scale, "Multiplier on the response noise");
    c_gen->add_option("--out", gen.out, "Output CSV")->required();

    ExpandArgs ex;
    auto* c_expand = app.add_subcommand("expand", "Freeze a model expansion from data");
    c_expand->add_option("--data", ex.data, "Input CSV")->required();
    c_expand->add_option("--config", ex.config, "Expansion JSON")->required();
    c_expand->add_option("--out", ex.out, "Expansion JSON output")->required();
    c_expand->add_option("--design", ex.design, "Optional CSV of the expanded model matrix");

    FitArgs fit;
    auto* c_fit = app.add_subcommand("fit", "Fit an SVEM model for one response");
    c_fit->add_option("--data", fit.data, "Training CSV")->required();
    c_fit->add_option("--spec", fit.spec, "Expansion JSON")->required();
    c_fit->add_option("--response", fit.response, "Response column")->required();
    c_fit->add_option("--config", fit.config, "Fit settings JSON");
    c_fit->add_option("--seed", fit.seed, "Overrides the config seed");
    c_fit->add_option("--out", fit.out, "Model JSON output")->required();

    PredictArgs pred;
    auto* c_pred = app.add_subcommand("predict", "Ensemble predictions with percentile intervals");
    c_pred->add_option("--model", pred.model, "Model JSON")->required();
    c_pred->add_option("--data", pred.data, "Settings CSV")->required();
    c_pred->add_option("--level", pred.level, "Interval level");
    c_pred->add_option("--out", pred.out, "Output CSV")->required();

    WmtArgs wmt;
    auto* c_wmt = app.add_subcommand("wmt", "Permutation whole-model test per response");
    c_wmt->add_option("--data", wmt.data, "Training CSV")->required();
    c_wmt->add_option("--model", wmt.models, "Model JSON, optionally NAME=path; repeatable")->required();
    c_wmt->add_option("--config", wmt.config, "WMT settings JSON (n_perm, n_eval_points, seed, B, mixture_groups)");
    c_wmt->add_option("--out", wmt.out, "WMT JSON output")->required();
    c_wmt->add_option("--distances", wmt.distances, "Optional CSV of original and permuted distances");

    ScoreArgs score;
    auto* c_score = app.add_subcommand("score", "Score random or given candidate settings");
    c_score->add_option("--model", score.models, "Model JSON, optionally NAME=path; repeatable")->required();
    c_score->add_option("--config", score.config, "Goals, specs and mixture groups JSON")->required();
    c_score->add_option("--wmt", score.wmt, "WMT JSON for the wmt_score column");
    c_score->add_option("--candidates", score.candidates, "Score these settings instead of sampling");
    c_score->add_option("--seed", score.seed, "Overrides the config seed");
    c_score->add_option("--out", score.out, "Score table CSV")->required();

    SelectArgs sel;
    auto* c_sel = app.add_subcommand("select", "Best row and medoids from a score table");
    c_sel->add_option("--scores", sel.scores, "Score table CSV from svem score")->required();
    c_sel->add_option("--config", sel.config, "Query JSON (one query or {\"queries\": [...]})")->required();
    c_sel->add_option("--out", sel.out, "Selections CSV")->required();

    ExportArgs exp;
    auto* c_exp = app.add_subcommand("export", "Merge selection tables into one candidates CSV");
    c_exp->add_option("--selections", exp.selections, "Selection CSVs")->required();
    c_exp->add_option("--out", exp.out, "Candidates CSV")->required();

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Run the benchmarking simulation grid");
    c_sim->add_option("--config", sim.config, "Simulation JSON")->required();
    c_sim->add_option("--records", sim.records, "Per-replicate CSV")->required();
    c_sim->add_option("--summary", sim.summary, "Summary CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*c_gen) cmd_gen_lnp(gen);
        if (*c_expand) cmd_expand(ex);
        if (*c_fit) cmd_fit(fit, common);
        if (*c_pred) cmd_predict(pred);
        if (*c_wmt) cmd_wmt(wmt, common);
        if (*c_score) cmd_score(score);
        if (*c_sel) cmd_select(sel);
        if (*c_exp) cmd_export(exp);
        if (*c_sim) cmd_simulate(sim, common);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e);
    } catch (const Json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
