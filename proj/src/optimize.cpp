#include "svem/optimize.hpp"

#include "svem/error.hpp"
#include "svem/medoids.hpp"
#include "svem/stats.hpp"
#include "svem/wmt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace svem {

void MixtureGroup::validate() const {
    if (vars.empty()) throw ConfigError("mixture group has no variables");
    if (lower.size() != vars.size() || upper.size() != vars.size()) {
        throw ConfigError("mixture group bounds must match its variables");
    }
    if (!(total > 0.0)) throw ConfigError("mixture total must be positive");
    std::set<std::string> seen;
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (!seen.insert(vars[i]).second) throw ConfigError("mixture variable '" + vars[i] + "' listed twice");
        if (!(lower[i] <= upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
            throw ConfigError("mixture bounds for '" + vars[i] + "' need lower <= upper");
        }
        lo += lower[i];
        hi += upper[i];
    }
    const double slack = 1e-12 * std::max(1.0, total);
    if (lo > total + slack || hi < total - slack) {
        throw ConfigError("mixture group is infeasible: bounds cannot sum to the total");
    }
}

std::string to_string(Goal goal) {
    switch (goal) {
        case Goal::max: return "max";
        case Goal::min: return "min";
        case Goal::target: return "target";
    }
    return "max";
}

Goal goal_from_string(const std::string& name) {
    if (name == "max") return Goal::max;
    if (name == "min") return Goal::min;
    if (name == "target") return Goal::target;
    throw ConfigError("unknown goal '" + name + "' (expected max, min or target)");
}

std::string to_string(Direction direction) { return direction == Direction::max ? "max" : "min"; }

Direction direction_from_string(const std::string& name) {
    if (name == "max") return Direction::max;
    if (name == "min") return Direction::min;
    throw ConfigError("unknown direction '" + name + "' (expected max or min)");
}

std::string to_string(TopType type) { return type == TopType::frac ? "frac" : "n"; }

TopType top_type_from_string(const std::string& name) {
    if (name == "frac") return TopType::frac;
    if (name == "n") return TopType::n;
    throw ConfigError("unknown top_type '" + name + "' (expected frac or n)");
}

std::vector<std::vector<double>> sample_mixture(const MixtureGroup& group, std::size_t n, Rng& rng) {
    group.validate();
    const std::size_t m = group.vars.size();
    const double remaining = group.total - std::accumulate(group.lower.begin(), group.lower.end(), 0.0);
    std::vector<std::vector<double>> rows;
    rows.reserve(n);
    if (remaining <= 0.0) {
        rows.assign(n, group.lower);
        return rows;
    }
    const std::size_t budget = 100 * std::max<std::size_t>(n, 10000);
    std::size_t attempts = 0;
    std::vector<double> e(m), x(m);
    while (rows.size() < n) {
        if (++attempts > budget) {
            throw NumericError("mixture sampling exhausted its rejection budget; bounds leave too little volume");
        }
        double sum = 0.0;
        for (auto& v : e) {
            v = rng.exponential();
            sum += v;
        }
        bool ok = true;
        for (std::size_t i = 0; i < m; ++i) {
            x[i] = group.lower[i] + remaining * e[i] / sum;
            if (x[i] > group.upper[i]) {
                ok = false;
                break;
            }
        }
        if (ok) rows.push_back(x);
    }
    return rows;
}

Dataset sample_candidates(const ExpansionSpec& spec, std::span<const MixtureGroup> groups, std::size_t n_candidates,
                          std::uint64_t seed, BlockingPolicy blocking) {
    if (n_candidates < 1) throw ConfigError("n_candidates must be >= 1");
    std::map<std::string, std::pair<std::size_t, std::size_t>> in_group;  // factor -> (group, position)
    for (std::size_t g = 0; g < groups.size(); ++g) {
        groups[g].validate();
        for (std::size_t i = 0; i < groups[g].vars.size(); ++i) {
            const std::string& v = groups[g].vars[i];
            const auto it = std::find_if(spec.factors.begin(), spec.factors.end(),
                                         [&](const FactorInfo& f) { return f.name == v; });
            if (it == spec.factors.end()) throw ConfigError("mixture variable '" + v + "' is not a model factor");
            if (it->kind != ColumnKind::numeric || it->blocking) {
                throw ConfigError("mixture variable '" + v + "' must be a numeric main effect");
            }
            if (!in_group.emplace(v, std::make_pair(g, i)).second) {
                throw ConfigError("mixture variable '" + v + "' appears in two groups");
            }
        }
    }

    Rng rng(seed);
    std::vector<std::vector<std::vector<double>>> mixture_rows;
    for (const auto& g : groups) mixture_rows.push_back(sample_mixture(g, n_candidates, rng));

    Dataset out;
    for (const auto& f : spec.factors) {
        const bool fixed = f.blocking && blocking == BlockingPolicy::most_common;
        if (f.kind == ColumnKind::numeric) {
            std::vector<double> values(n_candidates);
            if (auto it = in_group.find(f.name); it != in_group.end()) {
                for (std::size_t r = 0; r < n_candidates; ++r) {
                    values[r] = mixture_rows[it->second.first][r][it->second.second];
                }
            } else if (fixed) {
                std::fill(values.begin(), values.end(), 0.5 * (f.min + f.max));
            } else {
                for (auto& v : values) v = rng.uniform(f.min, f.max);
            }
            out.add_numeric(f.name, std::move(values));
        } else {
            std::vector<std::string> labels(n_candidates);
            if (fixed) {
                std::fill(labels.begin(), labels.end(), f.mode_level);
            } else {
                for (auto& l : labels) l = f.levels[rng.below(f.levels.size())];
            }
            out.add_categorical(f.name, std::move(labels), f.levels);
        }
    }
    return out;
}

double desirability(double value, const ResponseGoal& goal, double low, double high) {
    if (!(high > low)) return 1.0;
    double d = 0.0;
    switch (goal.goal) {
        case Goal::max: d = (value - low) / (high - low); break;
        case Goal::min: d = (high - value) / (high - low); break;
        case Goal::target: {
            if (!goal.target) throw ConfigError("target goal for '" + goal.response + "' needs a target value");
            const double t = std::clamp(*goal.target, low, high);
            if (value == t) {
                d = 1.0;
            } else if (value < t) {
                d = (value - low) / (t - low);
            } else {
                d = (high - value) / (high - t);
            }
            break;
        }
    }
    return std::clamp(d, 0.0, 1.0);
}

double geometric_score(std::span<const double> d, std::span<const double> weights, double epsilon) {
    if (d.size() != weights.size() || d.empty()) throw ConfigError("desirabilities and weights disagree");
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(wsum > 0.0)) throw ConfigError("goal weights must be positive");
    double acc = 0.0;
    for (std::size_t r = 0; r < d.size(); ++r) acc += weights[r] / wsum * std::log((1.0 - epsilon) * d[r] + epsilon);
    return std::clamp(std::exp(acc), 0.0, 1.0);
}

namespace {

bool members_pairable(const ModelMap& models, std::span<const SpecLimit> specs) {
    const SvemModel* first = nullptr;
    for (const auto& s : specs) {
        const SvemModel& m = models.at(s.response);
        if (!first) {
            first = &m;
        } else if (m.B != first->B || m.seed != first->seed || m.n_train != first->n_train) {
            return false;
        }
    }
    return true;
}

double norm01(double value, double lo, double hi) {
    if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))) return 0.0;
    return std::clamp((value - lo) / (hi - lo), 0.0, 1.0);
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

SpecProbabilities estimate_spec_probs(const ModelMap& models, const std::map<std::string, Eigen::MatrixXd>& members,
                                      std::span<const SpecLimit> specs) {
    SpecProbabilities out;
    if (specs.empty()) return out;
    Eigen::Index n = -1;
    std::vector<Eigen::ArrayXXd> inside;
    for (const auto& s : specs) {
        if (!models.count(s.response)) throw ConfigError("spec limit for '" + s.response + "' has no model");
        if (!s.lower && !s.upper) throw ConfigError("spec limit for '" + s.response + "' needs a lower or upper bound");
        const Eigen::MatrixXd& M = members.at(s.response);
        if (n < 0) n = M.rows();
        if (M.rows() != n) throw DataError("member matrices disagree in row count");
        const double lo = s.lower.value_or(-std::numeric_limits<double>::infinity());
        const double hi = s.upper.value_or(std::numeric_limits<double>::infinity());
        Eigen::ArrayXXd in = ((M.array() >= lo) && (M.array() <= hi)).cast<double>();
        out.prob_in_spec[s.response] = in.rowwise().mean().matrix();
        inside.push_back(std::move(in));
    }
    out.independence_fallback = !members_pairable(models, specs);
    if (!out.independence_fallback) {
        Eigen::ArrayXXd joint = inside.front();
        for (std::size_t r = 1; r < inside.size(); ++r) joint *= inside[r];
        out.p_joint_mean = joint.rowwise().mean().matrix();
    } else {
        out.p_joint_mean = Eigen::VectorXd::Ones(n);
        for (const auto& [name, prob] : out.prob_in_spec) out.p_joint_mean.array() *= prob.array();
    }
    return out;
}

SpecProbabilities estimate_spec_probs(const ModelMap& models, std::span<const SpecLimit> specs,
                                      const Dataset& candidates) {
    std::map<std::string, Eigen::MatrixXd> members;
    for (const auto& s : specs) {
        auto it = models.find(s.response);
        if (it == models.end()) throw ConfigError("spec limit for '" + s.response + "' has no model");
        members[s.response] = predict_svem(it->second, candidates).members;
    }
    return estimate_spec_probs(models, members, specs);
}

ScoreTable score_candidates(const ModelMap& models, std::span<const ResponseGoal> goals, const Dataset& candidates,
                            const WmtResult* wmt, std::span<const SpecLimit> specs, const ScoreOptions& options) {
    if (candidates.n_rows() == 0) throw DataError("candidate table is empty");
    if (goals.empty()) throw ConfigError("no goals given");
    std::set<std::string> goal_names;
    for (const auto& g : goals) {
        if (!models.count(g.response)) throw ConfigError("goal for '" + g.response + "' has no model");
        if (!(g.weight > 0.0)) throw ConfigError("goal weight for '" + g.response + "' must be positive");
        goal_names.insert(g.response);
    }
    for (const auto& [name, model] : models) {
        if (!goal_names.count(name)) throw ConfigError("model '" + name + "' has no goal");
    }

    const auto n = static_cast<Eigen::Index>(candidates.n_rows());
    const std::size_t R = goals.size();
    ScoreTable out;
    out.table = candidates;
    std::set<std::string> factors;
    for (const auto& [name, model] : models) {
        for (const auto& f : model.spec.factors) factors.insert(f.name);
    }
    for (const auto& name : candidates.names()) {
        if (factors.count(name)) out.factor_columns.push_back(name);
    }

    double wsum = 0.0;
    for (const auto& g : goals) wsum += g.weight;
    std::vector<double> wbar, wwmt;
    for (const auto& g : goals) wbar.push_back(g.weight / wsum);
    if (wmt) {
        double s = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
            const WmtResponse* res = wmt->find(goals[r].response);
            const double mult = res ? res->multiplier : 1.0;
            wwmt.push_back(wbar[r] * mult);
            s += wwmt.back();
        }
        if (!(s > 0.0)) throw NumericError("WMT-adjusted weights sum to zero");
        for (auto& w : wwmt) w /= s;
    }

    Eigen::MatrixXd d(n, R);
    Eigen::VectorXd uncertainty = Eigen::VectorXd::Zero(n);
    std::map<std::string, Eigen::MatrixXd> members;
    for (std::size_t r = 0; r < R; ++r) {
        const auto& g = goals[r];
        out.responses.push_back(g.response);
        SvemPrediction pred = predict_svem(models.at(g.response), candidates, options.interval_level);
        const std::vector<double> mean = to_vector(pred.mean);
        std::vector<double> sorted = mean;
        std::sort(sorted.begin(), sorted.end());
        const double lo = stats::quantile_sorted(sorted, options.anchor_low);
        const double hi = stats::quantile_sorted(sorted, options.anchor_high);
        const Eigen::VectorXd width = *pred.upper - *pred.lower;
        double wlo = 0.0, whi = 0.0;
        if (options.width_normalization == WidthNormalization::width_quantiles) {
            std::vector<double> ws = to_vector(width);
            std::sort(ws.begin(), ws.end());
            wlo = stats::quantile_sorted(ws, 0.02);
            whi = stats::quantile_sorted(ws, 0.98);
        } else {
            wlo = 0.0;
            whi = stats::quantile_sorted(sorted, 0.98) - stats::quantile_sorted(sorted, 0.02);
        }
        std::vector<double> dr(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            d(i, static_cast<Eigen::Index>(r)) = dr[static_cast<std::size_t>(i)] = desirability(mean[static_cast<std::size_t>(i)], g, lo, hi);
            uncertainty[i] += wbar[r] * norm01(width[i], wlo, whi);
        }
        out.table.set_numeric(g.response + "_pred", mean);
        out.table.set_numeric(g.response + "_lower", to_vector(*pred.lower));
        out.table.set_numeric(g.response + "_upper", to_vector(*pred.upper));
        out.table.set_numeric(g.response + "_width", to_vector(width));
        out.table.set_numeric(g.response + "_d", std::move(dr));
        members[g.response] = std::move(pred.members);
    }

    std::vector<double> score(static_cast<std::size_t>(n)), wmt_score;
    if (wmt) wmt_score.resize(static_cast<std::size_t>(n));
    std::vector<double> row(R);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < R; ++r) row[r] = d(i, static_cast<Eigen::Index>(r));
        score[static_cast<std::size_t>(i)] = geometric_score(row, wbar, options.epsilon);
        if (wmt) wmt_score[static_cast<std::size_t>(i)] = geometric_score(row, wwmt, options.epsilon);
    }
    out.table.set_numeric("score", std::move(score));
    if (wmt) out.table.set_numeric("wmt_score", std::move(wmt_score));
    out.table.set_numeric("uncertainty_measure", to_vector(uncertainty.cwiseMin(1.0).cwiseMax(0.0)));

    if (!specs.empty()) {
        const SpecProbabilities probs = estimate_spec_probs(models, members, specs);
        for (const auto& s : specs) out.table.set_numeric(s.response + "_prob_in_spec", to_vector(probs.prob_in_spec.at(s.response)));
        out.table.set_numeric("p_joint_mean", to_vector(probs.p_joint_mean));
        out.table.set_numeric("p_joint_independent",
                              std::vector<double>(static_cast<std::size_t>(n), probs.independence_fallback ? 1.0 : 0.0));
    }
    return out;
}

SelectionResult select_from_score_table(const ScoreTable& table, const CandidateQuery& query) {
    const Dataset& t = table.table;
    if (!t.has(query.target)) throw ConfigError("target column '" + query.target + "' is not in the score table");
    const Column& col = t.column(query.target);
    if (col.kind != ColumnKind::numeric) throw ConfigError("target column '" + query.target + "' is not numeric");
    if (query.k < 1) throw ConfigError("k must be >= 1");

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < t.n_rows(); ++i) {
        if (std::isfinite(col.numbers[i])) order.push_back(i);
    }
    if (order.empty()) throw DataError("target column '" + query.target + "' has no finite values");
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return query.direction == Direction::max ? col.numbers[a] > col.numbers[b] : col.numbers[a] < col.numbers[b];
    });

    std::size_t keep = 0;
    if (query.top_type == TopType::frac) {
        if (!(query.top > 0.0 && query.top <= 1.0)) throw ConfigError("top fraction must lie in (0, 1]");
        keep = static_cast<std::size_t>(std::ceil(query.top * static_cast<double>(order.size()) - 1e-9));
    } else {
        if (!(query.top >= 1.0)) throw ConfigError("top count must be >= 1");
        keep = static_cast<std::size_t>(query.top);
    }
    keep = std::clamp<std::size_t>(keep, 1, order.size());
    if (query.k > keep) {
        throw ConfigError("k = " + std::to_string(query.k) + " exceeds the retained subset of " + std::to_string(keep) +
                          " rows");
    }
    std::vector<std::size_t> subset(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));

    const Dataset sub = t.select_rows(subset);
    const PamResult pr = pam(gower_distance(sub, table.factor_columns), query.k);
    std::vector<std::size_t> medoid_pos = pr.medoids;
    std::sort(medoid_pos.begin(), medoid_pos.end());  // subset positions follow rank order

    SelectionResult res;
    res.label = query.label;
    res.target = query.target;
    res.direction = query.direction;
    res.best_row = order.front();
    res.factor_columns = table.factor_columns;
    std::vector<std::size_t> rows{res.best_row};
    for (auto pos : medoid_pos) {
        res.medoid_rows.push_back(subset[pos]);
        rows.push_back(subset[pos]);
    }
    res.rows = t.select_rows(rows);
    return res;
}

Dataset candidates_table(std::span<const SelectionResult> selections) {
    if (selections.empty()) throw ConfigError("no selections to export");
    std::vector<std::string> names;
    std::map<std::string, ColumnKind> kinds;
    for (const auto& s : selections) {
        if (s.medoid_rows.empty()) throw ConfigError("selection '" + s.label + "' has no medoids");
        for (const auto& c : s.rows.columns()) {
            auto [it, inserted] = kinds.emplace(c.name, c.kind);
            if (inserted) {
                names.push_back(c.name);
            } else if (it->second != c.kind) {
                it->second = ColumnKind::categorical;
            }
        }
    }
    std::vector<std::string> label, type;
    std::map<std::string, std::vector<double>> numbers;
    std::map<std::string, std::vector<std::string>> labels;
    for (const auto& s : selections) {
        const std::size_t rows = s.rows.n_rows();
        for (std::size_t r = 0; r < rows; ++r) {
            label.push_back(s.label);
            type.push_back(r == 0 ? "best" : "medoid");
        }
        for (const auto& name : names) {
            const bool present = s.rows.has(name);
            if (kinds[name] == ColumnKind::numeric) {
                auto& dst = numbers[name];
                for (std::size_t r = 0; r < rows; ++r) {
                    dst.push_back(present ? s.rows.column(name).numbers[r] : std::numeric_limits<double>::quiet_NaN());
                }
            } else {
                auto& dst = labels[name];
                for (std::size_t r = 0; r < rows; ++r) {
                    if (!present) {
                        dst.emplace_back();
                        continue;
                    }
                    const Column& c = s.rows.column(name);
                    dst.push_back(c.kind == ColumnKind::numeric ? format_double(c.numbers[r]) : c.labels[r]);
                }
            }
        }
    }
    Dataset out;
    out.add_categorical("label", std::move(label));
    out.add_categorical("candidate_type", std::move(type));
    for (const auto& name : names) {
        if (kinds[name] == ColumnKind::numeric) {
            out.add_numeric(name, std::move(numbers[name]));
        } else {
            out.add_categorical(name, std::move(labels[name]));
        }
    }
    return out;
}

void export_candidates(std::span<const SelectionResult> selections, const std::string& path,
                       const std::vector<std::string>& comments) {
    candidates_table(selections).write_csv(path, comments);
}

}  // namespace svem
