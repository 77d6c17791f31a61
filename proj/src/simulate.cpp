#include "svem/simulate.hpp"

#include "svem/error.hpp"
#include "svem/parallel.hpp"
#include "svem/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <tuple>

namespace svem {

namespace {

const std::vector<std::string> kLevels{"L1", "L2", "L3"};
const std::vector<std::string> kMains{"X1", "X2", "X3", "X4", "X5"};

std::vector<double> lhs_column(std::size_t n, Rng& rng) {
    const auto perm = rng.permutation(n);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = -1.0 + 2.0 * (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
    }
    return x;
}

ExpansionOptions order_options(int order) {
    ExpansionOptions o;
    o.main_effects = kMains;
    o.factorial_order = order;
    o.polynomial_order = order;
    return o;
}

}  // namespace

Dataset make_lhs_design(std::size_t n_total, Rng& rng) {
    if (n_total < 3) throw ConfigError("designs need n_total >= 3");
    Dataset d;
    for (int j = 1; j <= 4; ++j) d.add_numeric("X" + std::to_string(j), lhs_column(n_total, rng));
    std::vector<std::string> x5;
    for (std::size_t l = 0; l < 3; ++l) {
        const std::size_t count = n_total / 3 + (l < n_total % 3 ? 1 : 0);
        x5.insert(x5.end(), count, kLevels[l]);
    }
    rng.shuffle(x5);
    d.add_categorical("X5", std::move(x5), kLevels);
    return d;
}

Dataset make_holdout(std::size_t n_points, Rng& rng) {
    if (n_points < 3) throw ConfigError("holdout needs at least 3 points");
    Dataset d;
    for (int j = 1; j <= 4; ++j) d.add_numeric("X" + std::to_string(j), lhs_column(n_points, rng));
    std::vector<std::string> x5(n_points);
    for (std::size_t i = 0; i < n_points; ++i) x5[i] = kLevels[i % 3];
    d.add_categorical("X5", std::move(x5), kLevels);
    return d;
}

ExpansionSpec truth_spec() {
    Dataset ref;
    for (int j = 1; j <= 4; ++j) ref.add_numeric("X" + std::to_string(j), {-1.0, 1.0, 0.0});
    ref.add_categorical("X5", kLevels, kLevels);
    ExpansionOptions o = order_options(2);
    o.coding = ContrastCoding::sum;
    return build_expansion_spec(ref, o);
}

ExpansionSpec fit_spec(const Dataset& design, int order) {
    if (order < 1 || order > 3) throw ConfigError("fit order must be 1, 2 or 3");
    ExpansionSpec spec = build_expansion_spec(design, order_options(order));
    static constexpr std::size_t expected[] = {0, 7, 25, 45};
    if (term_count(spec) != expected[order]) {
        throw NumericError("order-" + std::to_string(order) + " expansion has " + std::to_string(term_count(spec)) +
                           " columns, expected " + std::to_string(expected[order]));
    }
    return spec;
}

SurfaceSpec gen_surface(Rng& rng, const Eigen::MatrixXd& holdout_truth, int forced_zero_draws) {
    SurfaceSpec s;
    const Eigen::Index p = holdout_truth.cols();
    for (int attempt = 0;; ++attempt) {
        s.beta.resize(p);
        for (Eigen::Index j = 0; j < p; ++j) {
            const double pi = rng.arcsine();
            const bool z = rng.bernoulli(pi) && attempt >= forced_zero_draws;
            const double e = rng.laplace(1.0);
            s.beta[j] = z ? e : 0.0;
        }
        const Eigen::VectorXd eta = holdout_truth * s.beta;
        s.eta_mean = eta.mean();
        const double var = (eta.array() - s.eta_mean).square().sum() / static_cast<double>(eta.size() - 1);
        s.sigma_f = std::sqrt(var);
        if (s.sigma_f > 1e-12) return s;
        ++s.redraws;
        if (attempt > 10000) throw NumericError("could not draw a non-flat surface");
    }
}

std::vector<SimSetting> default_settings(Family family) {
    std::vector<SimSetting> out;
    for (Objective o : {Objective::wAIC, Objective::wBIC, Objective::wSSE}) {
        for (bool relax : {true, false}) {
            out.push_back({"svem_" + to_string(o) + (relax ? "_relax" : "_norelax"), Method::svem, o, relax, false});
        }
    }
    out.push_back({"cv_relax", Method::cv, Objective::wAIC, true, false});
    out.push_back({"cv_norelax", Method::cv, Objective::wAIC, false, false});
    (void)family;
    return out;
}

double log_nrmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth, double sigma_f) {
    const double rmse = std::sqrt((predicted - truth).squaredNorm() / static_cast<double>(truth.size()));
    return std::log(std::max(rmse / sigma_f, 1e-8));
}

double holdout_log_loss(const Eigen::VectorXd& p_true, const Eigen::VectorXd& p_hat) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p_true.size(); ++i) {
        const double q = std::clamp(p_hat[i], 1e-12, 1.0 - 1e-12);
        acc -= p_true[i] * std::log(q) + (1.0 - p_true[i]) * std::log1p(-q);
    }
    return acc / static_cast<double>(p_true.size());
}

namespace {

struct RepOutcome {
    std::vector<double> metric;
    std::vector<double> k;
};

RepOutcome run_replicate(const SimCell& cell, int rep, const ExpansionSpec& truth) {
    Rng rng(cell.seed, static_cast<std::uint64_t>(rep));
    const Dataset holdout = make_holdout(cell.holdout_size, rng);
    const Eigen::MatrixXd H_truth = expand_rows(truth, holdout).values;
    const SurfaceSpec surface = gen_surface(rng, H_truth);
    const Dataset design = make_lhs_design(cell.n_total, rng);
    const Eigen::VectorXd eta_design = expand_rows(truth, design).values * surface.beta;
    const Eigen::VectorXd eta_hold = H_truth * surface.beta;

    std::vector<double> y(cell.n_total);
    Eigen::VectorXd target;  // holdout truth on the metric scale
    if (cell.family == Family::gaussian) {
        const double r2 = cell.target_r2;
        const double noise = cell.noise_scale * surface.sigma_f * std::sqrt((1.0 - r2) / r2);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = eta_design[static_cast<Eigen::Index>(i)] + noise * rng.normal();
        target = eta_hold;
    } else {
        const double s = std::sqrt(cell.target_r2 / (1.0 - cell.target_r2));
        auto prob = [&](double eta) { return inverse_logit(s * (eta - surface.eta_mean) / surface.sigma_f); };
        bool two_classes = false;
        for (int attempt = 0; attempt < 2 && !two_classes; ++attempt) {
            double sum = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                y[i] = rng.bernoulli(prob(eta_design[static_cast<Eigen::Index>(i)])) ? 1.0 : 0.0;
                sum += y[i];
            }
            two_classes = sum > 0.0 && sum < static_cast<double>(y.size());
        }
        if (!two_classes) throw DataError("training labels were single-class after one redraw");
        target = eta_hold.unaryExpr(prob);
    }

    const ExpansionSpec spec = fit_spec(design, cell.fit_order);
    const Eigen::MatrixXd X = expand_rows(spec, design).values;
    const Eigen::MatrixXd H = expand_rows(spec, holdout).values;
    const std::uint64_t svem_seed = rng.next_u64();
    const std::uint64_t cv_seed = rng.next_u64();

    auto metric_of = [&](const Eigen::VectorXd& pred) {
        return cell.family == Family::gaussian ? log_nrmse(pred, target, surface.sigma_f) : holdout_log_loss(target, pred);
    };

    RepOutcome out;
    out.metric.assign(cell.settings.size(), 0.0);
    out.k.assign(cell.settings.size(), 0.0);

    std::vector<SelectionRequest> requests;
    bool cv_relax = false, any_cv = false;
    for (const auto& s : cell.settings) {
        if (s.debias && cell.family != Family::gaussian) throw ConfigError("debias applies to gaussian cells only");
        if (s.method == Method::cv) {
            any_cv = true;
            cv_relax = cv_relax || s.relax;
            continue;
        }
        const SelectionRequest r{s.objective, s.relax};
        if (std::none_of(requests.begin(), requests.end(),
                         [&](const auto& q) { return q.objective == r.objective && q.relax == r.relax; })) {
            requests.push_back(r);
        }
    }

    std::vector<EnsembleFit> fits;
    if (!requests.empty()) {
        SvemOptions o;
        o.family = cell.family;
        o.B = cell.B;
        o.alpha_grid = cell.alpha_grid;
        o.seed = svem_seed;
        o.path.nlambda = cell.nlambda;
        o.path.lambda_min_ratio = cell.lambda_min_ratio;
        fits = fit_ensemble(X, y, o, requests);
    }
    std::optional<CvResult> cv;
    if (any_cv) {
        CvOptions o;
        o.alpha_grid = cell.alpha_grid;
        o.relax = cv_relax;
        o.k = cell.cv_k;
        o.repeats = cell.cv_repeats;
        o.seed = cv_seed;
        o.path.nlambda = cell.nlambda;
        o.path.lambda_min_ratio = cell.lambda_min_ratio;
        cv = repeated_kfold_cv(X, y, cell.family, o);
    }

    const std::span<const double> yspan(y);
    for (std::size_t si = 0; si < cell.settings.size(); ++si) {
        const SimSetting& s = cell.settings[si];
        Eigen::VectorXd pred;
        Eigen::VectorXd fitted;
        if (s.method == Method::svem) {
            const auto it = std::find_if(fits.begin(), fits.end(), [&](const EnsembleFit& f) {
                return f.request.objective == s.objective && f.request.relax == s.relax;
            });
            std::vector<double> ks;
            for (const auto& sel : it->selections) ks.push_back(sel.k_lambda);
            out.k[si] = stats::median(ks);
            if (cell.family == Family::gaussian) {
                const Eigen::VectorXd mean_coef = it->coefficients.colwise().mean().transpose();
                pred = H * mean_coef;
                fitted = X * mean_coef;
            } else {
                const Eigen::MatrixXd eta = H * it->coefficients.transpose();
                pred = eta.unaryExpr([](double e) { return inverse_logit(e); }).rowwise().mean();
            }
        } else {
            const PathPoint& pt = s.relax ? cv->selected : cv->selected_unrelaxed;
            out.k[si] = pt.k_lambda;
            pred = predict_path_point(pt, H, cell.family, PredictScale::response);
            if (cell.family == Family::gaussian) fitted = X * pt.coefficients;
        }
        if (s.debias) {
            const Calibration c =
                fit_calibration(yspan, std::span<const double>(fitted.data(), static_cast<std::size_t>(fitted.size())));
            pred = (pred.array() * c.slope + c.intercept).matrix();
        }
        out.metric[si] = metric_of(pred);
    }
    return out;
}

}  // namespace

std::vector<RepRecord> run_cell(const SimCell& cell, int threads) {
    if (cell.settings.empty()) throw ConfigError("simulation cell has no settings");
    if (!(cell.target_r2 > 0.0 && cell.target_r2 < 1.0)) throw ConfigError("target R^2 must lie in (0, 1)");
    if (cell.n_reps < 1) throw ConfigError("n_reps must be >= 1");
    const ExpansionSpec truth = truth_spec();
    const auto reps = static_cast<std::size_t>(cell.n_reps);
    std::vector<RepOutcome> outcomes(reps);
    std::vector<std::string> failures(reps);
    parallel_for(reps, threads, [&](std::size_t r) {
        try {
            outcomes[r] = run_replicate(cell, static_cast<int>(r), truth);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            failures[r] = e.what();
        }
    });

    std::vector<RepRecord> records;
    char r2buf[32];
    std::snprintf(r2buf, sizeof r2buf, "%g", cell.target_r2);
    for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t si = 0; si < cell.settings.size(); ++si) {
            RepRecord rec;
            rec.family = cell.family;
            rec.n_total = cell.n_total;
            rec.target_r2 = cell.target_r2;
            rec.order = cell.fit_order;
            rec.setting = cell.settings[si].name;
            rec.rep = static_cast<int>(r);
            rec.seed = cell.seed;
            rec.run_id = to_string(cell.family) + "-n" + std::to_string(cell.n_total) + "-r2_" + r2buf + "-o" +
                         std::to_string(cell.fit_order) + "-rep" + std::to_string(r);
            if (failures[r].empty()) {
                rec.metric = outcomes[r].metric[si];
                rec.k_median = outcomes[r].k[si];
            } else {
                rec.ok = false;
                rec.metric = std::numeric_limits<double>::quiet_NaN();
                rec.k_median = std::numeric_limits<double>::quiet_NaN();
                rec.note = failures[r];
            }
            records.push_back(std::move(rec));
        }
    }
    return records;
}

std::vector<RepRecord> run_gaussian_cell(const SimCell& cell, int threads) {
    if (cell.family != Family::gaussian) throw ConfigError("cell family is not gaussian");
    return run_cell(cell, threads);
}

std::vector<RepRecord> run_binomial_cell(const SimCell& cell, int threads) {
    if (cell.family != Family::binomial) throw ConfigError("cell family is not binomial");
    return run_cell(cell, threads);
}

std::vector<SummaryRow> summarize(const std::vector<RepRecord>& records) {
    using Key = std::tuple<int, std::size_t, double, int, std::string>;
    std::map<Key, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& r : records) {
        if (!r.ok) continue;
        auto& g = groups[{static_cast<int>(r.family), r.n_total, r.target_r2, r.order, r.setting}];
        g.first.push_back(r.metric);
        g.second.push_back(r.k_median);
    }
    auto se = [](const std::vector<double>& v) {
        return v.size() > 1 ? stats::sd(v) / std::sqrt(static_cast<double>(v.size())) : 0.0;
    };
    std::vector<SummaryRow> out;
    for (const auto& [key, vals] : groups) {
        SummaryRow row;
        row.family = static_cast<Family>(std::get<0>(key));
        row.n_total = std::get<1>(key);
        row.target_r2 = std::get<2>(key);
        row.order = std::get<3>(key);
        row.setting = std::get<4>(key);
        row.count = vals.first.size();
        row.mean_metric = stats::mean(vals.first);
        row.se_metric = se(vals.first);
        row.mean_k_median = stats::mean(vals.second);
        row.se_k_median = se(vals.second);
        out.push_back(std::move(row));
    }
    return out;
}

Dataset records_table(const std::vector<RepRecord>& records) {
    std::vector<std::string> run_id, family, setting, status, note;
    std::vector<double> n_total, r2, order, rep, metric, k, seed;
    for (const auto& r : records) {
        run_id.push_back(r.run_id);
        family.push_back(to_string(r.family));
        n_total.push_back(static_cast<double>(r.n_total));
        r2.push_back(r.target_r2);
        order.push_back(r.order);
        setting.push_back(r.setting);
        rep.push_back(r.rep);
        metric.push_back(r.metric);
        k.push_back(r.k_median);
        seed.push_back(static_cast<double>(r.seed));
        status.push_back(r.ok ? "ok" : "skipped");
        note.push_back(r.note);
    }
    Dataset t;
    t.add_categorical("run_id", std::move(run_id));
    t.add_categorical("family", std::move(family));
    t.add_numeric("n_total", std::move(n_total));
    t.add_numeric("target_R2", std::move(r2));
    t.add_numeric("order", std::move(order));
    t.add_categorical("setting", std::move(setting));
    t.add_numeric("rep", std::move(rep));
    t.add_numeric("metric", std::move(metric));
    t.add_numeric("k_median", std::move(k));
    t.add_numeric("seed", std::move(seed));
    t.add_categorical("status", std::move(status));
    t.add_categorical("note", std::move(note));
    return t;
}

Dataset summary_table(const std::vector<SummaryRow>& rows) {
    std::vector<std::string> family, setting;
    std::vector<double> n_total, r2, order, count, mean, se, kmean, kse;
    for (const auto& r : rows) {
        family.push_back(to_string(r.family));
        n_total.push_back(static_cast<double>(r.n_total));
        r2.push_back(r.target_r2);
        order.push_back(r.order);
        setting.push_back(r.setting);
        count.push_back(static_cast<double>(r.count));
        mean.push_back(r.mean_metric);
        se.push_back(r.se_metric);
        kmean.push_back(r.mean_k_median);
        kse.push_back(r.se_k_median);
    }
    Dataset t;
    t.add_categorical("family", std::move(family));
    t.add_numeric("n_total", std::move(n_total));
    t.add_numeric("target_R2", std::move(r2));
    t.add_numeric("order", std::move(order));
    t.add_categorical("setting", std::move(setting));
    t.add_numeric("count", std::move(count));
    t.add_numeric("mean_metric", std::move(mean));
    t.add_numeric("se_metric", std::move(se));
    t.add_numeric("mean_k_median", std::move(kmean));
    t.add_numeric("se_k_median", std::move(kse));
    return t;
}

}  // namespace svem
