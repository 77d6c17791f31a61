#include "svem/svem.hpp"

#include "svem/error.hpp"
#include "svem/parallel.hpp"
#include "svem/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace svem {

std::string to_string(Objective objective) {
    switch (objective) {
        case Objective::wAIC: return "wAIC";
        case Objective::wBIC: return "wBIC";
        case Objective::wSSE: return "wSSE";
    }
    return "wAIC";
}

Objective objective_from_string(const std::string& name) {
    if (name == "wAIC") return Objective::wAIC;
    if (name == "wBIC") return Objective::wBIC;
    if (name == "wSSE") return Objective::wSSE;
    throw ConfigError("unknown objective '" + name + "' (expected wAIC, wBIC or wSSE)");
}

namespace {

constexpr double kUniformClamp = 1e-12;
constexpr double kSseFloor = 1e-12;
constexpr double kProbFloor = 1e-12;

void rescale_mean_one(std::vector<double>& w) {
    double sum = 0.0;
    for (double v : w) sum += v;
    const double factor = static_cast<double>(w.size()) / sum;
    for (double& v : w) v *= factor;
}

}  // namespace

FrwPair frw_from_uniforms(std::span<const double> u) {
    FrwPair pair;
    pair.u.assign(u.begin(), u.end());
    pair.w_train.reserve(u.size());
    pair.w_valid.reserve(u.size());
    for (double& ui : pair.u) {
        ui = std::clamp(ui, kUniformClamp, 1.0 - kUniformClamp);
        pair.w_train.push_back(-std::log(ui));
        pair.w_valid.push_back(-std::log1p(-ui));
    }
    rescale_mean_one(pair.w_train);
    rescale_mean_one(pair.w_valid);
    return pair;
}

FrwPair draw_frw(std::size_t n, Rng& rng) {
    if (n < 2) throw DataError("FRW weights need n >= 2");
    std::vector<double> u(n);
    for (double& v : u) v = rng.uniform();
    return frw_from_uniforms(u);
}

EffectiveSize kish_neff(std::span<const double> w) {
    double sum = 0.0, sq = 0.0;
    for (double v : w) {
        sum += v;
        sq += v * v;
    }
    EffectiveSize out;
    out.n_eff = sq > 0.0 ? sum * sum / sq : 0.0;
    out.n_eff_adm = std::min(static_cast<double>(w.size()), std::max(2.0, out.n_eff));
    return out;
}

double complexity_multiplier(Objective objective, const EffectiveSize& size) {
    switch (objective) {
        case Objective::wSSE: return 0.0;
        case Objective::wAIC: return 2.0;
        case Objective::wBIC: return std::log(size.n_eff_adm);
    }
    return 0.0;
}

bool admissible(Objective objective, int k_lambda, const EffectiveSize& size) {
    if (objective == Objective::wSSE) return true;
    return static_cast<double>(k_lambda - 1) < size.n_eff_adm;
}

double criterion_gaussian(std::span<const double> residuals, std::span<const double> w_valid, int k_lambda,
                          const CriterionConfig& config) {
    if (residuals.size() != w_valid.size()) throw DataError("residuals and weights disagree in length");
    double sse = 0.0;
    for (std::size_t i = 0; i < residuals.size(); ++i) sse += w_valid[i] * residuals[i] * residuals[i];
    if (config.objective == Objective::wSSE) return sse;
    const EffectiveSize size = kish_neff(w_valid);
    if (!admissible(config.objective, k_lambda, size)) return std::numeric_limits<double>::infinity();
    const auto n = static_cast<double>(residuals.size());
    return n * std::log(std::max(sse, kSseFloor) / n) + complexity_multiplier(config.objective, size) * k_lambda;
}

double criterion_binomial(std::span<const double> y, std::span<const double> p_hat, std::span<const double> w_valid,
                          int k_lambda, const CriterionConfig& config) {
    if (y.size() != p_hat.size() || y.size() != w_valid.size()) throw DataError("length mismatch in criterion");
    double nll = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double p = std::clamp(p_hat[i], kProbFloor, 1.0 - kProbFloor);
        nll -= w_valid[i] * (y[i] * std::log(p) + (1.0 - y[i]) * std::log1p(-p));
    }
    const EffectiveSize size = kish_neff(w_valid);
    if (!admissible(config.objective, k_lambda, size)) return std::numeric_limits<double>::infinity();
    return 2.0 * nll + complexity_multiplier(config.objective, size) * k_lambda;
}

namespace {

struct Candidate {
    const PathPoint* point;
    double loss;  // SSE_w (gaussian) or 2 NLL (binomial)
};

struct Best {
    double value = std::numeric_limits<double>::infinity();
    const PathPoint* point = nullptr;
    double fallback_value = std::numeric_limits<double>::infinity();
    const PathPoint* fallback_point = nullptr;
};

double validation_loss(const PathPoint& point, ConstMatrixRef X, std::span<const double> y,
                       std::span<const double> w_valid, Family family) {
    const Eigen::VectorXd eta = X * point.coefficients;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (family == Family::gaussian) {
            const double r = y[ui] - eta[i];
            loss += w_valid[ui] * r * r;
        } else {
            const double p = std::clamp(inverse_logit(eta[i]), kProbFloor, 1.0 - kProbFloor);
            loss -= 2.0 * w_valid[ui] * (y[ui] * std::log(p) + (1.0 - y[ui]) * std::log1p(-p));
        }
    }
    return loss;
}

double score_from_loss(double loss, int k, Objective objective, Family family, const EffectiveSize& size, double n) {
    if (objective == Objective::wSSE) return loss;
    if (!admissible(objective, k, size)) return std::numeric_limits<double>::infinity();
    const double g = complexity_multiplier(objective, size);
    if (family == Family::gaussian) return n * std::log(std::max(loss, kSseFloor) / n) + g * k;
    return loss + g * k;
}

}  // namespace

std::vector<EnsembleFit> fit_ensemble(ConstMatrixRef X, std::span<const double> y, const SvemOptions& options,
                                      std::span<const SelectionRequest> requests) {
    if (options.B < 1) throw ConfigError("B must be >= 1");
    if (options.alpha_grid.empty()) throw ConfigError("alpha grid is empty");
    if (requests.empty()) throw ConfigError("no selection requested");
    const auto n = static_cast<std::size_t>(X.rows());
    if (y.size() != n) throw DataError("response length does not match the design");
    const bool any_relax = std::any_of(requests.begin(), requests.end(), [](const auto& r) { return r.relax; });
    const Eigen::Index p = X.cols();

    std::vector<EnsembleFit> fits(requests.size());
    for (std::size_t r = 0; r < requests.size(); ++r) {
        fits[r].request = requests[r];
        fits[r].coefficients.resize(options.B, p);
        fits[r].selections.resize(static_cast<std::size_t>(options.B));
    }

    parallel_for(static_cast<std::size_t>(options.B), options.threads, [&](std::size_t b) {
        Rng rng(options.seed, b);
        const FrwPair frw = draw_frw(n, rng);
        const EffectiveSize size = kish_neff(frw.w_valid);

        std::vector<PathFit> penalized, relaxed;
        for (double alpha : options.alpha_grid) {
            penalized.push_back(fit_path(X, y, frw.w_train, options.family, alpha, options.path));
            if (any_relax) {
                relaxed.push_back(relaxed_refit(penalized.back(), X, y, frw.w_train, options.gamma_grid));
            }
        }
        auto evaluate = [&](const std::vector<PathFit>& paths) {
            std::vector<Candidate> out;
            for (const auto& fit : paths) {
                for (const auto& pt : fit.path) {
                    out.push_back({&pt, validation_loss(pt, X, y, frw.w_valid, options.family)});
                }
            }
            return out;
        };
        const std::vector<Candidate> plain = evaluate(penalized);
        const std::vector<Candidate> relaxed_candidates = any_relax ? evaluate(relaxed) : std::vector<Candidate>{};

        for (std::size_t r = 0; r < requests.size(); ++r) {
            const auto& req = requests[r];
            const auto& candidates = req.relax ? relaxed_candidates : plain;
            Best best;
            for (const auto& c : candidates) {
                const int k = c.point->k_lambda;
                const double value =
                    score_from_loss(c.loss, k, req.objective, options.family, size, static_cast<double>(n));
                if (value < best.value) {
                    best.value = value;
                    best.point = c.point;
                }
                if (c.loss < best.fallback_value) {
                    best.fallback_value = c.loss;
                    best.fallback_point = c.point;
                }
            }
            ReplicateSelection sel;
            const PathPoint* chosen = best.point;
            sel.criterion = best.value;
            if (!chosen) {
                chosen = best.fallback_point;
                sel.criterion = best.fallback_value;
                sel.fallback = true;
            }
            if (!chosen) throw NumericError("replicate produced no finite candidate");
            if (!sel.fallback && !admissible(req.objective, chosen->k_lambda, size)) {
                throw NumericError("selected point violates the effective-size guardrail");
            }
            sel.n_eff_adm = size.n_eff_adm;
            sel.alpha = chosen->alpha;
            sel.lambda = chosen->lambda;
            sel.gamma = chosen->gamma;
            sel.k_lambda = chosen->k_lambda;
            sel.degenerate = chosen->degenerate;
            fits[r].coefficients.row(static_cast<Eigen::Index>(b)) = chosen->coefficients.transpose();
            fits[r].selections[b] = sel;
        }
    });
    return fits;
}

std::vector<double> response_vector(const Dataset& data, const std::string& response, Family family) {
    const Column& col = data.column(response);
    std::vector<double> y;
    if (col.kind == ColumnKind::numeric) {
        y = col.numbers;
        for (double v : y) {
            if (!std::isfinite(v)) throw DataError("response '" + response + "' has missing or non-finite values");
            if (family == Family::binomial && v != 0.0 && v != 1.0) {
                throw DataError("binomial response '" + response + "' must be coded 0/1");
            }
        }
        return y;
    }
    if (family == Family::gaussian) throw DataError("gaussian response '" + response + "' must be numeric");
    if (col.levels.size() != 2) {
        throw DataError("binomial response '" + response + "' must have exactly two levels");
    }
    for (const auto& label : col.labels) y.push_back(label == col.levels[1] ? 1.0 : 0.0);
    return y;
}

Calibration fit_calibration(std::span<const double> y, std::span<const double> y_hat) {
    const double my = stats::mean(y);
    const double mx = stats::mean(y_hat);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sxx += (y_hat[i] - mx) * (y_hat[i] - mx);
        sxy += (y_hat[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 1e-12 * std::max(1.0, mx * mx) * static_cast<double>(y.size()))) return {my, 0.0};
    const double slope = sxy / sxx;
    return {my - slope * mx, slope};
}

SvemModel fit_svem(const ExpansionSpec& spec, const Dataset& data, const std::string& response,
                   const SvemOptions& options) {
    if (options.debias && options.family != Family::gaussian) {
        throw ConfigError("debias is only available for gaussian responses");
    }
    const std::vector<double> y = response_vector(data, response, options.family);
    const DesignMatrix X = expand_rows(spec, data);
    const SelectionRequest request{options.resolved_objective(), options.resolved_relax()};
    auto fits = fit_ensemble(X.values, y, options, std::span(&request, 1));

    SvemModel model;
    model.spec = spec;
    model.response = response;
    model.family = options.family;
    model.objective = request.objective;
    model.relax = request.relax;
    model.alpha_grid = options.alpha_grid;
    model.gamma_grid = request.relax ? options.gamma_grid : std::vector<double>{1.0};
    model.B = options.B;
    model.seed = options.seed;
    model.n_train = data.n_rows();
    model.coefficients = std::move(fits.front().coefficients);
    model.selections = std::move(fits.front().selections);
    if (options.debias) {
        const Eigen::VectorXd fitted = (X.values * model.coefficients.transpose()).rowwise().mean();
        model.debias = fit_calibration(y, std::span<const double>(fitted.data(), static_cast<std::size_t>(fitted.size())));
    }
    return model;
}

Eigen::MatrixXd member_predictions(const SvemModel& model, ConstMatrixRef X) {
    if (X.cols() != model.coefficients.cols()) {
        throw DataError("design has " + std::to_string(X.cols()) + " columns, model expects " +
                        std::to_string(model.coefficients.cols()));
    }
    Eigen::MatrixXd members = X * model.coefficients.transpose();
    if (model.family == Family::binomial) {
        members = members.unaryExpr([](double e) { return inverse_logit(e); });
    } else if (model.debias) {
        members = (members.array() * model.debias->slope + model.debias->intercept).matrix();
    }
    return members;
}

SvemPrediction predict_svem(const SvemModel& model, ConstMatrixRef X, std::optional<double> interval_level) {
    SvemPrediction out;
    out.members = member_predictions(model, X);
    out.mean = out.members.rowwise().mean();
    if (interval_level) {
        const double level = *interval_level;
        if (!(level > 0.0 && level < 1.0)) throw ConfigError("interval level must lie in (0, 1)");
        const double lo_prob = (1.0 - level) / 2.0;
        const double hi_prob = 1.0 - lo_prob;
        Eigen::VectorXd lower(out.members.rows()), upper(out.members.rows());
        std::vector<double> row(static_cast<std::size_t>(out.members.cols()));
        for (Eigen::Index i = 0; i < out.members.rows(); ++i) {
            for (Eigen::Index b = 0; b < out.members.cols(); ++b) row[static_cast<std::size_t>(b)] = out.members(i, b);
            std::sort(row.begin(), row.end());
            lower[i] = stats::quantile_sorted(row, lo_prob);
            upper[i] = stats::quantile_sorted(row, hi_prob);
        }
        out.lower = std::move(lower);
        out.upper = std::move(upper);
    }
    return out;
}

SvemPrediction predict_svem(const SvemModel& model, const Dataset& new_data, std::optional<double> interval_level) {
    const DesignMatrix X = expand_rows(model.spec, new_data);
    return predict_svem(model, X.values, interval_level);
}

}  // namespace svem
