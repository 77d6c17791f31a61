#include "svem/enet.hpp"

#include "svem/error.hpp"
#include "svem/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace svem {

std::string to_string(Family family) { return family == Family::gaussian ? "gaussian" : "binomial"; }

Family family_from_string(const std::string& name) {
    if (name == "gaussian") return Family::gaussian;
    if (name == "binomial") return Family::binomial;
    throw ConfigError("unknown family '" + name + "'");
}

double default_lambda_min_ratio(std::size_t n, std::size_t p_full) { return n + 1 < p_full ? 1e-2 : 1e-4; }

int count_nonzero(const Eigen::VectorXd& coefficients) {
    int k = 1;  // intercept is always fitted
    for (Eigen::Index j = 1; j < coefficients.size(); ++j) {
        if (coefficients[j] != 0.0) ++k;
    }
    return k;
}

namespace {

constexpr double kProbClamp = 1e-5;

inline double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

void validate_inputs(ConstMatrixRef X, std::span<const double> y, std::span<const double> w, Family family) {
    const auto n = static_cast<std::size_t>(X.rows());
    if (n < 2) throw DataError("at least two observations are required");
    if (y.size() != n || w.size() != n) throw DataError("X, y and weights disagree in length");
    if (X.cols() < 1) throw DataError("design matrix has no columns");
    if (!X.allFinite()) throw DataError("design matrix has non-finite entries");
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(y[i])) throw DataError("response has non-finite values");
        if (!std::isfinite(w[i]) || w[i] < 0.0) throw DataError("weights must be finite and nonnegative");
        wsum += w[i];
        if (family == Family::binomial && y[i] != 0.0 && y[i] != 1.0) {
            throw DataError("binomial response must be coded 0/1");
        }
    }
    if (!(wsum > 0.0)) throw DataError("all weights are zero");
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (std::abs(X(i, 0) - 1.0) > 1e-12) throw DataError("design matrix column 0 must be the intercept");
    }
}

struct Prepared {
    Eigen::MatrixXd xs;                 // standardized non-degenerate predictors
    Eigen::MatrixXd vxs;                // v .* xs
    std::vector<Eigen::Index> columns;  // original column of each xs column
    Eigen::VectorXd v;                  // weights scaled to sum one
    Standardization stats;
};

Prepared prepare(ConstMatrixRef X, std::span<const double> w) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    Prepared P;
    P.v.resize(n);
    double wsum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) wsum += w[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i < n; ++i) P.v[i] = w[static_cast<std::size_t>(i)] / wsum;

    P.stats.mean = Eigen::VectorXd::Zero(p);
    P.stats.scale = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 1; j < p; ++j) {
        const double m = P.v.dot(X.col(j));
        const double var = (P.v.array() * (X.col(j).array() - m).square()).sum();
        P.stats.mean[j] = m;
        const double sd = std::sqrt(std::max(var, 0.0));
        if (sd > 1e-10 * std::max(1.0, std::abs(m))) {
            P.stats.scale[j] = sd;
            P.columns.push_back(j);
        }
    }
    const auto m = static_cast<Eigen::Index>(P.columns.size());
    P.xs.resize(n, m);
    for (Eigen::Index c = 0; c < m; ++c) {
        const Eigen::Index j = P.columns[static_cast<std::size_t>(c)];
        P.xs.col(c) = (X.col(j).array() - P.stats.mean[j]) / P.stats.scale[j];
    }
    P.vxs = P.xs.array().colwise() * P.v.array();
    return P;
}

// Back-transforms standardized coefficients to the original predictor scale.
Eigen::VectorXd to_original(const Prepared& P, Eigen::Index p, double intercept_std, const Eigen::VectorXd& beta) {
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
    double intercept = intercept_std;
    for (std::size_t c = 0; c < P.columns.size(); ++c) {
        const Eigen::Index j = P.columns[c];
        const double b = beta[static_cast<Eigen::Index>(c)];
        if (b == 0.0) continue;
        coef[j] = b / P.stats.scale[j];
        intercept -= coef[j] * P.stats.mean[j];
    }
    coef[0] = intercept;
    return coef;
}

struct CdSettings {
    double l1 = 0.0;
    double l2 = 0.0;
    double tolerance = 1e-7;
    int max_sweeps = 100000;
};

// Coordinate descent in covariance form: grad_j = x_j' V r is kept in sync
// through the weighted Gram matrix. The first n_free coordinates are
// unpenalized. Every few active-set sweeps we step toward the closed-form
// solution for the current signed active set, clipped where a coefficient
// first reaches zero.
bool gram_descent(const Eigen::MatrixXd& gram, const Eigen::VectorXd& c0, Eigen::VectorXd& beta, Eigen::VectorXd& grad,
                  const CdSettings& s, std::vector<char>& in_active, std::vector<Eigen::Index>& active,
                  Eigen::Index n_free = 0) {
    const Eigen::Index m = gram.cols();
    int sweeps = 0;
    auto update = [&](Eigen::Index j) {
        const double old = beta[j];
        const double g = grad[j] + gram(j, j) * old;
        const double updated = j < n_free ? g / gram(j, j) : soft_threshold(g, s.l1) / (gram(j, j) + s.l2);
        const double delta = updated - old;
        if (delta != 0.0) {
            grad.noalias() -= delta * gram.col(j);
            beta[j] = updated;
        }
        return std::abs(delta);
    };
    auto try_jump = [&]() {
        std::vector<Eigen::Index> nz;
        for (Eigen::Index j = 0; j < n_free; ++j) nz.push_back(j);
        for (auto j : active) {
            if (beta[j] != 0.0) nz.push_back(j);
        }
        if (static_cast<Eigen::Index>(nz.size()) == n_free) return;
        const auto a = static_cast<Eigen::Index>(nz.size());
        Eigen::MatrixXd gaa(a, a);
        Eigen::VectorXd rhs(a);
        for (Eigen::Index u = 0; u < a; ++u) {
            for (Eigen::Index t = 0; t < a; ++t) gaa(u, t) = gram(nz[u], nz[t]);
            if (nz[u] < n_free) {
                rhs[u] = c0[nz[u]];
                continue;
            }
            gaa(u, u) += s.l2;
            rhs[u] = c0[nz[u]] - s.l1 * (beta[nz[u]] > 0.0 ? 1.0 : -1.0);
        }
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(gaa);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return;
        const Eigen::VectorXd sol = ldlt.solve(rhs);
        if (!sol.allFinite()) return;
        // step toward sol, stopping where the first coordinate reaches zero
        double t = 1.0;
        Eigen::Index hit = -1;
        for (Eigen::Index u = n_free; u < a; ++u) {
            const double b = beta[nz[u]];
            if (sol[u] * b <= 0.0) {
                const double tu = b / (b - sol[u]);
                if (tu < t) {
                    t = tu;
                    hit = u;
                }
            }
        }
        if (!(t > 0.0)) return;
        for (Eigen::Index u = 0; u < a; ++u) {
            const double target = u == hit ? 0.0 : beta[nz[u]] + t * (sol[u] - beta[nz[u]]);
            const double delta = target - beta[nz[u]];
            grad.noalias() -= delta * gram.col(nz[u]);
            beta[nz[u]] = target;
        }
    };

    while (true) {
        double dmax = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            dmax = std::max(dmax, update(j));
            if (j >= n_free && beta[j] != 0.0 && !in_active[static_cast<std::size_t>(j)]) {
                in_active[static_cast<std::size_t>(j)] = 1;
                active.push_back(j);
            }
        }
        if (++sweeps >= s.max_sweeps) return false;
        if (dmax < s.tolerance) return true;
        int inner = 0;
        while (true) {
            double amax = 0.0;
            for (Eigen::Index j = 0; j < n_free; ++j) amax = std::max(amax, update(j));
            for (auto j : active) amax = std::max(amax, update(j));
            if (++sweeps >= s.max_sweeps) return false;
            if (amax < s.tolerance) break;
            if (++inner % 8 == 0) try_jump();
        }
    }
}

std::vector<double> lambda_grid(double lambda_max, std::size_t n, std::size_t p_full, const PathOptions& options) {
    if (!options.lambda.empty()) {
        for (std::size_t i = 1; i < options.lambda.size(); ++i) {
            if (!(options.lambda[i] < options.lambda[i - 1])) {
                throw ConfigError("lambda sequence must be strictly decreasing");
            }
        }
        if (options.lambda.back() < 0.0) throw ConfigError("lambda must be nonnegative");
        return options.lambda;
    }
    if (options.nlambda < 1) throw ConfigError("nlambda must be >= 1");
    const double ratio = options.lambda_min_ratio.value_or(default_lambda_min_ratio(n, p_full));
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("lambda_min_ratio must lie in (0, 1)");
    std::vector<double> grid(static_cast<std::size_t>(options.nlambda));
    const double step = options.nlambda > 1 ? std::log(ratio) / (options.nlambda - 1) : 0.0;
    for (int k = 0; k < options.nlambda; ++k) grid[static_cast<std::size_t>(k)] = lambda_max * std::exp(step * k);
    return grid;
}

// Early-stop rule for generated grids; dev_ratio is 1 - deviance / null deviance.
bool stop_path(const PathOptions& options, std::size_t points, double dev_ratio, double previous) {
    if (!options.early_stop || !options.lambda.empty()) return false;
    if (static_cast<int>(points) < options.min_points) return false;
    return dev_ratio > options.max_dev_ratio || dev_ratio - previous < options.min_dev_change * dev_ratio;
}

void truncate_grid(PathFit& fit) { fit.lambda_sequence.resize(fit.path.size()); }

double mean_deviance(const Eigen::VectorXd& v, std::span<const double> y, const Eigen::VectorXd& eta) {
    double dev = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double p = std::clamp(inverse_logit(eta[i]), 1e-15, 1.0 - 1e-15);
        const double yi = y[static_cast<std::size_t>(i)];
        dev -= 2.0 * v[i] * (yi * std::log(p) + (1.0 - yi) * std::log1p(-p));
    }
    return dev;
}

PathFit fit_gaussian(ConstMatrixRef X, std::span<const double> y, const Prepared& P, double alpha,
                     const PathOptions& options) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const Eigen::Index m = P.xs.cols();
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
    const double ybar = P.v.dot(yv);
    Eigen::VectorXd r = yv.array() - ybar;
    const double yvar = (P.v.array() * r.array().square()).sum();
    const bool constant = yvar <= 1e-24 * std::max(1.0, ybar * ybar);

    double lambda_max = 0.0;
    if (m > 0 && !constant) lambda_max = (P.vxs.transpose() * r).cwiseAbs().maxCoeff() / std::max(alpha, 1e-3);
    if (!(lambda_max > 0.0)) lambda_max = constant ? 1.0 : std::sqrt(yvar);

    PathFit fit;
    fit.family = Family::gaussian;
    fit.alpha = alpha;
    fit.lambda_sequence = lambda_grid(lambda_max, static_cast<std::size_t>(n), static_cast<std::size_t>(p), options);
    fit.standardization = P.stats;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
    const Eigen::MatrixXd gram = P.vxs.transpose() * P.xs;
    const Eigen::VectorXd c0 = P.vxs.transpose() * r;
    Eigen::VectorXd grad = c0;
    double dev_ratio = 0.0;
    std::vector<char> in_active(static_cast<std::size_t>(m), 0);
    std::vector<Eigen::Index> active;
    for (double lambda : fit.lambda_sequence) {
        if (!constant && m > 0) {
            CdSettings s{alpha * lambda, (1.0 - alpha) * lambda, options.tolerance, options.max_sweeps};
            if (!gram_descent(gram, c0, beta, grad, s, in_active, active)) ++fit.max_sweeps_hit;
        }
        PathPoint point;
        point.alpha = alpha;
        point.lambda = lambda;
        point.coefficients = to_original(P, p, ybar, beta);
        point.k_lambda = count_nonzero(point.coefficients);
        fit.path.push_back(std::move(point));
        if (constant || m == 0) continue;
        const double rss = yvar - c0.dot(beta) - beta.dot(grad);
        const double ratio = 1.0 - rss / yvar;
        if (stop_path(options, fit.path.size(), ratio, dev_ratio)) break;
        dev_ratio = ratio;
    }
    truncate_grid(fit);
    return fit;
}

PathFit fit_binomial(ConstMatrixRef X, std::span<const double> y, const Prepared& P, double alpha,
                     const PathOptions& options) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const Eigen::Index m = P.xs.cols();
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
    const double ybar = P.v.dot(yv);
    if (ybar <= 0.0 || ybar >= 1.0) throw DataError("binomial response has a single class");

    double lambda_max = 0.0;
    if (m > 0) {
        const Eigen::VectorXd centered = yv.array() - ybar;
        lambda_max = (P.vxs.transpose() * centered).cwiseAbs().maxCoeff() / std::max(alpha, 1e-3);
    }
    if (!(lambda_max > 0.0)) lambda_max = 1.0;

    PathFit fit;
    fit.family = Family::binomial;
    fit.alpha = alpha;
    fit.lambda_sequence = lambda_grid(lambda_max, static_cast<std::size_t>(n), static_cast<std::size_t>(p), options);
    fit.standardization = P.stats;

    // coordinate 0 is the unpenalized intercept
    Eigen::MatrixXd Z(n, m + 1);
    Z.col(0).setOnes();
    Z.rightCols(m) = P.xs;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m + 1);
    b[0] = std::log(ybar / (1.0 - ybar));
    const double null_dev = mean_deviance(P.v, y, Eigen::VectorXd::Constant(n, b[0]));
    double dev_ratio = 0.0;
    std::vector<char> in_active(static_cast<std::size_t>(m + 1), 0);
    std::vector<Eigen::Index> active;
    Eigen::VectorXd eta(n), q(n), z(n), c(m + 1), grad(m + 1);
    Eigen::MatrixXd qz(n, m + 1), gram(m + 1, m + 1);

    for (double lambda : fit.lambda_sequence) {
        eta = Z * b;
        double dev_old = mean_deviance(P.v, y, eta);
        bool capped = false;
        for (int iter = 0; iter < options.max_irls; ++iter) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double prob = std::clamp(inverse_logit(eta[i]), kProbClamp, 1.0 - kProbClamp);
                const double var = prob * (1.0 - prob);
                q[i] = P.v[i] * var;
                z[i] = eta[i] + (yv[i] - prob) / var;
            }
            qz = Z.array().colwise() * q.array();
            gram.noalias() = qz.transpose() * Z;
            c.noalias() = qz.transpose() * z;
            grad = c - gram * b;
            CdSettings s{alpha * lambda, (1.0 - alpha) * lambda, options.tolerance, options.max_sweeps};
            if (!gram_descent(gram, c, b, grad, s, in_active, active, 1)) capped = true;
            eta = Z * b;
            const double dev = mean_deviance(P.v, y, eta);
            const bool converged = std::abs(dev - dev_old) < options.irls_tolerance;
            dev_old = dev;
            if (converged) break;
        }
        const double intercept = b[0];
        const Eigen::VectorXd beta = b.tail(m);
        if (capped) ++fit.max_sweeps_hit;
        PathPoint point;
        point.alpha = alpha;
        point.lambda = lambda;
        point.coefficients = to_original(P, p, intercept, beta);
        point.k_lambda = count_nonzero(point.coefficients);
        fit.path.push_back(std::move(point));
        const double ratio = 1.0 - dev_old / null_dev;
        if (stop_path(options, fit.path.size(), ratio, dev_ratio)) break;
        dev_ratio = ratio;
    }
    truncate_grid(fit);
    return fit;
}

Eigen::MatrixXd active_design(ConstMatrixRef X, std::span<const Eigen::Index> active) {
    Eigen::MatrixXd XA(X.rows(), static_cast<Eigen::Index>(active.size()) + 1);
    XA.col(0) = X.col(0);
    for (std::size_t c = 0; c < active.size(); ++c) XA.col(static_cast<Eigen::Index>(c) + 1) = X.col(active[c]);
    return XA;
}

}  // namespace

PathFit fit_path(ConstMatrixRef X, std::span<const double> y, std::span<const double> weights, Family family,
                 double alpha, const PathOptions& options) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
    validate_inputs(X, y, weights, family);
    const Prepared P = prepare(X, weights);
    return family == Family::gaussian ? fit_gaussian(X, y, P, alpha, options)
                                      : fit_binomial(X, y, P, alpha, options);
}

std::optional<Eigen::VectorXd> unpenalized_refit(ConstMatrixRef X, std::span<const double> y,
                                                 std::span<const double> weights, Family family,
                                                 std::span<const Eigen::Index> active, const RelaxOptions& options) {
    const Eigen::Index n = X.rows();
    const auto cols = static_cast<Eigen::Index>(active.size()) + 1;
    if (cols > n) return std::nullopt;
    const Eigen::MatrixXd XA = active_design(X, active);
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
    Eigen::Map<const Eigen::VectorXd> wv(weights.data(), n);
    const Eigen::VectorXd sw = wv.cwiseSqrt();

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    qr.setThreshold(options.rank_tolerance);
    qr.compute(sw.asDiagonal() * XA);
    if (qr.rank() < cols) return std::nullopt;

    Eigen::VectorXd b;
    if (family == Family::gaussian) {
        b = qr.solve(sw.cwiseProduct(yv));
    } else {
        const double wsum = wv.sum();
        const double ybar = std::clamp(wv.dot(yv) / wsum, kProbClamp, 1.0 - kProbClamp);
        b = Eigen::VectorXd::Zero(cols);
        b[0] = std::log(ybar / (1.0 - ybar));
        Eigen::VectorXd eta = XA * b;
        Eigen::VectorXd v = wv / wsum;
        double dev_old = mean_deviance(v, y, eta);
        Eigen::VectorXd sq(n), z(n);
        for (int iter = 0; iter < options.max_irls; ++iter) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double prob = std::clamp(inverse_logit(eta[i]), kProbClamp, 1.0 - kProbClamp);
                const double var = prob * (1.0 - prob);
                sq[i] = std::sqrt(wv[i] * var);
                z[i] = eta[i] + (yv[i] - prob) / var;
            }
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> step;
            step.setThreshold(options.rank_tolerance);
            step.compute(sq.asDiagonal() * XA);
            if (step.rank() < cols) return std::nullopt;
            b = step.solve(sq.cwiseProduct(z));
            eta = XA * b;
            const double dev = mean_deviance(v, y, eta);
            const bool converged = std::abs(dev - dev_old) < options.irls_tolerance;
            dev_old = dev;
            if (converged) break;
        }
    }
    if (!b.allFinite()) return std::nullopt;
    return b;
}

PathFit relaxed_refit(const PathFit& fit, ConstMatrixRef X, std::span<const double> y,
                      std::span<const double> weights, std::span<const double> gamma_grid,
                      const RelaxOptions& options) {
    for (double g : gamma_grid) {
        if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("gamma values must lie in [0, 1]");
    }
    if (gamma_grid.empty()) throw ConfigError("gamma grid is empty");
    validate_inputs(X, y, weights, fit.family);

    PathFit out;
    out.family = fit.family;
    out.alpha = fit.alpha;
    out.lambda_sequence = fit.lambda_sequence;
    out.gamma_grid.assign(gamma_grid.begin(), gamma_grid.end());
    out.standardization = fit.standardization;
    out.max_sweeps_hit = fit.max_sweeps_hit;

    std::map<std::vector<Eigen::Index>, std::optional<Eigen::VectorXd>> cache;
    for (const auto& base : fit.path) {
        if (base.gamma != 1.0) throw ConfigError("relaxed_refit expects a penalized (gamma = 1) path");
        std::vector<Eigen::Index> active;
        for (Eigen::Index j = 1; j < base.coefficients.size(); ++j) {
            if (base.coefficients[j] != 0.0) active.push_back(j);
        }
        std::optional<Eigen::VectorXd> refit_full;
        bool degenerate = false;
        if (!active.empty()) {
            auto it = cache.find(active);
            if (it == cache.end()) {
                it = cache.emplace(active, unpenalized_refit(X, y, weights, fit.family, active, options)).first;
            }
            if (it->second) {
                Eigen::VectorXd full = Eigen::VectorXd::Zero(base.coefficients.size());
                full[0] = (*it->second)[0];
                for (std::size_t c = 0; c < active.size(); ++c) {
                    full[active[c]] = (*it->second)[static_cast<Eigen::Index>(c) + 1];
                }
                refit_full = std::move(full);
            } else {
                degenerate = true;
            }
        }
        for (double g : gamma_grid) {
            PathPoint point = base;
            point.gamma = g;
            point.degenerate = degenerate;
            if (refit_full) {
                point.coefficients = g * base.coefficients + (1.0 - g) * *refit_full;
                point.k_lambda = count_nonzero(point.coefficients);
            }
            out.path.push_back(std::move(point));
        }
    }
    return out;
}

Eigen::VectorXd predict_path_point(const PathPoint& point, ConstMatrixRef X_new, Family family, PredictScale scale) {
    if (X_new.cols() != point.coefficients.size()) {
        throw DataError("design matrix has " + std::to_string(X_new.cols()) + " columns, coefficients have " +
                        std::to_string(point.coefficients.size()));
    }
    Eigen::VectorXd eta = X_new * point.coefficients;
    if (family == Family::binomial && scale == PredictScale::response) {
        eta = eta.unaryExpr([](double e) { return inverse_logit(e); });
    }
    return eta;
}

std::vector<int> random_folds(std::size_t n, int k, std::uint64_t seed, std::uint64_t stream) {
    Rng rng(seed, stream);
    const auto order = rng.permutation(n);
    std::vector<int> folds(n);
    for (std::size_t pos = 0; pos < n; ++pos) folds[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
    return folds;
}

namespace {

bool folds_have_both_classes(std::span<const double> y, const std::vector<int>& folds, int k) {
    for (int f = 0; f < k; ++f) {
        bool zero = false, one = false;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (folds[i] == f) continue;
            (y[i] == 1.0 ? one : zero) = true;
        }
        if (!zero || !one) return false;
    }
    return true;
}

double holdout_loss(Family family, double yi, double pred) {
    if (family == Family::gaussian) return (yi - pred) * (yi - pred);
    const double prob = std::clamp(pred, 1e-12, 1.0 - 1e-12);
    return -(yi * std::log(prob) + (1.0 - yi) * std::log1p(-prob));
}

}  // namespace

CvResult repeated_kfold_cv_with_folds(ConstMatrixRef X, std::span<const double> y, Family family,
                                      const CvOptions& options, const std::vector<std::vector<int>>& folds) {
    const auto n = static_cast<std::size_t>(X.rows());
    const int k = options.k;
    if (k < 2) throw ConfigError("k must be >= 2");
    if (n < 2 * static_cast<std::size_t>(k)) throw ConfigError("repeated k-fold CV needs n >= 2k");
    if (folds.empty()) throw ConfigError("at least one repeat is required");
    if (options.alpha_grid.empty()) throw ConfigError("alpha grid is empty");
    const std::vector<double> unit(n, 1.0);

    CvResult result;
    double best = std::numeric_limits<double>::infinity();
    double best_unrelaxed = std::numeric_limits<double>::infinity();
    for (double alpha : options.alpha_grid) {
        PathFit full = fit_path(X, y, unit, family, alpha, options.path);
        if (options.relax) full = relaxed_refit(full, X, y, unit, options.gamma_grid);
        PathOptions fold_options = options.path;
        fold_options.lambda = full.lambda_sequence;

        std::vector<double> loss(full.path.size(), 0.0);
        for (const auto& assignment : folds) {
            if (assignment.size() != n) throw ConfigError("fold assignment length mismatch");
            if (family == Family::binomial && !folds_have_both_classes(y, assignment, k)) {
                throw DataError("a CV training fold has a single response class");
            }
            for (int f = 0; f < k; ++f) {
                std::vector<Eigen::Index> train, test;
                for (std::size_t i = 0; i < n; ++i) {
                    (assignment[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
                }
                if (test.empty()) continue;
                const Eigen::MatrixXd Xtr = X(train, Eigen::all);
                const Eigen::MatrixXd Xte = X(test, Eigen::all);
                std::vector<double> ytr;
                for (auto i : train) ytr.push_back(y[static_cast<std::size_t>(i)]);
                const std::vector<double> wtr(train.size(), 1.0);
                PathFit part = fit_path(Xtr, ytr, wtr, family, alpha, fold_options);
                if (options.relax) part = relaxed_refit(part, Xtr, ytr, wtr, options.gamma_grid);
                for (std::size_t pt = 0; pt < part.path.size(); ++pt) {
                    const Eigen::VectorXd pred = predict_path_point(part.path[pt], Xte, family);
                    for (std::size_t t = 0; t < test.size(); ++t) {
                        loss[pt] += holdout_loss(family, y[static_cast<std::size_t>(test[t])],
                                                 pred[static_cast<Eigen::Index>(t)]);
                    }
                }
            }
        }
        const double denom = static_cast<double>(n * folds.size());
        for (std::size_t pt = 0; pt < full.path.size(); ++pt) {
            const double value = loss[pt] / denom;
            if (value < best) {
                best = value;
                result.selected = full.path[pt];
            }
            if (full.path[pt].gamma == 1.0 && value < best_unrelaxed) {
                best_unrelaxed = value;
                result.selected_unrelaxed = full.path[pt];
            }
        }
    }
    if (!std::isfinite(best)) throw NumericError("cross-validation produced no finite loss");
    result.cv_loss = best;
    result.cv_loss_unrelaxed = best_unrelaxed;
    if (!std::isfinite(best_unrelaxed)) {
        result.selected_unrelaxed = result.selected;
        result.cv_loss_unrelaxed = best;
    }
    return result;
}

CvResult repeated_kfold_cv(ConstMatrixRef X, std::span<const double> y, Family family, const CvOptions& options) {
    if (options.repeats < 1) throw ConfigError("repeats must be >= 1");
    const auto n = static_cast<std::size_t>(X.rows());
    if (options.k < 2) throw ConfigError("k must be >= 2");
    std::vector<std::vector<int>> folds;
    for (int rep = 0; rep < options.repeats; ++rep) {
        auto assignment = random_folds(n, options.k, options.seed, static_cast<std::uint64_t>(rep));
        if (family == Family::binomial && !folds_have_both_classes(y, assignment, options.k)) {
            // one reshuffle on a disjoint stream before giving up
            assignment = random_folds(n, options.k, options.seed, (1ull << 32) + static_cast<std::uint64_t>(rep));
            if (!folds_have_both_classes(y, assignment, options.k)) {
                throw DataError("a CV training fold has a single response class after reshuffling");
            }
        }
        folds.push_back(std::move(assignment));
    }
    return repeated_kfold_cv_with_folds(X, y, family, options, folds);
}

}  // namespace svem
