#pragma once

#include "svem/expand.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace svem {

enum class Family { gaussian, binomial };

std::string to_string(Family family);
Family family_from_string(const std::string& name);

struct PathPoint {
    double alpha = 1.0;
    double lambda = 0.0;
    double gamma = 1.0;
    Eigen::VectorXd coefficients;  // original predictor scale, [0] is the intercept
    int k_lambda = 1;              // nonzero coefficients, intercept included
    bool degenerate = false;       // relaxed refit was singular; penalized point kept
};

struct Standardization {
    Eigen::VectorXd mean;   // weighted column means (entry 0 unused)
    Eigen::VectorXd scale;  // weighted column sds; 0 marks a degenerate column
};

struct PathFit {
    Family family = Family::gaussian;
    double alpha = 1.0;
    std::vector<double> lambda_sequence;  // strictly decreasing
    std::vector<double> gamma_grid{1.0};
    std::vector<PathPoint> path;          // lambda-major, gamma-minor
    Standardization standardization;
    int max_sweeps_hit = 0;               // lambdas where coordinate descent hit its sweep cap
};

struct PathOptions {
    int nlambda = 100;
    /// Defaults to 1e-2 when n < p_full - 1 (fewer runs than predictors), else 1e-4.
    std::optional<double> lambda_min_ratio;
    /// Explicit lambda grid (strictly decreasing); overrides nlambda/ratio
    /// and disables early stopping.
    std::vector<double> lambda;
    /// Generated grids stop once the deviance ratio exceeds max_dev_ratio or
    /// its relative gain drops below min_dev_change (after min_points points).
    bool early_stop = true;
    double max_dev_ratio = 0.999;
    double min_dev_change = 1e-5;
    int min_points = 5;
    double tolerance = 1e-7;
    int max_sweeps = 100000;
    int max_irls = 25;
    double irls_tolerance = 1e-8;
};

using ConstMatrixRef = Eigen::Ref<const Eigen::MatrixXd>;

double default_lambda_min_ratio(std::size_t n, std::size_t p_full);

/// Weighted elastic-net path. Objective on the standardized scale:
///   (1/2n) sum_i w_i loss_i + lambda * ((1 - alpha)/2 |b|^2 + alpha |b|_1)
/// with mean-one weights, intercept unpenalized. Binomial uses IRLS with
/// fitted probabilities clamped to [1e-5, 1 - 1e-5] inside the iterations.
PathFit fit_path(ConstMatrixRef X, std::span<const double> y, std::span<const double> weights, Family family,
                 double alpha, const PathOptions& options = {});

struct RelaxOptions {
    int max_irls = 25;
    double irls_tolerance = 1e-8;
    double rank_tolerance = 1e-9;
};

/// For each penalized point and each gamma: gamma * penalized + (1 - gamma) *
/// unpenalized refit on the point's active set (same weights).
PathFit relaxed_refit(const PathFit& fit, ConstMatrixRef X, std::span<const double> y,
                      std::span<const double> weights, std::span<const double> gamma_grid,
                      const RelaxOptions& options = {});

/// Unpenalized weighted refit on intercept + `active` columns. Empty when the
/// refit is singular.
std::optional<Eigen::VectorXd> unpenalized_refit(ConstMatrixRef X, std::span<const double> y,
                                                 std::span<const double> weights, Family family,
                                                 std::span<const Eigen::Index> active,
                                                 const RelaxOptions& options = {});

enum class PredictScale { link, response };

Eigen::VectorXd predict_path_point(const PathPoint& point, ConstMatrixRef X_new, Family family,
                                   PredictScale scale = PredictScale::response);

inline double inverse_logit(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

int count_nonzero(const Eigen::VectorXd& coefficients);

struct CvOptions {
    std::vector<double> alpha_grid{0.5, 1.0};
    bool relax = false;
    std::vector<double> gamma_grid{0.0, 0.25, 0.5, 0.75, 1.0};
    int k = 5;
    int repeats = 3;
    std::uint64_t seed = 0;
    PathOptions path;
};

struct CvResult {
    PathPoint selected;            // minimizer over all (alpha, lambda[, gamma]), refit on full data
    PathPoint selected_unrelaxed;  // minimizer restricted to gamma = 1
    double cv_loss = 0.0;
    double cv_loss_unrelaxed = 0.0;
};

/// Repeated k-fold CV over (alpha, lambda[, gamma]); fold lambda grids are the
/// full-data grids. Loss is mean squared error (gaussian) or mean negative
/// log-likelihood (binomial) over held-out rows, averaged over repeats.
CvResult repeated_kfold_cv(ConstMatrixRef X, std::span<const double> y, Family family, const CvOptions& options);

/// Same, with explicit fold labels per repeat (values in [0, k)).
CvResult repeated_kfold_cv_with_folds(ConstMatrixRef X, std::span<const double> y, Family family,
                                      const CvOptions& options, const std::vector<std::vector<int>>& folds);

/// Balanced random fold labels: a shuffled 0..n-1 taken modulo k.
std::vector<int> random_folds(std::size_t n, int k, std::uint64_t seed, std::uint64_t stream);

}  // namespace svem
