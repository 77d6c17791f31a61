#pragma once

#include "svem/dataset.hpp"
#include "svem/enet.hpp"
#include "svem/expand.hpp"
#include "svem/rng.hpp"
#include "svem/svem.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace svem {

/// Benchmark factor set: X1..X4 on [-1, 1] and a three-level X5 (L1..L3).
/// Latin hypercube for X1..X4, X5 balanced (counts differ by at most one,
/// earlier levels take the remainder) and randomly permuted.
Dataset make_lhs_design(std::size_t n_total, Rng& rng);

/// Holdout grid: X1..X4 Latin hypercube, X5 cycled L1, L2, L3, ...
Dataset make_holdout(std::size_t n_points, Rng& rng);

/// Order-2 truth expansion of the benchmark factors with sum-to-zero coding for X5.
ExpansionSpec truth_spec();

/// Fit expansion of order 1, 2 or 3 built from a design (p_full 7, 25, 45).
ExpansionSpec fit_spec(const Dataset& design, int order);

struct SurfaceSpec {
    Eigen::VectorXd beta;  // indexed by truth_spec() columns
    double sigma_f = 0.0;  // sd of the noiseless surface over the holdout
    double eta_mean = 0.0;
    int redraws = 0;       // all-zero (flat) surfaces discarded before this one
};

/// beta_j = Z_j E_j with pi_j ~ Beta(1/2, 1/2), Z_j ~ Bernoulli(pi_j), E_j ~
/// Laplace(1). `holdout_truth` is the truth expansion of the holdout grid.
/// The first `forced_zero_draws` attempts use Z = 0 (exercises the redraw path).
SurfaceSpec gen_surface(Rng& rng, const Eigen::MatrixXd& holdout_truth, int forced_zero_draws = 0);

enum class Method { svem, cv };

struct SimSetting {
    std::string name;
    Method method = Method::svem;
    Objective objective = Objective::wAIC;
    bool relax = false;
    bool debias = false;
};

/// Default comparison set per family: SVEM with wAIC/wBIC/wSSE, relaxed and
/// not, plus the repeated-CV baseline with and without relaxation.
std::vector<SimSetting> default_settings(Family family);

struct SimCell {
    Family family = Family::gaussian;
    std::size_t n_total = 25;
    double target_r2 = 0.9;
    int fit_order = 2;
    std::vector<SimSetting> settings;
    int n_reps = 20;
    std::uint64_t seed = 1;
    int B = 200;
    std::vector<double> alpha_grid{0.5, 1.0};
    int nlambda = 100;
    std::optional<double> lambda_min_ratio;  // default rule when absent
    int cv_k = 5;
    int cv_repeats = 3;
    std::size_t holdout_size = 10000;
    double noise_scale = 1.0;  // multiplies the target-R^2 noise sd (gaussian)
};

struct RepRecord {
    std::string run_id;
    Family family = Family::gaussian;
    std::size_t n_total = 0;
    double target_r2 = 0.0;
    int order = 0;
    std::string setting;
    int rep = 0;
    double metric = 0.0;    // log-NRMSE (gaussian) or holdout log-loss (binomial)
    double k_median = 0.0;  // median selected k over SVEM replicates; selected k for CV
    std::uint64_t seed = 0;
    bool ok = true;
    std::string note;
};

/// Runs every setting on the same replicate data (paired comparisons).
/// Replicate r draws from substream r of the cell seed.
std::vector<RepRecord> run_cell(const SimCell& cell, int threads = 1);
std::vector<RepRecord> run_gaussian_cell(const SimCell& cell, int threads = 1);
std::vector<RepRecord> run_binomial_cell(const SimCell& cell, int threads = 1);

/// log(max(RMSE / sigma_f, 1e-8)).
double log_nrmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth, double sigma_f);
/// Mean of -[p log q + (1 - p) log(1 - q)] with q clamped to [1e-12, 1 - 1e-12].
double holdout_log_loss(const Eigen::VectorXd& p_true, const Eigen::VectorXd& p_hat);

struct SummaryRow {
    Family family = Family::gaussian;
    std::size_t n_total = 0;
    double target_r2 = 0.0;
    int order = 0;
    std::string setting;
    std::size_t count = 0;
    double mean_metric = 0.0;
    double se_metric = 0.0;
    double mean_k_median = 0.0;
    double se_k_median = 0.0;
};

/// Means and standard errors per (family, n_total, target_r2, order, setting)
/// over successful records, sorted by those keys.
std::vector<SummaryRow> summarize(const std::vector<RepRecord>& records);

Dataset records_table(const std::vector<RepRecord>& records);
Dataset summary_table(const std::vector<SummaryRow>& rows);

}  // namespace svem
