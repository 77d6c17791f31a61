#pragma once

#include "svem/enet.hpp"
#include "svem/expand.hpp"
#include "svem/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace svem {

enum class Objective { wAIC, wBIC, wSSE };

std::string to_string(Objective objective);
Objective objective_from_string(const std::string& name);

/// Fractional random weights built from one shared uniform per observation:
/// train = -log u, valid = -log(1 - u), each rescaled to mean one.
struct FrwPair {
    std::vector<double> u;
    std::vector<double> w_train;
    std::vector<double> w_valid;
};

FrwPair draw_frw(std::size_t n, Rng& rng);
/// Deterministic construction from given uniforms (clamped to (1e-12, 1 - 1e-12)).
FrwPair frw_from_uniforms(std::span<const double> u);

struct EffectiveSize {
    double n_eff = 0.0;      // Kish ratio (sum w)^2 / sum w^2
    double n_eff_adm = 0.0;  // min(n, max(2, n_eff))
};

EffectiveSize kish_neff(std::span<const double> w);

struct CriterionConfig {
    Objective objective = Objective::wAIC;
    Family family = Family::gaussian;
};

/// Complexity multiplier g: 0 for wSSE, 2 for wAIC, log(n_eff_adm) for wBIC.
double complexity_multiplier(Objective objective, const EffectiveSize& size);
/// wAIC/wBIC guardrail: k - 1 must stay below n_eff_adm.
bool admissible(Objective objective, int k_lambda, const EffectiveSize& size);

/// wSSE: sum w r^2. wAIC/wBIC: n log(SSE_w / n) + g k, or +inf when inadmissible.
double criterion_gaussian(std::span<const double> residuals, std::span<const double> w_valid, int k_lambda,
                          const CriterionConfig& config);
/// 2 NLL + g k with the same guardrail; wSSE returns 2 NLL.
double criterion_binomial(std::span<const double> y, std::span<const double> p_hat, std::span<const double> w_valid,
                          int k_lambda, const CriterionConfig& config);

struct SvemOptions {
    Family family = Family::gaussian;
    int B = 200;
    std::vector<double> alpha_grid{0.5, 1.0};
    /// Defaults: relaxed for gaussian, standard paths for binomial.
    std::optional<bool> relax;
    /// Defaults: wAIC for gaussian, wBIC for binomial.
    std::optional<Objective> objective;
    bool debias = false;
    std::uint64_t seed = 0;
    std::vector<double> gamma_grid{0.0, 0.25, 0.5, 0.75, 1.0};
    PathOptions path;
    int threads = 1;

    bool resolved_relax() const { return relax.value_or(family == Family::gaussian); }
    Objective resolved_objective() const {
        return objective.value_or(family == Family::gaussian ? Objective::wAIC : Objective::wBIC);
    }
};

struct ReplicateSelection {
    double alpha = 1.0;
    double lambda = 0.0;
    double gamma = 1.0;
    int k_lambda = 1;
    double criterion = 0.0;
    double n_eff_adm = 0.0;   // of this replicate's validation weights
    bool fallback = false;    // every wAIC/wBIC point was inadmissible; wSSE minimizer kept
    bool degenerate = false;  // selected relaxed point had a singular refit
};

struct Calibration {
    double intercept = 0.0;
    double slope = 1.0;
};

struct SvemModel {
    ExpansionSpec spec;
    std::string response;
    Family family = Family::gaussian;
    Objective objective = Objective::wAIC;
    bool relax = true;
    std::vector<double> alpha_grid;
    std::vector<double> gamma_grid;
    int B = 0;
    std::uint64_t seed = 0;
    std::size_t n_train = 0;
    Eigen::MatrixXd coefficients;  // B x p_full
    std::vector<ReplicateSelection> selections;
    std::optional<Calibration> debias;  // gaussian only
};

/// Selection rule evaluated on shared replicate paths.
struct SelectionRequest {
    Objective objective = Objective::wAIC;
    bool relax = false;
};

struct EnsembleFit {
    SelectionRequest request;
    Eigen::MatrixXd coefficients;  // B x p_full
    std::vector<ReplicateSelection> selections;
};

/// Runs B FRW replicates on a prepared design matrix and applies every
/// request to the same replicate paths. Replicate b draws its weights from
/// substream b of options.seed, so a request's result does not depend on
/// which other requests are evaluated alongside it.
std::vector<EnsembleFit> fit_ensemble(ConstMatrixRef X, std::span<const double> y, const SvemOptions& options,
                                      std::span<const SelectionRequest> requests);

/// Response vector for modeling: numeric for gaussian; 0/1 numeric or a
/// two-level categorical (second level = 1) for binomial.
std::vector<double> response_vector(const Dataset& data, const std::string& response, Family family);

SvemModel fit_svem(const ExpansionSpec& spec, const Dataset& data, const std::string& response,
                   const SvemOptions& options);

/// Least-squares calibration of y on ensemble predictions; (mean y, 0) when
/// the predictions have no spread.
Calibration fit_calibration(std::span<const double> y, std::span<const double> y_hat);

struct SvemPrediction {
    Eigen::VectorXd mean;
    std::optional<Eigen::VectorXd> lower;
    std::optional<Eigen::VectorXd> upper;
    Eigen::MatrixXd members;  // n x B, response scale, calibrated when debias is present
};

/// Member predictions for an already expanded design.
Eigen::MatrixXd member_predictions(const SvemModel& model, ConstMatrixRef X);

SvemPrediction predict_svem(const SvemModel& model, const Dataset& new_data,
                            std::optional<double> interval_level = std::nullopt);
SvemPrediction predict_svem(const SvemModel& model, ConstMatrixRef X, std::optional<double> interval_level);

}  // namespace svem
