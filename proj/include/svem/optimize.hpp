#pragma once

#include "svem/dataset.hpp"
#include "svem/expand.hpp"
#include "svem/svem.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace svem {

struct WmtResult;

/// Composition constraint: bounded components that sum to `total`.
struct MixtureGroup {
    std::vector<std::string> vars;
    std::vector<double> lower;
    std::vector<double> upper;
    double total = 1.0;

    void validate() const;
};

enum class Goal { max, min, target };

std::string to_string(Goal goal);
Goal goal_from_string(const std::string& name);

struct ResponseGoal {
    std::string response;
    Goal goal = Goal::max;
    double weight = 1.0;
    std::optional<double> target;
};

/// Mean-level specification limits; either side may be absent.
struct SpecLimit {
    std::string response;
    std::optional<double> lower;
    std::optional<double> upper;
};

enum class BlockingPolicy {
    most_common,  // categorical blocking at its most frequent training level, numeric at the midpoint
    sampled       // blocking factors sampled like any other factor
};

/// Feasible random settings over the spec's factors. Mixture groups are
/// sampled uniformly on their bounded simplex by rejection.
Dataset sample_candidates(const ExpansionSpec& spec, std::span<const MixtureGroup> groups, std::size_t n_candidates,
                          std::uint64_t seed, BlockingPolicy blocking = BlockingPolicy::most_common);

/// Uniform draw on {x : lower <= x <= upper, sum x = total} for one group.
/// Throws NumericError once the rejection budget is exhausted.
std::vector<std::vector<double>> sample_mixture(const MixtureGroup& group, std::size_t n, Rng& rng);

/// Linear Derringer-Suich desirability with anchors (low, high).
double desirability(double value, const ResponseGoal& goal, double low, double high);

enum class WidthNormalization {
    width_quantiles,  // 2%/98% quantiles of the interval widths over candidates
    response_range    // 2%/98% quantiles of the predictions themselves
};

struct ScoreOptions {
    double interval_level = 0.95;
    double epsilon = 1e-6;
    double anchor_low = 0.02;
    double anchor_high = 0.98;
    WidthNormalization width_normalization = WidthNormalization::width_quantiles;
};

/// Candidate settings joined with per-response predictions and scores.
/// Per response r the table holds r_pred, r_lower, r_upper, r_width, r_d and,
/// with specs, r_prob_in_spec. Global columns: score, wmt_score (with WMT),
/// uncertainty_measure, and with specs p_joint_mean and p_joint_independent.
struct ScoreTable {
    Dataset table;
    std::vector<std::string> factor_columns;
    std::vector<std::string> responses;
};

struct SpecProbabilities {
    std::map<std::string, Eigen::VectorXd> prob_in_spec;
    Eigen::VectorXd p_joint_mean;
    bool independence_fallback = false;  // members could not be paired across responses
};

using ModelMap = std::map<std::string, SvemModel>;

/// Members are n x B matrices of member predictions per response.
SpecProbabilities estimate_spec_probs(const ModelMap& models, const std::map<std::string, Eigen::MatrixXd>& members,
                                      std::span<const SpecLimit> specs);
SpecProbabilities estimate_spec_probs(const ModelMap& models, std::span<const SpecLimit> specs,
                                      const Dataset& candidates);

ScoreTable score_candidates(const ModelMap& models, std::span<const ResponseGoal> goals, const Dataset& candidates,
                            const WmtResult* wmt = nullptr, std::span<const SpecLimit> specs = {},
                            const ScoreOptions& options = {});

/// Weighted geometric mean exp(sum w log((1 - eps) d + eps)) with weights
/// normalized to sum one.
double geometric_score(std::span<const double> d, std::span<const double> weights, double epsilon = 1e-6);

enum class Direction { max, min };
enum class TopType { frac, n };

std::string to_string(Direction direction);
Direction direction_from_string(const std::string& name);
std::string to_string(TopType type);
TopType top_type_from_string(const std::string& name);

struct CandidateQuery {
    std::string target = "score";
    Direction direction = Direction::max;
    std::size_t k = 5;
    TopType top_type = TopType::frac;
    double top = 0.1;
    std::string label;
};

struct SelectionResult {
    std::string label;
    std::string target;
    Direction direction = Direction::max;
    std::size_t best_row = 0;
    std::vector<std::size_t> medoid_rows;  // rows of the input table
    Dataset rows;                          // best row first, then medoids
    std::vector<std::string> factor_columns;
};

SelectionResult select_from_score_table(const ScoreTable& table, const CandidateQuery& query);

/// One CSV with label, candidate_type and the union of all columns.
void export_candidates(std::span<const SelectionResult> selections, const std::string& path,
                       const std::vector<std::string>& comments = {});
Dataset candidates_table(std::span<const SelectionResult> selections);

}  // namespace svem
