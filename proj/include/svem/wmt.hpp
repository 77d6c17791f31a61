#pragma once

#include "svem/dataset.hpp"
#include "svem/expand.hpp"
#include "svem/optimize.hpp"
#include "svem/svem.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace svem {

struct WmtOptions {
    int n_perm = 150;
    int n_eval_points = 500;
    std::uint64_t seed = 0;
    int threads = 1;
    double ridge = 1e-8;
};

struct WmtResponse {
    std::string response;
    double p_value = 1.0;
    double multiplier = 1.0;
    double original_distance = 0.0;
    std::vector<double> permuted_distances;
    bool degenerate = false;  // constant response; p fixed at 1
};

struct WmtResult {
    std::vector<WmtResponse> responses;
    int n_perm = 0;
    int n_eval_points = 0;
    std::uint64_t seed = 0;

    const WmtResponse* find(const std::string& response) const;
};

/// Whole-model permutation test for one gaussian response. The original and
/// every permuted refit are evaluated on one shared set of feasible points;
/// distances are diagonal Mahalanobis-like distances of the standardized
/// prediction vectors to the permutation reference.
WmtResponse wmt_single(const ExpansionSpec& spec, const Dataset& data, const std::string& response,
                       std::span<const MixtureGroup> groups, const SvemOptions& svem, const WmtOptions& options);

using ResponseSpecs = std::vector<std::pair<std::string, ExpansionSpec>>;

/// Runs wmt_single per response with the same seed and attaches multipliers.
WmtResult wmt_multi(const ResponseSpecs& specs, const Dataset& data, std::span<const MixtureGroup> groups,
                    const SvemOptions& svem, const WmtOptions& options);

/// max(-log10 p, 0.05), renormalized to mean one.
std::vector<double> wmt_multipliers(std::span<const double> p_values);

/// (prediction - mean(y)) / sd(y) for a (fits x points) prediction matrix; sd
/// floor 1e-12. Both moments are invariant under permutation of y.
Eigen::MatrixXd standardize_predictions(const Eigen::MatrixXd& predictions, std::span<const double> y);

/// Distance of each row of `vectors` to the column moments of `reference`.
Eigen::VectorXd wmt_distances(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& vectors, double ridge = 1e-8);

/// Add-one permutation p-value.
double permutation_p_value(double original, std::span<const double> permuted);

/// Long-format distances (response, source, index, distance) for plotting.
Dataset wmt_distance_table(const WmtResult& result);

}  // namespace svem
