#pragma once

#include "svem/dataset.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace svem {

/// Gower dissimilarity over the listed columns: range-normalized absolute
/// differences for numerics, 0/1 mismatch for categoricals, averaged.
/// Numeric columns with zero range contribute 0.
Eigen::MatrixXd gower_distance(const Dataset& data, const std::vector<std::string>& columns);

struct PamResult {
    std::vector<std::size_t> medoids;     // indices into the distance matrix, in discovery order
    std::vector<std::size_t> assignment;  // medoid slot per point
    double cost = 0.0;                    // sum of distances to assigned medoids
};

/// Partitioning around medoids: greedy BUILD then best-improvement SWAP until
/// no swap lowers the cost. Ties go to the lowest index.
PamResult pam(const Eigen::MatrixXd& distance, std::size_t k);
/// SWAP phase only, starting from the given medoids.
PamResult pam_from(const Eigen::MatrixXd& distance, std::vector<std::size_t> medoids);

double medoid_cost(const Eigen::MatrixXd& distance, std::span<const std::size_t> medoids);

}  // namespace svem
