#include "svem/medoids.hpp"

#include "svem/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace svem {

Eigen::MatrixXd gower_distance(const Dataset& data, const std::vector<std::string>& columns) {
    const auto n = static_cast<Eigen::Index>(data.n_rows());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    if (columns.empty()) return d;
    for (const auto& name : columns) {
        const Column& col = data.column(name);
        if (col.kind == ColumnKind::numeric) {
            const auto [lo, hi] = std::minmax_element(col.numbers.begin(), col.numbers.end());
            const double range = n > 0 ? *hi - *lo : 0.0;
            if (!(range > 0.0)) continue;
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = i + 1; j < n; ++j) {
                    const double v = std::abs(col.numbers[static_cast<std::size_t>(i)] -
                                              col.numbers[static_cast<std::size_t>(j)]) / range;
                    d(i, j) += v;
                }
            }
        } else {
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = i + 1; j < n; ++j) {
                    if (col.labels[static_cast<std::size_t>(i)] != col.labels[static_cast<std::size_t>(j)]) d(i, j) += 1.0;
                }
            }
        }
    }
    d /= static_cast<double>(columns.size());
    d.triangularView<Eigen::StrictlyLower>() = d.transpose();
    return d;
}

double medoid_cost(const Eigen::MatrixXd& distance, std::span<const std::size_t> medoids) {
    double cost = 0.0;
    for (Eigen::Index j = 0; j < distance.rows(); ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (auto m : medoids) best = std::min(best, distance(j, static_cast<Eigen::Index>(m)));
        cost += best;
    }
    return cost;
}

namespace {

struct Nearest {
    std::vector<double> first;
    std::vector<double> second;
    std::vector<std::size_t> slot;
};

Nearest nearest_two(const Eigen::MatrixXd& D, const std::vector<std::size_t>& medoids) {
    const auto n = static_cast<std::size_t>(D.rows());
    Nearest out{std::vector<double>(n), std::vector<double>(n), std::vector<std::size_t>(n)};
    for (std::size_t j = 0; j < n; ++j) {
        double a = std::numeric_limits<double>::infinity(), b = a;
        std::size_t slot = 0;
        for (std::size_t s = 0; s < medoids.size(); ++s) {
            const double v = D(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(medoids[s]));
            if (v < a) {
                b = a;
                a = v;
                slot = s;
            } else if (v < b) {
                b = v;
            }
        }
        out.first[j] = a;
        out.second[j] = b;
        out.slot[j] = slot;
    }
    return out;
}

PamResult finish(const Eigen::MatrixXd& D, std::vector<std::size_t> medoids) {
    PamResult r;
    const Nearest near = nearest_two(D, medoids);
    r.assignment = near.slot;
    for (double v : near.first) r.cost += v;
    r.medoids = std::move(medoids);
    return r;
}

}  // namespace

PamResult pam_from(const Eigen::MatrixXd& D, std::vector<std::size_t> medoids) {
    const auto n = static_cast<std::size_t>(D.rows());
    if (D.rows() != D.cols()) throw DataError("distance matrix must be square");
    if (medoids.empty() || medoids.size() > n) throw ConfigError("medoid count must lie in [1, n]");
    std::vector<char> is_medoid(n, 0);
    for (auto m : medoids) {
        if (m >= n || is_medoid[m]) throw ConfigError("medoids must be distinct row indices");
        is_medoid[m] = 1;
    }
    const double tol = 1e-12;
    while (true) {
        const Nearest near = nearest_two(D, medoids);
        double best_delta = -tol;
        std::size_t best_slot = 0, best_h = n;
        for (std::size_t s = 0; s < medoids.size(); ++s) {
            for (std::size_t h = 0; h < n; ++h) {
                if (is_medoid[h]) continue;
                double delta = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double djh = D(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(h));
                    if (near.slot[j] == s) {
                        delta += std::min(djh, near.second[j]) - near.first[j];
                    } else if (djh < near.first[j]) {
                        delta += djh - near.first[j];
                    }
                }
                if (delta < best_delta) {
                    best_delta = delta;
                    best_slot = s;
                    best_h = h;
                }
            }
        }
        if (best_h == n) break;
        is_medoid[medoids[best_slot]] = 0;
        is_medoid[best_h] = 1;
        medoids[best_slot] = best_h;
    }
    return finish(D, std::move(medoids));
}

PamResult pam(const Eigen::MatrixXd& D, std::size_t k) {
    const auto n = static_cast<std::size_t>(D.rows());
    if (k < 1 || k > n) throw ConfigError("k must lie in [1, " + std::to_string(n) + "]");
    std::vector<std::size_t> medoids;
    std::vector<double> near(n, std::numeric_limits<double>::infinity());
    std::vector<char> is_medoid(n, 0);
    // BUILD: first the point with the smallest total distance, then greedy gains
    for (std::size_t step = 0; step < k; ++step) {
        double best_gain = -std::numeric_limits<double>::infinity();
        std::size_t best = n;
        for (std::size_t h = 0; h < n; ++h) {
            if (is_medoid[h]) continue;
            double gain = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double djh = D(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(h));
                gain += step == 0 ? -djh : std::max(near[j] - djh, 0.0);
            }
            if (gain > best_gain) {
                best_gain = gain;
                best = h;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = 1;
        for (std::size_t j = 0; j < n; ++j) {
            near[j] = std::min(near[j], D(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(best)));
        }
    }
    return pam_from(D, std::move(medoids));
}

}  // namespace svem
