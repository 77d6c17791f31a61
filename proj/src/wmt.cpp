#include "svem/wmt.hpp"

#include "svem/error.hpp"
#include "svem/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace svem {

const WmtResponse* WmtResult::find(const std::string& response) const {
    for (const auto& r : responses) {
        if (r.response == response) return &r;
    }
    return nullptr;
}

std::vector<double> wmt_multipliers(std::span<const double> p_values) {
    std::vector<double> m;
    double sum = 0.0;
    for (double p : p_values) {
        if (!(p > 0.0 && p <= 1.0)) throw NumericError("WMT p-values must lie in (0, 1]");
        m.push_back(std::max(-std::log10(p), 0.05));
        sum += m.back();
    }
    const double mean = sum / static_cast<double>(m.size());
    for (double& v : m) v /= mean;
    return m;
}

Eigen::MatrixXd standardize_predictions(const Eigen::MatrixXd& predictions, std::span<const double> y) {
    const double n = static_cast<double>(y.size());
    if (y.size() < 2) throw DataError("the response needs at least two observations");
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    const double sd = std::max(std::sqrt(ss / (n - 1.0)), 1e-12);
    return (predictions.array() - mean) / sd;
}

Eigen::VectorXd wmt_distances(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& vectors, double ridge) {
    if (reference.rows() < 2) throw ConfigError("the permutation reference needs at least two rows");
    const Eigen::RowVectorXd mu = reference.colwise().mean();
    const Eigen::RowVectorXd var =
        (reference.rowwise() - mu).array().square().colwise().sum() / static_cast<double>(reference.rows() - 1);
    const Eigen::RowVectorXd inv = (var.array() + ridge).inverse();
    Eigen::VectorXd d(vectors.rows());
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
        d[i] = std::sqrt(((vectors.row(i) - mu).array().square() * inv.array()).sum());
    }
    return d;
}

double permutation_p_value(double original, std::span<const double> permuted) {
    const auto hits = std::count_if(permuted.begin(), permuted.end(), [&](double d) { return d >= original; });
    return (1.0 + static_cast<double>(hits)) / (1.0 + static_cast<double>(permuted.size()));
}

WmtResponse wmt_single(const ExpansionSpec& spec, const Dataset& data, const std::string& response,
                       std::span<const MixtureGroup> groups, const SvemOptions& svem, const WmtOptions& options) {
    if (svem.family != Family::gaussian) throw ConfigError("the whole-model test supports gaussian responses only");
    if (options.n_perm < 19) throw ConfigError("n_perm must be >= 19");
    if (options.n_eval_points < 2) throw ConfigError("n_eval_points must be >= 2");

    WmtResponse out;
    out.response = response;
    const std::vector<double> y = response_vector(data, response, Family::gaussian);
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (*hi - *lo <= 1e-12 * std::max(1.0, std::abs(*hi))) {
        out.degenerate = true;
        out.p_value = 1.0;
        return out;
    }

    const Dataset eval = sample_candidates(spec, groups, static_cast<std::size_t>(options.n_eval_points),
                                           mix64(options.seed ^ 0x5745u), BlockingPolicy::most_common);
    const Eigen::MatrixXd X_eval = expand_rows(spec, eval).values;
    const Eigen::MatrixXd X = expand_rows(spec, data).values;

    SvemOptions inner = svem;
    inner.threads = 1;
    const SelectionRequest request{inner.resolved_objective(), inner.resolved_relax()};
    const auto fits = static_cast<std::size_t>(options.n_perm) + 1;
    Eigen::MatrixXd predictions(static_cast<Eigen::Index>(fits), X_eval.rows());
    parallel_for(fits, options.threads, [&](std::size_t j) {
        std::vector<double> yj = y;
        if (j > 0) {
            Rng rng(options.seed, j);
            const auto perm = rng.permutation(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) yj[i] = y[perm[i]];
        }
        const auto fit = fit_ensemble(X, yj, inner, std::span(&request, 1));
        const Eigen::VectorXd mean_coef = fit.front().coefficients.colwise().mean().transpose();
        predictions.row(static_cast<Eigen::Index>(j)) = (X_eval * mean_coef).transpose();
    });

    const Eigen::MatrixXd z = standardize_predictions(predictions, y);
    const Eigen::MatrixXd reference = z.bottomRows(options.n_perm);
    const Eigen::VectorXd d = wmt_distances(reference, z, options.ridge);
    out.original_distance = d[0];
    out.permuted_distances.assign(d.data() + 1, d.data() + d.size());
    out.p_value = permutation_p_value(out.original_distance, out.permuted_distances);
    return out;
}

WmtResult wmt_multi(const ResponseSpecs& specs, const Dataset& data, std::span<const MixtureGroup> groups,
                    const SvemOptions& svem, const WmtOptions& options) {
    if (specs.empty()) throw ConfigError("the whole-model test needs at least one response");
    WmtResult result;
    result.n_perm = options.n_perm;
    result.n_eval_points = options.n_eval_points;
    result.seed = options.seed;
    std::vector<double> p;
    for (const auto& [response, spec] : specs) {
        result.responses.push_back(wmt_single(spec, data, response, groups, svem, options));
        p.push_back(result.responses.back().p_value);
    }
    const std::vector<double> m = wmt_multipliers(p);
    for (std::size_t r = 0; r < m.size(); ++r) result.responses[r].multiplier = m[r];
    return result;
}

Dataset wmt_distance_table(const WmtResult& result) {
    std::vector<std::string> response, source;
    std::vector<double> index, distance;
    for (const auto& r : result.responses) {
        if (r.degenerate) continue;
        response.push_back(r.response);
        source.push_back("original");
        index.push_back(0);
        distance.push_back(r.original_distance);
        for (std::size_t j = 0; j < r.permuted_distances.size(); ++j) {
            response.push_back(r.response);
            source.push_back("permuted");
            index.push_back(static_cast<double>(j + 1));
            distance.push_back(r.permuted_distances[j]);
        }
    }
    Dataset t;
    t.add_categorical("response", std::move(response));
    t.add_categorical("source", std::move(source));
    t.add_numeric("index", std::move(index));
    t.add_numeric("distance", std::move(distance));
    return t;
}

}  // namespace svem
