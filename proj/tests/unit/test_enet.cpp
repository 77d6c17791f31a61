#include "svem/enet.hpp"
#include "svem/error.hpp"
#include "svem/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace svem;

namespace {

struct Problem {
    Eigen::MatrixXd X;
    std::vector<double> y;
    std::vector<double> w;
};

Problem random_problem(int n, int p, std::uint64_t seed, bool weighted = true) {
    Rng rng(seed);
    Problem pr;
    pr.X.resize(n, p);
    pr.X.col(0).setOnes();
    for (int j = 1; j < p; ++j) {
        for (int i = 0; i < n; ++i) pr.X(i, j) = rng.normal() * (1.0 + j * 0.3) + 0.2 * j;
    }
    Eigen::VectorXd beta(p);
    for (int j = 0; j < p; ++j) beta[j] = rng.normal();
    const Eigen::VectorXd mu = pr.X * beta;
    double wsum = 0;
    for (int i = 0; i < n; ++i) {
        pr.y.push_back(mu[i] + rng.normal());
        pr.w.push_back(weighted ? rng.exponential() : 1.0);
        wsum += pr.w.back();
    }
    for (auto& v : pr.w) v *= n / wsum;
    return pr;
}

// Weighted least squares via the normal equations (independent of coordinate descent).
Eigen::VectorXd normal_equations(const Eigen::MatrixXd& X, const std::vector<double>& y, const std::vector<double>& w) {
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
    const Eigen::MatrixXd XtW = X.transpose() * wv.asDiagonal();
    return (XtW * X).ldlt().solve(XtW * yv);
}

PathOptions grid_to_zero(int nlambda = 30) {
    PathOptions o;
    o.nlambda = nlambda;
    return o;
}

// Maximum KKT violation of a gaussian point on the standardized scale.
double kkt_violation(const Problem& pr, const PathPoint& pt) {
    const Eigen::Index n = pr.X.rows();
    const Eigen::Map<const Eigen::VectorXd> yv(pr.y.data(), n);
    const Eigen::Map<const Eigen::VectorXd> wv(pr.w.data(), n);
    const Eigen::VectorXd v = wv / wv.sum();
    const Eigen::VectorXd r = yv - pr.X * pt.coefficients;
    double worst = 0.0;
    for (Eigen::Index j = 1; j < pr.X.cols(); ++j) {
        const double m = v.dot(pr.X.col(j));
        const double sd = std::sqrt((v.array() * (pr.X.col(j).array() - m).square()).sum());
        const Eigen::VectorXd xs = (pr.X.col(j).array() - m) / sd;
        const double grad = v.dot(xs.cwiseProduct(r));
        const double b = pt.coefficients[j] * sd;
        if (b != 0.0) {
            const double rhs = pt.alpha * pt.lambda * (b > 0 ? 1.0 : -1.0) + (1.0 - pt.alpha) * pt.lambda * b;
            worst = std::max(worst, std::abs(grad - rhs));
        } else {
            worst = std::max(worst, std::abs(grad) - pt.alpha * pt.lambda);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("lambda_max gives the weighted-mean intercept only") {
    const auto pr = random_problem(30, 6, 1);
    const auto fit = fit_path(pr.X, pr.y, pr.w, Family::gaussian, 1.0, grid_to_zero());
    const auto& first = fit.path.front();
    double wy = 0, ws = 0;
    for (std::size_t i = 0; i < pr.y.size(); ++i) {
        wy += pr.w[i] * pr.y[i];
        ws += pr.w[i];
    }
    CHECK(first.k_lambda == 1);
    CHECK(first.coefficients.tail(5).isZero(0.0));
    CHECK(first.coefficients[0] == doctest::Approx(wy / ws).epsilon(1e-12));
    // one step below lambda_max something enters
    CHECK(fit.path[1].k_lambda > 1);
    for (std::size_t k = 1; k < fit.lambda_sequence.size(); ++k) {
        CHECK(fit.lambda_sequence[k] < fit.lambda_sequence[k - 1]);
    }
}

TEST_CASE("univariate lasso equals the soft-threshold closed form") {
    Eigen::MatrixXd X(10, 2);
    X.col(0).setOnes();
    X.col(1) << 0.3, 1.1, 2.0, 2.2, 3.5, 4.1, 4.8, 6.0, 7.2, 8.9;
    const std::vector<double> y{1.2, 0.7, 2.9, 2.1, 3.8, 3.3, 5.9, 5.2, 7.7, 8.1};
    const std::vector<double> w(10, 1.0);
    PathOptions o;
    o.lambda = {3.0, 2.0, 1.0, 0.5};
    const auto fit = fit_path(X, y, w, Family::gaussian, 1.0, o);
    // expected values from the closed form S(cov(x_std, y), lambda) / sd(x)
    const double slope[] = {0.0, 0.13257886287567813, 0.514689904506507, 0.7057454253219215};
    const double icept[] = {4.090000000000001, 3.5583587598685313, 2.026093482928908, 1.2599608444590955};
    for (int k = 0; k < 4; ++k) {
        CHECK(fit.path[k].coefficients[1] == doctest::Approx(slope[k]).epsilon(1e-10));
        CHECK(std::abs(fit.path[k].coefficients[1] - slope[k]) < 1e-8);
        CHECK(std::abs(fit.path[k].coefficients[0] - icept[k]) < 1e-8);
    }
}

TEST_CASE("lambda -> 0 reproduces weighted least squares") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto pr = random_problem(40, 10, 100 + seed);
        auto o = grid_to_zero();
        auto probe = fit_path(pr.X, pr.y, pr.w, Family::gaussian, 1.0, o);
        o.lambda = probe.lambda_sequence;
        o.lambda.push_back(0.0);
        const auto fit = fit_path(pr.X, pr.y, pr.w, Family::gaussian, 1.0, o);
        const Eigen::VectorXd ols = normal_equations(pr.X, pr.y, pr.w);
        CHECK((fit.path.back().coefficients - ols).cwiseAbs().maxCoeff() < 1e-6);
        const Eigen::VectorXd fitted = predict_path_point(fit.path.back(), pr.X, Family::gaussian);
        CHECK((fitted - pr.X * ols).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("KKT conditions hold along gaussian paths") {
    for (double alpha : {1.0, 0.5, 0.2}) {
        const auto pr = random_problem(25, 12, 7);
        const auto fit = fit_path(pr.X, pr.y, pr.w, Family::gaussian, alpha, grid_to_zero(40));
        for (const auto& pt : fit.path) CHECK(kkt_violation(pr, pt) <= 1e-6);
    }
}

TEST_CASE("rescaling a predictor rescales its coefficient only") {
    const auto pr = random_problem(30, 5, 3);
    Problem scaled = pr;
    scaled.X.col(2) *= -7.5;
    const auto a = fit_path(pr.X, pr.y, pr.w, Family::gaussian, 0.5, grid_to_zero(20));
    const auto b = fit_path(scaled.X, scaled.y, scaled.w, Family::gaussian, 0.5, grid_to_zero(20));
    for (std::size_t k = 0; k < a.path.size(); ++k) {
        CHECK(b.path[k].coefficients[2] == doctest::Approx(a.path[k].coefficients[2] / -7.5).epsilon(1e-6));
        const Eigen::VectorXd fa = predict_path_point(a.path[k], pr.X, Family::gaussian);
        const Eigen::VectorXd fb = predict_path_point(b.path[k], scaled.X, Family::gaussian);
        CHECK((fa - fb).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("degenerate columns get zero coefficients") {
    auto pr = random_problem(20, 4, 9);
    pr.X.col(2).setConstant(3.0);
    const auto fit = fit_path(pr.X, pr.y, pr.w, Family::gaussian, 1.0, grid_to_zero(10));
    for (const auto& pt : fit.path) CHECK(pt.coefficients[2] == 0.0);
    CHECK(fit.standardization.scale[2] == 0.0);
}

TEST_CASE("constant response stays intercept-only") {
    auto pr = random_problem(20, 6, 2);
    std::fill(pr.y.begin(), pr.y.end(), 4.25);
    const auto fit = fit_path(pr.X, pr.y, pr.w, Family::gaussian, 1.0, grid_to_zero(10));
    for (const auto& pt : fit.path) {
        CHECK(pt.k_lambda == 1);
        CHECK(pt.coefficients[0] == doctest::Approx(4.25));
    }
}

TEST_CASE("relaxed refit endpoints") {
    const auto pr = random_problem(20, 8, 26);
    const auto fit = fit_path(pr.X, pr.y, pr.w, Family::gaussian, 1.0, grid_to_zero(30));
    const std::vector<double> gammas{0.0, 0.5, 1.0};
    const auto relaxed = relaxed_refit(fit, pr.X, pr.y, pr.w, gammas);
    REQUIRE(relaxed.path.size() == fit.path.size() * 3);
    bool saw_two = false;
    for (std::size_t k = 0; k < fit.path.size(); ++k) {
        const auto& pen = fit.path[k];
        const auto& g0 = relaxed.path[3 * k];
        const auto& g1 = relaxed.path[3 * k + 2];
        CHECK(g1.coefficients == pen.coefficients);
        if (pen.k_lambda == 1) CHECK(g0.coefficients == pen.coefficients);
        if (pen.k_lambda >= 2 && !g0.degenerate) {
            // gamma = 0 is weighted OLS on the active columns
            std::vector<Eigen::Index> cols{0};
            for (Eigen::Index j = 1; j < pen.coefficients.size(); ++j) {
                if (pen.coefficients[j] != 0.0) cols.push_back(j);
            }
            const Eigen::MatrixXd XA = pr.X(Eigen::all, cols);
            const Eigen::VectorXd ols = normal_equations(XA, pr.y, pr.w);
            for (std::size_t c = 0; c < cols.size(); ++c) {
                CHECK(std::abs(g0.coefficients[cols[c]] - ols[static_cast<Eigen::Index>(c)]) < 1e-9);
            }
            if (pen.k_lambda == 3) saw_two = true;
        }
        // active set is unchanged by relaxation
        for (Eigen::Index j = 1; j < pen.coefficients.size(); ++j) {
            CHECK((g0.coefficients[j] != 0.0) == (pen.coefficients[j] != 0.0));
        }
    }
    CHECK(saw_two);
}

TEST_CASE("singular relaxed refits fall back with a flag") {
    auto pr = random_problem(6, 12, 4);
    const auto fit = fit_path(pr.X, pr.y, pr.w, Family::gaussian, 0.5, grid_to_zero(30));
    const std::vector<double> gammas{0.0, 1.0};
    const auto relaxed = relaxed_refit(fit, pr.X, pr.y, pr.w, gammas);
    bool any = false;
    for (std::size_t k = 0; k < fit.path.size(); ++k) {
        const auto& g0 = relaxed.path[2 * k];
        if (g0.degenerate) {
            any = true;
            CHECK(g0.coefficients == fit.path[k].coefficients);
        }
    }
    CHECK(any);
}

TEST_CASE("binomial path") {
    Rng rng(8);
    const int n = 60, p = 4;
    Eigen::MatrixXd X(n, p);
    std::vector<double> y(n), w(n, 1.0);
    X.col(0).setOnes();
    for (int i = 0; i < n; ++i) {
        for (int j = 1; j < p; ++j) X(i, j) = rng.normal();
        y[i] = rng.bernoulli(inverse_logit(0.3 + 1.2 * X(i, 1) - 0.8 * X(i, 2))) ? 1.0 : 0.0;
    }
    PathOptions o;
    o.nlambda = 30;
    auto fit = fit_path(X, y, w, Family::binomial, 1.0, o);
    const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / n;
    CHECK(fit.path.front().coefficients[0] == doctest::Approx(std::log(ybar / (1 - ybar))));
    for (const auto& pt : fit.path) {
        const Eigen::VectorXd prob = predict_path_point(pt, X, Family::binomial);
        CHECK(prob.minCoeff() > 0.0);
        CHECK(prob.maxCoeff() < 1.0);
    }

    SUBCASE("lambda -> 0 matches Newton-QR logistic regression") {
        o.lambda = fit.lambda_sequence;
        o.lambda.push_back(0.0);
        fit = fit_path(X, y, w, Family::binomial, 1.0, o);
        const std::vector<Eigen::Index> all{1, 2, 3};
        const auto newton = unpenalized_refit(X, y, w, Family::binomial, all);
        REQUIRE(newton);
        CHECK((fit.path.back().coefficients - *newton).cwiseAbs().maxCoeff() < 1e-4);
    }
}

TEST_CASE("prediction scales") {
    PathPoint pt;
    pt.coefficients = Eigen::VectorXd::Zero(3);
    pt.coefficients[0] = 0.0;
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(4, 3);
    X.col(0).setOnes();
    CHECK(predict_path_point(pt, X, Family::binomial).isConstant(0.5));
    pt.coefficients[0] = 2.5;
    CHECK(predict_path_point(pt, X, Family::gaussian).isConstant(2.5));
    CHECK(predict_path_point(pt, X, Family::binomial, PredictScale::link).isConstant(2.5));
    CHECK_THROWS_AS(predict_path_point(pt, Eigen::MatrixXd::Ones(2, 2), Family::gaussian), DataError);
}

TEST_CASE("fit_path input errors") {
    auto pr = random_problem(10, 3, 1);
    auto bad = pr;
    bad.y[3] = std::nan("");
    CHECK_THROWS_AS(fit_path(bad.X, bad.y, bad.w, Family::gaussian, 1.0), DataError);
    bad = pr;
    std::fill(bad.w.begin(), bad.w.end(), 0.0);
    CHECK_THROWS_AS(fit_path(bad.X, bad.y, bad.w, Family::gaussian, 1.0), DataError);
    CHECK_THROWS_AS(fit_path(pr.X, pr.y, pr.w, Family::binomial, 1.0), DataError);
    CHECK_THROWS_AS(fit_path(pr.X, pr.y, pr.w, Family::gaussian, 0.0), ConfigError);
}

TEST_CASE("repeated k-fold CV recovers a noiseless linear signal") {
    Rng rng(12);
    const int n = 30, p = 8;
    Eigen::MatrixXd X(n, p);
    X.col(0).setOnes();
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 1; j < p; ++j) X(i, j) = rng.uniform(-1, 1);
        y[i] = 2.0 + 3.0 * X(i, 1);
    }
    CvOptions o;
    o.seed = 5;
    o.relax = true;
    const auto cv = repeated_kfold_cv(X, y, Family::gaussian, o);
    CHECK(cv.selected.coefficients[1] != 0.0);
    Eigen::MatrixXd Xh(50, p);
    Xh.col(0).setOnes();
    Eigen::VectorXd truth(50);
    for (int i = 0; i < 50; ++i) {
        for (int j = 1; j < p; ++j) Xh(i, j) = rng.uniform(-1, 1);
        truth[i] = 2.0 + 3.0 * Xh(i, 1);
    }
    const Eigen::VectorXd pred = predict_path_point(cv.selected, Xh, Family::gaussian);
    CHECK(std::sqrt((pred - truth).squaredNorm() / 50) < 1e-3);
}

TEST_CASE("duplicated fold assignments select like a single repeat") {
    const auto pr = random_problem(30, 6, 31, false);
    CvOptions o;
    const auto folds = random_folds(30, 5, 9, 0);
    const auto once = repeated_kfold_cv_with_folds(pr.X, pr.y, Family::gaussian, o, {folds});
    const auto twice = repeated_kfold_cv_with_folds(pr.X, pr.y, Family::gaussian, o, {folds, folds});
    CHECK(once.selected.lambda == twice.selected.lambda);
    CHECK(once.selected.alpha == twice.selected.alpha);
    CHECK(once.selected.coefficients == twice.selected.coefficients);
}

TEST_CASE("CV preconditions") {
    const auto pr = random_problem(9, 3, 1, false);
    CvOptions o;
    CHECK_THROWS_AS(repeated_kfold_cv(pr.X, pr.y, Family::gaussian, o), ConfigError);
    o.k = 1;
    CHECK_THROWS_AS(repeated_kfold_cv(pr.X, pr.y, Family::gaussian, o), ConfigError);

    // one positive label cannot populate every training fold
    auto rare = random_problem(12, 3, 1, false);
    std::fill(rare.y.begin(), rare.y.end(), 0.0);
    rare.y[0] = 1.0;
    CvOptions b;
    b.k = 2;
    CHECK_THROWS_AS(repeated_kfold_cv(rare.X, rare.y, Family::binomial, b), DataError);
}

TEST_CASE("default lambda ratio follows the runs-versus-predictors rule") {
    CHECK(default_lambda_min_ratio(20, 25) == 1e-2);
    CHECK(default_lambda_min_ratio(23, 25) == 1e-2);
    CHECK(default_lambda_min_ratio(24, 25) == 1e-4);
    CHECK(default_lambda_min_ratio(30, 25) == 1e-4);
}

TEST_CASE("generated grids stop early, explicit grids never do") {
    const auto pr = random_problem(15, 12, 31);
    PathOptions o;
    o.nlambda = 100;
    o.lambda_min_ratio = 1e-6;
    const auto fit = fit_path(pr.X, pr.y, pr.w, Family::gaussian, 1.0, o);
    CHECK(fit.path.size() < 100);
    CHECK(fit.path.size() >= 5);
    CHECK(fit.lambda_sequence.size() == fit.path.size());

    o.early_stop = false;
    CHECK(fit_path(pr.X, pr.y, pr.w, Family::gaussian, 1.0, o).path.size() == 100);

    PathOptions e;
    e.early_stop = false;
    e.nlambda = 100;
    e.lambda_min_ratio = 1e-6;
    e.lambda = fit_path(pr.X, pr.y, pr.w, Family::gaussian, 1.0, e).lambda_sequence;
    e.early_stop = true;
    CHECK(fit_path(pr.X, pr.y, pr.w, Family::gaussian, 1.0, e).path.size() == 100);
}
