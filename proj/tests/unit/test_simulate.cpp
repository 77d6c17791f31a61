#include "svem/error.hpp"
#include "svem/simulate.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

using namespace svem;

namespace {

std::map<std::string, int> level_counts(const Dataset& d) {
    std::map<std::string, int> c;
    for (const auto& l : d.column("X5").labels) ++c[l];
    return c;
}

SimCell tiny_cell(Family family) {
    SimCell c;
    c.family = family;
    c.n_total = 20;
    c.target_r2 = 0.9;
    c.fit_order = 1;
    c.settings = default_settings(family);
    c.n_reps = 3;
    c.seed = 21;
    c.B = 8;
    c.nlambda = 20;
    c.holdout_size = 600;
    return c;
}

}  // namespace

TEST_CASE("LHS design puts one point per stratum") {
    Rng rng(2);
    const Dataset d = make_lhs_design(15, rng);
    for (const char* name : {"X1", "X2", "X3", "X4"}) {
        std::vector<int> hits(15, 0);
        for (double x : d.numeric(name)) {
            CHECK(x >= -1.0);
            CHECK(x <= 1.0);
            ++hits[static_cast<std::size_t>(std::floor((x + 1.0) / (2.0 / 15.0)))];
        }
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
    const auto c = level_counts(d);
    CHECK(c.at("L1") == 5);
    CHECK(c.at("L2") == 5);
    CHECK(c.at("L3") == 5);

    const Dataset e = make_lhs_design(20, rng);
    const auto ce = level_counts(e);
    CHECK(ce.at("L1") == 7);
    CHECK(ce.at("L2") == 7);
    CHECK(ce.at("L3") == 6);
    CHECK_THROWS_AS(make_lhs_design(2, rng), ConfigError);
}

TEST_CASE("LHS marginal is uniform on [-1, 1]") {
    Rng rng(9);
    std::vector<double> xs;
    for (int rep = 0; rep < 1000; ++rep) {
        const Dataset d = make_lhs_design(15, rng);
        xs.push_back(d.numeric("X1")[0]);
    }
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double cdf = (xs[i] + 1.0) / 2.0;
        const double n = static_cast<double>(xs.size());
        ks = std::max({ks, std::abs(cdf - static_cast<double>(i) / n), std::abs(cdf - static_cast<double>(i + 1) / n)});
    }
    CHECK(ks < 0.05);
}

TEST_CASE("holdout cycles X5") {
    Rng rng(1);
    const Dataset h = make_holdout(7, rng);
    const auto& l = h.column("X5").labels;
    CHECK(l[0] == "L1");
    CHECK(l[1] == "L2");
    CHECK(l[2] == "L3");
    CHECK(l[3] == "L1");
}

TEST_CASE("expansion sizes of the benchmark factor set") {
    Rng rng(4);
    const Dataset d = make_lhs_design(30, rng);
    CHECK(term_count(fit_spec(d, 1)) == 7);
    CHECK(term_count(fit_spec(d, 2)) == 25);
    CHECK(term_count(fit_spec(d, 3)) == 45);
    CHECK(term_count(truth_spec()) == 25);
    CHECK_THROWS_AS(fit_spec(d, 4), ConfigError);
}

TEST_CASE("surface coefficients are sparse with Laplace effects") {
    Rng rng(12);
    const Dataset h = make_holdout(300, rng);
    const Eigen::MatrixXd H = expand_rows(truth_spec(), h).values;
    double nonzero = 0.0, total = 0.0, sum2 = 0.0;
    for (int draw = 0; draw < 400; ++draw) {
        const SurfaceSpec s = gen_surface(rng, H);
        CHECK(s.sigma_f > 0.0);
        for (Eigen::Index j = 0; j < s.beta.size(); ++j) {
            total += 1.0;
            if (s.beta[j] != 0.0) {
                nonzero += 1.0;
                sum2 += s.beta[j] * s.beta[j];
            }
        }
    }
    // E[pi] = 1/2 for Beta(1/2, 1/2); Var of Laplace(1) is 2
    CHECK(nonzero / total == doctest::Approx(0.5).epsilon(0.05));
    CHECK(sum2 / nonzero == doctest::Approx(2.0).epsilon(0.1));

    const SurfaceSpec forced = gen_surface(rng, H, 2);
    CHECK(forced.redraws >= 2);
}

TEST_CASE("metric helpers") {
    Eigen::VectorXd t(3);
    t << 1.0, 2.0, 3.0;
    CHECK(log_nrmse(t, t, 1.0) == doctest::Approx(std::log(1e-8)));
    Eigen::VectorXd p = t.array() + 0.5;
    CHECK(log_nrmse(p, t, 2.0) == doctest::Approx(std::log(0.25)));

    Eigen::VectorXd q(2);
    q << 0.2, 0.7;
    const double entropy = -(0.2 * std::log(0.2) + 0.8 * std::log(0.8) + 0.7 * std::log(0.7) + 0.3 * std::log(0.3)) / 2.0;
    CHECK(holdout_log_loss(q, q) == doctest::Approx(entropy));
    Eigen::VectorXd off(2);
    off << 0.3, 0.6;
    CHECK(holdout_log_loss(q, off) > entropy);
}

TEST_CASE("cells are reproducible and thread independent") {
    const SimCell cell = tiny_cell(Family::gaussian);
    const auto a = run_cell(cell, 1);
    const auto b = run_cell(cell, 2);
    REQUIRE(a.size() == cell.settings.size() * 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].ok);
        CHECK(std::isfinite(a[i].metric));
        CHECK(a[i].metric == b[i].metric);
        CHECK(a[i].k_median == b[i].k_median);
    }
    // paired design: a smaller-noise cell uses the same surfaces and designs
    SimCell quiet = cell;
    quiet.noise_scale = 0.25;
    const auto c = run_cell(quiet, 1);
    double louder = 0.0, softer = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        louder += a[i].metric;
        softer += c[i].metric;
    }
    CHECK(softer < louder);
}

TEST_CASE("binomial cells produce finite log-loss") {
    SimCell cell = tiny_cell(Family::binomial);
    cell.n_total = 30;
    cell.n_reps = 2;
    const auto r = run_binomial_cell(cell, 1);
    for (const auto& rec : r) {
        if (!rec.ok) continue;
        CHECK(rec.metric > 0.0);
        CHECK(std::isfinite(rec.metric));
    }
    CHECK_THROWS_AS(run_gaussian_cell(cell, 1), ConfigError);
}

TEST_CASE("summaries") {
    RepRecord r;
    r.setting = "s";
    r.n_total = 20;
    r.metric = 1.5;
    r.k_median = 4.0;
    auto one = summarize({r});
    REQUIRE(one.size() == 1);
    CHECK(one[0].mean_metric == 1.5);
    CHECK(one[0].se_metric == 0.0);
    auto two = summarize({r, r});
    CHECK(two[0].count == 2);
    CHECK(two[0].se_metric == 0.0);

    RepRecord bad = r;
    bad.ok = false;
    RepRecord other = r;
    other.metric = 3.5;
    other.setting = "t";
    const std::vector<RepRecord> recs{r, other, bad};
    const std::vector<RepRecord> rev{bad, other, r};
    const auto s1 = summarize(recs), s2 = summarize(rev);
    REQUIRE(s1.size() == 2);
    CHECK(s1[0].count == 1);
    CHECK(s1[1].mean_metric == s2[1].mean_metric);
    CHECK(summary_table(s1).n_rows() == 2);
    CHECK(records_table(recs).column("status").labels[2] == "skipped");
}
