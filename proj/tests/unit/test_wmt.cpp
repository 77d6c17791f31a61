#include "svem/error.hpp"
#include "svem/wmt.hpp"

#include <doctest.h>

#include <cmath>

using namespace svem;

namespace {

Dataset signal_data(int n, std::uint64_t seed, double slope) {
    Rng rng(seed);
    std::vector<double> x1, x2, y, noise;
    for (int i = 0; i < n; ++i) {
        x1.push_back(rng.uniform(-1.0, 1.0));
        x2.push_back(rng.uniform(-1.0, 1.0));
        const double e = rng.normal();
        y.push_back(slope * (2.0 * x1.back() - x2.back()) + 0.3 * e);
        noise.push_back(e);
    }
    Dataset d;
    d.add_numeric("X1", x1);
    d.add_numeric("X2", x2);
    d.add_numeric("Y", y);
    d.add_numeric("N", noise);
    d.add_numeric("Ycopy", y);
    d.add_numeric("Flat", std::vector<double>(static_cast<std::size_t>(n), 4.0));
    return d;
}

ExpansionSpec spec_for(const Dataset& d) {
    ExpansionOptions opt;
    opt.main_effects = {"X1", "X2"};
    return build_expansion_spec(d, opt);
}

SvemOptions quick_svem() {
    SvemOptions o;
    o.B = 10;
    o.seed = 4;
    o.path.nlambda = 25;
    return o;
}

WmtOptions quick_wmt() {
    WmtOptions w;
    w.n_perm = 39;
    w.n_eval_points = 60;
    w.seed = 17;
    return w;
}

}  // namespace

TEST_CASE("multipliers follow -log10 p with a floor and mean one") {
    const std::vector<double> p{0.001, 0.1};
    const auto m = wmt_multipliers(p);
    CHECK(m[0] == doctest::Approx(1.5));
    CHECK(m[1] == doctest::Approx(0.5));
    // p = 1 hits the 0.05 floor
    const std::vector<double> q{1.0, 0.01};
    const auto f = wmt_multipliers(q);
    CHECK(f[0] == doctest::Approx(0.05 / 1.025));
    CHECK(f[1] == doctest::Approx(2.0 / 1.025));
    const std::vector<double> bad{0.0};
    CHECK_THROWS_AS(wmt_multipliers(bad), NumericError);
}

TEST_CASE("add-one permutation p-value") {
    const std::vector<double> perm{1.0, 2.0, 3.0, 4.0};
    CHECK(permutation_p_value(5.0, perm) == doctest::Approx(0.2));
    CHECK(permutation_p_value(3.0, perm) == doctest::Approx(0.6));
    CHECK(permutation_p_value(0.0, perm) == doctest::Approx(1.0));
}

TEST_CASE("response-scale standardization and diagonal distances") {
    Eigen::MatrixXd p(2, 3);
    p << 1, 2, 3, 5, 5, 5;
    const std::vector<double> y{1.0, 3.0};  // mean 2, sd sqrt(2)
    const Eigen::MatrixXd z = standardize_predictions(p, y);
    CHECK(z(0, 0) == doctest::Approx(-1.0 / std::sqrt(2.0)));
    CHECK(z(0, 1) == doctest::Approx(0.0));
    CHECK(z(1, 2) == doctest::Approx(3.0 / std::sqrt(2.0)));

    Eigen::MatrixXd ref(3, 2);
    ref << 0, 0, 2, 4, 4, 8;  // column means (2, 4), variances (4, 16)
    Eigen::MatrixXd v(1, 2);
    v << 4, 0;
    const Eigen::VectorXd d = wmt_distances(ref, v, 0.0);
    CHECK(d[0] == doctest::Approx(std::sqrt(4.0 / 4.0 + 16.0 / 16.0)));
}

TEST_CASE("strong signal is detected, pure noise is not") {
    const Dataset d = signal_data(24, 3, 1.0);
    const ExpansionSpec spec = spec_for(d);
    const WmtResponse strong = wmt_single(spec, d, "Y", {}, quick_svem(), quick_wmt());
    CHECK(strong.p_value == doctest::Approx(1.0 / 40.0));
    CHECK(strong.permuted_distances.size() == 39);
    const WmtResponse noise = wmt_single(spec, d, "N", {}, quick_svem(), quick_wmt());
    CHECK(noise.p_value > 0.05);
}

TEST_CASE("identical responses give identical p-values, constant responses are degenerate") {
    const Dataset d = signal_data(20, 8, 0.2);
    const ExpansionSpec spec = spec_for(d);
    const ResponseSpecs specs{{"Y", spec}, {"Ycopy", spec}, {"Flat", spec}};
    WmtOptions w = quick_wmt();
    w.threads = 2;
    const WmtResult r = wmt_multi(specs, d, {}, quick_svem(), w);
    REQUIRE(r.responses.size() == 3);
    CHECK(r.responses[0].p_value == r.responses[1].p_value);
    CHECK(r.responses[0].original_distance == r.responses[1].original_distance);
    CHECK(r.find("Flat")->degenerate);
    CHECK(r.find("Flat")->p_value == 1.0);
    CHECK(r.find("missing") == nullptr);
    double mean = 0.0;
    for (const auto& x : r.responses) mean += x.multiplier;
    CHECK(mean / 3.0 == doctest::Approx(1.0));

    const Dataset table = wmt_distance_table(r);
    CHECK(table.n_rows() == 2 * 40);
}

TEST_CASE("thread count does not change the result") {
    const Dataset d = signal_data(20, 2, 0.5);
    const ExpansionSpec spec = spec_for(d);
    WmtOptions w = quick_wmt();
    const WmtResponse a = wmt_single(spec, d, "Y", {}, quick_svem(), w);
    w.threads = 3;
    const WmtResponse b = wmt_single(spec, d, "Y", {}, quick_svem(), w);
    CHECK(a.permuted_distances == b.permuted_distances);
    CHECK(a.p_value == b.p_value);
}

TEST_CASE("invalid whole-model test settings") {
    const Dataset d = signal_data(20, 1, 1.0);
    const ExpansionSpec spec = spec_for(d);
    WmtOptions w = quick_wmt();
    w.n_perm = 10;
    CHECK_THROWS_AS(wmt_single(spec, d, "Y", {}, quick_svem(), w), ConfigError);
    SvemOptions b = quick_svem();
    b.family = Family::binomial;
    CHECK_THROWS_AS(wmt_single(spec, d, "Y", {}, b, quick_wmt()), ConfigError);
}
