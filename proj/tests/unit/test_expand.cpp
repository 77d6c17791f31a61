#include "svem/error.hpp"
#include "svem/expand.hpp"
#include "svem/rng.hpp"

#include <doctest.h>

#include <functional>
#include <set>

using namespace svem;

namespace {

Dataset make_factors(std::size_t n, int numerics, int levels, std::uint64_t seed = 11) {
    Rng rng(seed);
    Dataset d;
    for (int j = 0; j < numerics; ++j) {
        std::vector<double> x(n);
        for (auto& v : x) v = rng.uniform(-1, 1);
        d.add_numeric("X" + std::to_string(j + 1), std::move(x));
    }
    if (levels > 0) {
        std::vector<std::string> lab(n);
        for (std::size_t i = 0; i < n; ++i) lab[i] = "L" + std::to_string(i % levels + 1);
        d.add_categorical("C", std::move(lab));
    }
    return d;
}

ExpansionOptions options_for(const Dataset& d, int order, int poly) {
    ExpansionOptions o;
    for (const auto& c : d.columns()) o.main_effects.push_back(c.name);
    o.factorial_order = order;
    o.polynomial_order = poly;
    return o;
}

// Counts columns by walking every exponent pattern: numerics in {0..poly},
// the categorical either absent or one of its c-1 contrasts. A pattern is a
// column when it is a pure power of one numeric, or a product of distinct
// factors each at power one with at most `order` factors.
std::size_t brute_force_count(int d, int c, int order, int poly) {
    std::size_t count = 0;
    std::vector<int> e(static_cast<std::size_t>(d), 0);
    std::function<void(int)> rec = [&](int idx) {
        if (idx == d) {
            for (int cat = 0; cat < (c > 0 ? c : 1); ++cat) {  // 0 = absent, 1..c-1 = contrast
                int factors = cat > 0 ? 1 : 0, maxpow = 0;
                for (int v : e) {
                    if (v > 0) ++factors;
                    maxpow = std::max(maxpow, v);
                }
                if (factors == 0) {
                    ++count;  // intercept
                } else if (factors == 1 && cat == 0) {
                    ++count;  // X^p for p in 1..poly
                } else if (maxpow <= 1 && factors <= order) {
                    ++count;
                }
            }
            return;
        }
        for (int p = 0; p <= poly; ++p) {
            e[static_cast<std::size_t>(idx)] = p;
            rec(idx + 1);
        }
    };
    rec(0);
    return count;
}

}  // namespace

TEST_CASE("benchmark expansion dimensions 7 / 25 / 45") {
    const Dataset d = make_factors(40, 4, 3);
    CHECK(term_count(build_expansion_spec(d, options_for(d, 1, 1))) == 7);
    CHECK(term_count(build_expansion_spec(d, options_for(d, 2, 2))) == 25);
    CHECK(term_count(build_expansion_spec(d, options_for(d, 3, 3))) == 45);
}

TEST_CASE("order-2 count identity against brute-force enumeration") {
    for (int d = 1; d <= 5; ++d) {
        for (int c = 2; c <= 4; ++c) {
            const Dataset data = make_factors(30, d, c);
            const auto spec = build_expansion_spec(data, options_for(data, 2, 2));
            const std::size_t formula = 1 + d + (c - 1) + d * (d - 1) / 2 + d * (c - 1) + d;
            CAPTURE(d);
            CAPTURE(c);
            CHECK(term_count(spec) == formula);
            CHECK(term_count(spec) == brute_force_count(d, c, 2, 2));
            CHECK(expand_rows(spec, data).p_full() == formula);
        }
    }
}

TEST_CASE("order-3 enumeration matches brute force") {
    for (int d = 2; d <= 4; ++d) {
        const Dataset data = make_factors(30, d, 3);
        CHECK(term_count(build_expansion_spec(data, options_for(data, 3, 3))) == brute_force_count(d, 3, 3, 3));
    }
}

TEST_CASE("expand_rows is deterministic with an intercept column") {
    const Dataset d = make_factors(25, 4, 3);
    const auto spec = build_expansion_spec(d, options_for(d, 2, 2));
    const auto a = expand_rows(spec, d);
    const auto b = expand_rows(spec, d);
    CHECK(a.values == b.values);
    CHECK(a.values.col(0).isOnes());
    CHECK(a.column_names.front() == "(Intercept)");
    CHECK(derive_terms(spec.factors, spec.options) == spec.terms);

    const std::vector<std::size_t> row{7};
    const auto single = expand_rows(spec, d.select_rows(row));
    CHECK(single.values.row(0) == a.values.row(7));
}

TEST_CASE("term order: mains, categorical mains, blocking, interactions, powers") {
    Dataset d = make_factors(12, 2, 3);
    std::vector<std::string> op(12);
    for (std::size_t i = 0; i < op.size(); ++i) op[i] = i % 2 ? "B" : "A";
    d.add_categorical("Op", op);
    ExpansionOptions o = options_for(make_factors(12, 2, 3), 2, 2);
    o.blocking = {"Op"};
    const auto spec = build_expansion_spec(d, o);
    const std::vector<std::string> expected{"(Intercept)", "X1",         "X2",         "C[L2]",     "C[L3]",
                                            "Op[B]",       "X1:X2",      "X1:C[L2]",   "X1:C[L3]",  "X2:C[L2]",
                                            "X2:C[L3]",    "X1^2",       "X2^2"};
    CHECK(spec.column_names() == expected);
}

TEST_CASE("blocking factors stay additive") {
    Dataset d = make_factors(30, 3, 3);
    Rng rng(5);
    std::vector<double> temp(30);
    for (auto& t : temp) t = rng.uniform(18, 25);
    d.add_numeric("Temp", temp);
    ExpansionOptions o;
    o.main_effects = {"X1", "X2", "X3", "C"};
    o.blocking = {"Temp"};
    o.factorial_order = 3;
    o.polynomial_order = 3;
    o.include_pc_2way = true;
    const auto spec = build_expansion_spec(d, o);
    std::size_t temp_index = spec.factors.size() - 1;
    int appearances = 0;
    for (const auto& t : spec.terms) {
        for (const auto& part : t.parts) {
            if (part.factor == temp_index) {
                CHECK(t.parts.size() == 1);
                CHECK(part.power == 1);
                ++appearances;
            }
        }
    }
    CHECK(appearances == 1);
}

TEST_CASE("partial-cubic terms and deduplication") {
    const Dataset d = make_factors(30, 2, 2);
    ExpansionOptions o = options_for(d, 2, 2);
    o.include_pc_2way = true;
    const auto spec = build_expansion_spec(d, o);
    const auto names = spec.column_names();
    const std::set<std::string> unique(names.begin(), names.end());
    CHECK(unique.size() == names.size());
    CHECK(unique.contains("X1^2:X2"));
    CHECK(unique.contains("X2^2:X1"));
    CHECK(unique.contains("X1^2:C[L2]"));
    // base order-2 count for d=2, c=2 is 1+2+1+1+2+2 = 9; two partial cubics per numeric here
    CHECK(names.size() == 9 + 4);
}

TEST_CASE("reference level gives zero contrast columns") {
    const Dataset d = make_factors(30, 2, 3);
    const auto spec = build_expansion_spec(d, options_for(d, 2, 2));
    const auto X = expand_rows(spec, d);
    const auto& labels = d.column("C").labels;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != "L1") continue;
        for (std::size_t j = 0; j < spec.terms.size(); ++j) {
            for (const auto& part : spec.terms[j].parts) {
                if (spec.factors[part.factor].name == "C") CHECK(X.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == 0.0);
            }
        }
    }
}

TEST_CASE("sum-to-zero coding") {
    const Dataset d = make_factors(6, 1, 3);
    ExpansionOptions o = options_for(d, 1, 1);
    o.coding = ContrastCoding::sum;
    const auto X = expand_rows(build_expansion_spec(d, o), d);
    // rows cycle L1, L2, L3
    CHECK(X.values(0, 2) == 1.0);
    CHECK(X.values(0, 3) == 0.0);
    CHECK(X.values(1, 2) == 0.0);
    CHECK(X.values(1, 3) == 1.0);
    CHECK(X.values(2, 2) == -1.0);
    CHECK(X.values(2, 3) == -1.0);
}

TEST_CASE("expansion contract errors") {
    Dataset d = make_factors(10, 2, 3);
    d.add_numeric("K", std::vector<double>(10, 3.0));
    d.add_categorical("One", std::vector<std::string>(10, "a"));
    ExpansionOptions o;
    o.main_effects = {"X1", "Nope"};
    CHECK_THROWS_AS(build_expansion_spec(d, o), DataError);
    o.main_effects = {"X1", "K"};
    CHECK_THROWS_AS(build_expansion_spec(d, o), DataError);
    o.main_effects = {"X1", "One"};
    CHECK_THROWS_AS(build_expansion_spec(d, o), DataError);
    o.main_effects = {"X1"};
    o.blocking = {"X1"};
    CHECK_THROWS_AS(build_expansion_spec(d, o), ConfigError);
    o.blocking.clear();
    o.factorial_order = 0;
    CHECK_THROWS_AS(build_expansion_spec(d, o), ConfigError);

    const auto spec = build_expansion_spec(d, options_for(make_factors(10, 2, 3), 2, 2));
    Dataset unseen = make_factors(3, 2, 0);
    unseen.add_categorical("C", {"L1", "H104", "L2"});
    CHECK_THROWS_WITH_AS(expand_rows(spec, unseen), doctest::Contains("H104"), DataError);
    CHECK_THROWS_AS(expand_rows(spec, make_factors(3, 2, 0)), DataError);
}
