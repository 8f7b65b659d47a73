#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "racket/stats.hpp"

using namespace racket;

namespace {

// Literal-definition KS statistic: evaluate both ECDFs at every pooled data
// point, O(n*m). Used as the oracle for the sorted-merge implementation.
double ks_statistic_quadratic(const std::vector<double>& a, const std::vector<double>& b) {
    auto ecdf = [](const std::vector<double>& xs, double t) {
        size_t c = 0;
        for (double x : xs)
            if (x <= t) ++c;
        return static_cast<double>(c) / static_cast<double>(xs.size());
    };
    double d = 0.0;
    for (const auto* xs : {&a, &b})
        for (double t : *xs) d = std::max(d, std::fabs(ecdf(a, t) - ecdf(b, t)));
    return d;
}

std::vector<double> draw(std::mt19937_64& rng, size_t n, double shift, double scale,
                         bool heavy_ties) {
    std::normal_distribution<double> nd(shift, scale);
    std::vector<double> out(n);
    for (auto& x : out) {
        x = nd(rng);
        if (heavy_ties) x = std::round(x * 4.0) / 4.0;  // force duplicates
    }
    return out;
}

}  // namespace

TEST_CASE("ks statistic matches the quadratic oracle") {
    std::mt19937_64 rng(20260826);
    for (int rep = 0; rep < 40; ++rep) {
        size_t n = 1 + rng() % 500;
        size_t m = 1 + rng() % 500;
        bool ties = (rep % 2) == 0;
        auto a = draw(rng, n, 0.0, 1.0, ties);
        auto b = draw(rng, m, (rep % 3) * 0.3, 1.0 + 0.2 * (rep % 4), ties);
        auto got = ks_two_sample(a, b);
        CAPTURE(rep);
        CHECK(std::fabs(got.statistic - ks_statistic_quadratic(a, b)) <= 1e-12);
    }
}

TEST_CASE("ks is symmetric and detects identical samples") {
    std::mt19937_64 rng(7);
    auto a = draw(rng, 120, 0.0, 1.0, false);
    auto b = draw(rng, 80, 0.5, 1.0, false);
    auto ab = ks_two_sample(a, b);
    auto ba = ks_two_sample(b, a);
    CHECK(std::fabs(ab.statistic - ba.statistic) <= 1e-15);
    CHECK(std::fabs(ab.pvalue - ba.pvalue) <= 1e-12);

    auto same = ks_two_sample(a, a);
    CHECK(same.statistic == 0.0);
    CHECK(same.pvalue == doctest::Approx(1.0));
}

TEST_CASE("ks rejects empty samples") {
    CHECK_THROWS_AS(ks_two_sample({}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(ks_two_sample({1.0}, {}), std::invalid_argument);
}

TEST_CASE("anova F matches hand-computed fixtures") {
    // Worked example: groups {3,5,7}, {2,4,6}, {10,12,14}.
    // Means 5, 4, 12; grand mean 7. SSB = 3*(4+9+25) = 114, df 2.
    // SSW = 8+8+8 = 24, df 6. F = 57 / 4 = 14.25.
    auto r = anova_oneway({{3, 5, 7}, {2, 4, 6}, {10, 12, 14}});
    CHECK(std::fabs(r.statistic - 14.25) <= 1e-9);
    // p from F(2,6) at 14.25, cross-checked with scipy.stats.f.sf.
    CHECK(r.pvalue == doctest::Approx(0.00526012985945590).epsilon(1e-6));

    // Two groups: F equals the squared pooled-variance t statistic.
    // {1,2,3,4} vs {3,4,5,6}: means 2.5/4.5, s^2 pooled = 5/3,
    // t^2 = (2)^2 / (5/3 * (1/4+1/4)) = 4.8.
    auto r2 = anova_oneway({{1, 2, 3, 4}, {3, 4, 5, 6}});
    CHECK(std::fabs(r2.statistic - 4.8) <= 1e-9);
}

TEST_CASE("anova rejects degenerate input") {
    CHECK_THROWS_AS(anova_oneway({{1.0, 2.0}}), std::invalid_argument);
    CHECK_THROWS_AS(anova_oneway({{1.0}, {}}), std::invalid_argument);
    CHECK_THROWS_AS(anova_oneway({{2.0, 2.0}, {2.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("kruskal-wallis H matches hand-computed fixtures") {
    // No ties: {1,2,3} vs {4,5,6}. Ranks 1..6, R1=6, R2=15.
    // H = 12/(6*7) * (36/3 + 225/3) - 3*7 = 12/42*87 - 21 = 27/7.
    auto r = kruskal_wallis({{1, 2, 3}, {4, 5, 6}});
    CHECK(std::fabs(r.statistic - 27.0 / 7.0) <= 1e-9);

    // With ties: {1,1,2} vs {2,3,3}. Average ranks: 1.5,1.5,3.5 | 3.5,5.5,5.5.
    // R1=6.5, R2=14.5; H0 = 12/42*(42.25/3+210.25/3) - 21 = 64/21.
    // Tie correction: three ties of size 2 -> C = 1 - 18/(216-6) = 32/35.
    // H = H0 / C = 10/3.
    auto rt = kruskal_wallis({{1, 1, 2}, {2, 3, 3}});
    double h0 = 12.0 / 42.0 * ((6.5 * 6.5 + 14.5 * 14.5) / 3.0) - 21.0;
    CHECK(std::fabs(h0 - 64.0 / 21.0) <= 1e-12);
    CHECK(std::fabs(rt.statistic - 10.0 / 3.0) <= 1e-9);

    // scipy.stats.kruskal cross-check on a three-group fixture.
    auto r3 = kruskal_wallis({{2.9, 3.0, 2.5, 2.6, 3.2}, {3.8, 2.7, 4.0, 2.4}, {2.8, 3.4, 3.7, 2.2, 2.0}});
    CHECK(r3.statistic == doctest::Approx(0.7714285714285714).epsilon(1e-9));
    CHECK(r3.pvalue == doctest::Approx(0.6799647735788726).epsilon(1e-6));
}

TEST_CASE("kruskal-wallis is invariant under monotone scaling") {
    std::mt19937_64 rng(99);
    auto a = draw(rng, 60, 0.0, 1.0, true);
    auto b = draw(rng, 45, 0.4, 1.2, true);
    auto base = kruskal_wallis({a, b});
    for (auto& x : a) x = x * 1000.0 + 5.0;
    for (auto& x : b) x = x * 1000.0 + 5.0;
    auto scaled = kruskal_wallis({a, b});
    CHECK(std::fabs(base.statistic - scaled.statistic) <= 1e-9);
}

TEST_CASE("summaries") {
    auto s = summarize({4, 1, 3, 2});
    CHECK(s.n == 4);
    CHECK(s.mean == doctest::Approx(2.5));
    CHECK(s.median == doctest::Approx(2.5));
    CHECK(s.max == 4.0);
    CHECK(s.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(median_of({5, 1, 9}) == 5.0);
}

TEST_CASE("compare_report emits one row per feature with the right tests") {
    std::map<std::string, std::map<std::string, std::vector<double>>> v;
    v["gmail"]["worker"] = {30, 28, 33, 25, 29, 31};
    v["gmail"]["regular"] = {1, 2, 2, 3, 1, 2};
    auto rows = compare_report(v);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].feature == "gmail");
    REQUIRE(rows[0].ks.has_value());
    REQUIRE(rows[0].anova.has_value());
    REQUIRE(rows[0].kruskal.has_value());
    CHECK(rows[0].ks->statistic == 1.0);
    CHECK(rows[0].anova->pvalue < 0.001);
    auto csv = comparison_csv(rows);
    CHECK(csv.find("gmail") != std::string::npos);
    CHECK(csv.find("ks_p") != std::string::npos);
}
