#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace racket {

struct TestResult {
    double statistic = 0.0;
    double pvalue = 1.0;
};

struct SampleSummary {
    size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
    double sd = 0.0;
    double max = 0.0;
};

SampleSummary summarize(const std::vector<double>& xs);
double median_of(std::vector<double> xs);

// Two-sample Kolmogorov-Smirnov: statistic = sup |ECDF_a - ECDF_b|, p-value
// from the asymptotic Kolmogorov distribution (intended for n >= 50 per
// group). Throws std::invalid_argument on an empty sample.
TestResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b);

// One-way ANOVA F test; throws std::invalid_argument with fewer than 2
// groups, an empty group, or zero between- and within-group variance.
TestResult anova_oneway(const std::vector<std::vector<double>>& groups);

// Kruskal-Wallis H with tie correction; p-value from chi-square (k-1 df).
TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

struct GroupComparison {
    std::string feature;
    std::vector<std::string> group_names;
    std::vector<SampleSummary> group_stats;
    std::optional<TestResult> ks;       // two groups only
    std::optional<TestResult> anova;    // n/a for single-group input
    std::optional<TestResult> kruskal;
};

// One comparison per feature; rows are (group label, feature values).
std::vector<GroupComparison> compare_report(
    const std::map<std::string, std::map<std::string, std::vector<double>>>&
        values_by_feature_then_group);

std::string comparison_csv(const std::vector<GroupComparison>& rows);
std::string comparison_table(const std::vector<GroupComparison>& rows);

}  // namespace racket
