#include "racket/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

namespace racket {

double median_of(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("median of empty sample");
    std::sort(xs.begin(), xs.end());
    size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

SampleSummary summarize(const std::vector<double>& xs) {
    SampleSummary s;
    s.n = xs.size();
    if (xs.empty()) return s;
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    s.median = median_of(xs);
    s.max = *std::max_element(xs.begin(), xs.end());
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = xs.size() > 1 ? std::sqrt(ss / (xs.size() - 1)) : 0.0;
    return s;
}

namespace {

// Kolmogorov survival function Q(t) = 2 * sum_{j>=1} (-1)^{j-1} exp(-2 j^2 t^2).
double kolmogorov_q(double t) {
    if (t <= 0.0) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        double term = 2.0 * std::pow(-1.0, j - 1) * std::exp(-2.0 * j * j * t * t);
        sum += term;
        if (std::abs(term) < 1e-16) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

}  // namespace

TestResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    size_t i = 0, j = 0;
    double d = 0.0;
    const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
    while (i < sa.size() && j < sb.size()) {
        double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] <= x) ++i;
        while (j < sb.size() && sb[j] <= x) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    double en = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_q(en * d)};
}

TestResult anova_oneway(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw std::invalid_argument("anova: need >= 2 groups");
    size_t total_n = 0;
    double grand_sum = 0.0;
    for (const auto& g : groups) {
        if (g.empty()) throw std::invalid_argument("anova: empty group");
        total_n += g.size();
        grand_sum += std::accumulate(g.begin(), g.end(), 0.0);
    }
    const double grand_mean = grand_sum / total_n;
    double ssb = 0.0, ssw = 0.0;
    for (const auto& g : groups) {
        double m = std::accumulate(g.begin(), g.end(), 0.0) / g.size();
        ssb += g.size() * (m - grand_mean) * (m - grand_mean);
        for (double x : g) ssw += (x - m) * (x - m);
    }
    const double df1 = static_cast<double>(groups.size() - 1);
    const double df2 = static_cast<double>(total_n - groups.size());
    if (df2 <= 0) throw std::invalid_argument("anova: not enough observations");
    if (ssw == 0.0 && ssb == 0.0) throw std::invalid_argument("anova: undefined F (zero variance)");
    if (ssw == 0.0) return {std::numeric_limits<double>::infinity(), 0.0};
    const double f = (ssb / df1) / (ssw / df2);
    boost::math::fisher_f dist(df1, df2);
    return {f, boost::math::cdf(boost::math::complement(dist, f))};
}

TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw std::invalid_argument("kruskal: need >= 2 groups");
    struct Obs {
        double value;
        size_t group;
    };
    std::vector<Obs> pooled;
    for (size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw std::invalid_argument("kruskal: empty group");
        for (double x : groups[g]) pooled.push_back({x, g});
    }
    std::sort(pooled.begin(), pooled.end(),
              [](const Obs& a, const Obs& b) { return a.value < b.value; });
    const size_t n = pooled.size();
    std::vector<double> rank(n);
    double tie_sum = 0.0;  // sum of t^3 - t over tie groups
    for (size_t i = 0; i < n;) {
        size_t j = i;
        while (j < n && pooled[j].value == pooled[i].value) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (size_t k = i; k < j; ++k) rank[k] = avg_rank;
        const double t = static_cast<double>(j - i);
        tie_sum += t * t * t - t;
        i = j;
    }
    std::vector<double> rank_sum(groups.size(), 0.0);
    for (size_t i = 0; i < n; ++i) rank_sum[pooled[i].group] += rank[i];
    const double dn = static_cast<double>(n);
    double h = 0.0;
    for (size_t g = 0; g < groups.size(); ++g)
        h += rank_sum[g] * rank_sum[g] / groups[g].size();
    h = 12.0 / (dn * (dn + 1.0)) * h - 3.0 * (dn + 1.0);
    const double correction = 1.0 - tie_sum / (dn * dn * dn - dn);
    if (correction <= 0.0)
        throw std::invalid_argument("kruskal: all observations tied");
    h /= correction;
    boost::math::chi_squared dist(static_cast<double>(groups.size() - 1));
    double p = h <= 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, h));
    return {h, p};
}

std::vector<GroupComparison> compare_report(
    const std::map<std::string, std::map<std::string, std::vector<double>>>&
        values_by_feature_then_group) {
    std::vector<GroupComparison> out;
    for (const auto& [feature, by_group] : values_by_feature_then_group) {
        GroupComparison row;
        row.feature = feature;
        std::vector<std::vector<double>> groups;
        for (const auto& [name, values] : by_group) {
            row.group_names.push_back(name);
            row.group_stats.push_back(summarize(values));
            groups.push_back(values);
        }
        bool all_nonempty = std::all_of(groups.begin(), groups.end(),
                                        [](const auto& g) { return !g.empty(); });
        if (groups.size() >= 2 && all_nonempty) {
            if (groups.size() == 2) {
                try {
                    row.ks = ks_two_sample(groups[0], groups[1]);
                } catch (const std::invalid_argument&) {}
            }
            try {
                row.anova = anova_oneway(groups);
            } catch (const std::invalid_argument&) {}
            try {
                row.kruskal = kruskal_wallis(groups);
            } catch (const std::invalid_argument&) {}
        }
        out.push_back(std::move(row));
    }
    return out;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

std::string comparison_csv(const std::vector<GroupComparison>& rows) {
    std::ostringstream os;
    os << "feature,group,n,mean,median,sd,max,ks_statistic,ks_pvalue,anova_f,anova_pvalue,"
          "kruskal_h,kruskal_pvalue\n";
    for (const auto& row : rows)
        for (size_t g = 0; g < row.group_names.size(); ++g) {
            const auto& s = row.group_stats[g];
            os << row.feature << ',' << row.group_names[g] << ',' << s.n << ',' << fmt(s.mean)
               << ',' << fmt(s.median) << ',' << fmt(s.sd) << ',' << fmt(s.max) << ',';
            if (row.ks) os << fmt(row.ks->statistic) << ',' << fmt(row.ks->pvalue);
            else os << "n/a,n/a";
            os << ',';
            if (row.anova) os << fmt(row.anova->statistic) << ',' << fmt(row.anova->pvalue);
            else os << "n/a,n/a";
            os << ',';
            if (row.kruskal) os << fmt(row.kruskal->statistic) << ',' << fmt(row.kruskal->pvalue);
            else os << "n/a,n/a";
            os << '\n';
        }
    return os.str();
}

std::string comparison_table(const std::vector<GroupComparison>& rows) {
    std::ostringstream os;
    for (const auto& row : rows) {
        os << row.feature << "\n";
        for (size_t g = 0; g < row.group_names.size(); ++g) {
            const auto& s = row.group_stats[g];
            os << "  " << row.group_names[g] << ": n=" << s.n << " mean=" << fmt(s.mean)
               << " median=" << fmt(s.median) << " sd=" << fmt(s.sd) << " max=" << fmt(s.max)
               << "\n";
        }
        if (row.ks)
            os << "  KS D=" << fmt(row.ks->statistic) << " p=" << fmt(row.ks->pvalue) << "\n";
        if (row.anova)
            os << "  ANOVA F=" << fmt(row.anova->statistic) << " p=" << fmt(row.anova->pvalue)
               << "\n";
        if (row.kruskal)
            os << "  Kruskal-Wallis H=" << fmt(row.kruskal->statistic)
               << " p=" << fmt(row.kruskal->pvalue) << "\n";
    }
    return os.str();
}

}  // namespace racket
