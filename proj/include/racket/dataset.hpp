#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace racket {

// Feature matrix with binary labels. Missing values are NaN; the missing
// mask is implicit. All rows share the same arity.
struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;  // 0/1

    size_t size() const { return rows.size(); }
    size_t arity() const { return feature_names.size(); }
    size_t count_label(int label) const;
    void check() const;  // throws std::invalid_argument on shape errors

    // Columns that contain at least one missing value.
    std::vector<size_t> columns_with_missing() const;

    // One representative per group of columns whose rows are missing
    // together (e.g. the min/mean/median/max of one summary), so presence
    // indicators are not duplicated.
    std::vector<size_t> indicator_columns() const;

    std::string to_csv() const;
    static Dataset from_csv(const std::string& csv);
};

// Median imputation fit on a training fold; transform replaces NaN with the
// fold median and appends one presence-indicator column per column listed in
// `indicator_columns` (fixed per dataset so fold arity stays constant).
class Imputer {
public:
    static Imputer fit(const Dataset& train, const std::vector<size_t>& indicator_columns);
    Dataset transform(const Dataset& data) const;

private:
    std::vector<double> medians_;
    std::vector<size_t> indicator_columns_;
};

}  // namespace racket
