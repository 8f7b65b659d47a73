#include "racket/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace racket {

size_t Dataset::count_label(int label) const {
    return static_cast<size_t>(std::count(labels.begin(), labels.end(), label));
}

void Dataset::check() const {
    if (rows.size() != labels.size())
        throw std::invalid_argument("dataset: rows and labels differ in length");
    for (const auto& r : rows)
        if (r.size() != feature_names.size())
            throw std::invalid_argument("dataset: row arity mismatch");
    for (int y : labels)
        if (y != 0 && y != 1) throw std::invalid_argument("dataset: labels must be 0/1");
}

std::vector<size_t> Dataset::columns_with_missing() const {
    std::vector<size_t> cols;
    for (size_t c = 0; c < arity(); ++c)
        for (const auto& r : rows)
            if (std::isnan(r[c])) {
                cols.push_back(c);
                break;
            }
    return cols;
}

std::vector<size_t> Dataset::indicator_columns() const {
    std::vector<size_t> out;
    std::map<std::vector<bool>, size_t> seen;
    for (size_t c : columns_with_missing()) {
        std::vector<bool> mask(rows.size());
        for (size_t i = 0; i < rows.size(); ++i) mask[i] = std::isnan(rows[i][c]);
        if (seen.emplace(std::move(mask), c).second) out.push_back(c);
    }
    return out;
}

std::string Dataset::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    for (size_t c = 0; c < feature_names.size(); ++c) os << feature_names[c] << ',';
    os << "label\n";
    for (size_t i = 0; i < rows.size(); ++i) {
        for (double v : rows[i]) {
            if (!std::isnan(v)) os << v;
            os << ',';
        }
        os << labels[i] << '\n';
    }
    return os.str();
}

Dataset Dataset::from_csv(const std::string& csv) {
    Dataset d;
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty csv");
    std::istringstream hl(line);
    std::string cell;
    std::vector<std::string> header;
    while (std::getline(hl, cell, ',')) header.push_back(cell);
    if (header.empty() || header.back() != "label")
        throw std::invalid_argument("csv: last column must be 'label'");
    d.feature_names.assign(header.begin(), header.end() - 1);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        size_t pos = 0;
        for (size_t c = 0; c < d.feature_names.size(); ++c) {
            size_t comma = line.find(',', pos);
            if (comma == std::string::npos) throw std::invalid_argument("csv: short row");
            std::string v = line.substr(pos, comma - pos);
            row.push_back(v.empty() ? std::nan("") : std::stod(v));
            pos = comma + 1;
        }
        d.rows.push_back(std::move(row));
        d.labels.push_back(std::stoi(line.substr(pos)));
    }
    d.check();
    return d;
}

Imputer Imputer::fit(const Dataset& train, const std::vector<size_t>& indicator_columns) {
    Imputer imp;
    imp.indicator_columns_ = indicator_columns;
    imp.medians_.resize(train.arity(), 0.0);
    for (size_t c = 0; c < train.arity(); ++c) {
        std::vector<double> present;
        for (const auto& r : train.rows)
            if (!std::isnan(r[c])) present.push_back(r[c]);
        if (!present.empty()) {
            std::sort(present.begin(), present.end());
            size_t n = present.size();
            imp.medians_[c] =
                n % 2 == 1 ? present[n / 2] : 0.5 * (present[n / 2 - 1] + present[n / 2]);
        }
    }
    return imp;
}

Dataset Imputer::transform(const Dataset& data) const {
    Dataset out;
    out.feature_names = data.feature_names;
    for (size_t c : indicator_columns_)
        out.feature_names.push_back(data.feature_names[c] + "_present");
    out.labels = data.labels;
    out.rows.reserve(data.rows.size());
    for (const auto& r : data.rows) {
        std::vector<double> row = r;
        for (size_t c = 0; c < row.size(); ++c)
            if (std::isnan(row[c])) row[c] = medians_[c];
        for (size_t c : indicator_columns_) row.push_back(std::isnan(r[c]) ? 0.0 : 1.0);
        out.rows.push_back(std::move(row));
    }
    return out;
}

}  // namespace racket
