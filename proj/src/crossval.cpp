#include "racket/crossval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace racket {

Metrics metrics_from_confusion(const ConfusionCounts& c) {
    Metrics m;
    m.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
    m.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                      : 0.0;
    m.fpr = c.fp + c.tn > 0 ? static_cast<double>(c.fp) / (c.fp + c.tn) : 0.0;
    return m;
}

double auc_from_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auc: scores/labels length mismatch");
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    size_t n_pos = 0, n_neg = 0;
    double rank_sum_pos = 0.0;
    for (size_t i = 0; i < order.size();) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        i = j;
    }
    for (int y : labels) (y == 1 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auc: single-class labels");
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (static_cast<double>(n_pos) * n_neg);
}

Sampling sampling_from_name(const std::string& name) {
    if (name == "none") return Sampling::none;
    if (name == "oversample" || name == "smote") return Sampling::oversample;
    if (name == "undersample") return Sampling::undersample;
    throw std::invalid_argument("unknown sampling strategy '" + name + "'");
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int k, uint64_t seed) {
    std::vector<int> fold(labels.size(), -1);
    for (int cls : {0, 1}) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) idx.push_back(i);
        std::mt19937_64 rng(seed ^ (0xabcdef1234567890ULL + cls));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (size_t i = 0; i < idx.size(); ++i) fold[idx[i]] = static_cast<int>(i % k);
    }
    return fold;
}

namespace {

Dataset take(const Dataset& data, const std::vector<int>& fold_of, int fold, bool invert) {
    Dataset out;
    out.feature_names = data.feature_names;
    for (size_t i = 0; i < data.size(); ++i)
        if ((fold_of[i] == fold) != invert) {
            out.rows.push_back(data.rows[i]);
            out.labels.push_back(data.labels[i]);
        }
    return out;
}

Dataset undersample_majority(const Dataset& data, uint64_t seed) {
    size_t n1 = data.count_label(1), n0 = data.count_label(0);
    int majority = n1 > n0 ? 1 : 0;
    size_t keep = std::min(n1, n0);
    std::vector<size_t> maj_idx;
    Dataset out;
    out.feature_names = data.feature_names;
    for (size_t i = 0; i < data.size(); ++i) {
        if (data.labels[i] == majority)
            maj_idx.push_back(i);
        else {
            out.rows.push_back(data.rows[i]);
            out.labels.push_back(data.labels[i]);
        }
    }
    std::mt19937_64 rng(seed);
    std::shuffle(maj_idx.begin(), maj_idx.end(), rng);
    maj_idx.resize(keep);
    std::sort(maj_idx.begin(), maj_idx.end());
    for (size_t i : maj_idx) {
        out.rows.push_back(data.rows[i]);
        out.labels.push_back(data.labels[i]);
    }
    return out;
}

}  // namespace

ModelReport cross_validate(Algo algo, const Dataset& data, const CrossValParams& cv,
                           const TrainParams& train_params) {
    data.check();
    if (data.size() < static_cast<size_t>(cv.folds))
        throw std::invalid_argument("not enough instances for stratified k folds");

    const std::vector<size_t> indicator_cols = data.indicator_columns();

    ModelReport report;
    report.algo = algo_name(algo);
    ConfusionCounts pooled;
    std::vector<double> pooled_scores;
    std::vector<int> pooled_labels;

    for (int repeat = 0; repeat < cv.repeats; ++repeat) {
        uint64_t repeat_seed = cv.seed + 1000003ULL * (repeat + 1);
        std::vector<int> fold_of = stratified_folds(data.labels, cv.folds, repeat_seed);
        for (int fold = 0; fold < cv.folds; ++fold) {
            Dataset train_set = take(data, fold_of, fold, /*invert=*/true);
            Dataset val_set = take(data, fold_of, fold, /*invert=*/false);
            if (val_set.count_label(0) == 0 || val_set.count_label(1) == 0)
                throw std::invalid_argument("fold contains a single class after stratification");

            Imputer imputer = Imputer::fit(train_set, indicator_cols);
            Dataset train_imp = imputer.transform(train_set);
            Dataset val_imp = imputer.transform(val_set);

            uint64_t fold_seed = repeat_seed + 31ULL * fold;
            // Resampling happens after imputation and never touches val_imp.
            if (cv.sampling == Sampling::oversample)
                train_imp = smote(train_imp, cv.smote_ratio, cv.smote_k, fold_seed);
            else if (cv.sampling == Sampling::undersample)
                train_imp = undersample_majority(train_imp, fold_seed);

            TrainParams tp = train_params;
            tp.seed = fold_seed;
            std::unique_ptr<Model> model = train(algo, train_imp, tp);

            FoldResult fr;
            fr.repeat = repeat;
            fr.fold = fold;
            std::vector<double> scores;
            for (size_t i = 0; i < val_imp.size(); ++i) {
                double s = model->score(val_imp.rows[i]);
                scores.push_back(s);
                int pred = s >= 0.5 ? 1 : 0;
                int truth = val_imp.labels[i];
                if (pred == 1 && truth == 1) fr.confusion.tp++;
                else if (pred == 1 && truth == 0) fr.confusion.fp++;
                else if (pred == 0 && truth == 0) fr.confusion.tn++;
                else fr.confusion.fn++;
            }
            fr.metrics = metrics_from_confusion(fr.confusion);
            fr.metrics.auc = auc_from_scores(scores, val_imp.labels);
            report.folds.push_back(fr);

            pooled.tp += fr.confusion.tp;
            pooled.fp += fr.confusion.fp;
            pooled.tn += fr.confusion.tn;
            pooled.fn += fr.confusion.fn;
            pooled_scores.insert(pooled_scores.end(), scores.begin(), scores.end());
            pooled_labels.insert(pooled_labels.end(), val_imp.labels.begin(),
                                 val_imp.labels.end());
        }
    }
    report.overall = metrics_from_confusion(pooled);
    report.overall.auc = auc_from_scores(pooled_scores, pooled_labels);

    if (algo == Algo::random_forest) {
        Imputer imputer = Imputer::fit(data, indicator_cols);
        Dataset full = imputer.transform(data);
        TrainParams tp = train_params;
        tp.seed = cv.seed;
        std::unique_ptr<Model> model = train(algo, full, tp);
        std::vector<double> imp = gini_importance(*model);
        for (size_t c = 0; c < imp.size(); ++c)
            report.feature_importances.push_back({full.feature_names[c], imp[c]});
        std::stable_sort(report.feature_importances.begin(), report.feature_importances.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
    }
    return report;
}

std::string ModelReport::to_csv() const {
    std::ostringstream os;
    os << "algo,scope,precision,recall,f1,auc,fpr\n";
    os.precision(6);
    os << algo << ",overall," << overall.precision << ',' << overall.recall << ',' << overall.f1
       << ',' << overall.auc << ',' << overall.fpr << '\n';
    for (const auto& f : folds)
        os << algo << ",r" << f.repeat << "f" << f.fold << ',' << f.metrics.precision << ','
           << f.metrics.recall << ',' << f.metrics.f1 << ',' << f.metrics.auc << ','
           << f.metrics.fpr << '\n';
    return os.str();
}

std::string ModelReport::to_table() const {
    std::ostringstream os;
    os.precision(4);
    os << algo << ": precision=" << overall.precision * 100 << "% recall=" << overall.recall * 100
       << "% f1=" << overall.f1 * 100 << "% auc=" << overall.auc
       << " fpr=" << overall.fpr * 100 << "%\n";
    if (!feature_importances.empty()) {
        os << "top features by mean decrease in Gini:\n";
        for (size_t i = 0; i < feature_importances.size() && i < 10; ++i)
            os << "  " << i + 1 << ". " << feature_importances[i].first << " "
               << feature_importances[i].second << "\n";
    }
    return os.str();
}

std::string ModelReport::to_json() const {
    nlohmann::json folds_json = nlohmann::json::array();
    for (const auto& f : folds)
        folds_json.push_back({{"repeat", f.repeat},
                              {"fold", f.fold},
                              {"precision", f.metrics.precision},
                              {"recall", f.metrics.recall},
                              {"f1", f.metrics.f1},
                              {"auc", f.metrics.auc},
                              {"fpr", f.metrics.fpr}});
    nlohmann::json imp = nlohmann::json::array();
    for (const auto& [name, v] : feature_importances) imp.push_back({name, v});
    return nlohmann::json{{"algo", algo},
                          {"precision", overall.precision},
                          {"recall", overall.recall},
                          {"f1", overall.f1},
                          {"auc", overall.auc},
                          {"fpr", overall.fpr},
                          {"folds", folds_json},
                          {"feature_importances", imp}}
        .dump(2);
}

}  // namespace racket
