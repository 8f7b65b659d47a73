#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "racket/dataset.hpp"
#include "racket/models.hpp"

namespace racket {

struct ConfusionCounts {
    size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    double fpr = 0.0;
};

Metrics metrics_from_confusion(const ConfusionCounts& c);

// Rank-statistic AUC (Mann-Whitney) with average ranks for ties.
double auc_from_scores(const std::vector<double>& scores, const std::vector<int>& labels);

enum class Sampling { none, oversample, undersample };
Sampling sampling_from_name(const std::string& name);

struct CrossValParams {
    int folds = 10;
    int repeats = 5;
    Sampling sampling = Sampling::none;
    double smote_ratio = 1.0;
    int smote_k = 5;
    uint64_t seed = 0;
};

struct FoldResult {
    int repeat = 0;
    int fold = 0;
    ConfusionCounts confusion;
    Metrics metrics;
};

struct ModelReport {
    std::string algo;
    Metrics overall;                 // pooled over all folds x repeats
    std::vector<FoldResult> folds;
    std::vector<std::pair<std::string, double>> feature_importances;  // ranked, RF only

    std::string to_csv() const;
    std::string to_table() const;
    std::string to_json() const;
};

// Deterministic stratified fold assignment: fold index per instance.
std::vector<int> stratified_folds(const std::vector<int>& labels, int k, uint64_t seed);

// Repeated stratified k-fold CV. Resampling is applied to the training fold
// only; validation folds contain only original instances. Imputation
// (training-fold medians + presence indicators) is fit inside each fold.
ModelReport cross_validate(Algo algo, const Dataset& data, const CrossValParams& cv,
                           const TrainParams& train_params);

}  // namespace racket
