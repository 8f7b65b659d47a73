#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "racket/dataset.hpp"

namespace racket {

enum class Algo { logistic_regression, knn, random_forest };

Algo algo_from_name(const std::string& name);
std::string algo_name(Algo a);

// A trained binary classifier; score in [0,1], label at threshold 0.5.
// Inputs must already be imputed (no NaN); per-algorithm scaling is fit at
// train time and baked into the model.
class Model {
public:
    virtual ~Model() = default;
    virtual double score(const std::vector<double>& x) const = 0;
    virtual std::string serialize_payload() const = 0;  // JSON
    virtual Algo algo() const = 0;
    int predict(const std::vector<double>& x) const { return score(x) >= 0.5 ? 1 : 0; }
};

struct LogisticRegressionParams {
    double l2 = 1e-4;
    int max_iterations = 100;
    double tolerance = 1e-10;
};

struct KnnParams {
    int k = 5;
};

struct RandomForestParams {
    int n_trees = 100;
    int max_depth = 16;
    int min_samples_leaf = 2;
    int max_features = 0;  // 0 => floor(sqrt(arity))
};

struct TrainParams {
    LogisticRegressionParams lr;
    KnnParams knn;
    RandomForestParams rf;
    uint64_t seed = 0;
};

// Throws std::invalid_argument on single-class or otherwise degenerate data.
std::unique_ptr<Model> train(Algo algo, const Dataset& data, const TrainParams& params);

// Regularized negative log-likelihood of logistic regression and its exact
// gradient; exposed for the finite-difference oracle. Weights include the
// intercept as the last element.
double lr_negative_log_likelihood(const std::vector<double>& weights,
                                  const std::vector<std::vector<double>>& X,
                                  const std::vector<int>& y, double l2);
std::vector<double> lr_gradient(const std::vector<double>& weights,
                                const std::vector<std::vector<double>>& X,
                                const std::vector<int>& y, double l2);

// Mean decrease in Gini, normalized to sum 1. Throws std::invalid_argument
// when the model is not a random forest.
std::vector<double> gini_importance(const Model& model);

// Versioned binary container with an embedded feature-name manifest.
void save_model(const Model& model, const std::vector<std::string>& feature_names,
                const std::filesystem::path& path);
struct LoadedModel {
    std::unique_ptr<Model> model;
    std::vector<std::string> feature_names;
};
LoadedModel load_model(const std::filesystem::path& path);

// SMOTE: oversamples the minority class until minority/majority reaches
// target_ratio. Every synthetic row lies on the segment between a minority
// row and one of its k nearest minority neighbors. Requires a minority class
// of size >= 2 and k >= 1; input must contain no missing values.
Dataset smote(const Dataset& data, double target_ratio, int k, uint64_t seed);

}  // namespace racket
