#include "racket/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace racket {

using nlohmann::json;

Algo algo_from_name(const std::string& name) {
    if (name == "lr" || name == "logistic_regression") return Algo::logistic_regression;
    if (name == "knn") return Algo::knn;
    if (name == "rf" || name == "random_forest") return Algo::random_forest;
    throw std::invalid_argument("unknown algorithm '" + name + "'");
}

std::string algo_name(Algo a) {
    switch (a) {
        case Algo::logistic_regression: return "logistic_regression";
        case Algo::knn: return "knn";
        case Algo::random_forest: return "random_forest";
    }
    return "?";
}

namespace {

void check_trainable(const Dataset& data) {
    data.check();
    if (data.count_label(0) < 2 || data.count_label(1) < 2)
        throw std::invalid_argument("need >= 2 instances per class");
    for (const auto& r : data.rows)
        for (double v : r)
            if (std::isnan(v)) throw std::invalid_argument("missing values must be imputed");
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Gaussian elimination with partial pivoting; A is square, row-major.
std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
    const size_t n = b.size();
    for (size_t col = 0; col < n; ++col) {
        size_t pivot = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        if (std::abs(a[col][col]) < 1e-300) throw std::runtime_error("singular system");
        for (size_t r = col + 1; r < n; ++r) {
            double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (size_t r = n; r-- > 0;) {
        double s = b[r];
        for (size_t c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return x;
}

// ---------------------------------------------------------------- logistic

class LogisticRegressionModel : public Model {
public:
    std::vector<double> weights;  // arity + 1, intercept last (scaled space)
    std::vector<double> means, sds;

    double score(const std::vector<double>& x) const override {
        double z = weights.back();
        for (size_t c = 0; c < means.size(); ++c)
            z += weights[c] * (x[c] - means[c]) / sds[c];
        return sigmoid(z);
    }
    Algo algo() const override { return Algo::logistic_regression; }
    std::string serialize_payload() const override {
        return json{{"weights", weights}, {"means", means}, {"sds", sds}}.dump();
    }
};

std::unique_ptr<LogisticRegressionModel> train_lr(const Dataset& data,
                                                  const LogisticRegressionParams& p) {
    const size_t n = data.size(), d = data.arity();
    auto model = std::make_unique<LogisticRegressionModel>();
    model->means.assign(d, 0.0);
    model->sds.assign(d, 1.0);
    for (size_t c = 0; c < d; ++c) {
        double m = 0.0;
        for (const auto& r : data.rows) m += r[c];
        m /= n;
        double ss = 0.0;
        for (const auto& r : data.rows) ss += (r[c] - m) * (r[c] - m);
        double sd = std::sqrt(ss / n);
        model->means[c] = m;
        model->sds[c] = sd > 1e-12 ? sd : 1.0;
    }
    std::vector<std::vector<double>> xs(n, std::vector<double>(d));
    for (size_t i = 0; i < n; ++i)
        for (size_t c = 0; c < d; ++c)
            xs[i][c] = (data.rows[i][c] - model->means[c]) / model->sds[c];

    // Newton / IRLS on the ridge-regularized log-likelihood. Weight d is the
    // intercept (implicit all-ones column).
    std::vector<double> w(d + 1, 0.0);
    double prev_nll = lr_negative_log_likelihood(w, xs, data.labels, p.l2);
    for (int iter = 0; iter < p.max_iterations; ++iter) {
        std::vector<double> grad = lr_gradient(w, xs, data.labels, p.l2);
        std::vector<std::vector<double>> hess(d + 1, std::vector<double>(d + 1, 0.0));
        auto xv = [&](size_t i, size_t a) { return a < d ? xs[i][a] : 1.0; };
        for (size_t i = 0; i < n; ++i) {
            double z = std::inner_product(xs[i].begin(), xs[i].end(), w.begin(), 0.0) + w[d];
            double pi = sigmoid(z);
            double s = std::max(pi * (1.0 - pi), 1e-12);
            for (size_t a = 0; a <= d; ++a)
                for (size_t b = a; b <= d; ++b) hess[a][b] += s * xv(i, a) * xv(i, b);
        }
        for (size_t a = 0; a <= d; ++a) {
            for (size_t b = 0; b < a; ++b) hess[a][b] = hess[b][a];
            hess[a][a] += p.l2 + 1e-10;
        }
        std::vector<double> step = solve_linear(std::move(hess), grad);
        // Backtracking keeps Newton from overshooting on separable data.
        double t = 1.0;
        for (int bt = 0; bt < 30; ++bt, t *= 0.5) {
            std::vector<double> cand = w;
            for (size_t c = 0; c <= d; ++c) cand[c] -= t * step[c];
            double nll = lr_negative_log_likelihood(cand, xs, data.labels, p.l2);
            if (nll <= prev_nll) {
                w = std::move(cand);
                if (prev_nll - nll < p.tolerance * std::max(1.0, prev_nll)) {
                    prev_nll = nll;
                    iter = p.max_iterations;  // converged
                }
                prev_nll = nll;
                break;
            }
        }
    }
    model->weights = std::move(w);
    return model;
}

// --------------------------------------------------------------------- knn

class KnnModel : public Model {
public:
    int k = 5;
    std::vector<double> lo, range;  // min-max scaling from the training fold
    std::vector<std::vector<double>> train_rows;  // scaled
    std::vector<int> train_labels;

    double score(const std::vector<double>& x) const override {
        std::vector<double> q(lo.size());
        for (size_t c = 0; c < lo.size(); ++c) q[c] = (x[c] - lo[c]) / range[c];
        std::vector<std::pair<double, size_t>> dist;
        dist.reserve(train_rows.size());
        for (size_t i = 0; i < train_rows.size(); ++i) {
            double d2 = 0.0;
            for (size_t c = 0; c < q.size(); ++c) {
                double diff = q[c] - train_rows[i][c];
                d2 += diff * diff;
            }
            dist.push_back({d2, i});
        }
        size_t kk = std::min<size_t>(k, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
        int pos = 0;
        for (size_t i = 0; i < kk; ++i) pos += train_labels[dist[i].second];
        return static_cast<double>(pos) / static_cast<double>(kk);
    }
    Algo algo() const override { return Algo::knn; }
    std::string serialize_payload() const override {
        return json{{"k", k},
                    {"lo", lo},
                    {"range", range},
                    {"rows", train_rows},
                    {"labels", train_labels}}
            .dump();
    }
};

std::unique_ptr<KnnModel> train_knn(const Dataset& data, const KnnParams& p) {
    auto model = std::make_unique<KnnModel>();
    model->k = p.k;
    const size_t d = data.arity();
    model->lo.assign(d, 0.0);
    model->range.assign(d, 1.0);
    for (size_t c = 0; c < d; ++c) {
        double lo = data.rows[0][c], hi = lo;
        for (const auto& r : data.rows) {
            lo = std::min(lo, r[c]);
            hi = std::max(hi, r[c]);
        }
        model->lo[c] = lo;
        model->range[c] = hi - lo > 1e-12 ? hi - lo : 1.0;
    }
    model->train_rows.reserve(data.size());
    for (const auto& r : data.rows) {
        std::vector<double> scaled(d);
        for (size_t c = 0; c < d; ++c) scaled[c] = (r[c] - model->lo[c]) / model->range[c];
        model->train_rows.push_back(std::move(scaled));
    }
    model->train_labels = data.labels;
    return model;
}

// -------------------------------------------------------------------- forest

struct TreeNode {
    int feature = -1;        // -1 => leaf
    double threshold = 0.0;  // go left when x[feature] <= threshold
    int left = -1, right = -1;
    double value = 0.0;      // leaf positive fraction
};

class RandomForestModel : public Model {
public:
    std::vector<std::vector<TreeNode>> trees;
    std::vector<double> importances;  // mean decrease in Gini, sums to 1

    double score(const std::vector<double>& x) const override {
        double s = 0.0;
        for (const auto& tree : trees) {
            int node = 0;
            while (tree[node].feature >= 0)
                node = x[tree[node].feature] <= tree[node].threshold ? tree[node].left
                                                                     : tree[node].right;
            s += tree[node].value;
        }
        return s / trees.size();
    }
    Algo algo() const override { return Algo::random_forest; }
    std::string serialize_payload() const override {
        json jt = json::array();
        for (const auto& tree : trees) {
            json nodes = json::array();
            for (const auto& n : tree)
                nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
            jt.push_back(nodes);
        }
        return json{{"trees", jt}, {"importances", importances}}.dump();
    }
};

struct TreeBuilder {
    const Dataset& data;
    const RandomForestParams& params;
    std::mt19937_64& rng;
    int max_features;
    std::vector<TreeNode> nodes;
    std::vector<double>& importance_acc;  // per original feature
    double n_total;

    double gini(size_t pos, size_t n) const {
        if (n == 0) return 0.0;
        double p = static_cast<double>(pos) / n;
        return 2.0 * p * (1.0 - p);
    }

    int build(std::vector<size_t>& idx, size_t begin, size_t end, int depth) {
        const size_t n = end - begin;
        size_t pos = 0;
        for (size_t i = begin; i < end; ++i) pos += data.labels[idx[i]];
        const double node_gini = gini(pos, n);

        int node_id = static_cast<int>(nodes.size());
        nodes.push_back({});
        nodes[node_id].value = static_cast<double>(pos) / n;

        if (depth >= params.max_depth || node_gini == 0.0 ||
            n < 2 * static_cast<size_t>(params.min_samples_leaf))
            return node_id;

        // Random feature subset, then exact best split on each.
        std::vector<int> features(data.arity());
        std::iota(features.begin(), features.end(), 0);
        for (int f = 0; f < max_features && f < static_cast<int>(features.size()); ++f) {
            std::uniform_int_distribution<size_t> pick(f, features.size() - 1);
            std::swap(features[f], features[pick(rng)]);
        }

        int best_feature = -1;
        double best_threshold = 0.0, best_score = node_gini;
        std::vector<std::pair<double, int>> vals(n);
        for (int f = 0; f < max_features && f < static_cast<int>(features.size()); ++f) {
            int feat = features[f];
            for (size_t i = 0; i < n; ++i)
                vals[i] = {data.rows[idx[begin + i]][feat], data.labels[idx[begin + i]]};
            std::sort(vals.begin(), vals.end());
            size_t left_pos = 0;
            for (size_t i = 0; i + 1 < n; ++i) {
                left_pos += vals[i].second;
                if (vals[i].first == vals[i + 1].first) continue;
                size_t nl = i + 1, nr = n - nl;
                if (nl < static_cast<size_t>(params.min_samples_leaf) ||
                    nr < static_cast<size_t>(params.min_samples_leaf))
                    continue;
                double weighted = (static_cast<double>(nl) / n) * gini(left_pos, nl) +
                                  (static_cast<double>(nr) / n) * gini(pos - left_pos, nr);
                if (weighted < best_score - 1e-15) {
                    best_score = weighted;
                    best_feature = feat;
                    best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
                }
            }
        }
        if (best_feature < 0) return node_id;

        importance_acc[best_feature] += (n / n_total) * (node_gini - best_score);

        auto mid = std::partition(idx.begin() + begin, idx.begin() + end, [&](size_t i) {
            return data.rows[i][best_feature] <= best_threshold;
        });
        size_t split = static_cast<size_t>(mid - idx.begin());
        nodes[node_id].feature = best_feature;
        nodes[node_id].threshold = best_threshold;
        nodes[node_id].left = build(idx, begin, split, depth + 1);
        nodes[node_id].right = build(idx, split, end, depth + 1);
        return node_id;
    }
};

std::unique_ptr<RandomForestModel> train_rf(const Dataset& data, const RandomForestParams& p,
                                            uint64_t seed) {
    auto model = std::make_unique<RandomForestModel>();
    const size_t n = data.size();
    int max_features = p.max_features > 0
                           ? p.max_features
                           : std::max(1, static_cast<int>(std::sqrt(data.arity())));
    std::vector<double> importances(data.arity(), 0.0);
    for (int t = 0; t < p.n_trees; ++t) {
        std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + t);
        std::vector<size_t> idx(n);
        std::uniform_int_distribution<size_t> pick(0, n - 1);
        for (size_t i = 0; i < n; ++i) idx[i] = pick(rng);
        std::vector<double> tree_importance(data.arity(), 0.0);
        TreeBuilder builder{data, p, rng, max_features, {}, tree_importance,
                            static_cast<double>(n)};
        builder.build(idx, 0, n, 0);
        model->trees.push_back(std::move(builder.nodes));
        for (size_t c = 0; c < data.arity(); ++c) importances[c] += tree_importance[c];
    }
    double total = std::accumulate(importances.begin(), importances.end(), 0.0);
    if (total > 0.0)
        for (double& v : importances) v /= total;
    model->importances = std::move(importances);
    return model;
}

}  // namespace

double lr_negative_log_likelihood(const std::vector<double>& weights,
                                  const std::vector<std::vector<double>>& X,
                                  const std::vector<int>& y, double l2) {
    double nll = 0.0;
    for (size_t i = 0; i < X.size(); ++i) {
        if (X[i].size() + 1 != weights.size())
            throw std::invalid_argument("lr: row arity must be weights.size() - 1");
        double z = std::inner_product(X[i].begin(), X[i].end(), weights.begin(), 0.0) +
                   weights.back();
        // log(1 + e^z) computed stably
        double log1pez = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        nll += log1pez - y[i] * z;
    }
    for (double w : weights) nll += 0.5 * l2 * w * w;
    return nll;
}

std::vector<double> lr_gradient(const std::vector<double>& weights,
                                const std::vector<std::vector<double>>& X,
                                const std::vector<int>& y, double l2) {
    std::vector<double> grad(weights.size(), 0.0);
    for (size_t i = 0; i < X.size(); ++i) {
        if (X[i].size() + 1 != weights.size())
            throw std::invalid_argument("lr: row arity must be weights.size() - 1");
        double z = std::inner_product(X[i].begin(), X[i].end(), weights.begin(), 0.0) +
                   weights.back();
        double err = sigmoid(z) - y[i];
        for (size_t c = 0; c + 1 < weights.size(); ++c) grad[c] += err * X[i][c];
        grad.back() += err;
    }
    for (size_t c = 0; c < weights.size(); ++c) grad[c] += l2 * weights[c];
    return grad;
}

std::unique_ptr<Model> train(Algo algo, const Dataset& data, const TrainParams& params) {
    check_trainable(data);
    switch (algo) {
        case Algo::logistic_regression: return train_lr(data, params.lr);
        case Algo::knn: return train_knn(data, params.knn);
        case Algo::random_forest: return train_rf(data, params.rf, params.seed);
    }
    throw std::invalid_argument("unknown algorithm");
}

std::vector<double> gini_importance(const Model& model) {
    const auto* rf = dynamic_cast<const RandomForestModel*>(&model);
    if (!rf) throw std::invalid_argument("gini_importance requires a random forest model");
    return rf->importances;
}

namespace {
constexpr char kModelMagic[] = "RSML";
constexpr uint32_t kModelVersion = 1;
}  // namespace

void save_model(const Model& model, const std::vector<std::string>& feature_names,
                const std::filesystem::path& path) {
    json j{{"algo", algo_name(model.algo())},
           {"feature_names", feature_names},
           {"payload", json::parse(model.serialize_payload())}};
    std::string body = j.dump();
    std::ofstream out(path, std::ios::binary);
    out.write(kModelMagic, 4);
    uint32_t v = kModelVersion;
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    uint64_t len = body.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
}

LoadedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    char magic[4];
    uint32_t version = 0;
    uint64_t len = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || std::string(magic, 4) != kModelMagic)
        throw std::runtime_error("not a model container: " + path.string());
    if (version != kModelVersion)
        throw std::runtime_error("unsupported model container version");
    std::string body(len, '\0');
    in.read(body.data(), static_cast<std::streamsize>(len));
    json j = json::parse(body);

    LoadedModel loaded;
    loaded.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    const json& p = j.at("payload");
    std::string algo = j.at("algo").get<std::string>();
    if (algo == "logistic_regression") {
        auto m = std::make_unique<LogisticRegressionModel>();
        m->weights = p.at("weights").get<std::vector<double>>();
        m->means = p.at("means").get<std::vector<double>>();
        m->sds = p.at("sds").get<std::vector<double>>();
        loaded.model = std::move(m);
    } else if (algo == "knn") {
        auto m = std::make_unique<KnnModel>();
        m->k = p.at("k").get<int>();
        m->lo = p.at("lo").get<std::vector<double>>();
        m->range = p.at("range").get<std::vector<double>>();
        m->train_rows = p.at("rows").get<std::vector<std::vector<double>>>();
        m->train_labels = p.at("labels").get<std::vector<int>>();
        loaded.model = std::move(m);
    } else if (algo == "random_forest") {
        auto m = std::make_unique<RandomForestModel>();
        for (const auto& jt : p.at("trees")) {
            std::vector<TreeNode> tree;
            for (const auto& jn : jt)
                tree.push_back({jn[0].get<int>(), jn[1].get<double>(), jn[2].get<int>(),
                                jn[3].get<int>(), jn[4].get<double>()});
            m->trees.push_back(std::move(tree));
        }
        m->importances = p.at("importances").get<std::vector<double>>();
        loaded.model = std::move(m);
    } else {
        throw std::runtime_error("unknown algorithm in model container: " + algo);
    }
    return loaded;
}

Dataset smote(const Dataset& data, double target_ratio, int k, uint64_t seed) {
    data.check();
    if (k < 1) throw std::invalid_argument("smote: k must be >= 1");
    size_t n1 = data.count_label(1), n0 = data.count_label(0);
    int minority_label = n1 <= n0 ? 1 : 0;
    size_t n_min = std::min(n1, n0), n_maj = std::max(n1, n0);
    if (n_min < 2) throw std::invalid_argument("smote: minority class needs >= 2 instances");

    std::vector<size_t> minority;
    for (size_t i = 0; i < data.size(); ++i)
        if (data.labels[i] == minority_label) minority.push_back(i);

    size_t target = static_cast<size_t>(std::llround(target_ratio * n_maj));
    Dataset out = data;
    if (target <= n_min) return out;

    // k nearest minority neighbors per minority row (Euclidean).
    size_t kk = std::min<size_t>(k, minority.size() - 1);
    std::vector<std::vector<size_t>> neighbors(minority.size());
    for (size_t a = 0; a < minority.size(); ++a) {
        std::vector<std::pair<double, size_t>> dist;
        for (size_t b = 0; b < minority.size(); ++b) {
            if (a == b) continue;
            double d2 = 0.0;
            const auto& ra = data.rows[minority[a]];
            const auto& rb = data.rows[minority[b]];
            for (size_t c = 0; c < ra.size(); ++c) d2 += (ra[c] - rb[c]) * (ra[c] - rb[c]);
            dist.push_back({d2, b});
        }
        std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
        for (size_t i = 0; i < kk; ++i) neighbors[a].push_back(dist[i].second);
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (size_t s = n_min; s < target; ++s) {
        size_t a = std::uniform_int_distribution<size_t>(0, minority.size() - 1)(rng);
        size_t b = neighbors[a][std::uniform_int_distribution<size_t>(0, kk - 1)(rng)];
        double t = unit(rng);
        const auto& ra = data.rows[minority[a]];
        const auto& rb = data.rows[minority[b]];
        std::vector<double> synth(ra.size());
        for (size_t c = 0; c < ra.size(); ++c) synth[c] = ra[c] + t * (rb[c] - ra[c]);
        out.rows.push_back(std::move(synth));
        out.labels.push_back(minority_label);
    }
    return out;
}

}  // namespace racket
