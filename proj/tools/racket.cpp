// Command-line entry point: simulate | serve | ingest | fingerprint |
// extract | train | evaluate | report | pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 stage failure.

#include <csignal>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "racket/crossval.hpp"
#include "racket/features.hpp"
#include "racket/http_endpoint.hpp"
#include "racket/pipeline.hpp"

namespace {

racket::IngestServer* g_server = nullptr;
void on_signal(int) {
    if (g_server) g_server->stop();
}

int run_serve(const std::string& store_dir, const std::string& host, int port) {
    racket::SnapshotStore store;
    std::filesystem::path dir(store_dir);
    if (std::filesystem::exists(dir / "slow.install.jsonl") ||
        std::filesystem::exists(dir / "fast.install.jsonl"))
        store = racket::SnapshotStore::load(dir);
    racket::IngestServer server(store, host, port);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::fprintf(stderr, "listening on %s:%d, store at %s\n", host.c_str(), port,
                 store_dir.c_str());
    if (!server.run()) {
        std::fprintf(stderr, "bind failure on %s:%d\n", host.c_str(), port);
        return 3;
    }
    // Graceful shutdown: every fully acked chunk is already in the store.
    std::filesystem::create_directories(dir);
    store.save(dir);
    std::fprintf(stderr, "store saved: %zu records\n", store.size());
    return 0;
}

int run_evaluate(const std::string& model_path, const std::string& instances_path) {
    racket::LoadedModel loaded = racket::load_model(model_path);
    std::vector<racket::AppUsageInstance> app_rows;
    std::vector<racket::DeviceUsageInstance> device_rows;
    std::ifstream in(instances_path);
    if (!in) throw racket::StageError("evaluate", "cannot open " + instances_path, 2);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            app_rows.push_back(racket::parse_app_instance(line));
        } catch (const std::exception&) {
            device_rows.push_back(racket::parse_device_instance(line));
        }
    }
    racket::Dataset data =
        app_rows.empty() ? racket::to_dataset(device_rows) : racket::to_dataset(app_rows);
    if (data.size() == 0) throw racket::StageError("evaluate", "no labeled instances", 2);

    // The container stores post-imputation feature names; indicator columns
    // tell us which inputs need the (evaluation-data) median fill.
    std::vector<size_t> indicator_cols;
    for (size_t i = 0; i < data.feature_names.size(); ++i) {
        std::string ind = data.feature_names[i] + "_present";
        if (std::find(loaded.feature_names.begin(), loaded.feature_names.end(), ind) !=
            loaded.feature_names.end())
            indicator_cols.push_back(i);
    }
    racket::Dataset imputed = racket::Imputer::fit(data, indicator_cols).transform(data);
    if (imputed.feature_names != loaded.feature_names)
        throw racket::StageError("evaluate", "instance schema does not match the model", 2);

    racket::ConfusionCounts c;
    std::vector<double> scores;
    for (size_t i = 0; i < imputed.size(); ++i) {
        double s = loaded.model->score(imputed.rows[i]);
        scores.push_back(s);
        int pred = s >= 0.5 ? 1 : 0;
        if (imputed.labels[i] == 1)
            (pred == 1 ? c.tp : c.fn)++;
        else
            (pred == 1 ? c.fp : c.tn)++;
    }
    racket::Metrics m = racket::metrics_from_confusion(c);
    m.auc = racket::auc_from_scores(scores, imputed.labels);
    std::printf("instances=%zu algo=%s\n", imputed.size(), racket::algo_name(loaded.model->algo()).c_str());
    std::printf("precision=%.4f recall=%.4f f1=%.4f fpr=%.4f auc=%.4f\n", m.precision, m.recall,
                m.f1, m.fpr, m.auc);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ASO-worker detection pipeline"};
    app.require_subcommand(1);

    // simulate
    std::string cfg_path, out_dir;
    auto* sim = app.add_subcommand("simulate", "Generate a simulated fleet");
    sim->add_option("--config", cfg_path, "pipeline config (TOML)")->required();
    sim->add_option("--out", out_dir, "output directory")->required();

    // serve
    std::string store_dir = "store", host = "127.0.0.1";
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Run the ingestion endpoint");
    serve->add_option("--store", store_dir, "store directory")->required();
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "bind port (0 = ephemeral)");

    // ingest
    std::string in_dir;
    double drop = 0, corrupt = 0, replay = 0;
    uint64_t seed = 0;
    auto* ingest = app.add_subcommand("ingest", "Upload record files into a store");
    ingest->add_option("--in", in_dir, "directory with {slow,fast}.install.jsonl")->required();
    ingest->add_option("--store", store_dir, "store directory")->required();
    ingest->add_option("--drop", drop, "transport drop rate");
    ingest->add_option("--corrupt", corrupt, "transport corruption rate");
    ingest->add_option("--replay", replay, "transport replay rate");
    ingest->add_option("--seed", seed, "fault RNG seed");

    // fingerprint
    std::string out_path;
    auto* fp = app.add_subcommand("fingerprint", "Coalesce installs into devices");
    fp->add_option("--in", in_dir, "store directory")->required();
    fp->add_option("--out", out_path, "devices.jsonl output")->required();

    // extract
    std::string devices_path, reviews_path, apps_path, truth_path;
    racket::TrainConfig train_cfg;
    auto* ex = app.add_subcommand("extract", "Extract app/device feature instances");
    ex->add_option("--store", store_dir, "store directory")->required();
    ex->add_option("--devices", devices_path, "devices.jsonl")->required();
    ex->add_option("--reviews", reviews_path, "reviews.jsonl")->required();
    ex->add_option("--apps", apps_path, "apps.jsonl")->required();
    ex->add_option("--truth", truth_path, "ground_truth.jsonl (labels; optional)");
    ex->add_option("--out-dir", out_dir, "output directory")->required();
    ex->add_option("--seed", seed, "model seed for the suspiciousness flagger");
    ex->add_option("--trees", train_cfg.trees, "forest size for the flagger");

    // train
    std::string algo_str = "rf", sampling = "none", model_out, report_prefix, instances_path;
    auto* tr = app.add_subcommand("train", "Cross-validate and fit a classifier");
    tr->add_option("--in", instances_path, "instances jsonl")->required();
    tr->add_option("--algo", algo_str, "lr | knn | rf");
    tr->add_option("--sampling", sampling, "none | smote | undersample");
    tr->add_option("--model", model_out, "model output path");
    tr->add_option("--report", report_prefix, "report path prefix (.csv/.json)");
    tr->add_option("--seed", seed, "seed");
    tr->add_option("--folds", train_cfg.folds, "CV folds");
    tr->add_option("--repeats", train_cfg.repeats, "CV repeats");
    tr->add_option("--trees", train_cfg.trees, "forest size");
    tr->add_option("--max-depth", train_cfg.max_depth, "tree depth limit");
    tr->add_option("--min-leaf", train_cfg.min_samples_leaf, "min samples per leaf");
    tr->add_option("--smote-ratio", train_cfg.smote_ratio, "minority/majority target");
    tr->add_option("--smote-k", train_cfg.smote_k, "SMOTE neighbors");

    // evaluate
    std::string model_path;
    auto* ev = app.add_subcommand("evaluate", "Score instances with a saved model");
    ev->add_option("--model", model_path, "model path")->required();
    ev->add_option("--in", instances_path, "instances jsonl")->required();

    // report
    std::string table_out;
    auto* rep = app.add_subcommand("report", "Group comparison statistics");
    rep->add_option("--in", instances_path, "device_instances.jsonl")->required();
    rep->add_option("--out", out_path, "report CSV")->required();
    rep->add_option("--table", table_out, "human-readable table output");

    // pipeline
    auto* pl = app.add_subcommand("pipeline", "Run every stage from one config");
    pl->add_option("--config", cfg_path, "pipeline config (TOML)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            racket::PipelineConfig cfg = racket::load_pipeline_config(cfg_path);
            racket::stage_simulate(cfg, out_dir);
        } else if (serve->parsed()) {
            return run_serve(store_dir, host, port);
        } else if (ingest->parsed()) {
            racket::FaultConfig faults;
            faults.drop = drop;
            faults.corrupt = corrupt;
            faults.replay = replay;
            racket::stage_ingest(in_dir, store_dir, faults, seed);
        } else if (fp->parsed()) {
            racket::stage_fingerprint(in_dir, out_path);
        } else if (ex->parsed()) {
            racket::PipelinePaths paths{(std::filesystem::path(out_dir))};
            std::filesystem::create_directories(paths.root);
            racket::stage_extract(store_dir, devices_path, reviews_path, apps_path, truth_path,
                                  paths, train_cfg, seed);
        } else if (tr->parsed()) {
            racket::ModelReport report =
                racket::stage_train(instances_path, racket::algo_from_name(algo_str), sampling,
                                    train_cfg, seed, model_out, report_prefix);
            std::cout << report.to_table();
        } else if (ev->parsed()) {
            return run_evaluate(model_path, instances_path);
        } else if (rep->parsed()) {
            racket::stage_report(instances_path, out_path, table_out);
        } else if (pl->parsed()) {
            racket::run_pipeline(racket::load_pipeline_config(cfg_path));
        }
    } catch (const racket::StageError& e) {
        std::fprintf(stderr, "error [%s]: %s\n", e.stage().c_str(), e.what());
        return e.exit_code();
    } catch (const racket::ParseError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
