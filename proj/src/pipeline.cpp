#include "racket/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "racket/digest.hpp"
#include "racket/features.hpp"
#include "racket/fingerprint.hpp"
#include "racket/protocol.hpp"
#include "racket/stats.hpp"

namespace racket {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct TomlValue {
    std::string raw;
    bool is_string = false;

    std::string as_string(const std::string& key) const {
        if (!is_string) throw std::invalid_argument(key + ": expected a quoted string");
        return raw;
    }
    bool as_bool(const std::string& key) const {
        if (raw == "true") return true;
        if (raw == "false") return false;
        throw std::invalid_argument(key + ": expected true/false");
    }
    int64_t as_int(const std::string& key) const {
        try {
            size_t pos = 0;
            int64_t v = std::stoll(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw std::invalid_argument(key + ": expected an integer, got '" + raw + "'");
        }
    }
    double as_double(const std::string& key) const {
        try {
            size_t pos = 0;
            double v = std::stod(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw std::invalid_argument(key + ": expected a number, got '" + raw + "'");
        }
    }
};

TomlValue parse_value(const std::string& key, std::string v) {
    v = trim(v);
    if (v.empty()) throw std::invalid_argument(key + ": empty value");
    TomlValue out;
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"')
            throw std::invalid_argument(key + ": unterminated string");
        out.raw = v.substr(1, v.size() - 2);
        out.is_string = true;
    } else {
        out.raw = v;
    }
    return out;
}

std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

void read_lines(const std::filesystem::path& path, const std::string& stage,
                const std::function<void(const std::string&)>& fn) {
    std::ifstream in(path);
    if (!in) throw StageError(stage, "cannot open " + path.string(), 2);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            fn(line);
        } catch (const std::exception& e) {
            throw StageError(stage, path.filename().string() + ":" + std::to_string(lineno) +
                                        ": " + e.what(),
                             2);
        }
    }
}

void write_file(const std::filesystem::path& path, const std::string& content,
                const std::string& stage) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw StageError(stage, "cannot write " + path.string());
    out << content;
}

}  // namespace

void PipelineConfig::check() const {
    fleet.check();
    if (train.folds < 2 || train.repeats < 1)
        throw std::invalid_argument("train: folds >= 2 and repeats >= 1 required");
    if (train.trees < 1 || train.max_depth < 1 || train.min_samples_leaf < 1)
        throw std::invalid_argument("train: forest parameters must be positive");
    if (train.smote_ratio <= 0 || train.smote_k < 1)
        throw std::invalid_argument("train: invalid resampling parameters");
    for (double r : {faults.drop, faults.corrupt, faults.replay, faults.reinstall_rate,
                     faults.share_rate, faults.suppression_rate})
        if (r < 0.0 || r > 1.0) throw std::invalid_argument("faults: rates must be in [0,1]");
    if (out_dir.empty()) throw std::invalid_argument("out_dir must be non-empty");
}

namespace {
PipelineConfig parse_pipeline_config_impl(const std::string& text);
}  // namespace

PipelineConfig parse_pipeline_config(const std::string& text) {
    try {
        return parse_pipeline_config_impl(text);
    } catch (const std::invalid_argument& e) {
        throw StageError("config", e.what(), 2);
    }
}

namespace {
PipelineConfig parse_pipeline_config_impl(const std::string& text) {
    PipelineConfig cfg;
    bool seed_set = false;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("line " + std::to_string(lineno) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "fleet" && section != "faults" && section != "train" &&
                section != "paths")
                throw std::invalid_argument("unknown section [" + section + "]");
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        TomlValue v = parse_value(key, line.substr(eq + 1));
        std::string qual = section.empty() ? key : section + "." + key;

        if (section.empty() || section == "paths") {
            if (key == "out_dir") cfg.out_dir = v.as_string(qual);
            else throw std::invalid_argument("unknown key " + qual);
        } else if (section == "fleet") {
            if (key == "workers") cfg.fleet.workers = static_cast<int>(v.as_int(qual));
            else if (key == "regulars") cfg.fleet.regulars = static_cast<int>(v.as_int(qual));
            else if (key == "organic_fraction") cfg.fleet.organic_fraction = v.as_double(qual);
            else if (key == "duration_days") cfg.fleet.duration_days = static_cast<int>(v.as_int(qual));
            else if (key == "seed") { cfg.fleet.seed = static_cast<uint64_t>(v.as_int(qual)); seed_set = true; }
            else if (key == "start_ts") cfg.fleet.start_ts = v.as_int(qual);
            else if (key == "slow_period_s") cfg.fleet.slow_period_s = static_cast<int>(v.as_int(qual));
            else if (key == "fast_period_s") cfg.fleet.fast_period_s = static_cast<int>(v.as_int(qual));
            else if (key == "dropout") cfg.fleet.dropout = v.as_double(qual);
            else if (key == "screen_scale") cfg.fleet.screen_scale = v.as_double(qual);
            else throw std::invalid_argument("unknown key " + qual);
        } else if (section == "faults") {
            if (key == "drop") cfg.faults.drop = v.as_double(qual);
            else if (key == "corrupt") cfg.faults.corrupt = v.as_double(qual);
            else if (key == "replay") cfg.faults.replay = v.as_double(qual);
            else if (key == "reinstall_rate") cfg.faults.reinstall_rate = v.as_double(qual);
            else if (key == "share_rate") cfg.faults.share_rate = v.as_double(qual);
            else if (key == "suppression_rate") cfg.faults.suppression_rate = v.as_double(qual);
            else throw std::invalid_argument("unknown key " + qual);
        } else {  // train
            if (key == "folds") cfg.train.folds = static_cast<int>(v.as_int(qual));
            else if (key == "repeats") cfg.train.repeats = static_cast<int>(v.as_int(qual));
            else if (key == "trees") cfg.train.trees = static_cast<int>(v.as_int(qual));
            else if (key == "max_depth") cfg.train.max_depth = static_cast<int>(v.as_int(qual));
            else if (key == "min_samples_leaf") cfg.train.min_samples_leaf = static_cast<int>(v.as_int(qual));
            else if (key == "smote_ratio") cfg.train.smote_ratio = v.as_double(qual);
            else if (key == "smote_k") cfg.train.smote_k = static_cast<int>(v.as_int(qual));
            else throw std::invalid_argument("unknown key " + qual);
        }
    }
    if (!seed_set) throw std::invalid_argument("fleet.seed is mandatory");
    cfg.check();
    return cfg;
}
}  // namespace

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StageError("config", "cannot open config file: " + path.string(), 2);
    std::stringstream ss;
    ss << in.rdbuf();
    PipelineConfig cfg = parse_pipeline_config(ss.str());
    if (const char* env = std::getenv("RACKET_OUT_DIR"); env && *env) cfg.out_dir = env;
    return cfg;
}

void stage_simulate(const PipelineConfig& cfg, const std::filesystem::path& sim_dir) {
    try {
        if (!cfg.faults.stream_faults()) {
            JsonlSink sink(sim_dir);
            generate_fleet(cfg.fleet, sink);
            return;
        }
        MemorySink mem;
        generate_fleet(cfg.fleet, mem);
        int64_t t_begin = cfg.fleet.start_ts;
        int64_t t_end = t_begin + int64_t(cfg.fleet.duration_days) * 86400;
        FaultSchedule schedule = FaultSchedule::random(
            mem.truth, cfg.faults.reinstall_rate, cfg.faults.share_rate,
            cfg.faults.suppression_rate, t_begin, t_end, cfg.fleet.seed ^ 0xfa57ULL);
        inject_faults(mem.snapshots, mem.truth, schedule);
        JsonlSink sink(sim_dir);
        for (const auto& m : mem.apps) sink.on_app(m);
        for (const auto& r : mem.snapshots) sink.on_snapshot(r);
        for (const auto& r : mem.reviews) sink.on_review(r);
        for (const auto& d : mem.truth.devices) sink.on_truth(d);
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("simulate", e.what());
    }
}

void stage_ingest(const std::filesystem::path& sim_dir, const std::filesystem::path& store_dir,
                  const FaultConfig& faults, uint64_t seed) {
    SnapshotStore store;
    InProcessTransport transport(store, {faults.drop, faults.corrupt, faults.replay},
                                 seed ^ 0x1276e57ULL);
    std::map<std::string, SnapshotClient> clients;
    auto feed = [&](const std::string& line) {
        SnapshotRecord r = parse_snapshot(line);
        const std::string& install = install_id_of(r);
        auto it = clients.find(install);
        if (it == clients.end()) {
            const std::string& participant = std::visit(
                [](const auto& s) -> const std::string& { return s.participant_id; }, r);
            it = clients.emplace(install, SnapshotClient(install, participant)).first;
        }
        it->second.record(r);
        if (it->second.pending_chunks() >= 8) it->second.upload_pending(transport);
    };
    read_lines(sim_dir / "slow.install.jsonl", "ingest", feed);
    read_lines(sim_dir / "fast.install.jsonl", "ingest", feed);
    for (auto& [install, client] : clients) {
        client.flush();
        client.upload_until_drained(transport);
        if (client.pending_chunks() > 0)
            throw StageError("ingest", "undeliverable chunks for install " + install);
    }
    try {
        std::filesystem::create_directories(store_dir);
        store.save(store_dir);
    } catch (const std::exception& e) {
        throw StageError("ingest", e.what());
    }
}

void stage_fingerprint(const std::filesystem::path& store_dir,
                       const std::filesystem::path& devices_out) {
    try {
        if (!std::filesystem::is_directory(store_dir))
            throw StageError("fingerprint", "store directory missing: " + store_dir.string(), 2);
        SnapshotStore store = SnapshotStore::load(store_dir);
        auto devices = coalesce(group_candidates(store));
        std::string out;
        for (const auto& d : devices) {
            out += serialize_device(d);
            out += '\n';
        }
        write_file(devices_out, out, "fingerprint");
    } catch (const StageError&) {
        throw;
    } catch (const ParseError& e) {
        throw StageError("fingerprint", e.what(), 2);
    } catch (const std::exception& e) {
        throw StageError("fingerprint", e.what());
    }
}

namespace {

struct TruthIndex {
    // install_id -> truth device
    std::map<std::string, const GroundTruthDevice*> by_install;
    std::vector<GroundTruthDevice> devices;

    void index() {
        for (const auto& d : devices)
            for (const auto& id : d.install_ids) by_install[id] = &d;
    }
    const GroundTruthDevice* find(const ResolvedDevice& dev) const {
        for (const auto& id : dev.member_installs) {
            auto it = by_install.find(id);
            if (it != by_install.end()) return it->second;
        }
        return nullptr;
    }
};

}  // namespace

void stage_extract(const std::filesystem::path& store_dir, const std::filesystem::path& devices,
                   const std::filesystem::path& reviews, const std::filesystem::path& apps,
                   const std::filesystem::path& truth, const PipelinePaths& out,
                   const TrainConfig& train_cfg, uint64_t seed) {
    SnapshotStore store = [&] {
        try {
            return SnapshotStore::load(store_dir);
        } catch (const std::exception& e) {
            throw StageError("extract", e.what(), 2);
        }
    }();

    std::vector<ResolvedDevice> resolved;
    read_lines(devices, "extract", [&](const std::string& l) { resolved.push_back(parse_device(l)); });

    std::vector<ReviewRecord> review_records;
    read_lines(reviews, "extract", [&](const std::string& l) { review_records.push_back(parse_review(l)); });
    ReviewIndex review_index = ReviewIndex::build(review_records);

    std::map<std::string, AppMetadata> metadata;
    read_lines(apps, "extract", [&](const std::string& l) {
        AppMetadata m = parse_app_metadata(l);
        metadata[m.app_id] = m;
    });

    TruthIndex truth_index;
    if (!truth.empty()) {
        read_lines(truth, "extract",
                   [&](const std::string& l) { truth_index.devices.push_back(parse_truth(l)); });
        truth_index.index();
    }

    std::vector<AppUsageInstance> app_instances;
    std::vector<const ResolvedDevice*> scored;  // long enough monitoring window
    std::vector<std::pair<size_t, size_t>> per_device;  // [begin, end) into app_instances
    for (const auto& dev : resolved) {
        DeviceView view = build_device_view(store, dev);
        if (view.t_last - view.t_first < kMinMonitoringSeconds) continue;  // too short to score
        const GroundTruthDevice* t = truth_index.find(dev);
        size_t begin = app_instances.size();
        for (const std::string& app : view.apps) {
            AppUsageInstance a = extract_app_features(view, app, review_index, metadata);
            if (t) {
                auto it = t->app_intent.find(app);
                if (it != t->app_intent.end()) a.label = it->second;
            }
            app_instances.push_back(std::move(a));
        }
        per_device.push_back({begin, app_instances.size()});
        scored.push_back(&dev);
    }

    // App-level model for device suspiciousness (d2): random forest fit on
    // every labeled app instance.
    std::function<bool(const AppUsageInstance&)> flagged = [](const AppUsageInstance&) {
        return false;
    };
    Dataset app_data = to_dataset(app_instances);
    Imputer imputer;
    std::unique_ptr<Model> app_model;
    if (app_data.count_label(0) >= 2 && app_data.count_label(1) >= 2) {
        imputer = Imputer::fit(app_data, app_data.indicator_columns());
        Dataset imputed = imputer.transform(app_data);
        TrainParams tp;
        tp.rf.n_trees = train_cfg.trees;
        tp.rf.max_depth = train_cfg.max_depth;
        tp.rf.min_samples_leaf = train_cfg.min_samples_leaf;
        tp.seed = seed;
        try {
            app_model = train(Algo::random_forest, imputed, tp);
        } catch (const std::exception& e) {
            throw StageError("extract", std::string("app model for d2: ") + e.what());
        }
        flagged = [&](const AppUsageInstance& a) {
            Dataset one;
            one.feature_names = app_feature_names();
            one.rows.push_back(app_feature_row(a));
            one.labels.push_back(0);
            return app_model->predict(imputer.transform(one).rows[0]) == 1;
        };
    }

    std::vector<DeviceUsageInstance> device_instances;
    for (size_t i = 0; i < scored.size(); ++i) {
        DeviceView view = build_device_view(store, *scored[i]);
        const GroundTruthDevice* t = truth_index.find(*scored[i]);
        std::vector<AppUsageInstance> slice(app_instances.begin() + per_device[i].first,
                                            app_instances.begin() + per_device[i].second);
        DeviceUsageInstance d = extract_device_features(view, slice, flagged, review_index);
        set_install_split(d, view, metadata);
        if (t) d.label = t->cls == DeviceClass::regular ? 0 : 1;
        device_instances.push_back(std::move(d));
    }

    std::string app_out, dev_out;
    for (const auto& a : app_instances) {
        app_out += serialize_instance(a);
        app_out += '\n';
    }
    for (const auto& d : device_instances) {
        dev_out += serialize_instance(d);
        dev_out += '\n';
    }
    write_file(out.app_instances(), app_out, "extract");
    write_file(out.device_instances(), dev_out, "extract");
    write_file(out.app_csv(), to_dataset(app_instances).to_csv(), "extract");
    write_file(out.device_csv(), to_dataset(device_instances).to_csv(), "extract");
}

ModelReport stage_train(const std::filesystem::path& instances_path, Algo algo,
                        const std::string& sampling, const TrainConfig& train_cfg, uint64_t seed,
                        const std::filesystem::path& model_out,
                        const std::filesystem::path& report_prefix) {
    // Accept either instance kind; the line schema carries the type.
    std::vector<AppUsageInstance> app_rows;
    std::vector<DeviceUsageInstance> device_rows;
    read_lines(instances_path, "train", [&](const std::string& l) {
        try {
            app_rows.push_back(parse_app_instance(l));
        } catch (const std::exception&) {
            device_rows.push_back(parse_device_instance(l));
        }
    });
    Dataset data = app_rows.empty() ? to_dataset(device_rows) : to_dataset(app_rows);
    if (data.size() == 0) throw StageError("train", "no labeled instances in " + instances_path.string(), 2);

    TrainParams tp;
    tp.rf.n_trees = train_cfg.trees;
    tp.rf.max_depth = train_cfg.max_depth;
    tp.rf.min_samples_leaf = train_cfg.min_samples_leaf;
    tp.seed = seed;
    CrossValParams cv;
    cv.folds = train_cfg.folds;
    cv.repeats = train_cfg.repeats;
    cv.sampling = sampling_from_name(sampling);
    cv.smote_ratio = train_cfg.smote_ratio;
    cv.smote_k = train_cfg.smote_k;
    cv.seed = seed;

    try {
        ModelReport report = cross_validate(algo, data, cv, tp);
        Imputer imputer = Imputer::fit(data, data.indicator_columns());
        Dataset imputed = imputer.transform(data);
        auto model = train(algo, imputed, tp);
        if (!model_out.empty()) {
            std::filesystem::create_directories(model_out.parent_path());
            save_model(*model, imputed.feature_names, model_out);
        }
        if (!report_prefix.empty()) {
            std::filesystem::create_directories(report_prefix.parent_path());
            write_file(report_prefix.string() + ".csv", report.to_csv(), "train");
            write_file(report_prefix.string() + ".json", report.to_json(), "train");
        }
        return report;
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("train", e.what());
    }
}

void stage_report(const std::filesystem::path& device_instances,
                  const std::filesystem::path& out_csv, const std::filesystem::path& out_txt) {
    std::vector<DeviceUsageInstance> rows;
    read_lines(device_instances, "report",
               [&](const std::string& l) { rows.push_back(parse_device_instance(l)); });
    std::map<std::string, std::map<std::string, std::vector<double>>> values;
    const auto& names = device_feature_names();
    for (const auto& d : rows) {
        if (!d.label) continue;
        std::string group = *d.label == 1 ? "worker" : "regular";
        std::vector<double> row = device_feature_row(d);
        for (size_t i = 0; i < names.size(); ++i) values[names[i]][group].push_back(row[i]);
    }
    if (values.empty()) throw StageError("report", "no labeled device instances", 2);
    try {
        auto comparisons = compare_report(values);
        write_file(out_csv, comparison_csv(comparisons), "report");
        if (!out_txt.empty()) write_file(out_txt, comparison_table(comparisons), "report");
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("report", e.what());
    }
}

void write_manifest(const PipelineConfig& cfg, const PipelinePaths& paths) {
    nlohmann::json artifacts = nlohmann::json::object();
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(paths.root))
        if (entry.is_regular_file() && entry.path() != paths.manifest())
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        artifacts[std::filesystem::relative(f, paths.root).generic_string()] = sha256_hex(ss.str());
    }
    nlohmann::json manifest{
        {"digest_algorithm", "SHA-256"},
        {"seed", cfg.fleet.seed},
        {"stages",
         {"simulate", "ingest", "fingerprint", "extract", "train", "evaluate", "report"}},
        {"artifacts", artifacts}};
    write_file(paths.manifest(), manifest.dump(2) + "\n", "manifest");
}

void run_pipeline(const PipelineConfig& cfg) {
    cfg.check();
    PipelinePaths paths(cfg.out_dir);
    std::filesystem::create_directories(paths.root);

    stage_simulate(cfg, paths.sim_dir());
    stage_ingest(paths.sim_dir(), paths.store_dir(), cfg.faults, cfg.fleet.seed);
    stage_fingerprint(paths.store_dir(), paths.devices());
    stage_extract(paths.store_dir(), paths.devices(), paths.sim_dir() / "reviews.jsonl",
                  paths.sim_dir() / "apps.jsonl", paths.sim_dir() / "ground_truth.jsonl", paths,
                  cfg.train, cfg.fleet.seed);
    for (auto algo : {Algo::logistic_regression, Algo::random_forest}) {
        std::string name = algo_name(algo);
        stage_train(paths.app_instances(), algo, "none", cfg.train, cfg.fleet.seed,
                    paths.models_dir() / ("app_" + name + ".rsml"),
                    paths.reports_dir() / ("app_" + name));
        stage_train(paths.device_instances(), algo, "smote", cfg.train, cfg.fleet.seed,
                    paths.models_dir() / ("device_" + name + ".rsml"),
                    paths.reports_dir() / ("device_" + name));
    }
    stage_report(paths.device_instances(), paths.report_csv(), paths.report_txt());
    write_manifest(cfg, paths);
}

}  // namespace racket
