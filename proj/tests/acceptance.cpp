// End-to-end acceptance gate. Plain binary (no test framework): runs the
// nine release criteria in order, prints one PASS/FAIL line per criterion
// and exits non-zero if any failed. Heavy criteria share one default-fleet
// pipeline run; expect a few minutes of wall time.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "racket/crossval.hpp"
#include "racket/features.hpp"
#include "racket/fingerprint.hpp"
#include "racket/models.hpp"
#include "racket/pipeline.hpp"
#include "racket/protocol.hpp"
#include "racket/simulator.hpp"
#include "racket/stats.hpp"
#include "racket/store.hpp"

using namespace racket;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int n, const std::string& what, bool ok, const std::string& detail) {
    if (!ok) ++g_failures;
    std::cout << "criterion " << n << " [" << (ok ? "PASS" : "FAIL") << "] " << what;
    if (!detail.empty()) std::cout << " -- " << detail;
    std::cout << std::endl;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

bool within15(double x, double target) { return x >= 0.85 * target && x <= 1.15 * target; }

double mean_of(const std::vector<double>& xs) {
    double s = 0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / double(xs.size());
}

// Sum importances per feature family (leading "f<n>"/"d<n>" of the column
// name, so min/mean/median/max splits and presence indicators pool) and
// return families ranked by total importance.
std::vector<std::pair<std::string, double>> family_importances(const ModelReport& rf) {
    std::map<std::string, double> fam;
    for (const auto& [name, imp] : rf.feature_importances) {
        size_t i = 1;
        while (i < name.size() && std::isdigit(static_cast<unsigned char>(name[i]))) ++i;
        fam[name.substr(0, i)] += imp;
    }
    std::vector<std::pair<std::string, double>> ranked(fam.begin(), fam.end());
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    return ranked;
}

int family_rank(const std::vector<std::pair<std::string, double>>& ranked,
                const std::string& family) {
    for (size_t i = 0; i < ranked.size(); ++i)
        if (ranked[i].first == family) return int(i) + 1;
    return 1 << 20;
}

// Literal O(n*m) ECDF sweep, the oracle for the production KS statistic.
double ks_statistic_quadratic(const std::vector<double>& a, const std::vector<double>& b) {
    auto ecdf = [](const std::vector<double>& xs, double t) {
        size_t c = 0;
        for (double x : xs)
            if (x <= t) ++c;
        return double(c) / double(xs.size());
    };
    double d = 0.0;
    for (const auto* xs : {&a, &b})
        for (double t : *xs) d = std::max(d, std::fabs(ecdf(a, t) - ecdf(b, t)));
    return d;
}

CandidateDevice make_cand(const std::string& install, std::optional<std::string> android_id,
                          int64_t t0, int64_t t1, const std::vector<std::string>& apps,
                          const std::vector<std::string>& accounts) {
    CandidateDevice c;
    c.install_id = install;
    c.participant_id = "100001";
    c.android_id = std::move(android_id);
    c.t_first = t0;
    c.t_last = t1;
    for (const auto& a : apps) c.app_installs.insert({a, 1000});
    for (const auto& a : accounts) c.accounts.insert(a);
    c.snapshot_count = 10;
    return c;
}

std::vector<std::string> seq(const std::string& prefix, int from, int to) {
    std::vector<std::string> out;
    for (int i = from; i < to; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

// Client/transport round trip; returns nullopt when a queue fails to drain.
std::optional<SnapshotStore> deliver(const std::vector<SnapshotRecord>& records,
                                     InProcessTransport::FaultRates rates, uint64_t seed) {
    SnapshotStore store;
    InProcessTransport transport(store, rates, seed);
    std::map<std::string, SnapshotClient> clients;
    for (const auto& r : records) {
        const auto& id = install_id_of(r);
        const auto& participant =
            std::visit([](const auto& s) -> const std::string& { return s.participant_id; }, r);
        clients.try_emplace(id, id, participant).first->second.record(r);
    }
    for (auto& [id, c] : clients) {
        c.flush();
        auto stats = c.upload_until_drained(transport, 256);
        if (stats.retained != 0) return std::nullopt;
    }
    return store;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct DefaultRun {
    ModelReport app_lr, app_rf, dev_lr, dev_rf;
    PipelinePaths paths{fs::path{}};
    double seconds = 0;
};

// The reference fleet: 200 workers (69.1% organic), 100 regulars, 7 days,
// seed 42 -- all defaults. Runs every stage like `racket pipeline` but keeps
// the four cross-validation reports in memory.
DefaultRun run_default_fleet(const fs::path& out_dir) {
    PipelineConfig cfg;
    cfg.fleet.seed = 42;
    cfg.out_dir = out_dir;
    cfg.check();
    DefaultRun run;
    run.paths = PipelinePaths(cfg.out_dir);
    const auto& paths = run.paths;
    auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(paths.root);
    stage_simulate(cfg, paths.sim_dir());
    stage_ingest(paths.sim_dir(), paths.store_dir(), cfg.faults, cfg.fleet.seed);
    stage_fingerprint(paths.store_dir(), paths.devices());
    stage_extract(paths.store_dir(), paths.devices(), paths.sim_dir() / "reviews.jsonl",
                  paths.sim_dir() / "apps.jsonl", paths.sim_dir() / "ground_truth.jsonl", paths,
                  cfg.train, cfg.fleet.seed);
    auto train = [&](const fs::path& instances, Algo algo, const std::string& sampling,
                     const std::string& prefix) {
        return stage_train(instances, algo, sampling, cfg.train, cfg.fleet.seed,
                           paths.models_dir() / (prefix + "_" + algo_name(algo) + ".rsml"),
                           paths.reports_dir() / (prefix + "_" + algo_name(algo)));
    };
    run.app_lr = train(paths.app_instances(), Algo::logistic_regression, "none", "app");
    run.app_rf = train(paths.app_instances(), Algo::random_forest, "none", "app");
    run.dev_lr = train(paths.device_instances(), Algo::logistic_regression, "smote", "device");
    run.dev_rf = train(paths.device_instances(), Algo::random_forest, "smote", "device");
    stage_report(paths.device_instances(), paths.report_csv(), paths.report_txt());
    write_manifest(cfg, paths);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

void criterion_1_2_3(const DefaultRun& run) {
    // 1: app classifier quality + wall time for the whole run.
    const ModelReport& app = run.app_rf.overall.f1 >= run.app_lr.overall.f1 ? run.app_rf
                                                                            : run.app_lr;
    bool ok1 = app.overall.f1 >= 0.95 && app.overall.auc >= 0.97 && run.seconds <= 600.0;
    report(1, "app classification (repeated 10-fold CV, best of RF/LR)", ok1,
           app.algo + " F1=" + fmt(app.overall.f1) + " AUC=" + fmt(app.overall.auc) +
               " runtime=" + fmt(run.seconds) + "s");

    // 2: device classifier quality under SMOTE-balanced CV.
    const ModelReport& dev = run.dev_rf.overall.f1 >= run.dev_lr.overall.f1 ? run.dev_rf
                                                                            : run.dev_lr;
    bool ok2 = dev.overall.f1 >= 0.90 && dev.overall.fpr <= 0.05;
    report(2, "device classification (SMOTE-balanced CV, best of RF/LR)", ok2,
           dev.algo + " F1=" + fmt(dev.overall.f1) + " FPR=" + fmt(dev.overall.fpr));

    // 3: Gini-importance direction of the two RF models. Ranks are over
    // feature families: f1 = accounts reviewing the app, f2 = install-to-
    // review time, d7 = total apps reviewed, d2 = app suspiciousness.
    auto app_fam = family_importances(run.app_rf);
    auto dev_fam = family_importances(run.dev_rf);
    int rf1 = family_rank(app_fam, "f1");
    int rf2 = family_rank(app_fam, "f2");
    int rd7 = family_rank(dev_fam, "d7");
    int rd2 = family_rank(dev_fam, "d2");
    bool ok3 = rf1 <= 5 && rf2 <= 5 && rd7 <= 5 && rd2 <= 5;
    report(3, "RF Gini importance ranks (f1, f2 top-5 app; d7, d2 top-5 device)", ok3,
           "f1=#" + std::to_string(rf1) + " f2=#" + std::to_string(rf2) + " d7=#" +
               std::to_string(rd7) + " d2=#" + std::to_string(rd2));
}

void criterion_4() {
    // Population statistics over >= 400 devices per class, +/-15% of the
    // reference values. Stream volume is scaled down; the statistics under
    // test do not depend on snapshot cadence.
    FleetConfig cfg;
    cfg.workers = 580;
    cfg.regulars = 420;
    cfg.duration_days = 4;
    cfg.seed = 42;
    cfg.screen_scale = 0.1;
    MemorySink sink;
    generate_fleet(cfg, sink);

    std::map<std::string, std::pair<bool, std::string>> by_install;  // -> (worker?, device)
    std::map<std::string, bool> dev_worker;
    for (const auto& d : sink.truth.devices) {
        bool worker = d.cls != DeviceClass::regular;
        dev_worker[d.device_id] = worker;
        for (const auto& iid : d.install_ids) by_install[iid] = {worker, d.device_id};
    }

    std::map<std::string, std::set<std::string>> gmail;  // install -> gmail names
    std::map<std::string, std::string> acct_dev;         // account name -> device
    for (const auto& r : sink.snapshots) {
        const auto* s = std::get_if<SlowSnapshot>(&r);
        if (!s) continue;
        const auto& [worker, dev] = by_install.at(s->install_id);
        (void)worker;
        for (const auto& a : s->registered_accounts) {
            if (a.type == "gmail") gmail[s->install_id].insert(a.name);
            acct_dev[a.name] = dev;
        }
    }
    std::vector<double> worker_gmail, regular_gmail;
    for (const auto& [iid, names] : gmail)
        (by_install.at(iid).first ? worker_gmail : regular_gmail).push_back(double(names.size()));

    // Device observation windows and install/uninstall churn inside them.
    std::map<std::string, std::pair<int64_t, int64_t>> window;
    for (const auto& r : sink.snapshots) {
        const auto* f = std::get_if<FastSnapshot>(&r);
        if (!f) continue;
        const auto& dev = by_install.at(f->install_id).second;
        auto [it, fresh] = window.try_emplace(dev, f->timestamp, f->timestamp);
        if (!fresh) {
            it->second.first = std::min(it->second.first, f->timestamp);
            it->second.second = std::max(it->second.second, f->timestamp);
        }
    }
    std::map<std::string, int> installs, uninstalls;
    std::map<std::pair<std::string, std::string>, int64_t> install_time;  // (device, app)
    for (const auto& r : sink.snapshots) {
        const auto* f = std::get_if<FastSnapshot>(&r);
        if (!f) continue;
        const auto& dev = by_install.at(f->install_id).second;
        auto [t0, t1] = window.at(dev);
        for (const auto& e : f->install_events) {
            int64_t when = 0;
            if (e.kind == InstallEventKind::installed) {
                when = e.install_time.value_or(0);
                auto key = std::make_pair(dev, e.app_id);
                auto [it, fresh] = install_time.try_emplace(key, when);
                if (!fresh) it->second = std::max(it->second, when);
            } else {
                when = e.last_update_time.value_or(0);
            }
            if (when >= t0 && when <= t1)
                ++(e.kind == InstallEventKind::installed ? installs : uninstalls)[dev];
        }
    }
    std::vector<double> w_inst, w_uninst, r_inst, r_uninst;
    for (const auto& [dev, tw] : window) {
        double days = double(tw.second - tw.first) / 86400.0;
        bool worker = dev_worker.at(dev);
        (worker ? w_inst : r_inst).push_back(installs[dev] / days);
        (worker ? w_uninst : r_uninst).push_back(uninstalls[dev] / days);
    }

    std::map<std::string, int> reviews_per_device;
    std::vector<double> w_i2r, r_i2r;  // seconds from last install to review
    for (const auto& rv : sink.reviews) {
        auto it = acct_dev.find(rv.account_name);
        if (it == acct_dev.end()) continue;
        const std::string& dev = it->second;
        ++reviews_per_device[dev];
        auto jt = install_time.find({dev, rv.app_id});
        if (jt != install_time.end() && rv.review_time >= jt->second)
            (dev_worker.at(dev) ? w_i2r : r_i2r).push_back(double(rv.review_time - jt->second));
    }
    std::vector<double> w_rev, r_rev;
    for (const auto& [dev, worker] : dev_worker)
        (worker ? w_rev : r_rev).push_back(double(reviews_per_device[dev]));

    double fast_frac = 0;
    for (double x : w_i2r) fast_frac += x <= 86400.0 ? 1.0 : 0.0;
    fast_frac /= double(w_i2r.size());

    struct Check {
        std::string name;
        bool ok;
        double got;
    };
    std::vector<Check> checks = {
        {"worker_gmail_mean~28.87", within15(mean_of(worker_gmail), 28.87), mean_of(worker_gmail)},
        {"regular_gmail_max<=10",
         *std::max_element(regular_gmail.begin(), regular_gmail.end()) <= 10.0,
         *std::max_element(regular_gmail.begin(), regular_gmail.end())},
        {"regular_gmail_median==2", median_of(regular_gmail) == 2.0, median_of(regular_gmail)},
        {"worker_daily_installs~15.94", within15(mean_of(w_inst), 15.94), mean_of(w_inst)},
        {"worker_daily_uninstalls~7.02", within15(mean_of(w_uninst), 7.02), mean_of(w_uninst)},
        {"regular_daily_installs~3.88", within15(mean_of(r_inst), 3.88), mean_of(r_inst)},
        {"regular_daily_uninstalls~3.29", within15(mean_of(r_uninst), 3.29), mean_of(r_uninst)},
        {"worker_total_reviews~208.91", within15(mean_of(w_rev), 208.91), mean_of(w_rev)},
        {"regular_total_reviews~1.91", within15(mean_of(r_rev), 1.91), mean_of(r_rev)},
        {"worker_i2r_median_days~5.00", within15(median_of(w_i2r) / 86400.0, 5.00),
         median_of(w_i2r) / 86400.0},
        {"worker_i2r_frac<=1d>=0.30", fast_frac >= 0.30, fast_frac},
        {"regular_i2r_median_days~21.92", within15(median_of(r_i2r) / 86400.0, 21.92),
         median_of(r_i2r) / 86400.0},
    };
    bool ok = worker_gmail.size() >= 400 && regular_gmail.size() >= 400;
    std::string detail = "n_worker=" + std::to_string(worker_gmail.size()) +
                         " n_regular=" + std::to_string(regular_gmail.size());
    for (const auto& c : checks) {
        ok = ok && c.ok;
        if (!c.ok) detail += " FAILED " + c.name + " got=" + fmt(c.got);
    }
    report(4, "simulator fidelity (12 population statistics, +/-15%)", ok, detail);
}

void criterion_5() {
    // 200-device fleet with 10% reinstalls, 5% shared devices, 20%
    // android_id suppression: coalesce must recover the exact ground-truth
    // install partition with nothing flagged ambiguous.
    FleetConfig cfg;
    cfg.workers = 130;
    cfg.regulars = 70;
    cfg.duration_days = 3;
    cfg.seed = 42;
    cfg.screen_scale = 0.3;
    MemorySink sink;
    generate_fleet(cfg, sink);
    int64_t t_end = cfg.start_ts + int64_t(cfg.duration_days) * 86400;
    auto schedule = FaultSchedule::random(sink.truth, 0.10, 0.05, 0.20, cfg.start_ts, t_end,
                                          cfg.seed ^ 0xfa57ULL);
    inject_faults(sink.snapshots, sink.truth, schedule);

    SnapshotStore store;
    std::map<std::string, std::vector<SnapshotRecord>> per_install;
    for (const auto& r : sink.snapshots) per_install[install_id_of(r)].push_back(r);
    for (const auto& [iid, records] : per_install) store.append_chunk(iid, 0, records);
    auto resolved = coalesce(group_candidates(store));

    std::set<std::vector<std::string>> want, got;
    for (const auto& d : sink.truth.devices) {
        auto ids = d.install_ids;
        std::sort(ids.begin(), ids.end());
        want.insert(ids);
    }
    size_t ambiguous = 0;
    for (const auto& d : resolved) {
        got.insert(d.member_installs);
        ambiguous += d.ambiguous ? 1 : 0;
    }
    bool exact = want == got && ambiguous == 0 && resolved.size() == sink.truth.devices.size();

    // Adversarial fixtures: merge evidence that contradicts itself must
    // leave every member unmerged and flagged, never silently merged.
    // (a) a+b share an android id, a+c share an app profile, but b overlaps c.
    auto apps = seq("app", 0, 10);
    auto a = make_cand("1000000001", "00000000000000aa", 0, 100, apps, {"x@x"});
    auto b = make_cand("1000000002", "00000000000000aa", 200, 300, seq("q", 0, 4), {"y@y"});
    auto c = make_cand("1000000003", std::nullopt, 250, 400, apps, {"z@z"});
    auto adv1 = coalesce({a, b, c});
    bool adv_ok = adv1.size() == 3;
    for (const auto& d : adv1) adv_ok = adv_ok && d.ambiguous && d.member_installs.size() == 1;
    // (b) x+y share accounts, x+z share an android id, but y overlaps z.
    auto x = make_cand("1000000004", "00000000000000bb", 0, 100, seq("m", 0, 3),
                       {"acct1@g", "acct2@g"});
    auto y = make_cand("1000000005", std::nullopt, 200, 300, seq("n", 0, 3),
                       {"acct1@g", "acct2@g"});
    auto z = make_cand("1000000006", "00000000000000bb", 250, 400, seq("p", 0, 3), {"other@g"});
    auto adv2 = coalesce({x, y, z});
    adv_ok = adv_ok && adv2.size() == 3;
    for (const auto& d : adv2) adv_ok = adv_ok && d.ambiguous && d.member_installs.size() == 1;

    report(5, "fingerprinting exactness + adversarial ambiguity", exact && adv_ok,
           "devices=" + std::to_string(resolved.size()) + " exact_partition=" +
               (want == got ? "yes" : "no") + " ambiguous=" + std::to_string(ambiguous) +
               " adversarial_flagged=" + (adv_ok ? "yes" : "no"));
}

void criterion_6() {
    // Faulty transports (20% drop/corrupt/replay) must converge to the
    // byte-identical store after retries.
    FleetConfig cfg;
    cfg.workers = 4;
    cfg.regulars = 3;
    cfg.duration_days = 2;
    cfg.seed = 5;
    cfg.screen_scale = 0.25;
    MemorySink sink;
    generate_fleet(cfg, sink);
    auto clean = deliver(sink.snapshots, {}, 1);
    bool ok = clean.has_value() && clean->size() > 0;
    std::string detail = "records=" + std::to_string(clean ? clean->size() : 0);
    for (uint64_t seed : {11ULL, 22ULL, 33ULL}) {
        auto faulty = deliver(sink.snapshots, {0.2, 0.2, 0.2}, seed);
        bool same = faulty.has_value() && clean.has_value() &&
                    faulty->serialize_all() == clean->serialize_all();
        ok = ok && same;
        if (!same) detail += " seed" + std::to_string(seed) + "=mismatch";
    }

    // Rotation fires exactly when the post-append size reaches 8 KiB (slow)
    // or 100 KiB (fast).
    for (auto kind : {SnapshotKind::slow, SnapshotKind::fast}) {
        AccumulationBuffer buf(kind);
        std::string expect;
        int64_t ts = 1600000000;
        std::optional<std::string> rotated;
        while (!rotated) {
            SnapshotRecord r;
            if (kind == SnapshotKind::slow) {
                SlowSnapshot s;
                s.install_id = "1000000001";
                s.participant_id = "100001";
                s.timestamp = ts++;
                s.registered_accounts = {{"x@gmail.com", "gmail"}};
                r = s;
            } else {
                FastSnapshot f;
                f.install_id = "1000000001";
                f.participant_id = "100001";
                f.timestamp = ts++;
                f.battery_level = 80;
                r = f;
            }
            size_t before = buf.size();
            std::string line = serialize_line(r);
            rotated = buf.append(r);
            expect += line;
            if (!rotated) {
                ok = ok && before + line.size() < buf.threshold() &&
                     buf.size() == before + line.size();
            } else {
                ok = ok && rotated->size() >= buf.threshold() &&
                     rotated->size() == before + line.size() && *rotated == expect &&
                     buf.empty();
            }
        }
        if (!ok) detail += " rotation_boundary_violated";
    }
    report(6, "protocol robustness (faulty delivery converges; exact rotation)", ok, detail);
}

void criterion_7() {
    std::string detail;
    // KS vs the quadratic oracle, n,m <= 500, with and without ties.
    std::mt19937_64 rng(20260826);
    double worst_ks = 0;
    for (int rep = 0; rep < 40; ++rep) {
        size_t n = 1 + rng() % 500, m = 1 + rng() % 500;
        std::normal_distribution<double> na(0.0, 1.0), nb((rep % 3) * 0.3, 1.0 + 0.2 * (rep % 4));
        std::vector<double> av(n), bv(m);
        for (auto& v : av) v = rep % 2 ? na(rng) : std::round(na(rng) * 4.0) / 4.0;
        for (auto& v : bv) v = rep % 2 ? nb(rng) : std::round(nb(rng) * 4.0) / 4.0;
        worst_ks = std::max(worst_ks, std::fabs(ks_two_sample(av, bv).statistic -
                                                ks_statistic_quadratic(av, bv)));
    }
    bool ks_ok = worst_ks <= 1e-12;
    if (!ks_ok) detail += " ks_err=" + fmt(worst_ks);

    // Hand-computed analysis-of-variance fixtures.
    double f_err = std::fabs(anova_oneway({{3, 5, 7}, {2, 4, 6}, {10, 12, 14}}).statistic - 14.25);
    // {1,1,2} vs {2,3,3}: three tie pairs, H = (64/21) / (32/35) = 10/3.
    double h_err =
        std::fabs(kruskal_wallis({{1, 1, 2}, {2, 3, 3}}).statistic - 10.0 / 3.0);
    bool fixture_ok = f_err <= 1e-9 && h_err <= 1e-9;
    if (!fixture_ok) detail += " anova_err=" + fmt(f_err) + " kw_err=" + fmt(h_err);

    // LR gradient vs central finite differences.
    bool grad_ok = true;
    std::mt19937_64 grng(42);
    std::normal_distribution<double> nd(0.0, 1.0);
    size_t n = 60, arity = 5;
    std::vector<std::vector<double>> X(n, std::vector<double>(arity));
    std::vector<int> y(n);
    for (size_t i = 0; i < n; ++i) {
        for (auto& v : X[i]) v = nd(grng);
        y[i] = int(grng() % 2);
    }
    for (double l2 : {0.0, 0.01, 1.0}) {
        std::vector<double> w(arity + 1);
        for (auto& v : w) v = 0.5 * nd(grng);
        auto grad = lr_gradient(w, X, y, l2);
        const double h = 1e-6;
        for (size_t j = 0; j < w.size(); ++j) {
            auto wp = w, wm = w;
            wp[j] += h;
            wm[j] -= h;
            double fd = (lr_negative_log_likelihood(wp, X, y, l2) -
                         lr_negative_log_likelihood(wm, X, y, l2)) /
                        (2 * h);
            double scale = std::max({1.0, std::fabs(fd), std::fabs(grad[j])});
            grad_ok = grad_ok && std::fabs(grad[j] - fd) / scale <= 1e-6;
        }
    }
    if (!grad_ok) detail += " lr_gradient_mismatch";

    // Every SMOTE synthetic lies on a segment between two minority rows.
    Dataset d;
    d.feature_names = {"x0", "x1", "x2"};
    std::mt19937_64 srng(21);
    for (int i = 0; i < 40; ++i) {
        d.rows.push_back({nd(srng), nd(srng), nd(srng)});
        d.labels.push_back(0);
    }
    for (int i = 0; i < 8; ++i) {
        d.rows.push_back({2.0 + nd(srng), 2.0 + nd(srng), 2.0 + nd(srng)});
        d.labels.push_back(1);
    }
    auto bal = smote(d, 1.0, 5, 99);
    std::vector<std::vector<double>> minority;
    for (size_t i = 0; i < d.size(); ++i)
        if (d.labels[i] == 1) minority.push_back(d.rows[i]);
    bool smote_ok = bal.count_label(1) == bal.count_label(0);
    for (size_t i = d.size(); i < bal.size(); ++i) {
        const auto& s = bal.rows[i];
        bool on_segment = false;
        for (size_t ai = 0; ai < minority.size() && !on_segment; ++ai)
            for (size_t bi = 0; bi < minority.size() && !on_segment; ++bi) {
                if (ai == bi) continue;
                const auto& av = minority[ai];
                const auto& bv = minority[bi];
                double t = 0.0;
                bool found = false;
                for (size_t cc = 0; cc < av.size(); ++cc)
                    if (std::fabs(bv[cc] - av[cc]) > 1e-12) {
                        t = (s[cc] - av[cc]) / (bv[cc] - av[cc]);
                        found = true;
                        break;
                    }
                if (!found || t < -1e-9 || t > 1.0 + 1e-9) continue;
                bool all = true;
                for (size_t cc = 0; cc < av.size(); ++cc)
                    all = all && std::fabs(av[cc] + t * (bv[cc] - av[cc]) - s[cc]) <= 1e-9;
                on_segment = all;
            }
        smote_ok = smote_ok && on_segment;
    }
    if (!smote_ok) detail += " smote_off_segment";

    report(7, "numerical oracles (KS, ANOVA, Kruskal-Wallis, LR gradient, SMOTE)",
           ks_ok && fixture_ok && grad_ok && smote_ok, detail);
}

void criterion_8(const DefaultRun& run) {
    // Worker/regular comparisons on the default run's device instances.
    std::vector<DeviceUsageInstance> rows;
    std::ifstream in(run.paths.device_instances());
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(parse_device_instance(line));
    std::map<std::string, std::map<std::string, std::vector<double>>> values;
    const auto& names = device_feature_names();
    for (const auto& d : rows) {
        if (!d.label) continue;
        std::string group = *d.label == 1 ? "worker" : "regular";
        auto row = device_feature_row(d);
        for (size_t i = 0; i < names.size(); ++i) values[names[i]][group].push_back(row[i]);
    }
    auto comparisons = compare_report(values);
    auto find = [&](const std::string& feature) -> const GroupComparison& {
        for (const auto& c : comparisons)
            if (c.feature == feature) return c;
        throw std::runtime_error("missing comparison for " + feature);
    };
    bool ok = true;
    std::string detail;
    for (const std::string f :
         {"d5_gmail", "d7_total_reviewed", "d3_stopped", "d4_daily_installs"}) {
        const auto& c = find(f);
        bool sig = c.ks && c.ks->pvalue < 0.05 && c.anova && c.anova->pvalue < 0.05 &&
                   c.kruskal && c.kruskal->pvalue < 0.05;
        ok = ok && sig;
        if (!sig) detail += " " + f + "_not_significant";
    }
    // Total installed apps: distributions differ (KS) while the means do not
    // separate (ANOVA).
    const auto& total = find("d1_total_installed");
    bool pattern = total.ks && total.ks->pvalue < 0.05 && total.anova &&
                   total.anova->pvalue >= 0.05;
    ok = ok && pattern;
    detail += " d1_total_installed ks_p=" + fmt(total.ks ? total.ks->pvalue : 1.0) +
              " anova_p=" + fmt(total.anova ? total.anova->pvalue : 0.0);
    report(8, "statistical report (significant features + installed-apps pattern)", ok, detail);
}

void criterion_9(const fs::path& tmp) {
    PipelineConfig cfg;
    cfg.fleet.workers = 40;
    cfg.fleet.regulars = 20;
    cfg.fleet.duration_days = 3;
    cfg.fleet.seed = 7;
    cfg.fleet.screen_scale = 0.3;
    cfg.train.repeats = 1;
    cfg.train.trees = 10;
    cfg.out_dir = tmp / "det1";
    run_pipeline(cfg);
    cfg.out_dir = tmp / "det2";
    run_pipeline(cfg);
    std::string m1 = read_bytes(tmp / "det1" / "manifest.json");
    std::string m2 = read_bytes(tmp / "det2" / "manifest.json");
    bool ok = !m1.empty() && m1 == m2;
    report(9, "end-to-end determinism (byte-identical manifests)", ok,
           ok ? "manifests identical" : "manifests differ");
}

}  // namespace

int main() {
    fs::path tmp = fs::temp_directory_path() / "racket-acceptance";
    std::error_code ec;
    fs::remove_all(tmp, ec);
    fs::create_directories(tmp);

    auto guard = [&](int n, const std::string& what, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(n, what, false, std::string("exception: ") + e.what());
        }
    };

    std::optional<DefaultRun> def;
    guard(1, "default-fleet pipeline", [&] { def = run_default_fleet(tmp / "default"); });
    if (def) {
        guard(1, "app classification", [&] { criterion_1_2_3(*def); });
    } else {
        report(2, "device classification", false, "default-fleet run failed");
        report(3, "RF Gini importance ranks", false, "default-fleet run failed");
    }
    guard(4, "simulator fidelity", [] { criterion_4(); });
    guard(5, "fingerprinting exactness", [] { criterion_5(); });
    guard(6, "protocol robustness", [] { criterion_6(); });
    guard(7, "numerical oracles", [] { criterion_7(); });
    if (def)
        guard(8, "statistical report", [&] { criterion_8(*def); });
    else
        report(8, "statistical report", false, "default-fleet run failed");
    guard(9, "end-to-end determinism", [&] { criterion_9(tmp); });

    if (g_failures == 0) {
        std::cout << "acceptance: all 9 criteria passed" << std::endl;
        return 0;
    }
    std::cout << "acceptance: " << g_failures << " criterion(s) failed" << std::endl;
    return 1;
}
