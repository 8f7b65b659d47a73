#include "racket/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

namespace racket {

namespace {

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
constexpr int64_t kDay = 86400;

uint64_t splitmix64(uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double normal_quantile(double p) {
    static const boost::math::normal_distribution<double> n01;
    return boost::math::quantile(n01, p);
}

double uniform01(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace

std::string device_class_name(DeviceClass c) {
    switch (c) {
        case DeviceClass::worker_dedicated: return "worker_dedicated";
        case DeviceClass::worker_organic: return "worker_organic";
        case DeviceClass::regular: return "regular";
    }
    throw std::logic_error("bad device class");
}

DeviceClass device_class_from_name(const std::string& name) {
    if (name == "worker_dedicated") return DeviceClass::worker_dedicated;
    if (name == "worker_organic") return DeviceClass::worker_organic;
    if (name == "regular") return DeviceClass::regular;
    throw std::invalid_argument("unknown device class: " + name);
}

CountDist CountDist::log_normal_mean_median(double mean, double median, double min_v,
                                            double max_v) {
    if (!(mean > median) || !(median > 0))
        throw std::invalid_argument("log-normal fit needs mean > median > 0");
    return log_normal(median, std::sqrt(2.0 * std::log(mean / median)), min_v, max_v);
}

double CountDist::sample(std::mt19937_64& rng) const {
    double v = 0.0;
    if (kind == Kind::poisson) {
        v = static_cast<double>(std::poisson_distribution<int>(a)(rng));
    } else if (a <= 0.0) {
        v = 0.0;
    } else {
        v = std::lognormal_distribution<double>(std::log(a), sigma)(rng);
    }
    return std::clamp(v, min_v, max_v);
}

int CountDist::sample_count(std::mt19937_64& rng) const {
    return static_cast<int>(std::llround(sample(rng)));
}

namespace {

// Quantile-stratified draw: device `idx` of `n` in its class samples from the
// [idx/n, (idx+1)/n) quantile band, which pins the class-level mean and median
// much more tightly than i.i.d. sampling at a fixed fleet size.
double sample_stratified(const CountDist& d, size_t idx, size_t n, std::mt19937_64& rng) {
    if (d.kind == CountDist::Kind::poisson || n == 0) return d.sample(rng);
    if (d.a <= 0.0) return std::clamp(0.0, d.min_v, d.max_v);
    double p = (static_cast<double>(idx) + uniform01(rng)) / static_cast<double>(n);
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    double v = d.a * std::exp(d.sigma * normal_quantile(p));
    return std::clamp(v, d.min_v, d.max_v);
}

std::vector<std::string> account_palette() {
    return {"exchange", "imap",  "pop3",    "chat",   "social", "photos", "fitness",
            "bank",     "music", "video",   "cloud",  "games",  "news",   "shopping",
            "travel",   "vpn",   "calendar", "notes", "reader"};
}

}  // namespace

BehaviorProfile regular_profile() {
    BehaviorProfile p;
    p.cls = DeviceClass::regular;
    p.gmail_accounts = CountDist::log_normal(2.0, 0.53, 1, 10);
    p.gmail_cap = 10;
    p.non_gmail_accounts = CountDist::log_normal(4.5, 0.5, 1, 19);
    p.account_type_palette = account_palette();
    p.daily_installs = CountDist::log_normal_mean_median(3.88, 2.0, 0, 40);
    p.daily_uninstalls = CountDist::log_normal_mean_median(3.29, 1.8, 0, 40);
    p.stopped_apps = CountDist::log_normal(2.0, 0.8, 0, 25);
    p.total_reviews = CountDist::poisson(1.91);
    p.i2r_fast_fraction = 0.02;
    p.i2r_fast_seconds = CountDist::log_normal(21600, 1.0, 600, 86400);
    p.i2r_slow_seconds = CountDist::log_normal(21.92 * kDay, 1.6468, 3600, 1200.0 * kDay);
    p.personal_apps = CountDist::log_normal(80, 0.3, 30, 220);
    p.promo_apps = CountDist::log_normal(0, 0, 0, 0);
    p.screen_minutes = CountDist::log_normal(30, 0.3, 12, 90);
    p.promo_open_probability = 0.0;
    p.personal_review_rate = 0.0;
    return p;
}

BehaviorProfile worker_organic_profile() {
    BehaviorProfile p;
    p.cls = DeviceClass::worker_organic;
    // Workers are 69.1% organic / 30.9% dedicated; dedicated devices carry a
    // median of 31 Gmail accounts, so the organic median is set to keep the
    // worker-wide mean at 28.87.
    p.gmail_accounts = CountDist::log_normal(16.5, 0.798, 1, 163);
    p.gmail_cap = 163;
    p.non_gmail_accounts = CountDist::log_normal(0.8, 0.7, 0, 6);
    p.account_type_palette = account_palette();
    p.daily_installs = CountDist::log_normal_mean_median(15.94, 6.41, 0, 120);
    p.daily_uninstalls = CountDist::log_normal_mean_median(7.02, 2.73, 0, 60);
    p.stopped_apps = CountDist::log_normal(10, 0.7, 0, 60);
    // Median/sigma chosen so the mean lands on 208.91 reviews per device.
    p.total_reviews = CountDist::log_normal(170, 0.64207, 0, 1500);
    // Fast reviews (<= 1 day) cover 35% of installs; the slow component is
    // placed so the pooled install-to-review median lands near 5 days.
    p.i2r_fast_fraction = 0.35;
    p.i2r_fast_seconds = CountDist::log_normal(21600, 1.0, 600, 86400);
    p.i2r_slow_seconds = CountDist::log_normal(10.5 * kDay, 1.0, 3600, 60.0 * kDay);
    p.personal_apps = CountDist::log_normal(6, 0.5, 2, 20);
    p.promo_apps = CountDist::log_normal(26, 0.35, 8, 120);
    p.reviews_per_app_mean = 0.6;
    p.screen_minutes = CountDist::log_normal(36, 0.3, 12, 100);
    p.promo_open_probability = 0.5;
    p.personal_review_rate = 0.4;
    return p;
}

BehaviorProfile worker_dedicated_profile() {
    BehaviorProfile p = worker_organic_profile();
    p.cls = DeviceClass::worker_dedicated;
    p.gmail_accounts = CountDist::log_normal(31, 0.798, 1, 163);
    p.non_gmail_accounts = CountDist::log_normal(0.5, 0.6, 0, 4);
    p.stopped_apps = CountDist::log_normal(23, 0.5, 4, 60);
    p.personal_apps = CountDist::log_normal(0, 0, 0, 0);
    p.promo_apps = CountDist::log_normal(30, 0.3, 10, 120);
    p.screen_minutes = CountDist::log_normal(40, 0.3, 15, 100);
    p.promo_open_probability = 0.15;
    p.personal_review_rate = 0.0;
    return p;
}

void FleetConfig::check() const {
    if (workers < 0 || regulars < 0 || workers + regulars == 0)
        throw std::invalid_argument("fleet must contain at least one device");
    if (duration_days < 2) throw std::invalid_argument("duration_days must be >= 2");
    if (organic_fraction < 0.0 || organic_fraction > 1.0)
        throw std::invalid_argument("organic_fraction must be in [0,1]");
    if (slow_period_s <= 0 || fast_period_s <= 0)
        throw std::invalid_argument("snapshot periods must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0,1)");
    if (screen_scale <= 0.0 || screen_scale > 4.0)
        throw std::invalid_argument("screen_scale must be in (0,4]");
}

std::string serialize_truth(const GroundTruthDevice& d) {
    nlohmann::json intents = nlohmann::json::object();
    for (const auto& [app, intent] : d.app_intent) intents[app] = intent;
    nlohmann::json j{{"android_id", d.android_id},
                     {"app_intent", intents},
                     {"class", device_class_name(d.cls)},
                     {"device_id", d.device_id},
                     {"install_ids", d.install_ids},
                     {"kind", "truth"},
                     {"participant_id", d.participant_id}};
    return j.dump();
}

GroundTruthDevice parse_truth(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    if (j.value("kind", "") != "truth") throw std::invalid_argument("expected a truth record");
    GroundTruthDevice d;
    d.device_id = j.at("device_id").get<std::string>();
    d.cls = device_class_from_name(j.at("class").get<std::string>());
    d.participant_id = j.at("participant_id").get<std::string>();
    d.android_id = j.at("android_id").get<std::string>();
    d.install_ids = j.at("install_ids").get<std::vector<std::string>>();
    for (const auto& [app, intent] : j.at("app_intent").items())
        d.app_intent[app] = intent.get<int>();
    return d;
}

struct JsonlSink::Impl {
    std::ofstream slow, fast, reviews, apps, truth;
};

JsonlSink::JsonlSink(const std::filesystem::path& dir) : impl_(new Impl) {
    std::filesystem::create_directories(dir);
    auto open = [&](std::ofstream& f, const char* name) {
        f.open(dir / name, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open output file: " + (dir / name).string());
    };
    open(impl_->slow, "slow.install.jsonl");
    open(impl_->fast, "fast.install.jsonl");
    open(impl_->reviews, "reviews.jsonl");
    open(impl_->apps, "apps.jsonl");
    open(impl_->truth, "ground_truth.jsonl");
}

JsonlSink::~JsonlSink() = default;

void JsonlSink::on_snapshot(const SnapshotRecord& r) {
    if (std::holds_alternative<SlowSnapshot>(r))
        impl_->slow << serialize(r) << '\n';
    else
        impl_->fast << serialize(r) << '\n';
}
void JsonlSink::on_review(const ReviewRecord& r) { impl_->reviews << serialize(r) << '\n'; }
void JsonlSink::on_app(const AppMetadata& m) { impl_->apps << serialize(m) << '\n'; }
void JsonlSink::on_truth(const GroundTruthDevice& d) { impl_->truth << serialize_truth(d) << '\n'; }

namespace {

struct AppTemplate {
    std::string id;
    int n_normal = 0;
    int n_dangerous = 0;
    bool preinstalled = false;
};

struct Catalog {
    std::vector<AppTemplate> sys, personal, promo;
    std::vector<AppMetadata> metadata;
};

Catalog build_catalog(uint64_t seed) {
    Catalog cat;
    std::mt19937_64 rng(splitmix64(seed ^ 0x5eedca7a106ULL));
    auto make = [&](const char* prefix, int i, bool sys, bool promo) {
        AppTemplate t;
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%s.app%04d", prefix, i);
        t.id = buf;
        t.preinstalled = sys;
        if (promo) {
            t.n_normal = 2 + static_cast<int>(rng() % 6);
            t.n_dangerous = 1 + static_cast<int>(rng() % 6);
        } else {
            t.n_normal = 2 + static_cast<int>(rng() % 8);
            t.n_dangerous = static_cast<int>(rng() % 5);
        }
        AppMetadata m;
        m.app_id = t.id;
        m.preinstalled = sys;
        if (promo) {
            m.vt_flag_count =
                uniform01(rng) < 0.5 ? 1 + std::poisson_distribution<int>(1.5)(rng) : 0;
            m.play_reviews = static_cast<long long>(
                CountDist::log_normal(800, 1.2, 0, 3e5).sample(rng));
        } else {
            m.vt_flag_count = uniform01(rng) < 0.06 ? 1 + std::poisson_distribution<int>(0.5)(rng) : 0;
            m.play_reviews = static_cast<long long>(
                CountDist::log_normal(sys ? 200000 : 30000, sys ? 1.0 : 1.5, 0, 5e7).sample(rng));
        }
        cat.metadata.push_back(m);
        return t;
    };
    for (int i = 0; i < 30; ++i) cat.sys.push_back(make("sys", i, true, false));
    for (int i = 0; i < 1200; ++i) cat.personal.push_back(make("pers", i, false, false));
    for (int i = 0; i < 1000; ++i) cat.promo.push_back(make("promo", i, false, true));
    return cat;
}

struct InstalledApp {
    const AppTemplate* tpl = nullptr;
    int64_t install_ts = 0;
    bool promo_intent = false;
};

struct ChurnEvent {
    int64_t ts = 0;
    bool install = true;
    size_t app = 0;  // index into device app list
};

struct DeviceSpec {
    size_t index = 0;
    DeviceClass cls = DeviceClass::regular;
    size_t class_idx = 0;
    size_t class_n = 1;
};

class DeviceGenerator {
public:
    DeviceGenerator(const FleetConfig& cfg, const Catalog& cat, const BehaviorProfile& prof,
                    const DeviceSpec& spec)
        : cfg_(cfg),
          cat_(cat),
          prof_(prof),
          spec_(spec),
          rng_(splitmix64(cfg.seed * kGolden ^ (spec.index + 1))) {}

    void run(FleetSink& sink) {
        make_identity();
        make_accounts();
        make_apps();
        make_churn();
        make_reviews();
        make_stopped();
        emit_streams(sink);
        for (const auto& r : reviews_) sink.on_review(r);
        sink.on_truth(truth());
    }

private:
    double strat(const CountDist& d) { return sample_stratified(d, spec_.class_idx, spec_.class_n, rng_); }
    bool worker() const { return prof_.cls != DeviceClass::regular; }
    int64_t t_begin() const { return cfg_.start_ts; }
    int64_t t_end() const { return cfg_.start_ts + int64_t(cfg_.duration_days) * kDay; }

    void make_identity() {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "1%09zu", spec_.index);
        install_id_ = buf;
        std::snprintf(buf, sizeof(buf), "%06zu", 100000 + spec_.index);
        participant_id_ = buf;
        char hex[24];
        std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(rng_()));
        android_id_ = hex;
    }

    void make_accounts() {
        int gmail = std::clamp<int>(static_cast<int>(std::llround(strat(prof_.gmail_accounts))), 1,
                                    prof_.gmail_cap);
        int other = static_cast<int>(std::llround(strat(prof_.non_gmail_accounts)));
        other = std::clamp<int>(other, static_cast<int>(prof_.non_gmail_accounts.min_v),
                                static_cast<int>(prof_.account_type_palette.size()));
        for (int k = 0; k < gmail; ++k) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "u%s.g%02d@gmail.com", participant_id_.c_str(), k);
            accounts_.push_back({buf, "gmail"});
            gmail_names_.push_back(buf);
        }
        std::vector<std::string> types = prof_.account_type_palette;
        std::shuffle(types.begin(), types.end(), rng_);
        for (int k = 0; k < other; ++k) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "u%s.x%02d@%s.example.com", participant_id_.c_str(), k,
                          types[k].c_str());
            accounts_.push_back({buf, types[k]});
        }
        std::sort(accounts_.begin(), accounts_.end());
    }

    size_t add_app(const AppTemplate* tpl, int64_t install_ts, bool promo_intent) {
        apps_.push_back({tpl, install_ts, promo_intent});
        return apps_.size() - 1;
    }

    std::vector<const AppTemplate*> pick_apps(const std::vector<AppTemplate>& pool, size_t n) {
        std::vector<const AppTemplate*> out;
        std::vector<size_t> idx(pool.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng_);
        n = std::min(n, pool.size());
        for (size_t i = 0; i < n; ++i) out.push_back(&pool[idx[i]]);
        return out;
    }

    int64_t days_before(int lo, int hi) {
        return t_begin() - static_cast<int64_t>((lo + rng_() % (hi - lo)) * kDay + rng_() % kDay);
    }

    void make_apps() {
        bool dedicated = prof_.cls == DeviceClass::worker_dedicated;
        size_t n_sys = dedicated ? 8 : 15;
        for (auto* t : pick_apps(cat_.sys, n_sys)) add_app(t, days_before(200, 700), dedicated);

        size_t n_personal = static_cast<size_t>(std::llround(strat(prof_.personal_apps)));
        for (auto* t : pick_apps(cat_.personal, n_personal))
            personal_.push_back(add_app(t, days_before(10, 400), false));

        size_t n_promo = static_cast<size_t>(std::llround(strat(prof_.promo_apps)));
        for (auto* t : pick_apps(cat_.promo, n_promo))
            promo_.push_back(add_app(t, days_before(1, 45), true));

        // Older churn leftovers: installed before monitoring, first in line to
        // be uninstalled once the window opens.
        const auto& pool = worker() ? cat_.promo : cat_.personal;
        size_t n_old = worker() ? 18 : 12;
        churn_queue_ = pick_apps(pool, pool.size());
        for (size_t k = 0; k < n_old && !churn_queue_.empty(); ++k) {
            const AppTemplate* t = take_unused();
            if (!t) break;
            uninstallable_.push_back(add_app(t, days_before(5, 60), worker()));
        }
    }

    const AppTemplate* take_unused() {
        while (!churn_queue_.empty()) {
            const AppTemplate* t = churn_queue_.back();
            churn_queue_.pop_back();
            bool used = false;
            for (const auto& a : apps_)
                if (a.tpl == t) { used = true; break; }
            if (!used) return t;
        }
        return nullptr;
    }

    void make_churn() {
        double li = strat(prof_.daily_installs);
        double lu = strat(prof_.daily_uninstalls);
        // Long-tail personal apps are fair game for uninstalls too.
        if (!worker()) {
            size_t extra = std::min<size_t>(personal_.size() / 5, 18);
            for (size_t k = 0; k < extra; ++k) uninstallable_.push_back(personal_[k]);
        }
        std::vector<size_t> avail = uninstallable_;
        for (int day = 0; day < cfg_.duration_days; ++day) {
            int64_t base = t_begin() + int64_t(day) * kDay;
            std::vector<size_t> installed_today;
            int n_i = std::poisson_distribution<int>(li)(rng_);
            for (int k = 0; k < n_i; ++k) {
                const AppTemplate* t = take_unused();
                if (!t) break;
                int64_t ts = base + static_cast<int64_t>(rng_() % kDay);
                size_t id = add_app(t, ts, worker());
                events_.push_back({ts, true, id});
                installed_today.push_back(id);
                window_installs_.push_back(id);
            }
            int n_u = std::poisson_distribution<int>(lu)(rng_);
            for (int k = 0; k < n_u && !avail.empty(); ++k) {
                size_t pos = rng_() % avail.size();
                size_t id = avail[pos];
                avail.erase(avail.begin() + static_cast<long>(pos));
                int64_t ts = base + static_cast<int64_t>(rng_() % kDay);
                if (ts <= apps_[id].install_ts) ts = apps_[id].install_ts + 3600;
                events_.push_back({ts, false, id});
                uninstalled_.insert(id);
            }
            for (size_t id : installed_today) avail.push_back(id);
        }
        std::sort(events_.begin(), events_.end(),
                  [](const ChurnEvent& a, const ChurnEvent& b) { return a.ts < b.ts; });
    }

    int64_t i2r_delta() {
        const bool fast = uniform01(rng_) < prof_.i2r_fast_fraction;
        return static_cast<int64_t>((fast ? prof_.i2r_fast_seconds : prof_.i2r_slow_seconds).sample(rng_));
    }

    void push_review(size_t app, const std::string& account, int rating) {
        int64_t delta = i2r_delta();
        int64_t lo = apps_[app].install_ts + 600;
        int64_t hi = t_end() + 30 * kDay;  // crawl horizon
        int64_t ts = std::clamp(apps_[app].install_ts + delta, lo, hi);
        reviews_.push_back({apps_[app].tpl->id, account, rating, ts});
    }

    void make_reviews() {
        if (!worker()) {
            int r = prof_.total_reviews.sample_count(rng_);
            std::vector<size_t> targets = personal_;
            for (size_t id : uninstallable_) targets.push_back(id);
            std::shuffle(targets.begin(), targets.end(), rng_);
            for (int k = 0; k < r && k < static_cast<int>(targets.size()); ++k) {
                const std::string& acct = gmail_names_[rng_() % gmail_names_.size()];
                push_review(targets[static_cast<size_t>(k)], acct, 1 + static_cast<int>(rng_() % 5));
            }
            return;
        }
        long remaining = std::lround(strat(prof_.total_reviews));
        std::vector<size_t> targets = promo_;
        for (size_t id : uninstallable_) targets.push_back(id);
        for (size_t id : window_installs_) targets.push_back(id);
        std::shuffle(targets.begin(), targets.end(), rng_);
        std::map<size_t, size_t> used;  // accounts consumed per app
        const size_t cap = gmail_names_.size();
        bool progressed = true;
        while (remaining > 0 && progressed) {
            progressed = false;
            for (size_t app : targets) {
                if (remaining <= 0) break;
                size_t& u = used[app];
                if (u >= cap) continue;
                size_t n = 1 + static_cast<size_t>(
                                   std::poisson_distribution<int>(prof_.reviews_per_app_mean)(rng_));
                n = std::min({n, cap - u, static_cast<size_t>(remaining)});
                for (size_t k = 0; k < n; ++k)
                    push_review(app, gmail_names_[(u + k) % cap], 4 + static_cast<int>(rng_() % 2));
                u += n;
                remaining -= static_cast<long>(n);
                progressed = true;
            }
        }
        if (prof_.personal_review_rate > 0 && !personal_.empty()) {
            int extra = std::poisson_distribution<int>(prof_.personal_review_rate)(rng_);
            for (int k = 0; k < extra && k < static_cast<int>(personal_.size()); ++k)
                push_review(personal_[static_cast<size_t>(k)],
                            gmail_names_[rng_() % gmail_names_.size()],
                            1 + static_cast<int>(rng_() % 5));
        }
    }

    void make_stopped() {
        size_t want = static_cast<size_t>(std::llround(strat(prof_.stopped_apps)));
        std::vector<size_t> eligible;
        if (worker()) {
            eligible = promo_;
            for (size_t i = 0; i < apps_.size(); ++i)
                if (apps_[i].tpl->preinstalled && prof_.cls == DeviceClass::worker_dedicated)
                    eligible.push_back(i);
        } else {
            for (size_t k = personal_.size() / 2; k < personal_.size(); ++k)
                eligible.push_back(personal_[k]);
        }
        std::shuffle(eligible.begin(), eligible.end(), rng_);
        for (size_t k = 0; k < std::min(want, eligible.size()); ++k) {
            if (uninstalled_.count(eligible[k])) continue;
            stopped_.insert(apps_[eligible[k]].tpl->id);
        }
    }

    struct Session {
        int64_t begin = 0, end = 0;
        std::optional<std::string> app;
    };

    void make_favorites() {
        size_t n_sys = worker() ? 2 : 3;
        for (size_t i = 0; i < apps_.size() && favorites_.size() < n_sys; ++i)
            if (apps_[i].tpl->preinstalled) favorites_.push_back(i);
        size_t n_pers = std::min<size_t>(worker() ? 4 : 5, personal_.size());
        for (size_t k = 0; k < n_pers; ++k) favorites_.push_back(personal_[k]);
        for (size_t i = 0; i < apps_.size(); ++i) {
            if (apps_[i].promo_intent) continue;
            if (std::find(favorites_.begin(), favorites_.end(), i) == favorites_.end())
                longtail_.push_back(i);
        }
    }

    std::optional<std::string> pick_session_app(int64_t now, size_t& open_ptr) {
        if (open_ptr < promo_opens_.size() && promo_opens_[open_ptr].first <= now)
            return apps_[promo_opens_[open_ptr++].second].tpl->id;
        if (prof_.cls == DeviceClass::worker_dedicated) return std::nullopt;
        if (!favorites_.empty() && uniform01(rng_) < 0.35)
            return apps_[favorites_[rng_() % favorites_.size()]].tpl->id;
        if (!longtail_.empty()) return apps_[longtail_[rng_() % longtail_.size()]].tpl->id;
        return std::nullopt;
    }

    void emit_streams(FleetSink& sink) {
        make_favorites();
        // One brief open shortly after install for a fraction of promoted apps.
        for (const ChurnEvent& e : events_)
            if (e.install && apps_[e.app].promo_intent &&
                uniform01(rng_) < prof_.promo_open_probability)
                promo_opens_.push_back({e.ts, e.app});
        std::sort(promo_opens_.begin(), promo_opens_.end());

        double screen_min = strat(prof_.screen_minutes) * cfg_.screen_scale;
        const std::array<int64_t, 3> offsets = {9 * 3600, 14 * 3600, 20 * 3600};
        size_t event_ptr = 0, open_ptr = 0;
        bool inventory_sent = false;
        for (int day = 0; day < cfg_.duration_days; ++day) {
            int64_t base = t_begin() + int64_t(day) * kDay;
            for (int64_t off : offsets) {
                int64_t wbegin = base + off + static_cast<int64_t>(rng_() % 3600) - 1800;
                int64_t wend = wbegin + static_cast<int64_t>(screen_min * 60.0 / 3.0);
                std::vector<Session> sessions;
                int64_t t = wbegin;
                while (t < wend) {
                    auto dur = static_cast<int64_t>(
                        std::clamp(std::lognormal_distribution<double>(std::log(120.0), 0.6)(rng_),
                                   30.0, 480.0));
                    sessions.push_back({t, std::min(t + dur, wend), pick_session_app(t, open_ptr)});
                    t += dur;
                }
                emit_window(sink, wbegin, wend, sessions, event_ptr, inventory_sent);
            }
        }
    }

    void emit_window(FleetSink& sink, int64_t wbegin, int64_t wend,
                     const std::vector<Session>& sessions, size_t& event_ptr,
                     bool& inventory_sent) {
        size_t session_ptr = 0;
        std::vector<InstallDelta> pending;
        for (int64_t t = wbegin; t < wend; t += cfg_.fast_period_s) {
            // Collect churn not yet reported, regardless of dropout.
            while (event_ptr < events_.size() && events_[event_ptr].ts <= t) {
                const ChurnEvent& e = events_[event_ptr++];
                pending.push_back(make_delta(e));
            }
            if (uniform01(rng_) < cfg_.dropout) continue;
            FastSnapshot f;
            f.install_id = install_id_;
            f.participant_id = participant_id_;
            f.timestamp = t;
            f.screen_on = true;
            f.battery_level = battery(t);
            while (session_ptr + 1 < sessions.size() && sessions[session_ptr].end <= t) ++session_ptr;
            if (session_ptr < sessions.size() && sessions[session_ptr].begin <= t &&
                t < sessions[session_ptr].end)
                f.foreground_app = sessions[session_ptr].app;
            if (!inventory_sent) {
                for (size_t i = 0; i < apps_.size(); ++i) {
                    if (apps_[i].install_ts >= t_begin()) continue;  // reported via churn
                    InstallDelta d;
                    d.app_id = apps_[i].tpl->id;
                    d.kind = InstallEventKind::installed;
                    d.install_time = apps_[i].install_ts;
                    d.last_update_time = apps_[i].install_ts;
                    fill_permissions(d, i);
                    f.install_events.push_back(d);
                }
                inventory_sent = true;
            }
            f.install_events.insert(f.install_events.end(), pending.begin(), pending.end());
            pending.clear();
            sink.on_snapshot(f);
        }
        for (int64_t t = wbegin; t < wend; t += cfg_.slow_period_s) {
            if (uniform01(rng_) < cfg_.dropout) continue;
            SlowSnapshot s;
            s.install_id = install_id_;
            s.participant_id = participant_id_;
            s.android_id = android_id_;
            s.timestamp = t;
            s.registered_accounts = accounts_;
            s.save_mode = uniform01(rng_) < 0.05;
            s.stopped_apps.assign(stopped_.begin(), stopped_.end());
            sink.on_snapshot(s);
        }
    }

    InstallDelta make_delta(const ChurnEvent& e) {
        InstallDelta d;
        d.app_id = apps_[e.app].tpl->id;
        if (e.install) {
            d.kind = InstallEventKind::installed;
            d.install_time = e.ts;
            d.last_update_time = e.ts;
            fill_permissions(d, e.app);
        } else {
            d.kind = InstallEventKind::uninstalled;
            d.last_update_time = e.ts;
        }
        return d;
    }

    void fill_permissions(InstallDelta& d, size_t app) {
        const AppTemplate* t = apps_[app].tpl;
        for (int k = 0; k < t->n_normal; ++k) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "perm.normal.%02d", k);
            d.permissions.push_back({buf, PermissionLevel::normal, true});
        }
        for (int k = 0; k < t->n_dangerous; ++k) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "perm.danger.%02d", k);
            bool granted = worker() ? true : uniform01(rng_) >= 0.25;
            d.permissions.push_back({buf, PermissionLevel::dangerous, granted});
        }
        char hex[24];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(splitmix64(std::hash<std::string>{}(t->id))));
        d.apk_hash = hex;
    }

    int battery(int64_t ts) const {
        auto frac = static_cast<double>((ts - t_begin()) % kDay) / kDay;
        return std::clamp(static_cast<int>(95.0 - 55.0 * frac), 5, 100);
    }

    GroundTruthDevice truth() const {
        GroundTruthDevice d;
        char buf[24];
        std::snprintf(buf, sizeof(buf), "truth-%05zu", spec_.index);
        d.device_id = buf;
        d.cls = prof_.cls;
        d.participant_id = participant_id_;
        d.android_id = android_id_;
        d.install_ids = {install_id_};
        for (const auto& a : apps_) d.app_intent[a.tpl->id] = a.promo_intent ? 1 : 0;
        return d;
    }

    const FleetConfig& cfg_;
    const Catalog& cat_;
    const BehaviorProfile& prof_;
    DeviceSpec spec_;
    std::mt19937_64 rng_;

    std::string install_id_, participant_id_, android_id_;
    std::vector<AccountEntry> accounts_;
    std::vector<std::string> gmail_names_;
    std::vector<InstalledApp> apps_;
    std::vector<size_t> personal_, promo_, uninstallable_, window_installs_;
    std::vector<const AppTemplate*> churn_queue_;
    std::vector<ChurnEvent> events_;
    std::set<size_t> uninstalled_;
    std::set<std::string> stopped_;
    std::vector<ReviewRecord> reviews_;
    std::vector<size_t> favorites_, longtail_;
    std::vector<std::pair<int64_t, size_t>> promo_opens_;
};

}  // namespace

void generate_fleet(const FleetConfig& config, FleetSink& sink) {
    config.check();
    Catalog cat = build_catalog(config.seed);
    for (const auto& m : cat.metadata) sink.on_app(m);

    const auto n_workers = static_cast<size_t>(config.workers);
    const auto n_organic =
        static_cast<size_t>(std::llround(config.workers * config.organic_fraction));
    const auto n_dedicated = n_workers - n_organic;
    const auto n_regular = static_cast<size_t>(config.regulars);

    static const BehaviorProfile organic = worker_organic_profile();
    static const BehaviorProfile dedicated = worker_dedicated_profile();
    static const BehaviorProfile regular = regular_profile();

    for (size_t i = 0; i < n_workers + n_regular; ++i) {
        DeviceSpec spec;
        spec.index = i;
        if (i < n_organic) {
            spec.cls = DeviceClass::worker_organic;
            spec.class_idx = i;
            spec.class_n = n_organic;
        } else if (i < n_workers) {
            spec.cls = DeviceClass::worker_dedicated;
            spec.class_idx = i - n_organic;
            spec.class_n = n_dedicated;
        } else {
            spec.cls = DeviceClass::regular;
            spec.class_idx = i - n_workers;
            spec.class_n = n_regular;
        }
        const BehaviorProfile& prof = spec.cls == DeviceClass::worker_organic ? organic
                                      : spec.cls == DeviceClass::worker_dedicated ? dedicated
                                                                                  : regular;
        DeviceGenerator gen(config, cat, prof, spec);
        gen.run(sink);
    }
}

FaultSchedule FaultSchedule::random(const GroundTruth& truth, double reinstall_rate,
                                    double share_rate, double suppression_rate, int64_t t_begin,
                                    int64_t t_end, uint64_t seed) {
    FaultSchedule s;
    s.android_suppression_rate = suppression_rate;
    s.seed = seed;
    std::mt19937_64 rng(splitmix64(seed ^ 0xfa17ULL));
    const auto span = static_cast<double>(t_end - t_begin);
    int next_participant = 0;
    for (const auto& d : truth.devices) {
        if (uniform01(rng) < reinstall_rate) {
            auto at = t_begin + static_cast<int64_t>(span * (0.25 + 0.25 * uniform01(rng)));
            s.cuts.push_back({d.device_id, at, false, ""});
        }
        if (uniform01(rng) < share_rate) {
            auto at = t_begin + static_cast<int64_t>(span * (0.55 + 0.2 * uniform01(rng)));
            char buf[16];
            std::snprintf(buf, sizeof(buf), "5%05d", next_participant++);
            s.cuts.push_back({d.device_id, at, true, buf});
        }
    }
    return s;
}

void inject_faults(std::vector<SnapshotRecord>& records, GroundTruth& truth,
                   const FaultSchedule& schedule) {
    struct Segmenting {
        std::vector<int64_t> cut_ts;
        std::vector<std::string> install_ids, participant_ids;
        GroundTruthDevice* device = nullptr;
    };
    std::map<std::string, Segmenting> by_device;  // keyed by original install_id
    std::map<std::string, GroundTruthDevice*> device_by_id;
    for (auto& d : truth.devices) {
        if (d.install_ids.size() != 1)
            throw std::invalid_argument("inject_faults expects single-install ground truth");
        device_by_id[d.device_id] = &d;
        Segmenting seg;
        seg.install_ids = {d.install_ids[0]};
        seg.participant_ids = {d.participant_id};
        seg.device = &d;
        by_device[d.install_ids[0]] = seg;
    }

    std::map<std::string, std::vector<FaultSchedule::Reinstall>> cuts;
    for (const auto& c : schedule.cuts) cuts[c.device_id].push_back(c);
    int next_install = 0;
    for (auto& [device_id, list] : cuts) {
        auto it = device_by_id.find(device_id);
        if (it == device_by_id.end())
            throw std::invalid_argument("fault schedule names unknown device: " + device_id);
        std::sort(list.begin(), list.end(),
                  [](const auto& a, const auto& b) { return a.at_ts < b.at_ts; });
        for (size_t k = 1; k < list.size(); ++k)
            if (list[k].at_ts <= list[k - 1].at_ts)
                throw std::invalid_argument("fault cuts must be strictly increasing per device");
        Segmenting& seg = by_device[it->second->install_ids[0]];
        for (const auto& c : list) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "9%09d", next_install++);
            seg.cut_ts.push_back(c.at_ts);
            seg.install_ids.emplace_back(buf);
            seg.participant_ids.push_back(c.change_participant ? c.new_participant_id
                                                               : seg.participant_ids.back());
        }
    }

    // Per-install Android ID suppression across the segmented install set.
    std::mt19937_64 rng(splitmix64(schedule.seed ^ 0x5abb1eULL));
    std::set<std::string> suppressed;
    for (auto& [orig, seg] : by_device) {
        for (const auto& id : seg.install_ids)
            if (uniform01(rng) < schedule.android_suppression_rate) suppressed.insert(id);
        seg.device->install_ids = seg.install_ids;
    }

    for (auto& r : records) {
        std::string* install = nullptr;
        std::string* participant = nullptr;
        int64_t ts = 0;
        std::optional<std::string>* android = nullptr;
        if (auto* s = std::get_if<SlowSnapshot>(&r)) {
            install = &s->install_id;
            participant = &s->participant_id;
            ts = s->timestamp;
            android = &s->android_id;
        } else {
            auto& f = std::get<FastSnapshot>(r);
            install = &f.install_id;
            participant = &f.participant_id;
            ts = f.timestamp;
        }
        auto it = by_device.find(*install);
        if (it == by_device.end()) continue;
        const Segmenting& seg = it->second;
        size_t k = static_cast<size_t>(
            std::upper_bound(seg.cut_ts.begin(), seg.cut_ts.end(), ts) - seg.cut_ts.begin());
        *install = seg.install_ids[k];
        *participant = seg.participant_ids[k];
        if (android && suppressed.count(seg.install_ids[k])) android->reset();
    }
}

}  // namespace racket
