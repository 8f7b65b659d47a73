#include "racket/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace racket {

using nlohmann::json;

StatsSummary stats_summary(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("stats_summary of empty sample");
    std::vector<double> s = xs;
    std::sort(s.begin(), s.end());
    StatsSummary out;
    out.min = s.front();
    out.max = s.back();
    out.mean = std::accumulate(s.begin(), s.end(), 0.0) / s.size();
    size_t n = s.size();
    out.median = n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
    return out;
}

DeviceView build_device_view(const SnapshotStore& store, const ResolvedDevice& device) {
    DeviceView view;
    view.device_id = device.device_id;
    for (const std::string& install : device.member_installs) {
        for (const auto& sr : store.stream(install)) {
            if (const auto* slow = std::get_if<SlowSnapshot>(&sr.record)) {
                view.slow.push_back(*slow);
                for (const auto& a : slow->registered_accounts) {
                    view.accounts.insert(a.name);
                    view.account_types[a.name] = a.type;
                }
            } else {
                const auto& fast = std::get<FastSnapshot>(sr.record);
                view.fast.push_back(fast);
                for (const auto& d : fast.install_events) {
                    view.apps.insert(d.app_id);
                    if (d.kind == InstallEventKind::installed && d.install_time) {
                        auto [it, inserted] = view.last_install_time.insert({d.app_id, *d.install_time});
                        if (!inserted) it->second = std::max(it->second, *d.install_time);
                    }
                }
            }
            ++view.snapshot_count;
        }
    }
    auto by_ts = [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; };
    std::stable_sort(view.slow.begin(), view.slow.end(), by_ts);
    std::stable_sort(view.fast.begin(), view.fast.end(), by_ts);
    view.t_first = device.t_first;
    view.t_last = device.t_last;
    return view;
}

ReviewIndex ReviewIndex::build(const std::vector<ReviewRecord>& reviews) {
    ReviewIndex idx;
    for (const auto& r : reviews) {
        idx.by_account[r.account_name].push_back(r);
        idx.last_crawl_ts = std::max(idx.last_crawl_ts, r.review_time);
    }
    for (auto& [_, v] : idx.by_account)
        std::sort(v.begin(), v.end(), [](const ReviewRecord& a, const ReviewRecord& b) {
            return a.review_time < b.review_time;
        });
    return idx;
}

namespace {

// All reviews of `app_id` posted from accounts registered on the device.
std::vector<ReviewRecord> device_reviews_of_app(const DeviceView& device,
                                                const std::string& app_id,
                                                const ReviewIndex& reviews) {
    std::vector<ReviewRecord> out;
    for (const std::string& account : device.accounts) {
        auto it = reviews.by_account.find(account);
        if (it == reviews.by_account.end()) continue;
        for (const auto& r : it->second)
            if (r.app_id == app_id) out.push_back(r);
    }
    std::sort(out.begin(), out.end(), [](const ReviewRecord& a, const ReviewRecord& b) {
        return a.review_time < b.review_time;
    });
    return out;
}

int64_t utc_day(int64_t ts) { return ts / 86400; }

}  // namespace

std::vector<double> install_to_review_times(const DeviceView& device, const std::string& app_id,
                                            const ReviewIndex& reviews) {
    auto it = device.last_install_time.find(app_id);
    if (it == device.last_install_time.end()) return {};
    const int64_t install_time = it->second;
    std::vector<double> out;
    for (const auto& r : device_reviews_of_app(device, app_id, reviews))
        if (r.review_time >= install_time)
            out.push_back(static_cast<double>(r.review_time - install_time));
    return out;
}

AppUsageInstance extract_app_features(const DeviceView& device, const std::string& app_id,
                                      const ReviewIndex& reviews,
                                      const std::map<std::string, AppMetadata>& metadata) {
    if (device.t_last - device.t_first < kMinMonitoringSeconds)
        throw InsufficientDataError("device " + device.device_id +
                                    " has under two days of snapshots");
    AppUsageInstance a;
    a.device_id = device.device_id;
    a.app_id = app_id;
    const double days = device.window_days();

    // f1: distinct device accounts reviewing the app, by period.
    std::set<std::string> before, during, after;
    for (const auto& r : device_reviews_of_app(device, app_id, reviews)) {
        if (r.review_time < device.t_first)
            before.insert(r.account_name);
        else if (r.review_time <= device.t_last)
            during.insert(r.account_name);
        else if (r.review_time <= reviews.last_crawl_ts)
            after.insert(r.account_name);
    }
    a.f1_reviews_before = static_cast<int>(before.size());
    a.f1_reviews_during = static_cast<int>(during.size());
    a.f1_reviews_after = static_cast<int>(after.size());

    // f2: install-to-review durations.
    std::vector<double> i2r = install_to_review_times(device, app_id, reviews);
    if (!i2r.empty()) a.f2_install_to_review = stats_summary(i2r);

    // f3: inter-review gaps; singleton reviews have no gaps (missing).
    std::vector<ReviewRecord> app_reviews = device_reviews_of_app(device, app_id, reviews);
    if (app_reviews.size() >= 2) {
        std::vector<double> gaps;
        for (size_t i = 1; i < app_reviews.size(); ++i)
            gaps.push_back(
                static_cast<double>(app_reviews[i].review_time - app_reviews[i - 1].review_time));
        a.f3_inter_review = stats_summary(gaps);
    }

    // f4/f5: foreground observations.
    std::set<int64_t> fg_days;
    size_t fg_count = 0;
    for (const auto& f : device.fast)
        if (f.foreground_app && *f.foreground_app == app_id) {
            ++fg_count;
            fg_days.insert(utc_day(f.timestamp));
        }
    a.f4_opened_multiple_days = fg_days.size() >= 2;
    a.f5_foreground_snaps_per_day = fg_count / days;
    a.f6_device_snaps_per_day = device.snapshot_count / days;

    // f7/f8/f9/f11: replay the install-event timeline for this app.
    struct Event {
        int64_t ts;
        bool installed;
        const InstallDelta* delta;
    };
    std::vector<Event> events;
    for (const auto& f : device.fast)
        for (const auto& d : f.install_events)
            if (d.app_id == app_id)
                events.push_back({f.timestamp, d.kind == InstallEventKind::installed, &d});
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& x, const Event& y) { return x.ts < y.ts; });

    // Initial state: installed at t_first iff the first observed event is an
    // uninstall, or it is an install whose install time predates the window
    // (the inventory report of an app that was already present).
    bool installed_at_start = false;
    if (!events.empty()) {
        const Event& e0 = events.front();
        installed_at_start = !e0.installed || (e0.delta->install_time &&
                                               *e0.delta->install_time <= device.t_first);
    }
    a.f7_installed_before = installed_at_start;

    bool state = installed_at_start;
    int64_t since = device.t_first;
    int64_t retention = 0;
    const InstallDelta* latest_delta = nullptr;
    for (const auto& e : events) {
        int64_t ts = std::clamp(e.ts, device.t_first, device.t_last);
        // The initial inventory report arrives inside the window but carries
        // install times that predate it; count the install time, not the
        // report time.
        int64_t when = e.installed && e.delta->install_time ? *e.delta->install_time : e.ts;
        if (when >= device.t_first && when <= device.t_last) {
            if (e.installed) ++a.f11_installs;
            else ++a.f11_uninstalls;
        }
        if (state && !e.installed) retention += ts - since;
        if (!state && e.installed) since = ts;
        state = e.installed;
        latest_delta = e.delta;
    }
    if (state) retention += device.t_last - since;
    a.f7_inner_retention = static_cast<double>(retention);
    a.f7_installed_after = state;

    if (latest_delta) {
        for (const auto& p : latest_delta->permissions) {
            (p.level == PermissionLevel::dangerous ? a.f8_dangerous_perms : a.f8_normal_perms)++;
            (p.granted ? a.f9_granted : a.f9_denied)++;
        }
    }

    auto meta = metadata.find(app_id);
    if (meta != metadata.end()) a.f10_vt_flags = meta->second.vt_flag_count;
    return a;
}

DeviceUsageInstance extract_device_features(
    const DeviceView& device, const std::vector<AppUsageInstance>& app_instances,
    const std::function<bool(const AppUsageInstance&)>& app_flagged, const ReviewIndex& reviews) {
    if (device.t_last - device.t_first < kMinMonitoringSeconds)
        throw InsufficientDataError("device " + device.device_id +
                                    " has under two days of snapshots");
    DeviceUsageInstance d;
    d.device_id = device.device_id;
    const double days = device.window_days();

    size_t flagged = 0;
    for (const auto& a : app_instances)
        if (app_flagged(a)) ++flagged;
    d.d2_suspiciousness =
        app_instances.empty() ? 0.0 : static_cast<double>(flagged) / app_instances.size();

    std::set<std::string> stopped;
    for (const auto& s : device.slow)
        stopped.insert(s.stopped_apps.begin(), s.stopped_apps.end());
    d.d3_stopped = static_cast<int>(stopped.size());

    // Churn inside the window only; the initial inventory report carries
    // install events that predate monitoring.
    size_t installs = 0, uninstalls = 0;
    for (const auto& f : device.fast)
        for (const auto& e : f.install_events) {
            int64_t ts = e.kind == InstallEventKind::installed
                             ? e.install_time.value_or(f.timestamp)
                             : e.last_update_time.value_or(f.timestamp);
            if (ts < device.t_first || ts > device.t_last) continue;
            (e.kind == InstallEventKind::installed ? installs : uninstalls)++;
        }
    d.d4_daily_installs = installs / days;
    d.d4_daily_uninstalls = uninstalls / days;

    std::set<std::string> types;
    for (const auto& [name, type] : device.account_types) {
        types.insert(type);
        (type == "gmail" ? d.d5_gmail : d.d5_non_gmail)++;
    }
    d.d5_account_types = static_cast<int>(types.size());

    int reviewed_installed = 0, total_reviews = 0;
    std::set<std::string> installed(device.apps.begin(), device.apps.end());
    std::map<std::string, bool> app_reviewed;
    for (const std::string& account : device.accounts) {
        auto it = reviews.by_account.find(account);
        if (it == reviews.by_account.end()) continue;
        for (const auto& r : it->second) {
            ++total_reviews;
            app_reviewed[r.app_id] = true;
        }
    }
    for (const auto& [app, _] : app_reviewed)
        if (installed.count(app)) ++reviewed_installed;
    d.d6_installed_and_reviewed = reviewed_installed;
    d.d7_total_reviewed = total_reviews;

    // d1 is filled by set_install_split once metadata is at hand.
    return d;
}

void set_install_split(DeviceUsageInstance& instance, const DeviceView& device,
                       const std::map<std::string, AppMetadata>& metadata) {
    // d1 counts apps still installed when monitoring ended; apps whose latest
    // observed event is an uninstall drop out of the tally.
    std::map<std::string, bool> state;
    for (const auto& f : device.fast)
        for (const auto& e : f.install_events)
            state[e.app_id] = e.kind == InstallEventKind::installed;
    instance.d1_preinstalled = 0;
    instance.d1_user_installed = 0;
    for (const std::string& app : device.apps) {
        auto it = state.find(app);
        if (it != state.end() && !it->second) continue;
        auto meta = metadata.find(app);
        if (meta != metadata.end() && meta->second.preinstalled)
            instance.d1_preinstalled++;
        else
            instance.d1_user_installed++;
    }
}

const std::vector<std::string>& app_feature_names() {
    static const std::vector<std::string> names = {
        "f1_before", "f1_during", "f1_after",
        "f2_min", "f2_mean", "f2_median", "f2_max",
        "f3_min", "f3_mean", "f3_median", "f3_max",
        "f4_opened_multiple_days", "f5_fg_snaps_per_day", "f6_dev_snaps_per_day",
        "f7_retention", "f7_installed_before", "f7_installed_after",
        "f8_normal", "f8_dangerous", "f9_granted", "f9_denied",
        "f10_vt_flags", "f11_installs", "f11_uninstalls"};
    return names;
}

const std::vector<std::string>& device_feature_names() {
    static const std::vector<std::string> names = {
        "d1_preinstalled", "d1_user_installed", "d1_total_installed",
        "d2_suspiciousness", "d3_stopped",
        "d4_daily_installs", "d4_daily_uninstalls",
        "d5_gmail", "d5_non_gmail", "d5_account_types",
        "d6_installed_and_reviewed", "d7_total_reviewed"};
    return names;
}

std::vector<double> app_feature_row(const AppUsageInstance& a) {
    const double nan = std::nan("");
    return {static_cast<double>(a.f1_reviews_before),
            static_cast<double>(a.f1_reviews_during),
            static_cast<double>(a.f1_reviews_after),
            a.f2_install_to_review ? a.f2_install_to_review->min : nan,
            a.f2_install_to_review ? a.f2_install_to_review->mean : nan,
            a.f2_install_to_review ? a.f2_install_to_review->median : nan,
            a.f2_install_to_review ? a.f2_install_to_review->max : nan,
            a.f3_inter_review ? a.f3_inter_review->min : nan,
            a.f3_inter_review ? a.f3_inter_review->mean : nan,
            a.f3_inter_review ? a.f3_inter_review->median : nan,
            a.f3_inter_review ? a.f3_inter_review->max : nan,
            a.f4_opened_multiple_days ? 1.0 : 0.0,
            a.f5_foreground_snaps_per_day,
            a.f6_device_snaps_per_day,
            a.f7_inner_retention,
            a.f7_installed_before ? 1.0 : 0.0,
            a.f7_installed_after ? 1.0 : 0.0,
            static_cast<double>(a.f8_normal_perms),
            static_cast<double>(a.f8_dangerous_perms),
            static_cast<double>(a.f9_granted),
            static_cast<double>(a.f9_denied),
            static_cast<double>(a.f10_vt_flags),
            static_cast<double>(a.f11_installs),
            static_cast<double>(a.f11_uninstalls)};
}

std::vector<double> device_feature_row(const DeviceUsageInstance& d) {
    return {static_cast<double>(d.d1_preinstalled),
            static_cast<double>(d.d1_user_installed),
            static_cast<double>(d.d1_preinstalled + d.d1_user_installed),
            d.d2_suspiciousness,
            static_cast<double>(d.d3_stopped),
            d.d4_daily_installs,
            d.d4_daily_uninstalls,
            static_cast<double>(d.d5_gmail),
            static_cast<double>(d.d5_non_gmail),
            static_cast<double>(d.d5_account_types),
            static_cast<double>(d.d6_installed_and_reviewed),
            static_cast<double>(d.d7_total_reviewed)};
}

Dataset to_dataset(const std::vector<AppUsageInstance>& instances) {
    Dataset d;
    d.feature_names = app_feature_names();
    for (const auto& a : instances) {
        if (!a.label) continue;
        d.rows.push_back(app_feature_row(a));
        d.labels.push_back(*a.label);
    }
    return d;
}

Dataset to_dataset(const std::vector<DeviceUsageInstance>& instances) {
    Dataset d;
    d.feature_names = device_feature_names();
    for (const auto& i : instances) {
        if (!i.label) continue;
        d.rows.push_back(device_feature_row(i));
        d.labels.push_back(*i.label);
    }
    return d;
}

namespace {

json row_to_json(const std::vector<std::string>& names, const std::vector<double>& row) {
    json features;
    for (size_t c = 0; c < names.size(); ++c)
        features[names[c]] = std::isnan(row[c]) ? json(nullptr) : json(row[c]);
    return features;
}

}  // namespace

std::string serialize_instance(const AppUsageInstance& a) {
    json j{{"app_id", a.app_id},
           {"device_id", a.device_id},
           {"features", row_to_json(app_feature_names(), app_feature_row(a))},
           {"label", a.label ? json(*a.label) : json(nullptr)}};
    return j.dump();
}

std::string serialize_instance(const DeviceUsageInstance& d) {
    json j{{"device_id", d.device_id},
           {"features", row_to_json(device_feature_names(), device_feature_row(d))},
           {"label", d.label ? json(*d.label) : json(nullptr)}};
    return j.dump();
}

namespace {

double field(const json& f, const std::string& name) {
    const json& v = f.at(name);
    return v.is_null() ? std::nan("") : v.get<double>();
}

std::optional<StatsSummary> stats_from(const json& f, const std::string& prefix) {
    if (f.at(prefix + "_mean").is_null()) return std::nullopt;
    StatsSummary s;
    s.min = f.at(prefix + "_min").get<double>();
    s.mean = f.at(prefix + "_mean").get<double>();
    s.median = f.at(prefix + "_median").get<double>();
    s.max = f.at(prefix + "_max").get<double>();
    return s;
}

}  // namespace

AppUsageInstance parse_app_instance(const std::string& line) {
    json j = json::parse(line);
    const json& f = j.at("features");
    AppUsageInstance a;
    a.device_id = j.at("device_id").get<std::string>();
    a.app_id = j.at("app_id").get<std::string>();
    if (!j.at("label").is_null()) a.label = j.at("label").get<int>();
    a.f1_reviews_before = static_cast<int>(field(f, "f1_before"));
    a.f1_reviews_during = static_cast<int>(field(f, "f1_during"));
    a.f1_reviews_after = static_cast<int>(field(f, "f1_after"));
    a.f2_install_to_review = stats_from(f, "f2");
    a.f3_inter_review = stats_from(f, "f3");
    a.f4_opened_multiple_days = field(f, "f4_opened_multiple_days") != 0.0;
    a.f5_foreground_snaps_per_day = field(f, "f5_fg_snaps_per_day");
    a.f6_device_snaps_per_day = field(f, "f6_dev_snaps_per_day");
    a.f7_inner_retention = field(f, "f7_retention");
    a.f7_installed_before = field(f, "f7_installed_before") != 0.0;
    a.f7_installed_after = field(f, "f7_installed_after") != 0.0;
    a.f8_normal_perms = static_cast<int>(field(f, "f8_normal"));
    a.f8_dangerous_perms = static_cast<int>(field(f, "f8_dangerous"));
    a.f9_granted = static_cast<int>(field(f, "f9_granted"));
    a.f9_denied = static_cast<int>(field(f, "f9_denied"));
    a.f10_vt_flags = static_cast<int>(field(f, "f10_vt_flags"));
    a.f11_installs = static_cast<int>(field(f, "f11_installs"));
    a.f11_uninstalls = static_cast<int>(field(f, "f11_uninstalls"));
    return a;
}

DeviceUsageInstance parse_device_instance(const std::string& line) {
    json j = json::parse(line);
    const json& f = j.at("features");
    DeviceUsageInstance d;
    d.device_id = j.at("device_id").get<std::string>();
    if (!j.at("label").is_null()) d.label = j.at("label").get<int>();
    d.d1_preinstalled = static_cast<int>(field(f, "d1_preinstalled"));
    d.d1_user_installed = static_cast<int>(field(f, "d1_user_installed"));
    d.d2_suspiciousness = field(f, "d2_suspiciousness");
    d.d3_stopped = static_cast<int>(field(f, "d3_stopped"));
    d.d4_daily_installs = field(f, "d4_daily_installs");
    d.d4_daily_uninstalls = field(f, "d4_daily_uninstalls");
    d.d5_gmail = static_cast<int>(field(f, "d5_gmail"));
    d.d5_non_gmail = static_cast<int>(field(f, "d5_non_gmail"));
    d.d5_account_types = static_cast<int>(field(f, "d5_account_types"));
    d.d6_installed_and_reviewed = static_cast<int>(field(f, "d6_installed_and_reviewed"));
    d.d7_total_reviewed = static_cast<int>(field(f, "d7_total_reviewed"));
    return d;
}

}  // namespace racket
