#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "racket/dataset.hpp"
#include "racket/fingerprint.hpp"
#include "racket/records.hpp"
#include "racket/store.hpp"

namespace racket {

// Raised when a device has under two days of snapshots.
class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int64_t kMinMonitoringSeconds = 2 * 86400;

struct StatsSummary {
    double min = 0.0, mean = 0.0, median = 0.0, max = 0.0;
};
StatsSummary stats_summary(const std::vector<double>& xs);  // xs non-empty

// Merged snapshot streams of one resolved device plus derived lookups.
struct DeviceView {
    std::string device_id;
    int64_t t_first = 0;
    int64_t t_last = 0;
    size_t snapshot_count = 0;
    std::vector<SlowSnapshot> slow;  // sorted by timestamp
    std::vector<FastSnapshot> fast;  // sorted by timestamp
    std::set<std::string> accounts;
    std::map<std::string, std::string> account_types;  // name -> type
    // Last known install time per app (initial inventory + deltas).
    std::map<std::string, int64_t> last_install_time;
    std::set<std::string> apps;  // every app observed on the device

    double window_days() const { return static_cast<double>(t_last - t_first) / 86400.0; }
};

DeviceView build_device_view(const SnapshotStore& store, const ResolvedDevice& device);

struct ReviewIndex {
    std::map<std::string, std::vector<ReviewRecord>> by_account;
    int64_t last_crawl_ts = 0;  // bounds the "after monitoring" period

    static ReviewIndex build(const std::vector<ReviewRecord>& reviews);
};

struct AppUsageInstance {
    std::string device_id;
    std::string app_id;
    int f1_reviews_before = 0;
    int f1_reviews_during = 0;
    int f1_reviews_after = 0;
    std::optional<StatsSummary> f2_install_to_review;  // seconds
    std::optional<StatsSummary> f3_inter_review;       // seconds
    bool f4_opened_multiple_days = false;
    double f5_foreground_snaps_per_day = 0.0;
    double f6_device_snaps_per_day = 0.0;
    double f7_inner_retention = 0.0;  // seconds
    bool f7_installed_before = false;
    bool f7_installed_after = false;
    int f8_normal_perms = 0;
    int f8_dangerous_perms = 0;
    int f9_granted = 0;
    int f9_denied = 0;
    int f10_vt_flags = 0;
    int f11_installs = 0;
    int f11_uninstalls = 0;
    std::optional<int> label;  // 1 = promotion, 0 = personal
};

struct DeviceUsageInstance {
    std::string device_id;
    int d1_preinstalled = 0;
    int d1_user_installed = 0;
    double d2_suspiciousness = 0.0;  // [0,1]
    int d3_stopped = 0;
    double d4_daily_installs = 0.0;
    double d4_daily_uninstalls = 0.0;
    int d5_gmail = 0;
    int d5_non_gmail = 0;
    int d5_account_types = 0;
    int d6_installed_and_reviewed = 0;
    int d7_total_reviewed = 0;
    std::optional<int> label;  // 1 = worker, 0 = regular
};

// Durations review_time - last_install_time for device-account reviews of
// the app; negative pairs (reviews of a past install) are excluded.
std::vector<double> install_to_review_times(const DeviceView& device, const std::string& app_id,
                                            const ReviewIndex& reviews);

AppUsageInstance extract_app_features(const DeviceView& device, const std::string& app_id,
                                      const ReviewIndex& reviews,
                                      const std::map<std::string, AppMetadata>& metadata);

DeviceUsageInstance extract_device_features(
    const DeviceView& device, const std::vector<AppUsageInstance>& app_instances,
    const std::function<bool(const AppUsageInstance&)>& app_flagged, const ReviewIndex& reviews);

// Fills the d1 pre-installed vs user-installed split from metadata flags.
void set_install_split(DeviceUsageInstance& instance, const DeviceView& device,
                       const std::map<std::string, AppMetadata>& metadata);

// Fixed column orders for CSV/Dataset export.
const std::vector<std::string>& app_feature_names();
const std::vector<std::string>& device_feature_names();

std::vector<double> app_feature_row(const AppUsageInstance& a);      // NaN for missing
std::vector<double> device_feature_row(const DeviceUsageInstance& d);

// Instances with a label become dataset rows; unlabeled ones are skipped.
Dataset to_dataset(const std::vector<AppUsageInstance>& instances);
Dataset to_dataset(const std::vector<DeviceUsageInstance>& instances);

std::string serialize_instance(const AppUsageInstance& a);
std::string serialize_instance(const DeviceUsageInstance& d);
AppUsageInstance parse_app_instance(const std::string& line);
DeviceUsageInstance parse_device_instance(const std::string& line);

}  // namespace racket
