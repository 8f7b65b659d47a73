#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "racket/protocol.hpp"
#include "racket/records.hpp"

namespace racket {

enum class DeviceClass { worker_dedicated, worker_organic, regular };
std::string device_class_name(DeviceClass c);
DeviceClass device_class_from_name(const std::string& name);

// Non-negative count/duration distribution: truncated log-normal for the
// right-skewed quantities (parametrized by median and sigma) or Poisson.
struct CountDist {
    enum class Kind { log_normal, poisson } kind = Kind::log_normal;
    double a = 0.0;      // log_normal: median; poisson: mean
    double sigma = 0.0;  // log_normal only
    double min_v = 0.0;
    double max_v = 1e18;

    static CountDist log_normal(double median, double sigma, double min_v = 0.0,
                                double max_v = 1e18) {
        return {Kind::log_normal, median, sigma, min_v, max_v};
    }
    // sigma chosen so the log-normal hits both the target mean and median.
    static CountDist log_normal_mean_median(double mean, double median, double min_v = 0.0,
                                            double max_v = 1e18);
    static CountDist poisson(double mean) { return {Kind::poisson, mean, 0.0, 0.0, 1e18}; }

    double sample(std::mt19937_64& rng) const;
    int sample_count(std::mt19937_64& rng) const;
};

// Generative parameters for one participant class.
struct BehaviorProfile {
    DeviceClass cls = DeviceClass::regular;
    CountDist gmail_accounts;
    int gmail_cap = 1 << 30;
    CountDist non_gmail_accounts;
    std::vector<std::string> account_type_palette;
    CountDist daily_installs;
    CountDist daily_uninstalls;
    CountDist stopped_apps;
    CountDist total_reviews;
    // Install-to-review: mixture of a fast (<= 1 day) and a slow component.
    double i2r_fast_fraction = 0.0;
    CountDist i2r_fast_seconds;
    CountDist i2r_slow_seconds;
    CountDist personal_apps;
    CountDist promo_apps;
    double reviews_per_app_mean = 3.0;  // extra reviews per promoted app
    CountDist screen_minutes;           // per-device daily screen-on time
    double promo_open_probability = 0.5;
    double personal_review_rate = 0.0;  // organic workers' personal reviews
};

BehaviorProfile worker_dedicated_profile();
BehaviorProfile worker_organic_profile();
BehaviorProfile regular_profile();

struct FleetConfig {
    int workers = 200;
    int regulars = 100;
    double organic_fraction = 0.691;  // of workers
    int duration_days = 7;            // >= 2
    uint64_t seed = 0;                // mandatory
    int64_t start_ts = 1600000000;
    int slow_period_s = 120;
    int fast_period_s = 5;
    double dropout = 0.05;            // per-snapshot loss
    double screen_scale = 1.0;        // shrinks streams for statistics-only runs

    void check() const;  // throws std::invalid_argument
};

struct GroundTruthDevice {
    std::string device_id;
    DeviceClass cls = DeviceClass::regular;
    std::string participant_id;
    std::string android_id;
    std::vector<std::string> install_ids;
    std::map<std::string, int> app_intent;  // 1 = promotion, 0 = personal
};

struct GroundTruth {
    std::vector<GroundTruthDevice> devices;
};

std::string serialize_truth(const GroundTruthDevice& d);
GroundTruthDevice parse_truth(const std::string& line);

// Receives generated records in deterministic order.
class FleetSink {
public:
    virtual ~FleetSink() = default;
    virtual void on_snapshot(const SnapshotRecord& r) = 0;
    virtual void on_review(const ReviewRecord& r) = 0;
    virtual void on_app(const AppMetadata& m) = 0;
    virtual void on_truth(const GroundTruthDevice& d) = 0;
};

class MemorySink : public FleetSink {
public:
    std::vector<SnapshotRecord> snapshots;
    std::vector<ReviewRecord> reviews;
    std::vector<AppMetadata> apps;
    GroundTruth truth;

    void on_snapshot(const SnapshotRecord& r) override { snapshots.push_back(r); }
    void on_review(const ReviewRecord& r) override { reviews.push_back(r); }
    void on_app(const AppMetadata& m) override { apps.push_back(m); }
    void on_truth(const GroundTruthDevice& d) override { truth.devices.push_back(d); }
};

// Writes {slow,fast}.install.jsonl, reviews.jsonl, apps.jsonl and
// ground_truth.jsonl under `dir`.
class JsonlSink : public FleetSink {
public:
    explicit JsonlSink(const std::filesystem::path& dir);
    ~JsonlSink() override;
    void on_snapshot(const SnapshotRecord& r) override;
    void on_review(const ReviewRecord& r) override;
    void on_app(const AppMetadata& m) override;
    void on_truth(const GroundTruthDevice& d) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Deterministic given config.seed: every device draws from its own random
// stream derived from (seed, device index), so output does not depend on
// generation order.
void generate_fleet(const FleetConfig& config, FleetSink& sink);

// Stream-level fault events: RacketStore reinstalls (new install_id, same
// device), shared devices (new install_id and participant), and Android ID
// suppression. Transport faults are carried separately (InProcessTransport).
struct FaultSchedule {
    struct Reinstall {
        std::string device_id;
        int64_t at_ts;
        bool change_participant = false;  // shared-device handover
        std::string new_participant_id;   // when change_participant
    };
    std::vector<Reinstall> cuts;
    double android_suppression_rate = 0.0;  // per resulting install
    uint64_t seed = 0;

    // Random schedule with the given per-device event rates.
    static FaultSchedule random(const GroundTruth& truth, double reinstall_rate,
                                double share_rate, double suppression_rate, int64_t t_begin,
                                int64_t t_end, uint64_t seed);
};

// Rewrites snapshot streams in place and updates ground-truth install sets.
// Throws std::invalid_argument on an invalid schedule (non-increasing cut
// timestamps on one device).
void inject_faults(std::vector<SnapshotRecord>& records, GroundTruth& truth,
                   const FaultSchedule& schedule);

}  // namespace racket
