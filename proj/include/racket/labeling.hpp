#pragma once

#include <map>
#include <optional>
#include <string>

namespace racket {

// Per-app evidence gathered across the fleet, used to assign training labels
// the same way the field study did: apps advertised for promotion and seen
// only on worker devices are promotion instances; apps absent from worker
// devices but popular with regular users are personal instances. Everything
// else stays unlabeled.
struct AppObservations {
    std::string app_id;
    bool advertised = false;      // listed on a promotion marketplace
    int worker_devices = 0;       // distinct worker devices that installed it
    int regular_devices = 0;
    long long play_reviews = 0;   // store-wide review count
};

struct LabelRule {
    int min_worker_devices = 5;
    int min_regular_devices = 1;
    long long min_play_reviews = 15000;
};

// 1 = promotion, 0 = personal, nullopt = unlabeled.
std::optional<int> derive_app_label(const AppObservations& obs, const LabelRule& rule = {});

std::map<std::string, std::optional<int>> derive_app_labels(
    const std::map<std::string, AppObservations>& observations, const LabelRule& rule = {});

}  // namespace racket
