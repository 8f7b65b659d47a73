#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "racket/store.hpp"

namespace racket {

// Observed separating values for candidate pairs with different devices;
// similarities strictly above these merge ID-less candidate pairs.
inline constexpr double kAppJaccardThreshold = 0.5625;
inline constexpr double kAccountJaccardThreshold = 0.53;

// All snapshots sharing one collector install ID.
struct CandidateDevice {
    std::string install_id;
    std::string participant_id;
    std::optional<std::string> android_id;
    int64_t t_first = 0;
    int64_t t_last = 0;
    std::set<std::pair<std::string, int64_t>> app_installs;  // (app_id, install_time)
    std::set<std::string> accounts;
    size_t snapshot_count = 0;
};

struct ResolvedDevice {
    std::string device_id;
    std::vector<std::string> member_installs;  // sorted
    bool ambiguous = false;                    // conflicting merge evidence, left unmerged
    std::vector<std::string> merge_reasons;
    std::optional<std::string> android_id;
    std::set<std::pair<std::string, int64_t>> app_installs;
    std::set<std::string> accounts;
    int64_t t_first = 0;
    int64_t t_last = 0;
    size_t snapshot_count = 0;
};

// |a ∩ b| / |a ∪ b|; 0 when both sets are empty.
template <typename T>
double jaccard(const std::set<T>& a, const std::set<T>& b) {
    if (a.empty() && b.empty()) return 0.0;
    size_t inter = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib)
            ++ia;
        else if (*ib < *ia)
            ++ib;
        else {
            ++inter;
            ++ia;
            ++ib;
        }
    }
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

// One candidate per distinct install_id; every snapshot assigned exactly once.
std::vector<CandidateDevice> group_candidates(const SnapshotStore& store);

// Pairwise rules:
//   1. overlapping install intervals (closed) => different devices;
//   2. disjoint intervals, both Android IDs present: equal => same,
//      unequal => different;
//   3. disjoint intervals, an Android ID missing: same iff app-install
//      Jaccard > 0.5625 or account Jaccard > 0.53.
// Devices are connected components of the "same" relation. A component that
// also contains a "different" pair (overlap or unequal IDs) is emitted
// unmerged with every member flagged ambiguous.
std::vector<ResolvedDevice> coalesce(const std::vector<CandidateDevice>& candidates);

std::string serialize_device(const ResolvedDevice& d);
ResolvedDevice parse_device(const std::string& line);

}  // namespace racket
