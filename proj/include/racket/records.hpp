#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace racket {

// Thrown when a record line cannot be parsed or violates a field invariant.
// `field` names the offending field ("" when the whole line is malformed).
class ParseError : public std::runtime_error {
public:
    ParseError(std::string field, const std::string& what)
        : std::runtime_error(field.empty() ? what : field + ": " + what),
          field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class PermissionLevel { normal, dangerous };

struct Permission {
    std::string name;
    PermissionLevel level = PermissionLevel::normal;
    bool granted = false;

    auto operator<=>(const Permission&) const = default;
};

enum class InstallEventKind { installed, uninstalled };

// Delta between consecutive reports of the installed-app set.
struct InstallDelta {
    std::string app_id;
    InstallEventKind kind = InstallEventKind::installed;
    std::optional<int64_t> install_time;       // present iff kind == installed
    std::optional<int64_t> last_update_time;
    std::vector<Permission> permissions;       // names unique per delta
    std::optional<std::string> apk_hash;

    auto operator<=>(const InstallDelta&) const = default;
};

struct AccountEntry {
    std::string name;
    std::string type;

    auto operator<=>(const AccountEntry&) const = default;
};

// 2-minute cadence observation: identifiers, registered accounts, device
// status and stopped apps.
struct SlowSnapshot {
    std::string install_id;      // exactly 10 digits
    std::string participant_id;  // 6 digits
    std::optional<std::string> android_id;
    int64_t timestamp = 0;       // epoch seconds, > 0
    std::vector<AccountEntry> registered_accounts;  // no duplicate pairs
    bool save_mode = false;
    std::vector<std::string> stopped_apps;

    auto operator<=>(const SlowSnapshot&) const = default;
};

// 5-second cadence observation: foreground app, screen/battery status and
// install/uninstall deltas.
struct FastSnapshot {
    std::string install_id;
    std::string participant_id;
    int64_t timestamp = 0;
    std::optional<std::string> foreground_app;
    bool screen_on = false;
    int battery_level = 0;  // [0, 100]
    std::vector<InstallDelta> install_events;

    auto operator<=>(const FastSnapshot&) const = default;
};

struct ReviewRecord {
    std::string app_id;
    std::string account_name;
    int rating = 0;          // [1, 5]
    int64_t review_time = 0; // epoch seconds, 1-s granularity

    auto operator<=>(const ReviewRecord&) const = default;
};

struct AppMetadata {
    std::string app_id;
    int vt_flag_count = 0;       // >= 0
    bool preinstalled = false;
    long long play_reviews = 0;  // store-wide review count, >= 0

    auto operator<=>(const AppMetadata&) const = default;
};

using SnapshotRecord = std::variant<SlowSnapshot, FastSnapshot>;
using Record = std::variant<SlowSnapshot, FastSnapshot, ReviewRecord>;

inline const std::string& install_id_of(const SnapshotRecord& r) {
    return std::visit([](const auto& s) -> const std::string& { return s.install_id; }, r);
}
inline int64_t timestamp_of(const SnapshotRecord& r) {
    return std::visit([](const auto& s) { return s.timestamp; }, r);
}

// Field-level invariant checks; throw ParseError on violation.
void validate(const SlowSnapshot& s);
void validate(const FastSnapshot& s);
void validate(const ReviewRecord& s);
void validate(const AppMetadata& s);

// Canonical line-delimited serialization (one JSON object per line, keys
// sorted). serialize(parse(line)) is semantically equal to line.
std::string serialize(const SlowSnapshot& s);
std::string serialize(const FastSnapshot& s);
std::string serialize(const ReviewRecord& s);
std::string serialize(const AppMetadata& s);
std::string serialize(const Record& r);
std::string serialize(const SnapshotRecord& r);

// Parses one canonical line; dispatches on the "kind" field.
Record parse_record(const std::string& line);
SnapshotRecord parse_snapshot(const std::string& line);
ReviewRecord parse_review(const std::string& line);
AppMetadata parse_app_metadata(const std::string& line);

}  // namespace racket
