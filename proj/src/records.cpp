#include "racket/records.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

namespace racket {

using nlohmann::json;

namespace {

bool all_digits(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return c >= '0' && c <= '9'; });
}

void check_ids(const std::string& install_id, const std::string& participant_id) {
    if (install_id.size() != 10 || !all_digits(install_id))
        throw ParseError("install_id", "must be exactly 10 digits");
    if (participant_id.size() != 6 || !all_digits(participant_id))
        throw ParseError("participant_id", "must be exactly 6 digits");
}

const json& require(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(key, "missing field");
    return *it;
}

template <typename T>
T get_field(const json& j, const char* key) {
    try {
        return require(j, key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(key, e.what());
    }
}

std::optional<std::string> get_opt_string(const json& j, const char* key) {
    const json& v = require(j, key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_string()) throw ParseError(key, "expected string or null");
    return v.get<std::string>();
}

std::optional<int64_t> get_opt_int(const json& j, const char* key) {
    const json& v = require(j, key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_number_integer()) throw ParseError(key, "expected integer or null");
    return v.get<int64_t>();
}

json opt_to_json(const std::optional<std::string>& v) {
    return v ? json(*v) : json(nullptr);
}
json opt_to_json(const std::optional<int64_t>& v) {
    return v ? json(*v) : json(nullptr);
}

json delta_to_json(const InstallDelta& d) {
    json perms = json::array();
    for (const auto& p : d.permissions)
        perms.push_back({p.name, p.level == PermissionLevel::dangerous ? "dangerous" : "normal",
                         p.granted});
    return json{{"apk_hash", opt_to_json(d.apk_hash)},
                {"app_id", d.app_id},
                {"event", d.kind == InstallEventKind::installed ? "installed" : "uninstalled"},
                {"install_time", opt_to_json(d.install_time)},
                {"last_update_time", opt_to_json(d.last_update_time)},
                {"permissions", perms}};
}

InstallDelta delta_from_json(const json& j) {
    InstallDelta d;
    d.app_id = get_field<std::string>(j, "app_id");
    std::string ev = get_field<std::string>(j, "event");
    if (ev == "installed")
        d.kind = InstallEventKind::installed;
    else if (ev == "uninstalled")
        d.kind = InstallEventKind::uninstalled;
    else
        throw ParseError("event", "unknown install event kind '" + ev + "'");
    d.install_time = get_opt_int(j, "install_time");
    d.last_update_time = get_opt_int(j, "last_update_time");
    d.apk_hash = get_opt_string(j, "apk_hash");
    for (const json& p : require(j, "permissions")) {
        if (!p.is_array() || p.size() != 3) throw ParseError("permissions", "expected [name, level, granted]");
        Permission perm;
        perm.name = p[0].get<std::string>();
        std::string lvl = p[1].get<std::string>();
        if (lvl == "normal")
            perm.level = PermissionLevel::normal;
        else if (lvl == "dangerous")
            perm.level = PermissionLevel::dangerous;
        else
            throw ParseError("permissions", "unknown level '" + lvl + "'");
        perm.granted = p[2].get<bool>();
        d.permissions.push_back(std::move(perm));
    }
    return d;
}

void validate_delta(const InstallDelta& d) {
    if (d.app_id.empty()) throw ParseError("app_id", "must be non-empty");
    if ((d.kind == InstallEventKind::installed) != d.install_time.has_value())
        throw ParseError("install_time", "present iff event is installed");
    std::set<std::string> names;
    for (const auto& p : d.permissions)
        if (!names.insert(p.name).second)
            throw ParseError("permissions", "duplicate permission name '" + p.name + "'");
}

json parse_line(const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError("", "malformed record line");
    return j;
}

}  // namespace

void validate(const SlowSnapshot& s) {
    check_ids(s.install_id, s.participant_id);
    if (s.timestamp <= 0) throw ParseError("ts", "timestamp must be strictly positive");
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& a : s.registered_accounts)
        if (!seen.insert({a.name, a.type}).second)
            throw ParseError("accounts", "duplicate account (" + a.name + "," + a.type + ")");
}

void validate(const FastSnapshot& s) {
    check_ids(s.install_id, s.participant_id);
    if (s.timestamp <= 0) throw ParseError("ts", "timestamp must be strictly positive");
    if (s.battery_level < 0 || s.battery_level > 100)
        throw ParseError("battery", "battery_level must be in [0,100]");
    for (const auto& d : s.install_events) validate_delta(d);
}

void validate(const ReviewRecord& s) {
    if (s.rating < 1 || s.rating > 5) throw ParseError("rating", "rating must be in [1,5]");
    if (s.review_time <= 0) throw ParseError("ts", "timestamp must be strictly positive");
    if (s.app_id.empty()) throw ParseError("app_id", "must be non-empty");
}

void validate(const AppMetadata& s) {
    if (s.vt_flag_count < 0) throw ParseError("vt_flags", "must be non-negative");
    if (s.play_reviews < 0) throw ParseError("play_reviews", "must be non-negative");
    if (s.app_id.empty()) throw ParseError("app_id", "must be non-empty");
}

std::string serialize(const SlowSnapshot& s) {
    json accounts = json::array();
    for (const auto& a : s.registered_accounts) accounts.push_back({a.name, a.type});
    json j{{"accounts", accounts},
           {"android_id", opt_to_json(s.android_id)},
           {"install_id", s.install_id},
           {"kind", "slow"},
           {"participant_id", s.participant_id},
           {"save_mode", s.save_mode},
           {"stopped_apps", s.stopped_apps},
           {"ts", s.timestamp}};
    return j.dump();
}

std::string serialize(const FastSnapshot& s) {
    json deltas = json::array();
    for (const auto& d : s.install_events) deltas.push_back(delta_to_json(d));
    json j{{"battery", s.battery_level},
           {"foreground_app", opt_to_json(s.foreground_app)},
           {"install_id", s.install_id},
           {"installs", deltas},
           {"kind", "fast"},
           {"participant_id", s.participant_id},
           {"screen_on", s.screen_on},
           {"ts", s.timestamp}};
    return j.dump();
}

std::string serialize(const ReviewRecord& s) {
    json j{{"account", s.account_name},
           {"app_id", s.app_id},
           {"kind", "review"},
           {"rating", s.rating},
           {"ts", s.review_time}};
    return j.dump();
}

std::string serialize(const AppMetadata& s) {
    json j{{"app_id", s.app_id},
           {"kind", "app"},
           {"play_reviews", s.play_reviews},
           {"preinstalled", s.preinstalled},
           {"vt_flags", s.vt_flag_count}};
    return j.dump();
}

std::string serialize(const Record& r) {
    return std::visit([](const auto& x) { return serialize(x); }, r);
}
std::string serialize(const SnapshotRecord& r) {
    return std::visit([](const auto& x) { return serialize(x); }, r);
}

Record parse_record(const std::string& line) {
    json j = parse_line(line);
    std::string kind = get_field<std::string>(j, "kind");
    if (kind == "slow") {
        SlowSnapshot s;
        s.install_id = get_field<std::string>(j, "install_id");
        s.participant_id = get_field<std::string>(j, "participant_id");
        s.android_id = get_opt_string(j, "android_id");
        s.timestamp = get_field<int64_t>(j, "ts");
        for (const json& a : require(j, "accounts")) {
            if (!a.is_array() || a.size() != 2) throw ParseError("accounts", "expected [name, type]");
            s.registered_accounts.push_back({a[0].get<std::string>(), a[1].get<std::string>()});
        }
        s.save_mode = get_field<bool>(j, "save_mode");
        s.stopped_apps = get_field<std::vector<std::string>>(j, "stopped_apps");
        validate(s);
        return s;
    }
    if (kind == "fast") {
        FastSnapshot s;
        s.install_id = get_field<std::string>(j, "install_id");
        s.participant_id = get_field<std::string>(j, "participant_id");
        s.timestamp = get_field<int64_t>(j, "ts");
        s.foreground_app = get_opt_string(j, "foreground_app");
        s.screen_on = get_field<bool>(j, "screen_on");
        s.battery_level = static_cast<int>(get_field<int64_t>(j, "battery"));
        for (const json& d : require(j, "installs")) s.install_events.push_back(delta_from_json(d));
        validate(s);
        return s;
    }
    if (kind == "review") {
        ReviewRecord s;
        s.app_id = get_field<std::string>(j, "app_id");
        s.account_name = get_field<std::string>(j, "account");
        s.rating = static_cast<int>(get_field<int64_t>(j, "rating"));
        s.review_time = get_field<int64_t>(j, "ts");
        validate(s);
        return s;
    }
    throw ParseError("kind", "unknown record kind '" + kind + "'");
}

SnapshotRecord parse_snapshot(const std::string& line) {
    Record r = parse_record(line);
    if (auto* s = std::get_if<SlowSnapshot>(&r)) return *s;
    if (auto* f = std::get_if<FastSnapshot>(&r)) return *f;
    throw ParseError("kind", "expected a snapshot record");
}

ReviewRecord parse_review(const std::string& line) {
    Record r = parse_record(line);
    if (auto* v = std::get_if<ReviewRecord>(&r)) return *v;
    throw ParseError("kind", "expected a review record");
}

AppMetadata parse_app_metadata(const std::string& line) {
    json j = parse_line(line);
    if (get_field<std::string>(j, "kind") != "app") throw ParseError("kind", "expected an app record");
    AppMetadata m;
    m.app_id = get_field<std::string>(j, "app_id");
    m.vt_flag_count = static_cast<int>(get_field<int64_t>(j, "vt_flags"));
    m.play_reviews = get_field<int64_t>(j, "play_reviews");
    m.preinstalled = get_field<bool>(j, "preinstalled");
    validate(m);
    return m;
}

}  // namespace racket
