#include "racket/fingerprint.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

namespace racket {

using nlohmann::json;

std::vector<CandidateDevice> group_candidates(const SnapshotStore& store) {
    std::vector<CandidateDevice> out;
    for (const std::string& id : store.install_ids()) {
        const auto& stream = store.stream(id);
        if (stream.empty()) continue;
        CandidateDevice c;
        c.install_id = id;
        c.t_first = stream.front().timestamp;
        c.t_last = stream.back().timestamp;
        c.snapshot_count = stream.size();
        for (const auto& sr : stream) {
            c.t_first = std::min(c.t_first, sr.timestamp);
            c.t_last = std::max(c.t_last, sr.timestamp);
            if (const auto* slow = std::get_if<SlowSnapshot>(&sr.record)) {
                c.participant_id = slow->participant_id;
                if (slow->android_id && !c.android_id) c.android_id = slow->android_id;
                for (const auto& a : slow->registered_accounts) c.accounts.insert(a.name);
            } else {
                const auto& fast = std::get<FastSnapshot>(sr.record);
                c.participant_id = fast.participant_id;
                for (const auto& d : fast.install_events)
                    if (d.kind == InstallEventKind::installed && d.install_time)
                        c.app_installs.insert({d.app_id, *d.install_time});
            }
        }
        out.push_back(std::move(c));
    }
    // Canonical order regardless of store iteration details.
    std::sort(out.begin(), out.end(),
              [](const CandidateDevice& a, const CandidateDevice& b) {
                  return a.install_id < b.install_id;
              });
    return out;
}

namespace {

// Closed intervals: touching endpoints count as overlapping.
bool intervals_overlap(const CandidateDevice& a, const CandidateDevice& b) {
    return a.t_first <= b.t_last && b.t_first <= a.t_last;
}

enum class PairVerdict { same, different };

PairVerdict classify_pair(const CandidateDevice& a, const CandidateDevice& b,
                          std::string* reason) {
    if (intervals_overlap(a, b)) {
        *reason = "overlapping-intervals";
        return PairVerdict::different;
    }
    if (a.android_id && b.android_id) {
        if (*a.android_id == *b.android_id) {
            *reason = "android-id-match";
            return PairVerdict::same;
        }
        *reason = "android-id-differs";
        return PairVerdict::different;
    }
    if (jaccard(a.app_installs, b.app_installs) > kAppJaccardThreshold) {
        *reason = "app-jaccard";
        return PairVerdict::same;
    }
    if (jaccard(a.accounts, b.accounts) > kAccountJaccardThreshold) {
        *reason = "account-jaccard";
        return PairVerdict::same;
    }
    *reason = "low-similarity";
    return PairVerdict::different;
}

struct UnionFind {
    std::vector<size_t> parent;
    explicit UnionFind(size_t n) : parent(n) {
        for (size_t i = 0; i < n; ++i) parent[i] = i;
    }
    size_t find(size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void merge(size_t a, size_t b) { parent[find(a)] = find(b); }
};

ResolvedDevice from_members(const std::vector<const CandidateDevice*>& members) {
    ResolvedDevice d;
    d.t_first = members.front()->t_first;
    d.t_last = members.front()->t_last;
    for (const CandidateDevice* c : members) {
        d.member_installs.push_back(c->install_id);
        d.t_first = std::min(d.t_first, c->t_first);
        d.t_last = std::max(d.t_last, c->t_last);
        d.snapshot_count += c->snapshot_count;
        if (c->android_id && !d.android_id) d.android_id = c->android_id;
        d.app_installs.insert(c->app_installs.begin(), c->app_installs.end());
        d.accounts.insert(c->accounts.begin(), c->accounts.end());
    }
    std::sort(d.member_installs.begin(), d.member_installs.end());
    return d;
}

}  // namespace

std::vector<ResolvedDevice> coalesce(const std::vector<CandidateDevice>& candidates) {
    std::vector<const CandidateDevice*> sorted;
    sorted.reserve(candidates.size());
    for (const auto& c : candidates) sorted.push_back(&c);
    std::sort(sorted.begin(), sorted.end(), [](const CandidateDevice* a, const CandidateDevice* b) {
        return a->install_id < b->install_id;
    });

    size_t n = sorted.size();
    UnionFind uf(n);
    std::map<std::pair<size_t, size_t>, std::string> same_reasons;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            std::string reason;
            if (classify_pair(*sorted[i], *sorted[j], &reason) == PairVerdict::same) {
                uf.merge(i, j);
                same_reasons[{i, j}] = reason;
            }
        }

    std::map<size_t, std::vector<size_t>> components;
    for (size_t i = 0; i < n; ++i) components[uf.find(i)].push_back(i);

    std::vector<ResolvedDevice> devices;
    for (auto& [root, idxs] : components) {
        // Transitive merges must not join candidates with "different" evidence.
        bool conflict = false;
        std::string conflict_reason;
        for (size_t a = 0; a < idxs.size() && !conflict; ++a)
            for (size_t b = a + 1; b < idxs.size() && !conflict; ++b) {
                std::string reason;
                if (classify_pair(*sorted[idxs[a]], *sorted[idxs[b]], &reason) ==
                        PairVerdict::different &&
                    (reason == "overlapping-intervals" || reason == "android-id-differs")) {
                    conflict = true;
                    conflict_reason = reason;
                }
            }

        if (conflict) {
            for (size_t i : idxs) {
                ResolvedDevice d = from_members({sorted[i]});
                d.ambiguous = true;
                d.merge_reasons.push_back("conflict:" + conflict_reason);
                devices.push_back(std::move(d));
            }
            continue;
        }

        std::vector<const CandidateDevice*> members;
        for (size_t i : idxs) members.push_back(sorted[i]);
        std::sort(members.begin(), members.end(),
                  [](const CandidateDevice* a, const CandidateDevice* b) {
                      return a->install_id < b->install_id;
                  });
        ResolvedDevice d = from_members(members);
        for (const auto& [pair, reason] : same_reasons)
            if (uf.find(pair.first) == root)
                d.merge_reasons.push_back(reason + ":" + sorted[pair.first]->install_id + "+" +
                                          sorted[pair.second]->install_id);
        devices.push_back(std::move(d));
    }

    std::sort(devices.begin(), devices.end(), [](const ResolvedDevice& a, const ResolvedDevice& b) {
        return a.member_installs.front() < b.member_installs.front();
    });
    for (size_t i = 0; i < devices.size(); ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "dev-%06zu", i);
        devices[i].device_id = buf;
    }
    return devices;
}

std::string serialize_device(const ResolvedDevice& d) {
    json apps = json::array();
    for (const auto& [app, t] : d.app_installs) apps.push_back({app, t});
    json j{{"accounts", std::vector<std::string>(d.accounts.begin(), d.accounts.end())},
           {"ambiguous", d.ambiguous},
           {"android_id", d.android_id ? json(*d.android_id) : json(nullptr)},
           {"app_installs", apps},
           {"device_id", d.device_id},
           {"member_installs", d.member_installs},
           {"merge_reasons", d.merge_reasons},
           {"snapshots", d.snapshot_count},
           {"t_first", d.t_first},
           {"t_last", d.t_last}};
    return j.dump();
}

ResolvedDevice parse_device(const std::string& line) {
    json j = json::parse(line);
    ResolvedDevice d;
    d.device_id = j.at("device_id").get<std::string>();
    d.member_installs = j.at("member_installs").get<std::vector<std::string>>();
    d.ambiguous = j.at("ambiguous").get<bool>();
    d.merge_reasons = j.at("merge_reasons").get<std::vector<std::string>>();
    if (!j.at("android_id").is_null()) d.android_id = j.at("android_id").get<std::string>();
    for (const auto& a : j.at("app_installs"))
        d.app_installs.insert({a[0].get<std::string>(), a[1].get<int64_t>()});
    for (const auto& a : j.at("accounts")) d.accounts.insert(a.get<std::string>());
    d.t_first = j.at("t_first").get<int64_t>();
    d.t_last = j.at("t_last").get<int64_t>();
    d.snapshot_count = j.at("snapshots").get<size_t>();
    return d;
}

}  // namespace racket
