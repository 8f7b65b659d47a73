#include "racket/store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace racket {

size_t SnapshotStore::append_chunk(const std::string& install_id, uint64_t chunk_id,
                                   const std::vector<SnapshotRecord>& records) {
    std::lock_guard<std::mutex> lock(mu_);
    if (!seen_chunks_.insert({install_id, chunk_id}).second) return 0;
    auto& stream = streams_[install_id];
    uint32_t seq = 0;
    for (const auto& r : records)
        stream.push_back({timestamp_of(r), chunk_id, seq++, r});
    std::sort(stream.begin(), stream.end());
    return records.size();
}

size_t SnapshotStore::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    size_t n = 0;
    for (const auto& [_, s] : streams_) n += s.size();
    return n;
}

size_t SnapshotStore::install_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return streams_.size();
}

std::vector<std::string> SnapshotStore::install_ids() const {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<std::string> ids;
    ids.reserve(streams_.size());
    for (const auto& [id, _] : streams_) ids.push_back(id);
    return ids;
}

const std::vector<SnapshotStore::StoredRecord>& SnapshotStore::stream(
    const std::string& install_id) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = streams_.find(install_id);
    if (it == streams_.end())
        throw std::out_of_range("no stream for install " + install_id);
    return it->second;
}

std::string SnapshotStore::serialize_all() const {
    std::lock_guard<std::mutex> lock(mu_);
    std::string out;
    for (const auto& [_, stream] : streams_)
        for (const auto& sr : stream) {
            out += serialize(sr.record);
            out += '\n';
        }
    return out;
}

void SnapshotStore::save(const std::filesystem::path& dir) const {
    std::lock_guard<std::mutex> lock(mu_);
    std::filesystem::create_directories(dir);
    std::ofstream slow(dir / "slow.install.jsonl");
    std::ofstream fast(dir / "fast.install.jsonl");
    for (const auto& [_, stream] : streams_)
        for (const auto& sr : stream) {
            if (std::holds_alternative<SlowSnapshot>(sr.record))
                slow << serialize(sr.record) << '\n';
            else
                fast << serialize(sr.record) << '\n';
        }
}

SnapshotStore SnapshotStore::load(const std::filesystem::path& dir) {
    SnapshotStore store;
    // Load order: per install, timestamps tie-broken by (kind, file order).
    uint64_t pseudo_chunk = 0;
    for (const char* name : {"fast.install.jsonl", "slow.install.jsonl"}) {
        std::ifstream in(dir / name);
        if (!in) continue;
        std::map<std::string, std::vector<SnapshotRecord>> by_install;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            SnapshotRecord r = parse_snapshot(line);
            by_install[install_id_of(r)].push_back(std::move(r));
        }
        for (auto& [id, recs] : by_install) store.append_chunk(id, pseudo_chunk, recs);
        ++pseudo_chunk;
    }
    return store;
}

}  // namespace racket
