#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "racket/records.hpp"

namespace racket {

// Server-side record store. Records are keyed by install_id; chunk appends
// are atomic and deduplicated by (install_id, chunk_id), so at-least-once
// delivery yields exactly-once storage. Per-install streams are kept sorted
// by (timestamp, chunk_id, seq), which makes serialization deterministic
// regardless of arrival order.
class SnapshotStore {
public:
    SnapshotStore() = default;
    SnapshotStore(SnapshotStore&& o) noexcept {
        std::lock_guard lk(o.mu_);
        streams_ = std::move(o.streams_);
        seen_chunks_ = std::move(o.seen_chunks_);
    }
    SnapshotStore& operator=(SnapshotStore&& o) noexcept {
        if (this != &o) {
            std::scoped_lock lk(mu_, o.mu_);
            streams_ = std::move(o.streams_);
            seen_chunks_ = std::move(o.seen_chunks_);
        }
        return *this;
    }

    struct StoredRecord {
        int64_t timestamp;
        uint64_t chunk_id;
        uint32_t seq;  // position within the chunk
        SnapshotRecord record;

        bool operator<(const StoredRecord& o) const {
            if (timestamp != o.timestamp) return timestamp < o.timestamp;
            if (chunk_id != o.chunk_id) return chunk_id < o.chunk_id;
            return seq < o.seq;
        }
    };

    // Appends all records of one chunk. Returns the number of records newly
    // stored (0 when the chunk_id was already seen for this install).
    size_t append_chunk(const std::string& install_id, uint64_t chunk_id,
                        const std::vector<SnapshotRecord>& records);

    size_t size() const;
    size_t install_count() const;
    std::vector<std::string> install_ids() const;
    const std::vector<StoredRecord>& stream(const std::string& install_id) const;

    // Deterministic serialization: installs in lexicographic order, records
    // in stream order, one canonical line each. Identical stores produce
    // byte-identical output.
    std::string serialize_all() const;

    // Persists slow.install.jsonl / fast.install.jsonl under `dir`.
    void save(const std::filesystem::path& dir) const;
    static SnapshotStore load(const std::filesystem::path& dir);

private:
    mutable std::mutex mu_;
    std::map<std::string, std::vector<StoredRecord>> streams_;
    std::set<std::pair<std::string, uint64_t>> seen_chunks_;
};

}  // namespace racket
