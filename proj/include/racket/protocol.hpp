#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "racket/records.hpp"
#include "racket/store.hpp"

namespace racket {

enum class SnapshotKind { slow, fast };

inline constexpr size_t kSlowBufferThreshold = 8 * 1024;    // 8 KiB
inline constexpr size_t kFastBufferThreshold = 100 * 1024;  // 100 KiB

struct Chunk {
    std::string install_id;
    std::string participant_id;
    SnapshotKind kind = SnapshotKind::slow;
    uint64_t chunk_id = 0;               // monotonically increasing per install
    std::string compressed_payload;      // DEFLATE of whole record lines
    std::string payload_digest;          // sha256 hex of compressed_payload
};

// Client-side accumulating file for one snapshot kind. Whole record lines
// only; rotation fires when the uncompressed size reaches the threshold
// after an append.
class AccumulationBuffer {
public:
    explicit AccumulationBuffer(SnapshotKind kind)
        : kind_(kind),
          threshold_(kind == SnapshotKind::slow ? kSlowBufferThreshold : kFastBufferThreshold) {}

    SnapshotKind kind() const { return kind_; }
    size_t threshold() const { return threshold_; }
    size_t size() const { return bytes_.size(); }
    bool empty() const { return bytes_.empty(); }

    // Appends one record line; returns the rotated-out raw payload when the
    // post-append size reached the threshold. Throws ParseError on a record
    // whose kind does not match the buffer kind.
    std::optional<std::string> append(const SnapshotRecord& record);

    // Rotates out whatever is buffered (end-of-stream flush).
    std::optional<std::string> rotate();

private:
    SnapshotKind kind_;
    size_t threshold_;
    std::string bytes_;
};

// Abstract request/response channel. Returns the raw response bytes, or
// nullopt on transport failure (timeout / connection loss).
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::optional<std::string> send(const std::string& request) = 0;
};

// Wire layout (see docs/wire.md):
//   "RSW1" | u32 big-endian header length | header JSON | compressed payload
std::string encode_wire(const Chunk& chunk);
Chunk decode_wire(const std::string& message);  // throws ParseError

std::string encode_ack(const std::string& digest_hex);
std::string encode_error_ack(const std::string& reason);
// Returns the acked digest, or nullopt for an error/unparseable ack.
std::optional<std::string> decode_ack(const std::string& ack);

Chunk make_chunk(const std::string& install_id, const std::string& participant_id,
                 SnapshotKind kind, uint64_t chunk_id, const std::string& raw_payload);

struct UploadStats {
    size_t delivered = 0;   // chunks confirmed and deleted locally
    size_t retained = 0;    // chunks still pending retry
    size_t attempts = 0;
    size_t digest_mismatches = 0;
    size_t transport_failures = 0;
    size_t rejections = 0;
};

// One snapshot client per install: two accumulation buffers, a retained-chunk
// queue, and an at-least-once upload loop.
class SnapshotClient {
public:
    SnapshotClient(std::string install_id, std::string participant_id)
        : install_id_(std::move(install_id)),
          participant_id_(std::move(participant_id)),
          slow_(SnapshotKind::slow),
          fast_(SnapshotKind::fast) {}

    void record(const SnapshotRecord& r);
    void flush();  // rotate both buffers into retained chunks

    // Attempts every retained chunk once; deletes a chunk iff the acked
    // digest equals the locally computed digest.
    UploadStats upload_pending(Transport& transport);

    // Repeats upload_pending until the queue drains or max_rounds is hit.
    UploadStats upload_until_drained(Transport& transport, size_t max_rounds = 64);

    size_t pending_chunks() const { return retained_.size(); }

private:
    std::string install_id_;
    std::string participant_id_;
    AccumulationBuffer slow_;
    AccumulationBuffer fast_;
    uint64_t next_chunk_id_ = 0;
    std::deque<Chunk> retained_;
};

// Server-side ingest: validates the digest, decompresses, parses whole
// record lines and appends to the store (dedup by install_id + chunk_id).
// Hostile input allowed; any failure yields an error ack and stores nothing.
std::string ingest_message(const std::string& message, SnapshotStore& store);

// In-process transport with programmable faults, used by tests and the
// fault-injection harness.
class InProcessTransport : public Transport {
public:
    struct FaultRates {
        double drop = 0.0;     // request lost, no response
        double corrupt = 0.0;  // one payload byte flipped in transit
        double replay = 0.0;   // request delivered twice
    };

    explicit InProcessTransport(SnapshotStore& store)
        : store_(store), rates_(), rng_(0) {}

    InProcessTransport(SnapshotStore& store, FaultRates rates,
                       uint64_t seed = 0)
        : store_(store), rates_(rates), rng_(seed) {}

    std::optional<std::string> send(const std::string& request) override;

private:
    SnapshotStore& store_;
    FaultRates rates_;
    std::mt19937_64 rng_;
};

std::string serialize_line(const SnapshotRecord& r);

}  // namespace racket
