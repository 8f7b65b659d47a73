#include "racket/protocol.hpp"

#include <json.hpp>

#include "racket/compress.hpp"
#include "racket/digest.hpp"

namespace racket {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'R', 'S', 'W', '1'};

SnapshotKind kind_of(const SnapshotRecord& r) {
    return std::holds_alternative<SlowSnapshot>(r) ? SnapshotKind::slow : SnapshotKind::fast;
}

std::string kind_name(SnapshotKind k) {
    return k == SnapshotKind::slow ? "slow" : "fast";
}

}  // namespace

std::string serialize_line(const SnapshotRecord& r) {
    std::string line = serialize(r);
    line += '\n';
    return line;
}

std::optional<std::string> AccumulationBuffer::append(const SnapshotRecord& record) {
    if (kind_of(record) != kind_)
        throw ParseError("kind", "record kind does not match buffer kind " + kind_name(kind_));
    bytes_ += serialize_line(record);
    if (bytes_.size() >= threshold_) return rotate();
    return std::nullopt;
}

std::optional<std::string> AccumulationBuffer::rotate() {
    if (bytes_.empty()) return std::nullopt;
    std::string out;
    out.swap(bytes_);
    return out;
}

Chunk make_chunk(const std::string& install_id, const std::string& participant_id,
                 SnapshotKind kind, uint64_t chunk_id, const std::string& raw_payload) {
    Chunk c;
    c.install_id = install_id;
    c.participant_id = participant_id;
    c.kind = kind;
    c.chunk_id = chunk_id;
    c.compressed_payload = deflate_bytes(raw_payload);
    c.payload_digest = sha256_hex(c.compressed_payload);
    return c;
}

std::string encode_wire(const Chunk& chunk) {
    json header{{"chunk_id", chunk.chunk_id},
                {"digest", chunk.payload_digest},
                {"install_id", chunk.install_id},
                {"kind", kind_name(chunk.kind)},
                {"participant_id", chunk.participant_id}};
    std::string h = header.dump();
    std::string out(kMagic, 4);
    uint32_t len = static_cast<uint32_t>(h.size());
    out.push_back(static_cast<char>((len >> 24) & 0xff));
    out.push_back(static_cast<char>((len >> 16) & 0xff));
    out.push_back(static_cast<char>((len >> 8) & 0xff));
    out.push_back(static_cast<char>(len & 0xff));
    out += h;
    out += chunk.compressed_payload;
    return out;
}

Chunk decode_wire(const std::string& message) {
    if (message.size() < 8 || message.compare(0, 4, kMagic, 4) != 0)
        throw ParseError("magic", "not a wire message");
    uint32_t len = (static_cast<uint32_t>(static_cast<unsigned char>(message[4])) << 24) |
                   (static_cast<uint32_t>(static_cast<unsigned char>(message[5])) << 16) |
                   (static_cast<uint32_t>(static_cast<unsigned char>(message[6])) << 8) |
                   static_cast<uint32_t>(static_cast<unsigned char>(message[7]));
    if (message.size() < 8 + static_cast<size_t>(len))
        throw ParseError("header", "truncated wire message");
    json h = json::parse(message.substr(8, len), nullptr, false);
    if (h.is_discarded() || !h.is_object()) throw ParseError("header", "malformed header");
    Chunk c;
    try {
        c.install_id = h.at("install_id").get<std::string>();
        c.participant_id = h.at("participant_id").get<std::string>();
        std::string k = h.at("kind").get<std::string>();
        if (k == "slow")
            c.kind = SnapshotKind::slow;
        else if (k == "fast")
            c.kind = SnapshotKind::fast;
        else
            throw ParseError("kind", "unknown chunk kind '" + k + "'");
        c.chunk_id = h.at("chunk_id").get<uint64_t>();
        c.payload_digest = h.at("digest").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError("header", e.what());
    }
    c.compressed_payload = message.substr(8 + len);
    return c;
}

std::string encode_ack(const std::string& digest_hex) {
    return json{{"digest", digest_hex}}.dump();
}

std::string encode_error_ack(const std::string& reason) {
    return json{{"error", reason}}.dump();
}

std::optional<std::string> decode_ack(const std::string& ack) {
    json j = json::parse(ack, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("digest")) return std::nullopt;
    if (!j["digest"].is_string()) return std::nullopt;
    return j["digest"].get<std::string>();
}

void SnapshotClient::record(const SnapshotRecord& r) {
    AccumulationBuffer& buf = kind_of(r) == SnapshotKind::slow ? slow_ : fast_;
    if (auto payload = buf.append(r))
        retained_.push_back(
            make_chunk(install_id_, participant_id_, buf.kind(), next_chunk_id_++, *payload));
}

void SnapshotClient::flush() {
    for (AccumulationBuffer* buf : {&slow_, &fast_})
        if (auto payload = buf->rotate())
            retained_.push_back(
                make_chunk(install_id_, participant_id_, buf->kind(), next_chunk_id_++, *payload));
}

UploadStats SnapshotClient::upload_pending(Transport& transport) {
    UploadStats stats;
    size_t n = retained_.size();
    for (size_t i = 0; i < n; ++i) {
        Chunk chunk = std::move(retained_.front());
        retained_.pop_front();
        ++stats.attempts;
        std::optional<std::string> response = transport.send(encode_wire(chunk));
        if (!response) {
            ++stats.transport_failures;
            retained_.push_back(std::move(chunk));
            continue;
        }
        std::optional<std::string> acked = decode_ack(*response);
        if (!acked) {
            ++stats.rejections;
            retained_.push_back(std::move(chunk));
            continue;
        }
        if (*acked != chunk.payload_digest) {
            ++stats.digest_mismatches;
            retained_.push_back(std::move(chunk));
            continue;
        }
        ++stats.delivered;  // digest confirmed: delete local copy
    }
    stats.retained = retained_.size();
    return stats;
}

UploadStats SnapshotClient::upload_until_drained(Transport& transport, size_t max_rounds) {
    UploadStats total;
    for (size_t round = 0; round < max_rounds && !retained_.empty(); ++round) {
        UploadStats s = upload_pending(transport);
        total.delivered += s.delivered;
        total.attempts += s.attempts;
        total.digest_mismatches += s.digest_mismatches;
        total.transport_failures += s.transport_failures;
        total.rejections += s.rejections;
    }
    total.retained = retained_.size();
    return total;
}

std::string ingest_message(const std::string& message, SnapshotStore& store) {
    Chunk chunk;
    try {
        chunk = decode_wire(message);
    } catch (const ParseError& e) {
        return encode_error_ack(e.what());
    }
    // The ack carries the digest of the bytes actually received; a mismatch
    // with the client's own digest is the client's signal to retry.
    std::string received_digest = sha256_hex(chunk.compressed_payload);
    if (received_digest != chunk.payload_digest)
        return encode_error_ack("digest mismatch");

    std::vector<SnapshotRecord> records;
    try {
        std::string raw = inflate_bytes(chunk.compressed_payload);
        size_t pos = 0;
        while (pos < raw.size()) {
            size_t nl = raw.find('\n', pos);
            if (nl == std::string::npos)
                return encode_error_ack("payload not whole record lines");
            records.push_back(parse_snapshot(raw.substr(pos, nl - pos)));
            pos = nl + 1;
        }
    } catch (const CompressionError& e) {
        return encode_error_ack(e.what());
    } catch (const ParseError& e) {
        return encode_error_ack(e.what());
    }
    for (const auto& r : records)
        if (install_id_of(r) != chunk.install_id)
            return encode_error_ack("record install_id does not match chunk header");

    store.append_chunk(chunk.install_id, chunk.chunk_id, records);
    return encode_ack(received_digest);
}

std::optional<std::string> InProcessTransport::send(const std::string& request) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng_) < rates_.drop) return std::nullopt;
    std::string delivered = request;
    if (u(rng_) < rates_.corrupt && !delivered.empty()) {
        size_t pos = std::uniform_int_distribution<size_t>(0, delivered.size() - 1)(rng_);
        delivered[pos] = static_cast<char>(delivered[pos] ^ 0x40);
    }
    std::string response = ingest_message(delivered, store_);
    if (u(rng_) < rates_.replay) ingest_message(delivered, store_);
    return response;
}

}  // namespace racket
