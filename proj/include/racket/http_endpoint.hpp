#pragma once

#include <memory>
#include <string>

#include "racket/protocol.hpp"
#include "racket/store.hpp"

namespace racket {

// HTTP binding of the ingestion endpoint: POST /ingest with a wire-format
// body, response body is the ack JSON. GET /healthz returns "ok".
class IngestServer {
public:
    IngestServer(SnapshotStore& store, std::string host, int port);
    ~IngestServer();

    // Blocks until stop() is called. Returns false on bind failure.
    bool run();
    // Starts in a background thread and waits until the socket is ready.
    bool start();
    void stop();
    int port() const { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string host_;
    int port_;
};

// Transport bound to a remote ingestion endpoint.
class HttpTransport : public Transport {
public:
    HttpTransport(std::string host, int port);
    ~HttpTransport() override;
    std::optional<std::string> send(const std::string& request) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace racket
