#include "racket/http_endpoint.hpp"

#include <thread>

#include <httplib.h>

namespace racket {

struct IngestServer::Impl {
    httplib::Server server;
    std::thread worker;
};

IngestServer::IngestServer(SnapshotStore& store, std::string host, int port)
    : impl_(std::make_unique<Impl>()), host_(std::move(host)), port_(port) {
    impl_->server.Post("/ingest", [&store](const httplib::Request& req, httplib::Response& res) {
        res.set_content(ingest_message(req.body, store), "application/json");
    });
    impl_->server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });
}

IngestServer::~IngestServer() { stop(); }

bool IngestServer::run() {
    if (port_ == 0) {
        port_ = impl_->server.bind_to_any_port(host_);
        if (port_ < 0) return false;
        return impl_->server.listen_after_bind();
    }
    return impl_->server.listen(host_, port_);
}

bool IngestServer::start() {
    if (port_ == 0) {
        port_ = impl_->server.bind_to_any_port(host_);
        if (port_ < 0) return false;
    } else if (!impl_->server.bind_to_port(host_, port_)) {
        return false;
    }
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return true;
}

void IngestServer::stop() {
    impl_->server.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

struct HttpTransport::Impl {
    httplib::Client client;
    Impl(const std::string& host, int port) : client(host, port) {}
};

HttpTransport::HttpTransport(std::string host, int port)
    : impl_(std::make_unique<Impl>(host, port)) {}

HttpTransport::~HttpTransport() = default;

std::optional<std::string> HttpTransport::send(const std::string& request) {
    auto res = impl_->client.Post("/ingest", request, "application/octet-stream");
    if (!res || res->status != 200) return std::nullopt;
    return res->body;
}

}  // namespace racket
