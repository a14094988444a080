#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "airisk/taxonomy.hpp"
#include "airisk/types.hpp"

namespace airisk::api {

struct Request {
    std::string method;
    std::string path;
    std::string body;
    std::map<std::string, std::string> headers;  // lower-case names
};

struct Response {
    int status{200};
    std::string body;
    std::map<std::string, std::string> headers;
};

/// In-memory portfolios keyed by id. Each portfolio carries a revision that
/// increments on replace. With a snapshot directory, every write is persisted
/// (write to a temporary file, then rename) and existing snapshots are loaded
/// at construction.
class SessionStore {
public:
    struct Snapshot {
        Portfolio portfolio;
        std::uint64_t revision{0};
    };

    explicit SessionStore(std::optional<std::filesystem::path> snapshot_dir = std::nullopt);

    /// Returns false if the id is taken.
    bool create(const Portfolio& portfolio);
    std::optional<Snapshot> get(const std::string& id) const;
    /// Replaces an existing portfolio. With `expected_revision`, the write only
    /// happens if it matches; the current revision is returned either way
    /// (nullopt if the id is unknown).
    struct ReplaceResult {
        bool applied{false};
        std::uint64_t revision{0};
    };
    std::optional<ReplaceResult> replace(const Portfolio& portfolio,
                                         std::optional<std::uint64_t> expected_revision);
    bool remove(const std::string& id);
    std::vector<std::string> ids() const;

private:
    struct Entry {
        std::mutex mutex;
        Portfolio portfolio;
        std::uint64_t revision{1};
    };
    std::shared_ptr<Entry> find(const std::string& id) const;
    void persist(const Portfolio& portfolio) const;

    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> entries_;
    std::optional<std::filesystem::path> snapshot_dir_;
};

struct ServiceOptions {
    std::size_t max_trials{1'000'000};
    std::size_t default_trials{100'000};
    std::uint64_t default_seed{42};
    std::optional<std::filesystem::path> snapshot_dir;
    /// Responses remembered for X-Request-Id replay.
    std::size_t idempotency_capacity{1024};
    /// Wall-clock budget for the simulations of one request; exceeded -> 503.
    std::chrono::milliseconds request_timeout{60'000};
};

/// Transport-independent request handler. Error bodies are
/// {"code", "message", "findings"}; see api/openapi.yaml for the routes.
class Service {
public:
    Service(std::shared_ptr<const taxonomy::TaxonomyRegistry> registry, ServiceOptions options = {});

    Response handle(const Request& request);

    SessionStore& store() noexcept { return store_; }
    const taxonomy::TaxonomyRegistry& registry() const noexcept { return *registry_; }

private:
    Response dispatch(const Request& request);

    std::shared_ptr<const taxonomy::TaxonomyRegistry> registry_;
    ServiceOptions options_;
    SessionStore store_;

    std::mutex replay_mutex_;
    std::map<std::string, std::pair<std::string, Response>> replay_;  // key -> (body, response)
    std::deque<std::string> replay_order_;
};

/// HTTP front end over a Service.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds `host:port` (port 0 picks a free port) and returns the bound port,
    /// or -1 on failure.
    int bind(const std::string& host, int port);
    /// Serves files under `dir` for paths outside /v1 (the web client's build output).
    /// Returns false if `dir` is not a directory.
    bool mount_static(const std::filesystem::path& dir);
    /// Blocks serving requests until stop().
    bool listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Splits "host:port"; a bare port binds loopback.
std::pair<std::string, int> parse_address(const std::string& address);

}  // namespace airisk::api
