#include "airisk/api.hpp"

#include <algorithm>
#include <fstream>
#include <regex>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "airisk/error.hpp"
#include "airisk/scenarios.hpp"
#include "json_util.hpp"

namespace airisk::api {

using nlohmann::json;

// ---------------------------------------------------------------------------
// SessionStore

SessionStore::SessionStore(std::optional<std::filesystem::path> snapshot_dir)
    : snapshot_dir_(std::move(snapshot_dir)) {
    if (!snapshot_dir_) return;
    std::filesystem::create_directories(*snapshot_dir_);
    for (const auto& entry : std::filesystem::directory_iterator(*snapshot_dir_)) {
        const auto name = entry.path().filename().string();
        if (!entry.is_regular_file() || !name.ends_with(scenarios::kPortfolioExtension)) continue;
        auto loaded = scenarios::load_portfolio(entry.path());
        auto e = std::make_shared<Entry>();
        e->portfolio = std::move(loaded.portfolio);
        entries_[e->portfolio.id] = e;
    }
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : it->second;
}

void SessionStore::persist(const Portfolio& portfolio) const {
    if (snapshot_dir_)
        scenarios::save_portfolio(portfolio, *snapshot_dir_ / (portfolio.id + scenarios::kPortfolioExtension));
}

bool SessionStore::create(const Portfolio& portfolio) {
    std::lock_guard lock(mutex_);
    if (entries_.count(portfolio.id)) return false;
    auto e = std::make_shared<Entry>();
    e->portfolio = portfolio;
    persist(portfolio);
    entries_[portfolio.id] = std::move(e);
    return true;
}

std::optional<SessionStore::Snapshot> SessionStore::get(const std::string& id) const {
    auto e = find(id);
    if (!e) return std::nullopt;
    std::lock_guard lock(e->mutex);
    return Snapshot{e->portfolio, e->revision};
}

std::optional<SessionStore::ReplaceResult> SessionStore::replace(
    const Portfolio& portfolio, std::optional<std::uint64_t> expected_revision) {
    auto e = find(portfolio.id);
    if (!e) return std::nullopt;
    std::lock_guard lock(e->mutex);
    if (expected_revision && *expected_revision != e->revision) return ReplaceResult{false, e->revision};
    persist(portfolio);
    e->portfolio = portfolio;
    ++e->revision;
    return ReplaceResult{true, e->revision};
}

bool SessionStore::remove(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(id);
    if (it == entries_.end()) return false;
    entries_.erase(it);
    if (snapshot_dir_) std::filesystem::remove(*snapshot_dir_ / (id + scenarios::kPortfolioExtension));
    return true;
}

std::vector<std::string> SessionStore::ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : entries_) out.push_back(id);
    return out;
}

// ---------------------------------------------------------------------------
// Service

namespace {

struct HttpError {
    int status;
    std::string code;
    std::string message;
    std::vector<Finding> findings;
};

json findings_json(const std::vector<Finding>& findings) {
    json out = json::array();
    for (const auto& f : findings)
        out.push_back(json{{"level", f.level == FindingLevel::Error ? "error" : "warning"},
                           {"code", f.code},
                           {"path", f.path},
                           {"message", f.message}});
    return out;
}

Response json_response(int status, const json& body) {
    Response r;
    r.status = status;
    r.body = body.dump(2) + "\n";
    r.headers["Content-Type"] = "application/json";
    return r;
}

Response error_response(const HttpError& e) {
    return json_response(e.status,
                         json{{"code", e.code}, {"message", e.message}, {"findings", findings_json(e.findings)}});
}

std::string etag(std::uint64_t revision) { return fmt::format("\"{}\"", revision); }

std::optional<std::uint64_t> parse_etag(std::string v) {
    if (v.starts_with("W/")) v = v.substr(2);
    v.erase(std::remove(v.begin(), v.end(), '"'), v.end());
    try {
        std::size_t pos = 0;
        auto n = std::stoull(v, &pos);
        if (pos != v.size()) return std::nullopt;
        return n;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw HttpError{400, "SchemaError", std::string("request body is not valid JSON: ") + e.what(), {}};
    }
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : path.substr(0, path.find('?'))) {
        if (c == '/') {
            if (!cur.empty()) parts.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) parts.push_back(std::move(cur));
    return parts;
}

bool valid_portfolio_id(const std::string& id) {
    static const std::regex re(R"([A-Za-z0-9][A-Za-z0-9_.-]{0,127})");
    return std::regex_match(id, re);
}

struct RunParams {
    std::size_t trials;
    std::uint64_t seed;
    std::vector<double> confidences;
    std::chrono::steady_clock::time_point deadline;
};

RunParams run_params(const json& body, const ServiceOptions& options) {
    RunParams p{options.default_trials, options.default_seed, scenarios::kDefaultConfidences,
                std::chrono::steady_clock::now() + options.request_timeout};
    if (body.contains("trials")) {
        const auto& t = body.at("trials");
        if (!t.is_number_integer()) throw SchemaError("/trials: expected integer");
        const auto v = t.get<std::int64_t>();
        if (v <= 0 || static_cast<std::uint64_t>(v) > options.max_trials)
            throw HttpError{422, "InvalidTrialCount",
                            fmt::format("trials must be in [1, {}] (got {})", options.max_trials, v), {}};
        p.trials = static_cast<std::size_t>(v);
    }
    if (body.contains("seed")) {
        const auto& s = body.at("seed");
        if (!s.is_number_unsigned()) throw SchemaError("/seed: expected non-negative integer");
        p.seed = s.get<std::uint64_t>();
    }
    if (body.contains("confidences")) {
        const auto& c = detail::require_array(body.at("confidences"), "/confidences");
        p.confidences.clear();
        for (const auto& v : c) {
            if (!v.is_number()) throw SchemaError("/confidences: expected numbers");
            p.confidences.push_back(v.get<double>());
        }
        if (p.confidences.empty()) throw SchemaError("/confidences: must not be empty");
    }
    return p;
}

scenarios::WorkflowResult run(const Portfolio& portfolio, const taxonomy::TaxonomyRegistry& registry,
                              const RunParams& p) {
    scenarios::WorkflowOptions o;
    o.n_trials = p.trials;
    o.seed = p.seed;
    o.confidences = p.confidences;
    o.simulation.deadline = p.deadline;
    return scenarios::run_workflow(portfolio, registry, o);
}

json metric_delta(const engine::RiskMetrics& before, const engine::RiskMetrics& after) {
    json var = json::object(), tvar = json::object();
    for (const auto& [a, v] : after.var) var[fmt::format("{}", a)] = v - before.var.at(a);
    for (const auto& [a, v] : after.tvar) tvar[fmt::format("{}", a)] = v - before.tvar.at(a);
    return json{{"eal", after.eal - before.eal}, {"var", var}, {"tvar", tvar}};
}

Portfolio parse_portfolio(const json& body) {
    auto p = scenarios::portfolio_from_json(body);
    if (!valid_portfolio_id(p.id))
        throw HttpError{400, "SchemaError", "portfolio id must match [A-Za-z0-9][A-Za-z0-9_.-]*", {}};
    return p;
}

}  // namespace

Service::Service(std::shared_ptr<const taxonomy::TaxonomyRegistry> registry, ServiceOptions options)
    : registry_(std::move(registry)), options_(std::move(options)), store_(options_.snapshot_dir) {}

Response Service::handle(const Request& request) {
    const bool mutating = request.method == "POST" || request.method == "PUT";
    auto rid = request.headers.find("x-request-id");
    std::string key;
    if (mutating && rid != request.headers.end() && !rid->second.empty()) {
        key = request.method + " " + request.path + " " + rid->second;
        std::lock_guard lock(replay_mutex_);
        auto it = replay_.find(key);
        if (it != replay_.end()) {
            if (it->second.first != request.body)
                return error_response(
                    {409, "IdempotencyConflict", "X-Request-Id reused with a different body", {}});
            Response r = it->second.second;
            r.headers["Idempotent-Replay"] = "true";
            return r;
        }
    }

    Response response;
    try {
        response = dispatch(request);
    } catch (const HttpError& e) {
        response = error_response(e);
    } catch (const ValidationFailed& e) {
        response = error_response({422, e.code(), "portfolio failed validation", e.findings()});
    } catch (const SchemaError& e) {
        response = error_response({400, e.code(), e.what(), {}});
    } catch (const UnknownId& e) {
        response = error_response({404, e.code(), e.what(), {}});
    } catch (const DeadlineExceeded& e) {
        response = error_response({503, e.code(), e.what(), {}});
    } catch (const Error& e) {
        response = error_response({422, e.code(), e.what(), {}});
    } catch (const json::exception& e) {
        response = error_response({400, "SchemaError", e.what(), {}});
    } catch (const std::exception& e) {
        response = error_response({500, "InternalError", e.what(), {}});
    }

    if (!key.empty() && response.status < 500) {
        std::lock_guard lock(replay_mutex_);
        replay_.emplace(key, std::make_pair(request.body, response));
        replay_order_.push_back(key);
        while (replay_order_.size() > options_.idempotency_capacity) {
            replay_.erase(replay_order_.front());
            replay_order_.pop_front();
        }
    }
    return response;
}

Response Service::dispatch(const Request& req) {
    const auto parts = split_path(req.path);
    const auto& m = req.method;
    auto not_found = [&] { return error_response({404, "NotFound", "no route for " + m + " " + req.path, {}}); };
    auto method_not_allowed = [&] {
        return error_response({405, "MethodNotAllowed", m + " not allowed on " + req.path, {}});
    };
    if (parts.empty() || parts[0] != "v1") return not_found();

    // /v1/health
    if (parts.size() == 2 && parts[1] == "health") {
        if (m != "GET") return method_not_allowed();
        return json_response(200, json{{"status", "ok"}, {"taxonomy_version", registry_->version()}});
    }

    // /v1/taxonomy[/domains/{id}]
    if (parts.size() >= 2 && parts[1] == "taxonomy") {
        if (m != "GET") return method_not_allowed();
        if (parts.size() == 2) return json_response(200, taxonomy::to_json(*registry_));
        if (parts.size() == 4 && parts[2] == "domains") {
            if (!registry_->has_domain(parts[3])) throw UnknownId(parts[3]);
            return json_response(200, taxonomy::to_json(registry_->domain(parts[3])));
        }
        return not_found();
    }

    if (parts.size() < 2 || parts[1] != "portfolios") return not_found();

    // /v1/portfolios
    if (parts.size() == 2) {
        if (m == "GET") return json_response(200, json{{"portfolios", store_.ids()}});
        if (m != "POST") return method_not_allowed();
        auto portfolio = parse_portfolio(parse_body(req.body));
        auto findings = scenarios::validate_portfolio(portfolio, *registry_);
        if (has_errors(findings)) throw ValidationFailed(findings);
        if (!store_.create(portfolio))
            throw HttpError{409, "DuplicateId", "portfolio already exists: " + portfolio.id, {}};
        auto r = json_response(201, json{{"id", portfolio.id}, {"revision", 1}, {"warnings", findings_json(findings)}});
        r.headers["ETag"] = etag(1);
        r.headers["Location"] = "/v1/portfolios/" + portfolio.id;
        return r;
    }

    const std::string& id = parts[2];
    auto snapshot = [&] {
        auto s = store_.get(id);
        if (!s) throw UnknownId(id);
        return *s;
    };

    // /v1/portfolios/{id}
    if (parts.size() == 3) {
        if (m == "GET") {
            auto s = snapshot();
            auto r = json_response(200, scenarios::to_json(s.portfolio));
            r.headers["ETag"] = etag(s.revision);
            return r;
        }
        if (m == "DELETE") {
            if (!store_.remove(id)) throw UnknownId(id);
            return Response{204, "", {}};
        }
        if (m != "PUT") return method_not_allowed();
        auto portfolio = parse_portfolio(parse_body(req.body));
        if (portfolio.id != id)
            throw HttpError{400, "SchemaError", "body id '" + portfolio.id + "' does not match path id '" + id + "'", {}};
        auto findings = scenarios::validate_portfolio(portfolio, *registry_);
        if (has_errors(findings)) throw ValidationFailed(findings);
        std::optional<std::uint64_t> expected;
        if (auto it = req.headers.find("if-match"); it != req.headers.end()) {
            expected = parse_etag(it->second);
            if (!expected) throw HttpError{400, "SchemaError", "malformed If-Match header", {}};
        }
        auto result = store_.replace(portfolio, expected);
        if (!result) throw UnknownId(id);
        if (!result->applied)
            throw HttpError{409, "RevisionConflict",
                            fmt::format("portfolio is at revision {}, not {}", result->revision, *expected), {}};
        auto r = json_response(200, json{{"id", id}, {"revision", result->revision},
                                         {"warnings", findings_json(findings)}});
        r.headers["ETag"] = etag(result->revision);
        return r;
    }

    if (parts.size() != 4) return not_found();

    // /v1/portfolios/{id}/simulate
    if (parts[3] == "simulate") {
        if (m != "POST") return method_not_allowed();
        const auto body = parse_body(req.body);
        detail::require_object(body, "");
        detail::reject_unknown_keys(body, {"trials", "seed", "confidences", "include_curve"}, "");
        const auto params = run_params(body, options_);
        const bool curve = detail::get_bool_or(body, "include_curve", "", true);
        auto s = snapshot();
        auto result = run(s.portfolio, *registry_, params);
        auto j = scenarios::to_json(result, curve);
        j["revision"] = s.revision;
        return json_response(200, j);
    }

    // /v1/portfolios/{id}/whatif
    if (parts[3] == "whatif") {
        if (m != "POST") return method_not_allowed();
        const auto body = parse_body(req.body);
        detail::require_object(body, "");
        detail::reject_unknown_keys(body, {"scenario_id", "toggles", "controls", "trials", "seed", "confidences"}, "");
        const auto params = run_params(body, options_);
        auto s = snapshot();
        const Portfolio& base = s.portfolio;

        // Controls addressable by toggles: every control attached in the portfolio
        // plus any supplied in the request.
        std::map<std::string, Control> catalog;
        for (const auto& sc : base.scenarios)
            for (const auto& c : sc.controls) catalog.emplace(c.id, c);
        if (body.contains("controls")) {
            const auto& cs = detail::require_array(body.at("controls"), "/controls");
            for (std::size_t i = 0; i < cs.size(); ++i) {
                auto c = scenarios::control_from_json(cs[i], fmt::format("/controls/{}", i));
                catalog[c.id] = c;
            }
        }

        std::optional<std::string> target;
        if (body.contains("scenario_id")) {
            target = detail::get_string(body, "scenario_id", "");
            bool found = std::any_of(base.scenarios.begin(), base.scenarios.end(),
                                     [&](const RiskScenario& sc) { return sc.id == *target; });
            if (!found) throw UnknownId(*target);
        }

        std::map<std::string, bool> toggles;
        if (body.contains("toggles")) {
            const auto& t = detail::require_object(body.at("toggles"), "/toggles");
            for (const auto& [cid, on] : t.items()) {
                if (!on.is_boolean()) throw SchemaError("/toggles/" + cid + ": expected boolean");
                if (!catalog.count(cid)) throw UnknownId(cid);
                toggles[cid] = on.get<bool>();
            }
        }

        Portfolio modified = base;
        for (auto& sc : modified.scenarios) {
            if (target && sc.id != *target) continue;
            const auto& domain_id = registry_->domain_of(sc.sub_threat_id).id;
            for (const auto& [cid, on] : toggles) {
                auto it = std::find_if(sc.controls.begin(), sc.controls.end(),
                                       [&](const Control& c) { return c.id == cid; });
                if (!on) {
                    if (it != sc.controls.end()) sc.controls.erase(it);
                    continue;
                }
                if (it != sc.controls.end()) continue;
                const auto& c = catalog.at(cid);
                const bool applicable = c.applicable_domains.empty() || c.applicable_domains.count(domain_id);
                if (!applicable) {
                    if (target)
                        throw InapplicableControl("control " + cid + " does not apply to domain " + domain_id);
                    continue;
                }
                sc.controls.push_back(c);
            }
        }

        auto before = run(base, *registry_, params);
        auto after = run(modified, *registry_, params);
        json j{{"portfolio_id", base.id},
               {"revision", s.revision},
               {"seed", params.seed},
               {"n_trials", params.trials},
               {"toggles", toggles},
               {"baseline", scenarios::to_json(before.portfolio_metrics, false)},
               {"modified", scenarios::to_json(after.portfolio_metrics, false)},
               {"delta", metric_delta(before.portfolio_metrics, after.portfolio_metrics)}};
        if (target) {
            for (std::size_t i = 0; i < before.scenarios.size(); ++i) {
                if (before.scenarios[i].scenario_id != *target) continue;
                const auto& b = before.scenarios[i].metrics;
                const auto& a = after.scenarios[i].metrics;
                j["scenario"] = json{{"scenario_id", *target},
                                     {"baseline", scenarios::to_json(b, false)},
                                     {"modified", scenarios::to_json(a, false)},
                                     {"delta", metric_delta(b, a)}};
            }
        }
        return json_response(200, j);
    }

    return not_found();
}

// ---------------------------------------------------------------------------
// HTTP

struct HttpServer::Impl {
    Service& service;
    httplib::Server server;

    explicit Impl(Service& s) : service(s) {
        auto handler = [this](const httplib::Request& in, httplib::Response& out) {
            Request req;
            req.method = in.method;
            req.path = in.path;
            req.body = in.body;
            for (const auto& [k, v] : in.headers) {
                std::string lower = k;
                std::transform(lower.begin(), lower.end(), lower.begin(),
                               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
                req.headers[lower] = v;
            }
            auto res = service.handle(req);
            out.status = res.status;
            for (const auto& [k, v] : res.headers)
                if (k != "Content-Type") out.set_header(k, v);
            auto ct = res.headers.count("Content-Type") ? res.headers.at("Content-Type") : "text/plain";
            if (!res.body.empty()) out.set_content(res.body, ct);
        };
        server.Get(".*", handler);
        server.Post(".*", handler);
        server.Put(".*", handler);
        server.Delete(".*", handler);
    }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::mount_static(const std::filesystem::path& dir) {
    return impl_->server.set_mount_point("/", dir.string());
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

std::pair<std::string, int> parse_address(const std::string& address) {
    auto colon = address.rfind(':');
    std::string host = "127.0.0.1";
    std::string port = address;
    if (colon != std::string::npos) {
        host = address.substr(0, colon);
        port = address.substr(colon + 1);
        if (host.empty()) host = "127.0.0.1";
    }
    try {
        std::size_t pos = 0;
        int p = std::stoi(port, &pos);
        if (pos != port.size() || p < 0 || p > 65535) throw std::invalid_argument(port);
        return {host, p};
    } catch (const std::exception&) {
        throw Error("InvalidAddress", "invalid listen address: " + address);
    }
}

}  // namespace airisk::api
