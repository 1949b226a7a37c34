#pragma once
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sportscorpus/pipeline.hpp"
#include "sportscorpus/util.hpp"

namespace sportscorpus::pipeline {

// JSON-over-HTTP adapter for the coordinator:
//   POST /register   {"worker_id"}                      -> {"ok": true}
//   GET  /task?worker_id=W                              -> {"kind": "task"|"wait"|"done", ...}
//   POST /result     {"task_id","worker_id","status","output_uri","stats","error"}
//                                                       -> {"result": ...}
//   POST /heartbeat  {"worker_id"}                      -> {"ok": true}
//   GET  /manifest                                      -> run manifest snapshot
// Protocol errors map to 4xx with {"error": ...}; see docs/wire-protocol.md.

inline std::int64_t wall_clock_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

class CoordinatorServer {
public:
    explicit CoordinatorServer(Coordinator& coordinator, int tick_every_ms = 250)
        : coordinator_(coordinator), tick_every_ms_(tick_every_ms) {
        install_routes();
    }

    ~CoordinatorServer() { stop(); }

    // Binds to an OS-assigned port; returns it. Serving happens on
    // background threads until stop().
    int listen_on_any_port(const std::string& host) {
        int port = server_.bind_to_any_port(host);
        if (port <= 0) throw Error("io", "cannot bind coordinator to " + host);
        start_threads(host, port, true);
        return port;
    }

    void listen(const std::string& host, int port) {
        if (!server_.bind_to_port(host, port))
            throw Error("io", "cannot bind coordinator to " + host + ":" + std::to_string(port));
        start_threads(host, port, true);
    }

    void stop() {
        bool expected = true;
        if (!running_.compare_exchange_strong(expected, false)) return;
        server_.stop();
        if (serve_thread_.joinable()) serve_thread_.join();
        if (tick_thread_.joinable()) tick_thread_.join();
    }

    bool wait_until_finished(int poll_ms = 100) {
        while (running_.load()) {
            if (coordinator_.finished()) return true;
            std::this_thread::sleep_for(std::chrono::milliseconds(poll_ms));
        }
        return coordinator_.finished();
    }

private:
    void start_threads(const std::string& host, int port, bool listen_after_bind) {
        running_.store(true);
        serve_thread_ = std::thread([this] { server_.listen_after_bind(); });
        tick_thread_ = std::thread([this] {
            while (running_.load()) {
                coordinator_.tick(wall_clock_ms());
                std::this_thread::sleep_for(std::chrono::milliseconds(tick_every_ms_));
            }
        });
        (void)host;
        (void)port;
        (void)listen_after_bind;
        server_.wait_until_ready();
    }

    static json parse_body(const httplib::Request& req) {
        try {
            return json::parse(req.body);
        } catch (const json::exception& e) {
            throw Error("format", std::string("malformed request JSON: ") + e.what());
        }
    }

    static void reply(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    template <typename Fn>
    static void guarded(httplib::Response& res, Fn&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            int status = e.kind() == "protocol" ? 409 : 400;
            if (std::string_view(e.what()).find("unknown task") != std::string_view::npos)
                status = 404;
            if (std::string_view(e.what()).find("registration required") !=
                std::string_view::npos)
                status = 403;
            reply(res, status, json{{"error", e.what()}, {"kind", e.kind()}});
        } catch (const std::exception& e) {
            reply(res, 500, json{{"error", e.what()}, {"kind", "internal"}});
        }
    }

    void install_routes() {
        server_.Post("/register", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                json body = parse_body(req);
                coordinator_.register_worker(body.at("worker_id").get<std::string>(),
                                             wall_clock_ms());
                reply(res, 200, json{{"ok", true}});
            });
        });
        server_.Get("/task", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                if (!req.has_param("worker_id"))
                    throw Error("protocol", "missing worker_id parameter");
                Assignment a =
                    coordinator_.request_task(req.get_param_value("worker_id"), wall_clock_ms());
                switch (a.kind) {
                    case Assignment::Kind::task:
                        reply(res, 200, json{{"kind", "task"}, {"task", task_to_json(a.task)}});
                        break;
                    case Assignment::Kind::wait:
                        reply(res, 200, json{{"kind", "wait"}});
                        break;
                    case Assignment::Kind::done:
                        reply(res, 200, json{{"kind", "done"}});
                        break;
                }
            });
        });
        server_.Post("/result", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                json body = parse_body(req);
                const std::string task_id = body.at("task_id").get<std::string>();
                const std::string worker_id = body.at("worker_id").get<std::string>();
                const std::string status = body.value("status", "ok");
                CompletionOutcome outcome;
                if (status == "ok") {
                    outcome = coordinator_.complete(
                        task_id, worker_id, body.at("output_uri").get<std::string>(),
                        corpus::stats_from_json(body.at("stats")), wall_clock_ms());
                } else {
                    outcome = coordinator_.report_failure(
                        task_id, worker_id, body.value("error", std::string("unspecified")),
                        wall_clock_ms());
                }
                const char* name = "";
                switch (outcome) {
                    case CompletionOutcome::recorded: name = "recorded"; break;
                    case CompletionOutcome::duplicate_discarded: name = "discarded-duplicate"; break;
                    case CompletionOutcome::stale_discarded: name = "discarded-stale"; break;
                    case CompletionOutcome::requeued: name = "requeued"; break;
                    case CompletionOutcome::failed: name = "failed"; break;
                }
                reply(res, 200, json{{"result", name}});
            });
        });
        server_.Post("/heartbeat", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                json body = parse_body(req);
                coordinator_.heartbeat(body.at("worker_id").get<std::string>(), wall_clock_ms());
                reply(res, 200, json{{"ok", true}});
            });
        });
        server_.Get("/manifest", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                reply(res, 200, manifest_to_json(coordinator_.manifest()));
            });
        });
    }

    Coordinator& coordinator_;
    int tick_every_ms_;
    httplib::Server server_;
    std::thread serve_thread_;
    std::thread tick_thread_;
    std::atomic<bool> running_{false};
};

// ---- HTTP worker ----

struct HttpWorkerOptions {
    std::string worker_id;
    int poll_ms = 500;
    int heartbeat_secs = 10;
    std::function<void(const std::string&)> on_event;  // progress callback, may be null
};

namespace detail {

inline std::pair<std::string, int> split_host_port(const std::string& url) {
    std::string rest = url;
    if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
    while (!rest.empty() && rest.back() == '/') rest.pop_back();
    std::size_t colon = rest.rfind(':');
    if (colon == std::string::npos)
        throw Error("config", "coordinator url must be host:port, got \"" + url + "\"");
    int port = 0;
    for (char c : rest.substr(colon + 1)) {
        if (c < '0' || c > '9')
            throw Error("config", "bad port in coordinator url \"" + url + "\"");
        port = port * 10 + (c - '0');
    }
    return {rest.substr(0, colon), port};
}

}  // namespace detail

// Polls the coordinator for tasks until it reports the run is done.
// Returns the number of tasks this worker completed.
inline int run_http_worker(const std::string& coordinator_url, EnvResolver& resolver,
                           HttpWorkerOptions options) {
    auto [host, port] = detail::split_host_port(coordinator_url);
    httplib::Client client(host, port);
    client.set_read_timeout(30, 0);

    auto note = [&](const std::string& msg) {
        if (options.on_event) options.on_event(msg);
    };
    auto post_json = [&](const char* path, const json& body) -> json {
        auto res = client.Post(path, body.dump(), "application/json");
        if (!res) throw Error("io", std::string("coordinator unreachable at ") + coordinator_url);
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded())
            throw Error("format", std::string(path) + ": malformed coordinator response");
        if (res->status >= 400)
            throw Error("protocol", std::string(path) + ": coordinator replied " +
                                        std::to_string(res->status) + ": " +
                                        parsed.value("error", std::string("unknown")));
        return parsed;
    };

    if (options.worker_id.empty())
        throw Error("config", "worker id must not be empty");
    post_json("/register", json{{"worker_id", options.worker_id}});

    std::atomic<bool> stop_heartbeat{false};
    std::thread heartbeat([&] {
        int elapsed_ms = 0;
        while (!stop_heartbeat.load()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
            elapsed_ms += 50;
            if (elapsed_ms < options.heartbeat_secs * 1000) continue;
            elapsed_ms = 0;
            try {
                client.Post("/heartbeat", json{{"worker_id", options.worker_id}}.dump(),
                            "application/json");
            } catch (...) {
                // heartbeat loss only delays reassignment; the poll loop
                // surfaces real connectivity errors
            }
        }
    });
    struct HeartbeatGuard {
        std::atomic<bool>& stop;
        std::thread& thread;
        ~HeartbeatGuard() {
            stop.store(true);
            if (thread.joinable()) thread.join();
        }
    } guard{stop_heartbeat, heartbeat};

    int completed = 0;
    while (true) {
        auto res = client.Get(("/task?worker_id=" + options.worker_id).c_str());
        if (!res) throw Error("io", "coordinator unreachable at " + coordinator_url);
        json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || res->status >= 400)
            throw Error("protocol", "/task: coordinator replied " + std::to_string(res->status));
        const std::string kind = reply.value("kind", std::string{});
        if (kind == "done") break;
        if (kind == "wait") {
            std::this_thread::sleep_for(std::chrono::milliseconds(options.poll_ms));
            continue;
        }
        TaskDescriptor task = task_from_json(reply.at("task"));
        note("task " + task.task_id + " assigned");
        try {
            WorkerResult result = worker_run(task, resolver.resolve(task));
            post_json("/result", json{{"task_id", task.task_id},
                                      {"worker_id", options.worker_id},
                                      {"status", "ok"},
                                      {"output_uri", result.output_uri},
                                      {"stats", corpus::stats_to_json(result.stats)}});
            ++completed;
            note("task " + task.task_id + " completed");
        } catch (const Error& e) {
            note("task " + task.task_id + " failed: " + e.what());
            post_json("/result", json{{"task_id", task.task_id},
                                      {"worker_id", options.worker_id},
                                      {"status", "failed"},
                                      {"error", e.what()}});
        }
    }
    return completed;
}

}  // namespace sportscorpus::pipeline
