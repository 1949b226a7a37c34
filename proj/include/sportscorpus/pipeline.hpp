#pragma once
#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "sportscorpus/classifier.hpp"
#include "sportscorpus/corpus.hpp"
#include "sportscorpus/urlfilter.hpp"
#include "sportscorpus/util.hpp"

namespace sportscorpus::pipeline {

using json = nlohmann::json;

// ---- task model ----

enum class Step { url_filter, classify };

inline const char* step_name(Step s) { return s == Step::url_filter ? "url_filter" : "classify"; }

inline Step step_from_name(std::string_view name) {
    if (name == "url_filter") return Step::url_filter;
    if (name == "classify") return Step::classify;
    throw Error("format", "unknown pipeline step \"" + std::string(name) + "\"");
}

struct TaskParams {
    std::string keywords_ref = "default";  // "default" or a keyword file path
    std::string model_ref;                 // classifier model path; empty if unused
    double threshold = 0.5;

    bool operator==(const TaskParams&) const = default;
};

struct TaskDescriptor {
    std::string task_id;
    std::string input_uri;
    std::vector<Step> steps;
    TaskParams params;

    void validate() const {
        if (task_id.empty()) throw Error("data", "task with empty task_id");
        if (input_uri.empty()) throw Error("data", "task " + task_id + " has empty input_uri");
        if (steps.empty()) throw Error("data", "task " + task_id + " has no steps");
        for (std::size_t i = 1; i < steps.size(); ++i)
            if (steps[i - 1] == Step::classify && steps[i] == Step::url_filter)
                throw Error("data", "task " + task_id + ": url_filter must precede classify");
        if (!(params.threshold >= 0.0 && params.threshold <= 1.0))
            throw Error("data", "task " + task_id + ": threshold outside [0,1]");
    }

    bool operator==(const TaskDescriptor&) const = default;
};

inline json task_to_json(const TaskDescriptor& t) {
    json steps = json::array();
    for (Step s : t.steps) steps.push_back(step_name(s));
    return json{{"task_id", t.task_id},
                {"input_uri", t.input_uri},
                {"steps", steps},
                {"params",
                 {{"keywords", t.params.keywords_ref},
                  {"model", t.params.model_ref},
                  {"threshold", t.params.threshold}}}};
}

inline TaskDescriptor task_from_json(const json& j) {
    TaskDescriptor t;
    try {
        t.task_id = j.at("task_id").get<std::string>();
        t.input_uri = j.at("input_uri").get<std::string>();
        for (const auto& s : j.at("steps"))
            t.steps.push_back(step_from_name(s.get<std::string>()));
        if (j.contains("params")) {
            const json& p = j.at("params");
            t.params.keywords_ref = p.value("keywords", std::string("default"));
            t.params.model_ref = p.value("model", std::string{});
            t.params.threshold = p.value("threshold", 0.5);
        }
    } catch (const json::exception& e) {
        throw Error("format", std::string("bad task descriptor: ") + e.what());
    }
    t.validate();
    return t;
}

enum class TaskStatus { pending, assigned, done, failed };

inline const char* status_name(TaskStatus s) {
    switch (s) {
        case TaskStatus::pending: return "PENDING";
        case TaskStatus::assigned: return "ASSIGNED";
        case TaskStatus::done: return "DONE";
        case TaskStatus::failed: return "FAILED";
    }
    return "?";
}

struct TaskState {
    TaskStatus status = TaskStatus::pending;
    std::string assignee;          // set while ASSIGNED
    std::int64_t assigned_at_ms = 0;  // lease stamp; refreshed by heartbeats
    int attempts = 0;              // number of ASSIGNED transitions
    std::string output_uri;        // set once, by the first valid completion
    corpus::ShardStats stats;
};

struct RunManifest {
    std::vector<TaskDescriptor> tasks;
    std::map<std::string, TaskState> states;
    corpus::ShardStats merged_stats;        // sum over DONE tasks
    std::vector<std::string> output_uris;   // task order, DONE tasks only
    std::vector<std::string> failed_task_ids;
};

inline json manifest_to_json(const RunManifest& m) {
    json tasks = json::array();
    for (const auto& t : m.tasks) {
        json jt = task_to_json(t);
        const TaskState& st = m.states.at(t.task_id);
        jt["status"] = status_name(st.status);
        jt["attempts"] = st.attempts;
        if (st.status == TaskStatus::done) {
            jt["output_uri"] = st.output_uri;
            jt["stats"] = corpus::stats_to_json(st.stats);
        }
        tasks.push_back(std::move(jt));
    }
    return json{{"tasks", tasks},
                {"merged_stats", corpus::stats_to_json(m.merged_stats)},
                {"output_uris", m.output_uris},
                {"failed_task_ids", m.failed_task_ids}};
}

// ---- coordinator ----

struct CoordinatorOptions {
    std::int64_t timeout_ms = 60'000;  // lease length before reassignment
    int max_attempts = 3;
    std::string log_path;  // append-only state log; empty disables persistence
};

// Outcome of a completion or failure report. Duplicate and stale messages
// are acknowledged and discarded, never treated as protocol errors.
enum class CompletionOutcome { recorded, duplicate_discarded, stale_discarded, requeued, failed };

struct Assignment {
    enum class Kind { task, wait, done };
    Kind kind = Kind::wait;
    TaskDescriptor task;  // valid when kind == task
};

// Single-writer task state machine:
//   PENDING -> ASSIGNED -> DONE
//                 |-> PENDING (lease timeout, attempts left)
//                 |-> FAILED  (lease timeout or failure report, attempts
//                              exhausted)
// DONE and FAILED are terminal. The first valid completion wins; later or
// stale completions are discarded. All public methods are thread-safe.
class Coordinator {
public:
    Coordinator(std::vector<TaskDescriptor> tasks, CoordinatorOptions options)
        : options_(std::move(options)) {
        open_log(false);
        for (auto& t : tasks) add_task_locked(std::move(t), true);
    }

    // Rebuilds coordinator state by replaying an existing log, then keeps
    // appending to it. In-flight leases survive with their original stamps
    // and requeue through the normal timeout path.
    struct ResumeFromLog {};
    Coordinator(ResumeFromLog, CoordinatorOptions options) : options_(std::move(options)) {
        if (options_.log_path.empty()) throw Error("config", "resume requires a log path");
        replay_log();
        open_log(true);
    }

    void register_worker(const std::string& worker_id, std::int64_t now_ms) {
        if (worker_id.empty()) throw Error("protocol", "empty worker id");
        std::lock_guard lock(mu_);
        if (workers_.insert(worker_id).second)
            append_log({{"ev", "registered"}, {"worker", worker_id}, {"ts", now_ms}});
    }

    Assignment request_task(const std::string& worker_id, std::int64_t now_ms) {
        std::lock_guard lock(mu_);
        if (!workers_.count(worker_id))
            throw Error("protocol", "registration required for worker \"" + worker_id + "\"");
        while (!pending_.empty()) {
            std::string task_id = pending_.front();
            pending_.pop_front();
            auto it = states_.find(task_id);
            if (it == states_.end() || it->second.status != TaskStatus::pending) continue;
            TaskState& st = it->second;
            st.status = TaskStatus::assigned;
            st.assignee = worker_id;
            st.assigned_at_ms = now_ms;
            st.attempts += 1;
            append_log({{"ev", "assigned"},
                        {"task_id", task_id},
                        {"worker", worker_id},
                        {"ts", now_ms},
                        {"attempts", st.attempts}});
            return {Assignment::Kind::task, tasks_.at(task_index_.at(task_id))};
        }
        return {finished_locked() ? Assignment::Kind::done : Assignment::Kind::wait, {}};
    }

    CompletionOutcome complete(const std::string& task_id, const std::string& worker_id,
                               const std::string& output_uri, const corpus::ShardStats& stats,
                               std::int64_t now_ms) {
        if (!stats.valid())
            throw Error("data", "completion for task " + task_id +
                                    " violates n_kept <= n_url_pass <= n_in");
        std::lock_guard lock(mu_);
        TaskState& st = find_state_locked(task_id);
        switch (st.status) {
            case TaskStatus::done:
            case TaskStatus::failed:
                return CompletionOutcome::duplicate_discarded;
            case TaskStatus::pending:
                throw Error("protocol",
                            "completion for task " + task_id + " in PENDING state");
            case TaskStatus::assigned:
                if (st.assignee != worker_id) return CompletionOutcome::stale_discarded;
                st.status = TaskStatus::done;
                st.output_uri = output_uri;
                st.stats = stats;
                st.assignee.clear();
                append_log({{"ev", "completed"},
                            {"task_id", task_id},
                            {"worker", worker_id},
                            {"output_uri", output_uri},
                            {"stats", corpus::stats_to_json(stats)},
                            {"ts", now_ms}});
                return CompletionOutcome::recorded;
        }
        return CompletionOutcome::duplicate_discarded;
    }

    // Worker-reported task failure (e.g. unreadable input). Consumes the
    // lease: the task requeues, or fails permanently once attempts run out.
    CompletionOutcome report_failure(const std::string& task_id, const std::string& worker_id,
                                     const std::string& error, std::int64_t now_ms) {
        std::lock_guard lock(mu_);
        TaskState& st = find_state_locked(task_id);
        switch (st.status) {
            case TaskStatus::done:
            case TaskStatus::failed:
                return CompletionOutcome::duplicate_discarded;
            case TaskStatus::pending:
                throw Error("protocol",
                            "failure report for task " + task_id + " in PENDING state");
            case TaskStatus::assigned:
                if (st.assignee != worker_id) return CompletionOutcome::stale_discarded;
                append_log({{"ev", "worker_failed_task"},
                            {"task_id", task_id},
                            {"worker", worker_id},
                            {"error", error},
                            {"ts", now_ms}});
                return requeue_or_fail_locked(task_id, st, now_ms);
        }
        return CompletionOutcome::duplicate_discarded;
    }

    // Returns tasks whose lease expired and were returned to PENDING.
    std::vector<std::string> tick(std::int64_t now_ms) {
        std::lock_guard lock(mu_);
        std::vector<std::string> requeued;
        for (auto& [task_id, st] : states_) {
            if (st.status != TaskStatus::assigned) continue;
            if (now_ms - st.assigned_at_ms <= options_.timeout_ms) continue;
            if (requeue_or_fail_locked(task_id, st, now_ms) == CompletionOutcome::requeued)
                requeued.push_back(task_id);
        }
        return requeued;
    }

    // Lease renewal: pushes the assignment stamp forward for every task the
    // worker currently holds.
    void heartbeat(const std::string& worker_id, std::int64_t now_ms) {
        std::lock_guard lock(mu_);
        if (!workers_.count(worker_id))
            throw Error("protocol", "registration required for worker \"" + worker_id + "\"");
        for (auto& [task_id, st] : states_)
            if (st.status == TaskStatus::assigned && st.assignee == worker_id)
                st.assigned_at_ms = now_ms;
    }

    bool finished() const {
        std::lock_guard lock(mu_);
        return finished_locked();
    }

    TaskState task_state(const std::string& task_id) const {
        std::lock_guard lock(mu_);
        auto it = states_.find(task_id);
        if (it == states_.end()) throw Error("protocol", "unknown task id \"" + task_id + "\"");
        return it->second;
    }

    RunManifest manifest() const {
        std::lock_guard lock(mu_);
        RunManifest m;
        m.tasks = tasks_;
        m.states = {states_.begin(), states_.end()};
        for (const auto& t : tasks_) {
            const TaskState& st = states_.at(t.task_id);
            if (st.status == TaskStatus::done) {
                m.merged_stats += st.stats;
                m.output_uris.push_back(st.output_uri);
            } else if (st.status == TaskStatus::failed) {
                m.failed_task_ids.push_back(t.task_id);
            }
        }
        return m;
    }

private:
    void add_task_locked(TaskDescriptor task, bool log) {
        task.validate();
        if (task_index_.count(task.task_id))
            throw Error("data", "duplicate task id \"" + task.task_id + "\"");
        if (log) append_log({{"ev", "task_added"}, {"task", task_to_json(task)}});
        task_index_[task.task_id] = tasks_.size();
        states_[task.task_id] = TaskState{};
        pending_.push_back(task.task_id);
        tasks_.push_back(std::move(task));
    }

    TaskState& find_state_locked(const std::string& task_id) {
        auto it = states_.find(task_id);
        if (it == states_.end()) throw Error("protocol", "unknown task id \"" + task_id + "\"");
        return it->second;
    }

    CompletionOutcome requeue_or_fail_locked(const std::string& task_id, TaskState& st,
                                             std::int64_t now_ms) {
        st.assignee.clear();
        if (st.attempts >= options_.max_attempts) {
            st.status = TaskStatus::failed;
            append_log({{"ev", "failed"},
                        {"task_id", task_id},
                        {"attempts", st.attempts},
                        {"ts", now_ms}});
            return CompletionOutcome::failed;
        }
        st.status = TaskStatus::pending;
        pending_.push_back(task_id);
        append_log(
            {{"ev", "requeued"}, {"task_id", task_id}, {"attempts", st.attempts}, {"ts", now_ms}});
        return CompletionOutcome::requeued;
    }

    bool finished_locked() const {
        for (const auto& [id, st] : states_)
            if (st.status == TaskStatus::pending || st.status == TaskStatus::assigned)
                return false;
        return true;
    }

    void open_log(bool append) {
        if (options_.log_path.empty()) return;
        log_.open(options_.log_path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
        if (!log_) throw Error("io", "cannot open coordinator log " + options_.log_path);
    }

    void append_log(const json& event) {
        if (!log_.is_open()) return;
        log_ << event.dump() << '\n';
        log_.flush();
        if (!log_) throw Error("io", "write failed for coordinator log " + options_.log_path);
    }

    void replay_log() {
        std::ifstream in(options_.log_path, std::ios::binary);
        if (!in) throw Error("io", "cannot open coordinator log " + options_.log_path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim_view(line).empty()) continue;
            json e;
            try {
                e = json::parse(line);
            } catch (const json::exception& ex) {
                throw Error("format", options_.log_path + ": line " + std::to_string(line_no) +
                                          ": malformed log entry: " + ex.what());
            }
            apply_log_event(e);
        }
    }

    void apply_log_event(const json& e) {
        const std::string ev = e.at("ev").get<std::string>();
        if (ev == "task_added") {
            add_task_locked(task_from_json(e.at("task")), false);
        } else if (ev == "registered") {
            workers_.insert(e.at("worker").get<std::string>());
        } else if (ev == "assigned") {
            TaskState& st = find_state_locked(e.at("task_id").get<std::string>());
            st.status = TaskStatus::assigned;
            st.assignee = e.at("worker").get<std::string>();
            st.assigned_at_ms = e.at("ts").get<std::int64_t>();
            st.attempts = e.at("attempts").get<int>();
            std::erase(pending_, e.at("task_id").get<std::string>());
        } else if (ev == "completed") {
            TaskState& st = find_state_locked(e.at("task_id").get<std::string>());
            st.status = TaskStatus::done;
            st.assignee.clear();
            st.output_uri = e.at("output_uri").get<std::string>();
            st.stats = corpus::stats_from_json(e.at("stats"));
        } else if (ev == "requeued") {
            const std::string task_id = e.at("task_id").get<std::string>();
            TaskState& st = find_state_locked(task_id);
            st.status = TaskStatus::pending;
            st.assignee.clear();
            pending_.push_back(task_id);
        } else if (ev == "failed") {
            TaskState& st = find_state_locked(e.at("task_id").get<std::string>());
            st.status = TaskStatus::failed;
            st.assignee.clear();
        } else if (ev == "worker_failed_task") {
            // informational only
        } else {
            throw Error("format", "unknown log event \"" + ev + "\"");
        }
    }

    CoordinatorOptions options_;
    mutable std::mutex mu_;
    std::vector<TaskDescriptor> tasks_;
    std::unordered_map<std::string, std::size_t> task_index_;
    std::map<std::string, TaskState> states_;
    std::deque<std::string> pending_;  // FIFO of PENDING task ids
    std::unordered_set<std::string> workers_;
    std::ofstream log_;
};

// ---- worker ----

struct WorkerEnv {
    const urlfilter::KeywordSet* keywords = nullptr;   // required for url_filter steps
    const classifier::ClassifierModel* model = nullptr;  // required for classify steps
    std::string output_dir = ".";
};

struct WorkerResult {
    std::string output_uri;
    corpus::ShardStats stats;
};

// Resolves task params to loaded keyword sets and models. "default" (or an
// empty ref) falls back to the worker's own configuration; file refs are
// loaded once and cached. Thread-safe.
class EnvResolver {
public:
    EnvResolver(const urlfilter::KeywordSet* default_keywords,
                const classifier::ClassifierModel* default_model, std::string output_dir)
        : default_keywords_(default_keywords),
          default_model_(default_model),
          output_dir_(std::move(output_dir)) {}

    WorkerEnv resolve(const TaskDescriptor& task) {
        WorkerEnv env;
        env.output_dir = output_dir_;
        std::lock_guard lock(mu_);
        if (task.params.keywords_ref.empty() || task.params.keywords_ref == "default") {
            env.keywords = default_keywords_;
        } else {
            auto it = keyword_cache_.find(task.params.keywords_ref);
            if (it == keyword_cache_.end())
                it = keyword_cache_
                         .emplace(task.params.keywords_ref,
                                  urlfilter::load_keywords_file(task.params.keywords_ref))
                         .first;
            env.keywords = &it->second;
        }
        if (task.params.model_ref.empty()) {
            env.model = default_model_;
        } else {
            auto it = model_cache_.find(task.params.model_ref);
            if (it == model_cache_.end())
                it = model_cache_
                         .emplace(task.params.model_ref,
                                  classifier::load_model(task.params.model_ref))
                         .first;
            env.model = &it->second;
        }
        return env;
    }

private:
    const urlfilter::KeywordSet* default_keywords_;
    const classifier::ClassifierModel* default_model_;
    std::string output_dir_;
    std::mutex mu_;
    std::map<std::string, urlfilter::KeywordSet> keyword_cache_;
    std::map<std::string, classifier::ClassifierModel> model_cache_;
};

// Runs one task: streams the input shard through the configured steps and
// writes kept records (with scores when classified) to the output shard.
inline WorkerResult worker_run(const TaskDescriptor& task, const WorkerEnv& env) {
    task.validate();
    bool do_url = false, do_classify = false;
    for (Step s : task.steps) (s == Step::url_filter ? do_url : do_classify) = true;
    if (do_url && !env.keywords)
        throw Error("config", "task " + task.task_id + " needs a keyword set");
    if (do_classify && !env.model)
        throw Error("config", "task " + task.task_id + " needs a classifier model");

    corpus::ShardReader reader(task.input_uri);
    std::string output_uri = env.output_dir + "/" + task.task_id + ".jsonl";
    corpus::ShardWriter writer(output_uri);
    corpus::ShardStats stats;
    corpus::WebRecord rec;
    while (reader.next(rec)) {
        ++stats.n_in;
        if (do_url && !env.keywords->match(rec.url)) continue;
        ++stats.n_url_pass;
        if (do_classify) {
            double score = classifier::predict(*env.model, rec.text);
            if (score < task.params.threshold) continue;
            rec.score = score;
        }
        writer.write(rec);
    }
    stats.n_kept = writer.count();
    writer.flush();
    return {std::move(output_uri), stats};
}

// Single-process reference pipeline: runs every task in order with no
// coordinator involved.
inline RunManifest run_sequential(std::span<const TaskDescriptor> tasks, const WorkerEnv& env) {
    RunManifest m;
    for (const auto& task : tasks) {
        WorkerResult result = worker_run(task, env);
        TaskState st;
        st.status = TaskStatus::done;
        st.attempts = 1;
        st.output_uri = result.output_uri;
        st.stats = result.stats;
        m.merged_stats += result.stats;
        m.output_uris.push_back(result.output_uri);
        m.states[task.task_id] = std::move(st);
        m.tasks.push_back(task);
    }
    return m;
}

// ---- in-process distributed run with fault injection ----

struct WorkerFaults {
    int abandon_nth_assignment = 0;  // 1-based; worker dies holding that task
    bool duplicate_completions = false;
};

struct FaultPlan {
    std::map<int, WorkerFaults> by_worker;  // keyed by worker index
};

struct DistributedOptions {
    CoordinatorOptions coordinator;
    int tick_every_ms = 20;
    int idle_wait_ms = 2;
};

// Drives a Coordinator with n worker threads sharing one WorkerEnv. The
// fault plan can kill workers mid-task and replay completion messages; the
// coordinator must still produce each output exactly once.
inline RunManifest run_distributed(std::span<const TaskDescriptor> tasks, int n_workers,
                                   const WorkerEnv& env, DistributedOptions options = {},
                                   const FaultPlan& faults = {}) {
    if (n_workers < 1) throw Error("config", "need at least one worker");
    Coordinator coordinator(std::vector<TaskDescriptor>(tasks.begin(), tasks.end()),
                            options.coordinator);
    const auto start = std::chrono::steady_clock::now();
    auto now_ms = [&start] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - start)
            .count();
    };

    std::atomic<bool> stop{false};
    std::thread ticker([&] {
        while (!stop.load()) {
            coordinator.tick(now_ms());
            std::this_thread::sleep_for(std::chrono::milliseconds(options.tick_every_ms));
        }
    });

    std::vector<std::thread> workers;
    for (int w = 0; w < n_workers; ++w) {
        WorkerFaults wf;
        if (auto it = faults.by_worker.find(w); it != faults.by_worker.end()) wf = it->second;
        workers.emplace_back([&, w, wf] {
            const std::string worker_id = "worker-" + std::to_string(w);
            coordinator.register_worker(worker_id, now_ms());
            int assignments = 0;
            while (true) {
                Assignment a = coordinator.request_task(worker_id, now_ms());
                if (a.kind == Assignment::Kind::done) return;
                if (a.kind == Assignment::Kind::wait) {
                    std::this_thread::sleep_for(std::chrono::milliseconds(options.idle_wait_ms));
                    continue;
                }
                ++assignments;
                if (wf.abandon_nth_assignment > 0 && assignments == wf.abandon_nth_assignment)
                    return;  // dies holding the lease; timeout must recover it
                WorkerResult r;
                try {
                    r = worker_run(a.task, env);
                } catch (const Error& e) {
                    try {
                        coordinator.report_failure(a.task.task_id, worker_id, e.what(), now_ms());
                    } catch (const Error&) {
                        // lease already lost; nothing to report against
                    }
                    continue;
                }
                try {
                    coordinator.complete(a.task.task_id, worker_id, r.output_uri, r.stats,
                                         now_ms());
                    if (wf.duplicate_completions)
                        coordinator.complete(a.task.task_id, worker_id, r.output_uri, r.stats,
                                             now_ms());
                } catch (const Error&) {
                    // lease expired and the task went back to PENDING; the
                    // redo produces an identical output, so drop this one
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    stop.store(true);
    ticker.join();
    return coordinator.manifest();
}

// Loads a task list: either a JSON array of descriptors or JSON lines.
inline std::vector<TaskDescriptor> load_tasks_file(const std::string& path) {
    std::string content = read_text_file(path);
    std::string_view trimmed = trim_view(content);
    std::vector<TaskDescriptor> tasks;
    if (!trimmed.empty() && trimmed.front() == '[') {
        json j;
        try {
            j = json::parse(trimmed);
        } catch (const json::exception& e) {
            throw Error("format", path + ": malformed task JSON: " + e.what());
        }
        for (const auto& e : j) tasks.push_back(task_from_json(e));
    } else {
        std::size_t start = 0, line_no = 0;
        while (start <= content.size()) {
            std::size_t end = content.find('\n', start);
            if (end == std::string::npos) end = content.size();
            std::string_view line = trim_view(std::string_view(content).substr(start, end - start));
            start = end + 1;
            ++line_no;
            if (line.empty()) continue;
            try {
                tasks.push_back(task_from_json(json::parse(line)));
            } catch (const json::exception& e) {
                throw Error("format", path + ": line " + std::to_string(line_no) +
                                          ": malformed task JSON: " + e.what());
            }
        }
    }
    if (tasks.empty()) throw Error("data", path + ": no tasks");
    return tasks;
}

}  // namespace sportscorpus::pipeline
