#pragma once
#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "sportscorpus/bench.hpp"
#include "sportscorpus/util.hpp"

namespace sportscorpus::bench {

// ---- adapter interfaces ----

class GeneratorAdapter {
public:
    virtual ~GeneratorAdapter() = default;
    virtual const std::string& id() const = 0;
    virtual std::string generate(const PromptEntry& prompt, const GenerationConfig& cfg) = 0;
};

struct JudgeRequest {
    Criterion criterion = Criterion::os_acc;
    std::string tag;
    int prompt_index = 0;
    std::string system_message;
    std::string user_message;
    std::vector<std::string> model_order;
};

class JudgeAdapter {
public:
    virtual ~JudgeAdapter() = default;
    virtual const std::string& id() const = 0;
    virtual std::string judge(const JudgeRequest& request) = 0;
};

// ---- local adapters ----

class ConstantGenerator : public GeneratorAdapter {
public:
    ConstantGenerator(std::string id, std::string text)
        : id_(std::move(id)), text_(std::move(text)) {}
    const std::string& id() const override { return id_; }
    std::string generate(const PromptEntry&, const GenerationConfig&) override { return text_; }

private:
    std::string id_;
    std::string text_;
};

// Word-salad generator driven by the real sampling stack: fixed logits over
// a small vocabulary, seeded per (adapter, prompt) so runs are repeatable.
class SamplerStubGenerator : public GeneratorAdapter {
public:
    SamplerStubGenerator(std::string id, std::uint64_t seed)
        : id_(std::move(id)), seed_(seed) {}
    const std::string& id() const override { return id_; }

    std::string generate(const PromptEntry& prompt, const GenerationConfig& cfg) override {
        static const std::vector<std::string> words = {
            "the",   "season", "team",    "league", "title", "record", "game",  "match",
            "coach", "player", "victory", "final",  "goal",  "points", "cup",   "champions"};
        static const std::vector<double> logits = {2.2, 1.6, 1.5, 1.3, 1.2, 1.1, 1.0, 0.9,
                                                   0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
        std::mt19937_64 rng(seed_ ^ cfg.seed ^ fnv1a64(prompt.tag + "\x1f" + prompt.prompt));
        std::string out;
        for (int i = 0; i < cfg.max_tokens; ++i) {
            std::size_t token = sample_token(logits, cfg, rng);
            if (i) out += ' ';
            out += words[token];
        }
        return out;
    }

private:
    std::string id_;
    std::uint64_t seed_;
};

// Replays generations from a fixture: JSON array of {tag, index, text,
// optional model}. Entries carrying a different model id are ignored.
class ReplayGenerator : public GeneratorAdapter {
public:
    ReplayGenerator(std::string id, const json& fixture, const std::string& where)
        : id_(std::move(id)) {
        if (!fixture.is_array())
            throw Error("format", where + ": generation fixture must be a JSON array");
        for (const auto& e : fixture) {
            if (e.contains("model") && e.at("model").get<std::string>() != id_) continue;
            try {
                responses_[{e.at("tag").get<std::string>(), e.at("index").get<int>()}] =
                    e.at("text").get<std::string>();
            } catch (const json::exception& ex) {
                throw Error("format", where + ": bad generation fixture entry: " + ex.what());
            }
        }
    }

    static ReplayGenerator from_file(std::string id, const std::string& path) {
        json j;
        try {
            j = json::parse(read_text_file(path));
        } catch (const json::exception& e) {
            throw Error("format", path + ": malformed fixture JSON: " + e.what());
        }
        return ReplayGenerator(std::move(id), j, path);
    }

    const std::string& id() const override { return id_; }

    std::string generate(const PromptEntry& prompt, const GenerationConfig&) override {
        auto it = responses_.find({prompt.tag, prompt.index});
        if (it == responses_.end())
            throw Error("data", "no replayed response for model " + id_ + " prompt (" +
                                    prompt.tag + ", " + std::to_string(prompt.index) + ")");
        return it->second;
    }

private:
    std::string id_;
    std::map<std::pair<std::string, int>, std::string> responses_;
};

// Scores every response with the same value. Counts [SEP] frames in the
// user message to size its reply.
class ConstantJudge : public JudgeAdapter {
public:
    ConstantJudge(std::string id, int score) : id_(std::move(id)), score_(score) {
        if (score < 1 || score > 5) throw Error("config", "constant judge score outside 1-5");
    }
    const std::string& id() const override { return id_; }

    std::string judge(const JudgeRequest& request) override {
        std::vector<int> scores(request.model_order.size(), score_);
        return format_scores(scores);
    }

private:
    std::string id_;
    int score_;
};

// Replays judge replies from a fixture: JSON array of
// {criterion, tag, index, reply}.
class ScriptedJudge : public JudgeAdapter {
public:
    ScriptedJudge(std::string id, const json& fixture, const std::string& where)
        : id_(std::move(id)) {
        if (!fixture.is_array())
            throw Error("format", where + ": judge fixture must be a JSON array");
        for (const auto& e : fixture) {
            try {
                replies_[{criterion_from_name(e.at("criterion").get<std::string>()),
                          e.at("tag").get<std::string>(), e.at("index").get<int>()}] =
                    e.at("reply").get<std::string>();
            } catch (const json::exception& ex) {
                throw Error("format", where + ": bad judge fixture entry: " + ex.what());
            }
        }
    }

    static ScriptedJudge from_file(std::string id, const std::string& path) {
        json j;
        try {
            j = json::parse(read_text_file(path));
        } catch (const json::exception& e) {
            throw Error("format", path + ": malformed fixture JSON: " + e.what());
        }
        return ScriptedJudge(std::move(id), j, path);
    }

    const std::string& id() const override { return id_; }

    std::string judge(const JudgeRequest& request) override {
        auto it = replies_.find({request.criterion, request.tag, request.prompt_index});
        if (it == replies_.end())
            throw Error("data", "no scripted reply for judge " + id_ + " prompt (" + request.tag +
                                    ", " + std::to_string(request.prompt_index) + ")");
        return it->second;
    }

private:
    std::string id_;
    std::map<std::tuple<Criterion, std::string, int>, std::string> replies_;
};

// ---- benchmark run ----

struct RunOptions {
    GenerationConfig generation;
    int max_retries = 3;      // attempts per generation / judge call
    double min_fill = 0.95;   // required fraction of filled score cells
    std::string transcript_path = "bench_transcript.jsonl";
};

struct RunOutput {
    BenchmarkReport report;
    std::string transcript_path;
    std::size_t generations = 0;
    std::size_t generation_failures = 0;
    std::size_t judge_replies = 0;
    std::size_t judge_failures = 0;
};

namespace detail {

inline std::int64_t event_clock_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

class TranscriptWriter {
public:
    explicit TranscriptWriter(const std::string& path)
        : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw Error("io", "cannot open transcript " + path + " for writing");
    }

    void emit(json event) {
        event["ts_ms"] = event_clock_ms();
        out_ << event.dump() << '\n';
        out_.flush();
        if (!out_) throw Error("io", "write failed for transcript " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

// One judge reply becomes one JudgeScore per response, zipped against the
// frame's model order. Shared by the live run and transcript replay so the
// two can never drift apart.
inline void scores_from_reply(const std::string& judge_id, Criterion criterion,
                              const std::string& tag, int prompt_index,
                              std::span<const std::string> model_order,
                              std::span<const int> values, std::vector<JudgeScore>& out) {
    for (std::size_t i = 0; i < model_order.size(); ++i)
        out.push_back({judge_id, model_order[i], tag, prompt_index, criterion,
                       values[i]});
}

}  // namespace detail

// Runs the benchmark: every prompt through every model, then one judge call
// per (prompt, criterion, judge) carrying all responses in model-list order.
// The raw transcript is written and sealed before any aggregation.
inline RunOutput run_benchmark(std::span<const std::unique_ptr<GeneratorAdapter>> models,
                               std::span<const std::unique_ptr<JudgeAdapter>> judges,
                               const PromptSet& prompts, const RunOptions& options) {
    if (models.empty()) throw Error("config", "no generation models configured");
    if (judges.empty()) throw Error("config", "no judges configured");
    if (prompts.entries.empty()) throw Error("data", "prompt set is empty");
    options.generation.validate();
    if (options.max_retries < 1) throw Error("config", "max_retries must be >= 1");
    {
        std::set<std::string> ids;
        for (const auto& m : models)
            if (!ids.insert(m->id()).second)
                throw Error("config", "duplicate model adapter id \"" + m->id() + "\"");
        ids.clear();
        for (const auto& j : judges)
            if (!ids.insert(j->id()).second)
                throw Error("config", "duplicate judge adapter id \"" + j->id() + "\"");
    }

    detail::TranscriptWriter transcript(options.transcript_path);
    RunOutput out;
    out.transcript_path = options.transcript_path;

    json header{{"event", "run_config"},
                {"models", json::array()},
                {"judges", json::array()},
                {"prompts", prompts.entries.size()},
                {"generation",
                 {{"temperature", options.generation.temperature},
                  {"top_p", options.generation.top_p},
                  {"max_tokens", options.generation.max_tokens},
                  {"seed", options.generation.seed}}},
                {"max_retries", options.max_retries}};
    for (const auto& m : models) header["models"].push_back(m->id());
    for (const auto& j : judges) header["judges"].push_back(j->id());
    transcript.emit(std::move(header));

    // model -> (tag, index) -> response
    std::map<std::string, std::map<std::pair<std::string, int>, std::string>> responses;
    for (const auto& entry : prompts.entries) {
        for (const auto& model : models) {
            std::string response;
            bool ok = false;
            for (int attempt = 1; attempt <= options.max_retries && !ok; ++attempt) {
                try {
                    response = model->generate(entry, options.generation);
                    ok = true;
                    transcript.emit(json{{"event", "generation"},
                                         {"model", model->id()},
                                         {"tag", entry.tag},
                                         {"index", entry.index},
                                         {"prompt", entry.prompt},
                                         {"response", response},
                                         {"attempt", attempt}});
                } catch (const std::exception& e) {
                    transcript.emit(json{{"event", "generation_error"},
                                         {"model", model->id()},
                                         {"tag", entry.tag},
                                         {"index", entry.index},
                                         {"error", e.what()},
                                         {"attempt", attempt}});
                }
            }
            if (ok) {
                responses[model->id()][{entry.tag, entry.index}] = std::move(response);
                ++out.generations;
            } else {
                ++out.generation_failures;
            }
        }
    }

    std::vector<JudgeScore> collected;
    for (const auto& entry : prompts.entries) {
        // Frame carries the responses that exist for this prompt, in the
        // documented model-list order.
        std::vector<std::string> model_order;
        std::vector<std::string> frame;
        for (const auto& model : models) {
            auto it = responses[model->id()].find({entry.tag, entry.index});
            if (it == responses[model->id()].end()) continue;
            model_order.push_back(model->id());
            frame.push_back(it->second);
        }
        if (frame.empty()) continue;
        for (Criterion criterion : kCriteria) {
            auto [system_message, user_message] = build_judge_request(criterion, entry, frame);
            JudgeRequest request{criterion, entry.tag,    entry.index,
                                 system_message, user_message, model_order};
            for (const auto& judge : judges) {
                bool ok = false;
                for (int attempt = 1; attempt <= options.max_retries && !ok; ++attempt) {
                    try {
                        std::string reply = judge->judge(request);
                        std::vector<int> values =
                            parse_judge_reply(reply, static_cast<int>(frame.size()));
                        ok = true;
                        transcript.emit(json{{"event", "judge_reply"},
                                             {"judge", judge->id()},
                                             {"criterion", criterion_name(criterion)},
                                             {"tag", entry.tag},
                                             {"index", entry.index},
                                             {"model_order", model_order},
                                             {"reply", reply},
                                             {"scores", values},
                                             {"attempt", attempt}});
                        detail::scores_from_reply(judge->id(), criterion, entry.tag, entry.index,
                                                  model_order, values, collected);
                    } catch (const std::exception& e) {
                        transcript.emit(json{{"event", "judge_error"},
                                             {"judge", judge->id()},
                                             {"criterion", criterion_name(criterion)},
                                             {"tag", entry.tag},
                                             {"index", entry.index},
                                             {"error", e.what()},
                                             {"attempt", attempt}});
                    }
                }
                if (ok) ++out.judge_replies;
                else ++out.judge_failures;
            }
        }
    }

    const std::size_t expected_cells =
        prompts.entries.size() * models.size() * judges.size() * kCriteria.size();
    transcript.emit(json{{"event", "seal"},
                         {"generations", out.generations},
                         {"generation_failures", out.generation_failures},
                         {"judge_replies", out.judge_replies},
                         {"judge_failures", out.judge_failures},
                         {"expected_cells", expected_cells},
                         {"filled_cells", collected.size()}});

    const double fill =
        static_cast<double>(collected.size()) / static_cast<double>(expected_cells);
    if (fill < options.min_fill) {
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "only %.1f%% of score cells filled (minimum %.1f%%); transcript kept at ",
                      fill * 100.0, options.min_fill * 100.0);
        throw Error("data", std::string(buf) + options.transcript_path);
    }
    out.report = aggregate(collected);
    return out;
}

// Rebuilds the report from a sealed transcript. Produces bit-identical
// results for the same transcript: scoring is a pure function of the
// recorded judge replies.
inline BenchmarkReport replay_transcript(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open transcript " + path);
    std::vector<JudgeScore> collected;
    bool sealed = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        json e;
        try {
            e = json::parse(line);
        } catch (const json::exception& ex) {
            throw Error("format", path + ": line " + std::to_string(line_no) +
                                      ": malformed transcript entry: " + ex.what());
        }
        const std::string event = e.value("event", std::string{});
        if (event == "seal") {
            sealed = true;
        } else if (event == "judge_reply") {
            try {
                std::vector<std::string> model_order =
                    e.at("model_order").get<std::vector<std::string>>();
                std::vector<int> values = e.at("scores").get<std::vector<int>>();
                if (model_order.size() != values.size())
                    throw Error("format", path + ": line " + std::to_string(line_no) +
                                              ": model_order/scores length mismatch");
                detail::scores_from_reply(e.at("judge").get<std::string>(),
                                          criterion_from_name(e.at("criterion").get<std::string>()),
                                          e.at("tag").get<std::string>(), e.at("index").get<int>(),
                                          model_order, values, collected);
            } catch (const json::exception& ex) {
                throw Error("format", path + ": line " + std::to_string(line_no) +
                                          ": bad judge_reply event: " + ex.what());
            }
        }
    }
    if (in.bad()) throw Error("io", "read failed for " + path);
    if (!sealed)
        throw Error("data", path + ": transcript is not sealed; the run did not finish");
    if (collected.empty()) throw Error("data", path + ": transcript holds no judge replies");
    return aggregate(collected);
}

// ---- adapter config files ----
// Models: [{"id", "type": "constant"|"sampler-stub"|"replay"|"http", ...}]
// Judges: [{"id", "type": "constant"|"scripted"|"http", ...}]
// The "http" variants are built by make_http_* in bench_http.hpp and wired
// in by the CLI; the factories here cover the local adapter types.

inline std::vector<std::unique_ptr<GeneratorAdapter>> make_generators(
    const json& config, const std::string& where) {
    if (!config.is_array()) throw Error("format", where + ": models config must be a JSON array");
    std::vector<std::unique_ptr<GeneratorAdapter>> out;
    for (const auto& e : config) {
        std::string id = e.value("id", std::string{});
        std::string type = e.value("type", std::string{});
        if (id.empty() || type.empty())
            throw Error("format", where + ": model entry needs \"id\" and \"type\"");
        if (type == "constant") {
            if (!e.contains("text"))
                throw Error("format", where + ": constant model \"" + id + "\" needs \"text\"");
            out.push_back(
                std::make_unique<ConstantGenerator>(id, e.at("text").get<std::string>()));
        } else if (type == "sampler-stub") {
            out.push_back(std::make_unique<SamplerStubGenerator>(
                id, e.value("seed", std::uint64_t{0})));
        } else if (type == "replay") {
            if (!e.contains("path"))
                throw Error("format", where + ": replay model \"" + id + "\" needs \"path\"");
            out.push_back(std::make_unique<ReplayGenerator>(
                ReplayGenerator::from_file(id, e.at("path").get<std::string>())));
        } else {
            throw Error("config", where + ": unknown model adapter type \"" + type + "\"");
        }
    }
    return out;
}

inline std::vector<std::unique_ptr<JudgeAdapter>> make_judges(const json& config,
                                                              const std::string& where) {
    if (!config.is_array()) throw Error("format", where + ": judges config must be a JSON array");
    std::vector<std::unique_ptr<JudgeAdapter>> out;
    for (const auto& e : config) {
        std::string id = e.value("id", std::string{});
        std::string type = e.value("type", std::string{});
        if (id.empty() || type.empty())
            throw Error("format", where + ": judge entry needs \"id\" and \"type\"");
        if (type == "constant") {
            if (!e.contains("score"))
                throw Error("format", where + ": constant judge \"" + id + "\" needs \"score\"");
            out.push_back(std::make_unique<ConstantJudge>(id, e.at("score").get<int>()));
        } else if (type == "scripted") {
            if (!e.contains("path"))
                throw Error("format", where + ": scripted judge \"" + id + "\" needs \"path\"");
            out.push_back(std::make_unique<ScriptedJudge>(
                ScriptedJudge::from_file(id, e.at("path").get<std::string>())));
        } else {
            throw Error("config", where + ": unknown judge adapter type \"" + type + "\"");
        }
    }
    return out;
}

}  // namespace sportscorpus::bench
