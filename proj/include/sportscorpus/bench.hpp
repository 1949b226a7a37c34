#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sportscorpus/util.hpp"

namespace sportscorpus::bench {

using json = nlohmann::json;

// ---- prompt corpus ----

struct PromptEntry {
    std::string tag;     // e.g. "#BasketballTeams"
    std::string prompt;  // intentionally incomplete sentence
    int index = 0;       // position within the tag
};

struct PromptSet {
    std::vector<PromptEntry> entries;
    std::map<std::string, int> per_tag_counts;
    std::vector<std::string> warnings;
};

inline constexpr int kExpectedTags = 50;
inline constexpr int kExpectedPromptsPerTag = 20;

// Prompt file: JSON array of {tag, prompt, optional index}. Missing indexes
// are assigned by order of appearance within each tag. A complete set is
// 50 tags x 20 prompts; smaller sets load with a warning.
inline PromptSet parse_prompt_set(const json& j, const std::string& where) {
    if (!j.is_array()) throw Error("format", where + ": prompt file must be a JSON array");
    PromptSet set;
    std::set<std::pair<std::string, int>> seen;
    std::map<std::string, int> next_index;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const json& e = j[i];
        if (!e.is_object() || !e.contains("tag") || !e.contains("prompt") ||
            !e["tag"].is_string() || !e["prompt"].is_string())
            throw Error("format", where + ": entry " + std::to_string(i) +
                                      " must be an object with string \"tag\" and \"prompt\"");
        PromptEntry entry;
        entry.tag = e["tag"].get<std::string>();
        entry.prompt = e["prompt"].get<std::string>();
        if (entry.tag.empty())
            throw Error("data", where + ": entry " + std::to_string(i) + " has an empty tag");
        if (entry.prompt.empty())
            throw Error("data", where + ": entry " + std::to_string(i) + " has an empty prompt");
        if (e.contains("index")) {
            if (!e["index"].is_number_integer())
                throw Error("format", where + ": entry " + std::to_string(i) +
                                          ": \"index\" must be an integer");
            entry.index = e["index"].get<int>();
        } else {
            entry.index = next_index[entry.tag];
        }
        next_index[entry.tag] = std::max(next_index[entry.tag], entry.index + 1);
        if (!seen.emplace(entry.tag, entry.index).second)
            throw Error("data", where + ": duplicate prompt (" + entry.tag + ", " +
                                    std::to_string(entry.index) + ")");
        set.per_tag_counts[entry.tag] += 1;
        set.entries.push_back(std::move(entry));
    }
    const int tags = static_cast<int>(set.per_tag_counts.size());
    bool per_tag_ok = true;
    for (const auto& [tag, count] : set.per_tag_counts)
        if (count != kExpectedPromptsPerTag) per_tag_ok = false;
    if (tags != kExpectedTags || !per_tag_ok) {
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "expected %dx%d prompts, found %d tags and %zu prompts", kExpectedTags,
                      kExpectedPromptsPerTag, tags, set.entries.size());
        set.warnings.emplace_back(buf);
    }
    return set;
}

inline PromptSet load_prompt_set(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error("format", path + ": malformed prompt JSON: " + e.what());
    }
    return parse_prompt_set(j, path);
}

// ---- sampling ----

struct GenerationConfig {
    double temperature = 1.0;
    double top_p = 0.3;
    int max_tokens = 80;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(temperature > 0.0)) throw Error("config", "temperature must be positive");
        if (!(top_p > 0.0) || top_p > 1.0) throw Error("config", "top_p must be in (0, 1]");
        if (max_tokens < 1) throw Error("config", "max_tokens must be >= 1");
    }
};

// Keeps the smallest prefix of tokens, in descending-probability order (ties
// broken by ascending token id), whose cumulative mass reaches top_p; the
// kept mass is renormalized to 1 and everything else is zeroed.
inline std::vector<double> nucleus_truncate(const std::vector<double>& probs, double top_p) {
    if (!(top_p > 0.0) || top_p > 1.0) throw Error("data", "top_p must be in (0, 1]");
    if (probs.empty()) throw Error("data", "empty probability vector");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw Error("data", "probabilities must be finite and non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw Error("data", "probabilities must sum to 1 (got " + std::to_string(sum) + ")");

    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (probs[a] != probs[b]) return probs[a] > probs[b];
        return a < b;
    });

    std::size_t keep = order.size();
    double cumulative = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        cumulative += probs[order[k]];
        if (cumulative >= top_p) {
            keep = k + 1;
            break;
        }
    }
    if (keep == order.size()) return probs;  // nothing dropped, nothing to renormalize

    double kept_mass = 0.0;
    for (std::size_t k = 0; k < keep; ++k) kept_mass += probs[order[k]];
    std::vector<double> out(probs.size(), 0.0);
    for (std::size_t k = 0; k < keep; ++k) out[order[k]] = probs[order[k]] / kept_mass;
    return out;
}

// softmax(logits / temperature); -inf logits are allowed and get mass 0.
inline std::vector<double> softmax(std::span<const double> logits, double temperature) {
    if (!(temperature > 0.0)) throw Error("data", "temperature must be positive");
    if (logits.empty()) throw Error("data", "empty logit vector");
    double max_scaled = -std::numeric_limits<double>::infinity();
    for (double l : logits) {
        if (std::isnan(l) || l == std::numeric_limits<double>::infinity())
            throw Error("data", "logits must be finite or -inf");
        max_scaled = std::max(max_scaled, l / temperature);
    }
    if (max_scaled == -std::numeric_limits<double>::infinity())
        throw Error("data", "all logits are -inf");
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] / temperature - max_scaled);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

// Temperature softmax -> nucleus truncation -> one seeded draw.
// Deterministic given (logits, cfg, rng state).
inline std::size_t sample_token(std::span<const double> logits, const GenerationConfig& cfg,
                                std::mt19937_64& rng) {
    cfg.validate();
    std::vector<double> truncated = nucleus_truncate(softmax(logits, cfg.temperature), cfg.top_p);
    double u = random_unit(rng);
    double cumulative = 0.0;
    std::size_t last_nonzero = 0;
    for (std::size_t i = 0; i < truncated.size(); ++i) {
        if (truncated[i] <= 0.0) continue;
        last_nonzero = i;
        cumulative += truncated[i];
        if (u < cumulative) return i;
    }
    return last_nonzero;  // float slack at the tail
}

// ---- judge protocol ----

enum class Criterion { os_acc, os_rel };

inline constexpr std::array<Criterion, 2> kCriteria = {Criterion::os_acc, Criterion::os_rel};

inline const char* criterion_name(Criterion c) {
    return c == Criterion::os_acc ? "OS-acc" : "OS-rel";
}

inline Criterion criterion_from_name(std::string_view name) {
    std::string n = to_lower_ascii(name);
    for (char& c : n)
        if (c == '-') c = '_';
    if (n == "os_acc") return Criterion::os_acc;
    if (n == "os_rel") return Criterion::os_rel;
    throw Error("format", "unknown criterion \"" + std::string(name) + "\"");
}

// Grading rubrics sent as the judge's system message, with {num} standing
// for the number of responses in the frame.
inline constexpr std::string_view kAccuracySystemTemplate =
    R"(You are a sports expert assigned to grade language models' generation performance on general sports-related text according to the provided rubric.
1 prompt and {num} responses will be presented, all attempting to complete the same given prompt. Each response is separated by [SEP] and limited to 80 tokens.

Evaluate responses using the following rubric for "Accuracy and Factuality":
"1": "Mostly inaccurate, significant factual errors.",
"2": "Partially accurate, mix of correct and incorrect information.",
"3": "Mostly accurate, minor factual errors.",
"4": "Highly accurate, negligible errors.",
"5": "Fully accurate and factually impeccable."

When evaluating, only consider the accuracy and factuality in the context of the given prompt.
Score these generated responses on a scale of 1-5. Only output the scores! Output scores in the following format: 'X, X, X, X, X...', where X is a number between 1 and 5.)";

inline constexpr std::string_view kRelevanceSystemTemplate =
    R"(You are a sports expert assigned to grade language models' generation performance on general sports-related text according to the provided rubric.
1 prompt and {num} responses will be presented, all attempting to complete the same given prompt. Each response is started by [SEP] and limited to 80 tokens.

Evaluate responses using the following rubric for "Continuity and Relevance":
"1": "Poor continuation, diverges significantly from the prompt's context or topic.",
"2": "Weak continuation, maintains some elements of the prompt but introduces unrelated content.",
"3": "Adequate continuation, generally follows the prompt's direction with some minor deviations.",
"4": "Strong continuation, closely follows the prompt's context and style with minimal inconsistencies.",
"5": "Excellent continuation, seamlessly extends the prompt's narrative, context, and style."

When evaluating, only consider how well the generated text continues or extends the given prompt in terms of context, topic, and style.
Score these generated responses on a scale of 1-5. Only output the scores! Output scores in the following format: 'X, X, X, X, X...', where X is a number between 1 and 5.)";

inline std::string_view system_template(Criterion c) {
    return c == Criterion::os_acc ? kAccuracySystemTemplate : kRelevanceSystemTemplate;
}

// (system_message, user_message) for one judging call carrying every model's
// response to one prompt. Responses may not contain the frame separator.
inline std::pair<std::string, std::string> build_judge_request(
    Criterion criterion, const PromptEntry& prompt, std::span<const std::string> responses) {
    if (responses.empty()) throw Error("data", "judge request needs at least one response");
    for (const auto& r : responses)
        if (r.find("[SEP]") != std::string::npos)
            throw Error("data", "response contains the literal \"[SEP]\" separator");

    std::string system(system_template(criterion));
    const std::string placeholder = "{num}";
    std::size_t pos = system.find(placeholder);
    while (pos != std::string::npos) {
        system.replace(pos, placeholder.size(), std::to_string(responses.size()));
        pos = system.find(placeholder, pos);
    }

    std::string user = "prompt: " + prompt.prompt + "\nresponse:";
    for (const auto& r : responses) user += " [SEP] " + r;
    return {std::move(system), std::move(user)};
}

// Parses a judge reply of the form "X, X, X", tolerating surrounding
// whitespace and one trailing period. Anything else fails loudly; the raw
// reply is kept in the error message for audit.
inline std::vector<int> parse_judge_reply(std::string_view reply, int expected_n) {
    if (expected_n < 1) throw Error("data", "expected_n must be >= 1");
    auto fail = [&](const std::string& what) -> Error {
        return Error("format", what + "; raw reply: \"" + std::string(reply) + "\"");
    };
    std::string_view body = trim_view(reply);
    if (!body.empty() && body.back() == '.') body = trim_view(body.substr(0, body.size() - 1));
    if (body.empty()) throw fail("empty judge reply");

    std::vector<int> scores;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = body.find(',', start);
        std::string_view token =
            trim_view(body.substr(start, comma == std::string_view::npos ? comma : comma - start));
        if (token.empty()) throw fail("empty score token");
        bool negative = token[0] == '-';
        std::string_view digits = negative ? token.substr(1) : token;
        if (digits.empty()) throw fail("non-numeric score token \"" + std::string(token) + "\"");
        long value = 0;
        for (char c : digits) {
            if (c < '0' || c > '9')
                throw fail("non-numeric score token \"" + std::string(token) + "\"");
            value = value * 10 + (c - '0');
            if (value > 1000000) throw fail("score token out of range");
        }
        if (negative) value = -value;
        if (value < 1 || value > 5)
            throw fail("score " + std::to_string(value) + " outside 1-5");
        scores.push_back(static_cast<int>(value));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (static_cast<int>(scores.size()) != expected_n)
        throw fail("expected " + std::to_string(expected_n) + " scores, got " +
                   std::to_string(scores.size()));
    return scores;
}

// Canonical reply formatter; parse_judge_reply(format_scores(xs)) == xs.
inline std::string format_scores(std::span<const int> scores) {
    std::string out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(scores[i]);
    }
    return out;
}

// ---- aggregation ----

struct JudgeScore {
    std::string judge_id;
    std::string model_id;
    std::string tag;
    int prompt_index = 0;
    Criterion criterion = Criterion::os_acc;
    int value = 0;  // 1-5
};

struct Improvement {
    std::string model_a;
    std::string model_b;
    double percent = 0.0;
};

// Per-criterion values are stored as [OS-acc, OS-rel]. Model and judge lists
// are kept sorted so the report (and its serialization) is independent of
// input order.
struct BenchmarkReport {
    std::vector<std::string> models;
    std::vector<std::string> judges;
    std::map<std::string, std::map<std::string, std::array<double, 2>>> per_judge_means;
    std::map<std::string, std::array<double, 2>> cross_judge;
    std::map<std::string, double> os_avg;
    std::vector<Improvement> improvements;
};

// Signed percent change of `score_a` relative to baseline `score_b`.
inline double relative_improvement(double score_a, double score_b) {
    if (!(score_b > 0.0)) throw Error("data", "relative improvement needs a positive baseline");
    return (score_a / score_b - 1.0) * 100.0;
}

namespace detail {

inline void finalize_report(BenchmarkReport& r) {
    for (const auto& model : r.models) {
        auto model_it = r.per_judge_means.find(model);
        for (int c = 0; c < 2; ++c) {
            double sum = 0.0;
            for (const auto& judge : r.judges) {
                if (model_it == r.per_judge_means.end() ||
                    model_it->second.find(judge) == model_it->second.end() ||
                    !std::isfinite(model_it->second.at(judge)[static_cast<std::size_t>(c)]))
                    throw Error("data", "missing scores for model=" + model + " judge=" + judge +
                                            " criterion=" +
                                            criterion_name(static_cast<Criterion>(c)));
                sum += model_it->second.at(judge)[static_cast<std::size_t>(c)];
            }
            r.cross_judge[model][static_cast<std::size_t>(c)] =
                sum / static_cast<double>(r.judges.size());
        }
        const auto& cj = r.cross_judge[model];
        r.os_avg[model] = (cj[0] + cj[1]) / 2.0;
    }
    for (const auto& a : r.models)
        for (const auto& b : r.models)
            if (a != b)
                r.improvements.push_back({a, b, relative_improvement(r.os_avg[a], r.os_avg[b])});
}

}  // namespace detail

// Aggregates raw judge scores: per-judge mean over prompts, cross-judge
// unweighted mean, and OS-Avg as the mean of the two criteria. Every
// (model, judge, criterion) cell must hold at least one score.
inline BenchmarkReport aggregate(std::span<const JudgeScore> scores) {
    if (scores.empty()) throw Error("data", "no scores to aggregate");
    std::set<std::string> models, judges;
    // (model, judge, criterion) -> (sum, count); score values are small
    // integers, so the sums are exact and order-independent.
    std::map<std::string, std::map<std::string, std::array<std::pair<double, std::int64_t>, 2>>>
        cells;
    for (const auto& s : scores) {
        if (s.value < 1 || s.value > 5)
            throw Error("data", "judge score " + std::to_string(s.value) + " outside 1-5");
        if (s.model_id.empty() || s.judge_id.empty())
            throw Error("data", "judge score with empty model or judge id");
        models.insert(s.model_id);
        judges.insert(s.judge_id);
        auto& cell = cells[s.model_id][s.judge_id][static_cast<std::size_t>(s.criterion)];
        cell.first += s.value;
        cell.second += 1;
    }
    BenchmarkReport r;
    r.models.assign(models.begin(), models.end());
    r.judges.assign(judges.begin(), judges.end());
    for (const auto& model : r.models)
        for (const auto& judge : r.judges)
            for (int c = 0; c < 2; ++c) {
                const auto& cell = cells[model][judge][static_cast<std::size_t>(c)];
                if (cell.second == 0)
                    throw Error("data", "missing scores for model=" + model + " judge=" + judge +
                                            " criterion=" +
                                            criterion_name(static_cast<Criterion>(c)));
                r.per_judge_means[model][judge][static_cast<std::size_t>(c)] =
                    cell.first / static_cast<double>(cell.second);
            }
    detail::finalize_report(r);
    return r;
}

struct PerJudgeMean {
    std::string model_id;
    std::string judge_id;
    Criterion criterion = Criterion::os_acc;
    double mean = 0.0;
};

// Aggregation entry point for already-averaged per-judge scores (e.g. a
// published score table); runs the same cross-judge and OS-Avg stages.
inline BenchmarkReport aggregate_from_means(std::span<const PerJudgeMean> means) {
    if (means.empty()) throw Error("data", "no scores to aggregate");
    BenchmarkReport r;
    std::set<std::string> models, judges;
    std::set<std::tuple<std::string, std::string, int>> seen;
    for (const auto& m : means) {
        if (!(m.mean >= 1.0 && m.mean <= 5.0))
            throw Error("data", "per-judge mean " + std::to_string(m.mean) + " outside [1,5]");
        if (!seen.emplace(m.model_id, m.judge_id, static_cast<int>(m.criterion)).second)
            throw Error("data", "duplicate per-judge mean for model=" + m.model_id +
                                    " judge=" + m.judge_id);
        models.insert(m.model_id);
        judges.insert(m.judge_id);
    }
    r.models.assign(models.begin(), models.end());
    r.judges.assign(judges.begin(), judges.end());
    for (auto& model : r.models)
        for (auto& judge : r.judges)
            r.per_judge_means[model][judge] = {std::numeric_limits<double>::quiet_NaN(),
                                               std::numeric_limits<double>::quiet_NaN()};
    for (const auto& m : means)
        r.per_judge_means[m.model_id][m.judge_id][static_cast<std::size_t>(m.criterion)] = m.mean;
    detail::finalize_report(r);
    return r;
}

// ---- report serialization & rendering ----

inline json report_to_json(const BenchmarkReport& r) {
    json per_judge = json::object();
    for (const auto& [model, by_judge] : r.per_judge_means) {
        json jm = json::object();
        for (const auto& [judge, vals] : by_judge)
            jm[judge] = {{"OS-acc", vals[0]}, {"OS-rel", vals[1]}};
        per_judge[model] = std::move(jm);
    }
    json cross = json::object();
    for (const auto& [model, vals] : r.cross_judge)
        cross[model] = {{"OS-acc", vals[0]}, {"OS-rel", vals[1]}};
    json avg = json::object();
    for (const auto& [model, v] : r.os_avg) avg[model] = v;
    json improvements = json::array();
    for (const auto& imp : r.improvements)
        improvements.push_back(
            {{"model_a", imp.model_a}, {"model_b", imp.model_b}, {"percent", imp.percent}});
    return json{{"models", r.models},       {"judges", r.judges},
                {"per_judge_means", per_judge}, {"cross_judge", cross},
                {"os_avg", avg},            {"improvements", improvements}};
}

// Score file: {"scores": [{judge, model, tag, index, criterion, value}...]}
// or {"per_judge_means": [{judge, model, criterion, mean}...]}.
inline BenchmarkReport report_from_scores_json(const json& j, const std::string& where) {
    if (j.contains("scores")) {
        std::vector<JudgeScore> scores;
        for (const auto& e : j.at("scores")) {
            JudgeScore s;
            try {
                s.judge_id = e.at("judge").get<std::string>();
                s.model_id = e.at("model").get<std::string>();
                s.tag = e.value("tag", std::string{});
                s.prompt_index = e.value("index", 0);
                s.criterion = criterion_from_name(e.at("criterion").get<std::string>());
                s.value = e.at("value").get<int>();
            } catch (const json::exception& ex) {
                throw Error("format", where + ": bad score entry: " + ex.what());
            }
            scores.push_back(std::move(s));
        }
        return aggregate(scores);
    }
    if (j.contains("per_judge_means")) {
        std::vector<PerJudgeMean> means;
        for (const auto& e : j.at("per_judge_means")) {
            PerJudgeMean m;
            try {
                m.judge_id = e.at("judge").get<std::string>();
                m.model_id = e.at("model").get<std::string>();
                m.criterion = criterion_from_name(e.at("criterion").get<std::string>());
                m.mean = e.at("mean").get<double>();
            } catch (const json::exception& ex) {
                throw Error("format", where + ": bad per-judge mean entry: " + ex.what());
            }
            means.push_back(std::move(m));
        }
        return aggregate_from_means(means);
    }
    throw Error("format", where + ": expected a \"scores\" or \"per_judge_means\" array");
}

inline BenchmarkReport load_scores_file(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error("format", path + ": malformed scores JSON: " + e.what());
    }
    return report_from_scores_json(j, path);
}

// Text table: one row per model with OS-acc / OS-rel / OS-Avg, followed by
// the per-judge breakdown. With a baseline, adds the relative-change column.
inline std::string render_report_table(const BenchmarkReport& r,
                                       const std::string& baseline = {}) {
    if (!baseline.empty() && r.os_avg.find(baseline) == r.os_avg.end())
        throw Error("data", "baseline model \"" + baseline + "\" not in report");
    std::size_t width = 5;
    for (const auto& m : r.models) width = std::max(width, m.size());
    for (const auto& j : r.judges) width = std::max(width, j.size());
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-*s  %8s %8s %8s", static_cast<int>(width), "Model",
                  "OS-acc", "OS-rel", "OS-Avg");
    out += buf;
    if (!baseline.empty()) {
        std::snprintf(buf, sizeof(buf), " %14s", ("vs " + baseline).c_str());
        out += buf;
    }
    out += '\n';
    for (const auto& model : r.models) {
        const auto& cj = r.cross_judge.at(model);
        std::snprintf(buf, sizeof(buf), "%-*s  %8.3f %8.3f %8.3f", static_cast<int>(width),
                      model.c_str(), cj[0], cj[1], r.os_avg.at(model));
        out += buf;
        if (!baseline.empty()) {
            if (model == baseline) {
                std::snprintf(buf, sizeof(buf), " %14s", "-");
            } else {
                std::snprintf(buf, sizeof(buf), " %+13.2f%%",
                              relative_improvement(r.os_avg.at(model), r.os_avg.at(baseline)));
            }
            out += buf;
        }
        out += '\n';
    }
    out += '\n';
    std::snprintf(buf, sizeof(buf), "%-*s  %-*s %8s %8s\n", static_cast<int>(width), "Model",
                  static_cast<int>(width), "Judge", "OS-acc", "OS-rel");
    out += buf;
    for (const auto& model : r.models)
        for (const auto& judge : r.judges) {
            const auto& vals = r.per_judge_means.at(model).at(judge);
            std::snprintf(buf, sizeof(buf), "%-*s  %-*s %8.3f %8.3f\n", static_cast<int>(width),
                          model.c_str(), static_cast<int>(width), judge.c_str(), vals[0],
                          vals[1]);
            out += buf;
        }
    return out;
}

}  // namespace sportscorpus::bench
