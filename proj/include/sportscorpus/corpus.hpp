#pragma once
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "sportscorpus/util.hpp"

namespace sportscorpus::corpus {

using json = nlohmann::json;

// One crawled document. `score` is the classifier probability and is only
// present on records that went through the classify step.
struct WebRecord {
    std::string id;
    std::string url;
    std::string text;
    std::optional<double> score;

    bool operator==(const WebRecord&) const = default;
};

struct ShardStats {
    std::uint64_t n_in = 0;
    std::uint64_t n_url_pass = 0;
    std::uint64_t n_kept = 0;

    bool valid() const { return n_kept <= n_url_pass && n_url_pass <= n_in; }

    ShardStats& operator+=(const ShardStats& o) {
        n_in += o.n_in;
        n_url_pass += o.n_url_pass;
        n_kept += o.n_kept;
        return *this;
    }
    friend ShardStats operator+(ShardStats a, const ShardStats& b) { return a += b; }
    bool operator==(const ShardStats&) const = default;
};

inline json stats_to_json(const ShardStats& s) {
    return json{{"n_in", s.n_in}, {"n_url_pass", s.n_url_pass}, {"n_kept", s.n_kept}};
}

inline ShardStats stats_from_json(const json& j) {
    ShardStats s;
    try {
        s.n_in = j.at("n_in").get<std::uint64_t>();
        s.n_url_pass = j.at("n_url_pass").get<std::uint64_t>();
        s.n_kept = j.at("n_kept").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw Error("format", std::string("bad stats object: ") + e.what());
    }
    if (!s.valid())
        throw Error("data", "stats violate n_kept <= n_url_pass <= n_in");
    return s;
}

// Fraction of input removed by the URL stage.
inline double reduction_ratio(const ShardStats& s) {
    if (s.n_in == 0) throw Error("data", "reduction ratio undefined: n_in is zero");
    return 1.0 - static_cast<double>(s.n_url_pass) / static_cast<double>(s.n_in);
}

// Fraction of input removed by the full pipeline (URL stage + classifier).
inline double total_reduction(const ShardStats& s) {
    if (s.n_in == 0) throw Error("data", "reduction ratio undefined: n_in is zero");
    return 1.0 - static_cast<double>(s.n_kept) / static_cast<double>(s.n_in);
}

namespace detail {

inline std::string require_string_field(const json& j, const char* key, std::size_t line_no,
                                        const std::string& path) {
    auto it = j.find(key);
    if (it == j.end())
        throw Error("format", path + ": line " + std::to_string(line_no) +
                                  ": missing required field \"" + key + "\"");
    if (!it->is_string())
        throw Error("format", path + ": line " + std::to_string(line_no) + ": field \"" + key +
                                  "\" must be a string");
    return it->get<std::string>();
}

inline WebRecord record_from_line(const std::string& line, std::size_t line_no,
                                  const std::string& path) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw Error("format",
                    path + ": line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!j.is_object())
        throw Error("format", path + ": line " + std::to_string(line_no) + ": expected an object");

    WebRecord r;
    r.id = require_string_field(j, "id", line_no, path);
    r.url = require_string_field(j, "url", line_no, path);
    r.text = require_string_field(j, "text", line_no, path);
    if (r.id.empty())
        throw Error("format", path + ": line " + std::to_string(line_no) + ": empty \"id\"");
    if (r.url.empty())
        throw Error("format", path + ": line " + std::to_string(line_no) + ": empty \"url\"");
    if (auto it = j.find("score"); it != j.end()) {
        if (!it->is_number())
            throw Error("format", path + ": line " + std::to_string(line_no) +
                                      ": field \"score\" must be a number");
        double sc = it->get<double>();
        if (!(sc >= 0.0 && sc <= 1.0))
            throw Error("format", path + ": line " + std::to_string(line_no) +
                                      ": \"score\" outside [0,1]");
        r.score = sc;
    }
    return r;
}

inline json record_to_json(const WebRecord& r) {
    json j{{"id", r.id}, {"url", r.url}, {"text", r.text}};
    if (r.score) j["score"] = *r.score;
    return j;
}

}  // namespace detail

// Streaming reader over a JSON-lines shard. Holds one line at a time, so
// memory stays flat regardless of shard size. Blank lines are skipped.
class ShardReader {
public:
    explicit ShardReader(std::string path) : path_(std::move(path)), in_(path_, std::ios::binary) {
        if (!in_) throw Error("io", "cannot open " + path_);
    }

    // Returns false at end of file; throws on malformed input.
    bool next(WebRecord& out) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (trim_view(line).empty()) continue;
            out = detail::record_from_line(line, line_, path_);
            return true;
        }
        if (in_.bad()) throw Error("io", "read failed for " + path_);
        return false;
    }

    std::size_t line_number() const { return line_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t line_ = 0;
};

inline std::vector<WebRecord> read_shard(const std::string& path) {
    ShardReader reader(path);
    std::vector<WebRecord> records;
    WebRecord r;
    while (reader.next(r)) records.push_back(std::move(r));
    return records;
}

// Writer enforcing the shard invariants: non-empty id/url/text and per-shard
// id uniqueness. A record is validated before any byte of it is written.
class ShardWriter {
public:
    explicit ShardWriter(std::string path) : path_(std::move(path)), out_(path_, std::ios::binary | std::ios::trunc) {
        if (!out_) throw Error("io", "cannot open " + path_ + " for writing");
    }

    void write(const WebRecord& r) {
        if (r.id.empty()) throw Error("data", "record with empty id rejected");
        if (r.url.empty()) throw Error("data", "record " + r.id + " has empty url");
        if (r.text.empty()) throw Error("data", "record " + r.id + " has empty text");
        if (r.score && !(*r.score >= 0.0 && *r.score <= 1.0))
            throw Error("data", "record " + r.id + " has score outside [0,1]");
        if (!seen_ids_.insert(r.id).second)
            throw Error("data", "duplicate record id \"" + r.id + "\" within shard");
        out_ << detail::record_to_json(r).dump() << '\n';
        if (!out_) throw Error("io", "write failed for " + path_);
        ++count_;
    }

    void flush() {
        out_.flush();
        if (!out_) throw Error("io", "write failed for " + path_);
    }

    std::uint64_t count() const { return count_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ofstream out_;
    std::unordered_set<std::string> seen_ids_;
    std::uint64_t count_ = 0;
};

// Returns the number of records written.
inline std::uint64_t write_shard(std::span<const WebRecord> records, const std::string& path) {
    ShardWriter writer(path);
    for (const auto& r : records) writer.write(r);
    writer.flush();
    return writer.count();
}

inline void save_stats(const ShardStats& s, const std::string& path) {
    write_text_file(path, stats_to_json(s).dump() + "\n");
}

inline ShardStats load_stats(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error("format", path + ": malformed stats JSON: " + e.what());
    }
    return stats_from_json(j);
}

}  // namespace sportscorpus::corpus
