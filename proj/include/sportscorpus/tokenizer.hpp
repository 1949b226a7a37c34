#pragma once
#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sportscorpus/util.hpp"

namespace sportscorpus::tokenizer {

struct VocabEntry {
    std::uint32_t id;
    std::string bytes;
};

// Thrown by encode when no vocabulary entry matches the remaining input.
class EncodeError : public Error {
public:
    EncodeError(std::size_t offset, const std::string& message)
        : Error("data", message), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

// ---- byte-string escaping (vocabulary file format) ----
// Printable ASCII stays literal; backslash, tab, newline, carriage return
// get two-character escapes; everything else is \xNN.

inline std::string escape_bytes(std::string_view bytes) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size());
    for (unsigned char c : bytes) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default:
                if (c >= 0x20 && c < 0x7F) {
                    out.push_back(static_cast<char>(c));
                } else {
                    out += "\\x";
                    out.push_back(hex[c >> 4]);
                    out.push_back(hex[c & 0xF]);
                }
        }
    }
    return out;
}

inline std::string unescape_bytes(std::string_view escaped) {
    auto hex_val = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::string out;
    out.reserve(escaped.size());
    for (std::size_t i = 0; i < escaped.size(); ++i) {
        char c = escaped[i];
        if (c != '\\') {
            out.push_back(c);
            continue;
        }
        if (i + 1 >= escaped.size()) throw Error("format", "dangling backslash in escaped bytes");
        char e = escaped[++i];
        switch (e) {
            case '\\': out.push_back('\\'); break;
            case 't': out.push_back('\t'); break;
            case 'n': out.push_back('\n'); break;
            case 'r': out.push_back('\r'); break;
            case 'x': {
                if (i + 2 >= escaped.size())
                    throw Error("format", "truncated \\x escape in escaped bytes");
                int hi = hex_val(escaped[i + 1]);
                int lo = hex_val(escaped[i + 2]);
                if (hi < 0 || lo < 0)
                    throw Error("format", "bad \\x escape in escaped bytes");
                out.push_back(static_cast<char>(hi * 16 + lo));
                i += 2;
                break;
            }
            default:
                throw Error("format", std::string("unknown escape \\") + e);
        }
    }
    return out;
}

// Vocabulary with a byte-trie prefix index for greedy longest-match
// encoding. Entries are immutable after construction.
class Vocabulary {
public:
    static Vocabulary from_entries(std::vector<VocabEntry> entries) {
        Vocabulary v;
        v.entries_ = std::move(entries);
        std::unordered_map<std::string_view, std::size_t> by_bytes;
        for (std::size_t i = 0; i < v.entries_.size(); ++i) {
            const VocabEntry& e = v.entries_[i];
            if (e.bytes.empty())
                throw Error("data", "empty token bytes for id " + std::to_string(e.id));
            if (auto [it, inserted] = by_bytes.emplace(e.bytes, i); !inserted)
                throw Error("data", "duplicate token bytes \"" + escape_bytes(e.bytes) +
                                        "\" for ids " +
                                        std::to_string(v.entries_[it->second].id) + " and " +
                                        std::to_string(e.id));
            if (!v.by_id_.emplace(e.id, i).second)
                throw Error("data", "duplicate token id " + std::to_string(e.id));
        }
        v.build_trie();
        return v;
    }

    const std::vector<VocabEntry>& entries() const { return entries_; }

    // True iff all 256 single-byte strings are present.
    bool byte_complete() const { return byte_complete_; }

    const std::string* bytes_for(std::uint32_t id) const {
        auto it = by_id_.find(id);
        return it == by_id_.end() ? nullptr : &entries_[it->second].bytes;
    }

    // Longest entry matching `input` starting at `pos`; returns entry index
    // or npos. Used by encode; exposed for the oracle tests.
    std::size_t longest_match(std::string_view input, std::size_t pos) const {
        std::int32_t node = 0;
        std::size_t best = npos;
        for (std::size_t i = pos; i < input.size(); ++i) {
            node = child(node, static_cast<unsigned char>(input[i]));
            if (node < 0) break;
            if (nodes_[static_cast<std::size_t>(node)].entry >= 0)
                best = static_cast<std::size_t>(nodes_[static_cast<std::size_t>(node)].entry);
        }
        return best;
    }

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

private:
    struct Node {
        std::int32_t entry = -1;  // index into entries_, -1 if not terminal
        std::vector<std::pair<unsigned char, std::int32_t>> kids;  // sorted by byte
    };

    std::int32_t child(std::int32_t node, unsigned char c) const {
        const auto& kids = nodes_[static_cast<std::size_t>(node)].kids;
        auto it = std::lower_bound(kids.begin(), kids.end(), c,
                                   [](const auto& kv, unsigned char b) { return kv.first < b; });
        if (it == kids.end() || it->first != c) return -1;
        return it->second;
    }

    void build_trie() {
        nodes_.clear();
        nodes_.emplace_back();
        bool single[256] = {false};
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const std::string& bytes = entries_[i].bytes;
            if (bytes.size() == 1) single[static_cast<unsigned char>(bytes[0])] = true;
            std::int32_t node = 0;
            for (unsigned char c : bytes) {
                std::int32_t next = child(node, c);
                if (next < 0) {
                    next = static_cast<std::int32_t>(nodes_.size());
                    auto& kids = nodes_[static_cast<std::size_t>(node)].kids;
                    kids.insert(std::lower_bound(kids.begin(), kids.end(),
                                                 std::make_pair(c, std::int32_t{0})),
                                {c, next});
                    nodes_.emplace_back();
                }
                node = next;
            }
            nodes_[static_cast<std::size_t>(node)].entry = static_cast<std::int32_t>(i);
        }
        byte_complete_ = std::all_of(std::begin(single), std::end(single), [](bool b) { return b; });
    }

    std::vector<VocabEntry> entries_;
    std::unordered_map<std::uint32_t, std::size_t> by_id_;
    std::vector<Node> nodes_;
    bool byte_complete_ = false;
};

// Vocabulary file: one entry per line, `<id>\t<escaped-bytes>`.
inline Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path);
    std::vector<VocabEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error("format",
                        path + ": line " + std::to_string(line_no) + ": expected <id>\\t<bytes>");
        std::uint64_t id = 0;
        std::string_view id_part = std::string_view(line).substr(0, tab);
        if (id_part.empty())
            throw Error("format", path + ": line " + std::to_string(line_no) + ": empty token id");
        for (char c : id_part) {
            if (c < '0' || c > '9')
                throw Error("format",
                            path + ": line " + std::to_string(line_no) + ": bad token id");
            id = id * 10 + static_cast<std::uint64_t>(c - '0');
            if (id > std::numeric_limits<std::uint32_t>::max())
                throw Error("format",
                            path + ": line " + std::to_string(line_no) + ": token id too large");
        }
        std::string bytes;
        try {
            bytes = unescape_bytes(std::string_view(line).substr(tab + 1));
        } catch (const Error& e) {
            throw Error("format", path + ": line " + std::to_string(line_no) + ": " + e.what());
        }
        if (bytes.empty())
            throw Error("data", path + ": line " + std::to_string(line_no) + ": empty token");
        entries.push_back({static_cast<std::uint32_t>(id), std::move(bytes)});
    }
    if (in.bad()) throw Error("io", "read failed for " + path);
    try {
        return Vocabulary::from_entries(std::move(entries));
    } catch (const Error& e) {
        throw Error(e.kind(), path + ": " + e.what());
    }
}

inline void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
    std::string out;
    for (const auto& e : vocab.entries())
        out += std::to_string(e.id) + "\t" + escape_bytes(e.bytes) + "\n";
    write_text_file(path, out);
}

// Greedy longest-match encoding: at each position consume the longest
// vocabulary entry matching the remaining input.
inline std::vector<std::uint32_t> encode(std::string_view input, const Vocabulary& vocab) {
    std::vector<std::uint32_t> out;
    std::size_t pos = 0;
    while (pos < input.size()) {
        std::size_t entry = vocab.longest_match(input, pos);
        if (entry == Vocabulary::npos)
            throw EncodeError(pos, "no vocabulary entry matches input at byte offset " +
                                       std::to_string(pos));
        out.push_back(vocab.entries()[entry].id);
        pos += vocab.entries()[entry].bytes.size();
    }
    return out;
}

inline std::string decode(std::span<const std::uint32_t> ids, const Vocabulary& vocab) {
    std::string out;
    for (std::uint32_t id : ids) {
        const std::string* bytes = vocab.bytes_for(id);
        if (!bytes) throw Error("data", "unknown token id " + std::to_string(id));
        out += *bytes;
    }
    return out;
}

// ---- token shards ----
// Binary layout: magic "OTOK", u32 LE version, u64 LE count, then
// count x u32 LE token ids.

inline constexpr char kTokenShardMagic[4] = {'O', 'T', 'O', 'K'};
inline constexpr std::uint32_t kTokenShardVersion = 1;

struct TokenShard {
    std::uint32_t version = kTokenShardVersion;
    std::uint64_t count = 0;  // declared in the header; must equal ids.size()
    std::vector<std::uint32_t> ids;

    static TokenShard from_ids(std::vector<std::uint32_t> ids) {
        TokenShard s;
        s.count = ids.size();
        s.ids = std::move(ids);
        return s;
    }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(const unsigned char* p, int n) {
    std::uint64_t v = 0;
    for (int i = n - 1; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace detail

inline void write_token_shard(std::span<const std::uint32_t> ids, const std::string& path) {
    std::string out;
    out.reserve(16 + ids.size() * 4);
    out.append(kTokenShardMagic, 4);
    detail::put_u32(out, kTokenShardVersion);
    detail::put_u64(out, ids.size());
    for (std::uint32_t id : ids) detail::put_u32(out, id);
    write_text_file(path, out);
}

inline TokenShard read_token_shard(const std::string& path) {
    std::string raw = read_text_file(path);
    if (raw.size() < 16 || std::memcmp(raw.data(), kTokenShardMagic, 4) != 0)
        throw Error("format", path + ": not a token shard (bad magic)");
    const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
    TokenShard shard;
    shard.version = static_cast<std::uint32_t>(detail::get_le(p + 4, 4));
    if (shard.version != kTokenShardVersion)
        throw Error("format", path + ": unsupported token shard version " +
                                  std::to_string(shard.version));
    shard.count = detail::get_le(p + 8, 8);
    std::uint64_t payload_bytes = raw.size() - 16;
    if (payload_bytes != shard.count * 4)
        throw Error("format", path + ": corrupt token shard: header count " +
                                  std::to_string(shard.count) + " but payload holds " +
                                  std::to_string(payload_bytes / 4) + " ids");
    shard.ids.resize(shard.count);
    for (std::uint64_t i = 0; i < shard.count; ++i)
        shard.ids[i] = static_cast<std::uint32_t>(detail::get_le(p + 16 + i * 4, 4));
    return shard;
}

// Total token count across shards; validates header/payload agreement.
inline std::uint64_t count_tokens(std::span<const TokenShard> shards) {
    std::uint64_t total = 0;
    for (const auto& s : shards) {
        if (s.count != s.ids.size())
            throw Error("data", "corrupt token shard: header count " + std::to_string(s.count) +
                                    " but payload holds " + std::to_string(s.ids.size()) + " ids");
        if (total > std::numeric_limits<std::uint64_t>::max() - s.count)
            throw Error("data", "token count overflow");
        total += s.count;
    }
    return total;
}

// Header-only variant: counts without loading payloads.
inline std::uint64_t count_token_files(std::span<const std::string> paths) {
    std::uint64_t total = 0;
    for (const auto& path : paths) {
        std::ifstream in(path, std::ios::binary | std::ios::ate);
        if (!in) throw Error("io", "cannot open " + path);
        std::uint64_t size = static_cast<std::uint64_t>(in.tellg());
        in.seekg(0);
        char header[16];
        if (size < 16 || !in.read(header, 16) || std::memcmp(header, kTokenShardMagic, 4) != 0)
            throw Error("format", path + ": not a token shard (bad magic)");
        const auto* p = reinterpret_cast<const unsigned char*>(header);
        std::uint32_t version = static_cast<std::uint32_t>(detail::get_le(p + 4, 4));
        if (version != kTokenShardVersion)
            throw Error("format", path + ": unsupported token shard version " +
                                      std::to_string(version));
        std::uint64_t count = detail::get_le(p + 8, 8);
        if (size - 16 != count * 4)
            throw Error("format", path + ": corrupt token shard: header count " +
                                      std::to_string(count) + " does not match file size");
        if (total > std::numeric_limits<std::uint64_t>::max() - count)
            throw Error("data", "token count overflow");
        total += count;
    }
    return total;
}

}  // namespace sportscorpus::tokenizer
