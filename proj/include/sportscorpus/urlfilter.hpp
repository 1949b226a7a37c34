#pragma once
#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sportscorpus/corpus.hpp"
#include "sportscorpus/util.hpp"

namespace sportscorpus::urlfilter {

// Multi-pattern literal matcher. Patterns are given in priority order
// (index 0 = highest); best_match returns the highest-priority pattern that
// occurs anywhere in the text, or -1.
class AhoCorasick {
public:
    void build(const std::vector<std::string>& patterns) {
        nodes_.clear();
        nodes_.emplace_back();
        for (std::size_t p = 0; p < patterns.size(); ++p) {
            const std::string& pat = patterns[p];
            std::int32_t node = 0;
            for (unsigned char c : pat) {
                std::int32_t next = nodes_[static_cast<std::size_t>(node)].next[c];
                if (next == -1) {
                    next = static_cast<std::int32_t>(nodes_.size());
                    nodes_[static_cast<std::size_t>(node)].next[c] = next;
                    nodes_.emplace_back();
                }
                node = next;
            }
            auto& best = nodes_[static_cast<std::size_t>(node)].best;
            best = std::min(best, static_cast<std::int32_t>(p));
        }
        // BFS: fail links double as the goto function, and each node caches
        // the best pattern reachable through its fail chain.
        std::deque<std::int32_t> queue;
        for (int c = 0; c < 256; ++c) {
            std::int32_t& next = nodes_[0].next[c];
            if (next == -1) {
                next = 0;
            } else {
                nodes_[static_cast<std::size_t>(next)].fail = 0;
                queue.push_back(next);
            }
        }
        while (!queue.empty()) {
            std::int32_t u = queue.front();
            queue.pop_front();
            Node& nu = nodes_[static_cast<std::size_t>(u)];
            nu.best = std::min(nu.best, nodes_[static_cast<std::size_t>(nu.fail)].best);
            for (int c = 0; c < 256; ++c) {
                std::int32_t v = nu.next[c];
                std::int32_t via_fail = nodes_[static_cast<std::size_t>(nu.fail)].next[c];
                if (v == -1) {
                    nu.next[c] = via_fail;
                } else {
                    nodes_[static_cast<std::size_t>(v)].fail = via_fail;
                    queue.push_back(v);
                }
            }
        }
    }

    std::int32_t best_match(std::string_view text) const {
        if (nodes_.empty()) return -1;  // never built
        std::int32_t state = 0;
        std::int32_t best = kNoMatch;
        for (unsigned char c : text) {
            state = nodes_[static_cast<std::size_t>(state)].next[c];
            best = std::min(best, nodes_[static_cast<std::size_t>(state)].best);
        }
        return best == kNoMatch ? -1 : best;
    }

private:
    static constexpr std::int32_t kNoMatch = std::numeric_limits<std::int32_t>::max();

    struct Node {
        std::array<std::int32_t, 256> next;
        std::int32_t fail = 0;
        std::int32_t best = kNoMatch;
        Node() { next.fill(-1); }
    };
    std::vector<Node> nodes_;
};

namespace detail {

inline std::string remove_spaces(std::string_view term) {
    std::string out;
    out.reserve(term.size());
    for (char c : term)
        if (c != ' ') out.push_back(c);
    return out;
}

// Case-variant expansion. URLs carry no spaces and websites mix casing, so
// each source term becomes a small set of literal, match-ready strings:
//   - the term as written, plus its all-lowercase form
//   - multiword terms additionally with spaces removed (both casings)
//   - all-lowercase source words additionally Capitalized (sport -> Sport)
//   - dotted terms (SI.com) lowercase-only, to keep the uppercase stem from
//     matching inside unrelated tokens
inline void expand_term(std::string_view term, std::set<std::string>& out) {
    if (term.find('.') != std::string_view::npos) {
        out.insert(to_lower_ascii(term));
        return;
    }
    std::string original(term);
    std::string lower = to_lower_ascii(term);
    out.insert(original);
    out.insert(lower);
    if (term.find(' ') != std::string_view::npos) {
        out.insert(remove_spaces(original));
        out.insert(remove_spaces(lower));
    }
    if (original == lower) {
        std::string capitalized = lower;
        if (capitalized[0] >= 'a' && capitalized[0] <= 'z')
            capitalized[0] = static_cast<char>(capitalized[0] - 'a' + 'A');
        out.insert(capitalized);
    }
}

}  // namespace detail

// Immutable keyword set: expanded literal terms in deterministic match order
// (longest first, then lexicographic) plus the source groups they came from.
class KeywordSet {
public:
    static KeywordSet from_groups(
        std::vector<std::pair<std::string, std::vector<std::string>>> groups) {
        KeywordSet ks;
        std::set<std::string> expanded;
        for (auto& [name, terms] : groups) {
            for (const auto& term : terms) {
                if (trim_view(term).empty())
                    throw Error("data", "empty keyword term in group \"" + name + "\"");
                if (term.size() > 1 && term[0] == '=')
                    expanded.insert(term.substr(1));  // '=' marks an exact, unexpanded term
                else
                    detail::expand_term(term, expanded);
            }
            ks.source_groups_[name] = std::move(terms);
        }
        if (expanded.empty()) throw Error("data", "keyword set is empty");
        ks.terms_.assign(expanded.begin(), expanded.end());
        std::sort(ks.terms_.begin(), ks.terms_.end(), [](const auto& a, const auto& b) {
            if (a.size() != b.size()) return a.size() > b.size();
            return a < b;
        });
        ks.matcher_.build(ks.terms_);
        return ks;
    }

    const std::vector<std::string>& terms() const { return terms_; }
    const std::map<std::string, std::vector<std::string>>& source_groups() const {
        return source_groups_;
    }

    // Highest-priority expanded term occurring as a case-sensitive substring.
    std::optional<std::string_view> match(std::string_view url) const {
        std::int32_t idx = matcher_.best_match(url);
        if (idx < 0) return std::nullopt;
        return std::string_view(terms_[static_cast<std::size_t>(idx)]);
    }

private:
    std::vector<std::string> terms_;
    std::map<std::string, std::vector<std::string>> source_groups_;
    AhoCorasick matcher_;
};

// The built-in keyword groups: general sports terms, major leagues and
// organizations, and sports events/brands/media.
inline KeywordSet build_default_keywords() {
    return KeywordSet::from_groups({
        {"general",
         {"sport", "athletic", "athlete", "fitness", "workout", "gym", "league", "team",
          "champion", "football", "soccer", "basketball", "baseball", "tennis", "cricket",
          "rugby", "golf", "volleyball", "hockey", "cycling", "swimming", "wrestling",
          "running", "boxing", "racing", "swim", "goal"}},
        {"leagues",
         {"NFL", "NBA", "MLB", "NHL", "FIFA", "UEFA", "NCAA", "MMA", "UFC", "WWE",
          "Premier League", "LaLiga", "Bundesliga", "SerieA", "Ligue1", "EPL", "NASCAR",
          "MotoGP", "Formula1", "F1"}},
        {"events-brands-media",
         {"Olympic", "cup", "playoff", "marathon", "copa", "Nike", "Adidas", "ESPN",
          "BleacherReport", "SI.com", "news"}},
    });
}

// Keyword config file: one term per line, '#' starts a comment. Two
// directives: `# group: <name>` switches the target group, and a leading
// '=' makes a term exact (no case-variant expansion).
inline KeywordSet load_keywords_file(const std::string& path) {
    std::string content = read_text_file(path);
    std::vector<std::pair<std::string, std::vector<std::string>>> groups;
    std::string current = "custom";
    auto group_terms = [&](const std::string& name) -> std::vector<std::string>& {
        for (auto& [n, terms] : groups)
            if (n == name) return terms;
        groups.emplace_back(name, std::vector<std::string>{});
        return groups.back().second;
    };
    std::size_t start = 0;
    while (start <= content.size()) {
        std::size_t end = content.find('\n', start);
        if (end == std::string::npos) end = content.size();
        std::string_view line = trim_view(std::string_view(content).substr(start, end - start));
        start = end + 1;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string_view rest = trim_view(line.substr(1));
            if (rest.rfind("group:", 0) == 0)
                current = std::string(trim_view(rest.substr(6)));
            continue;
        }
        group_terms(current).emplace_back(line);
    }
    try {
        return KeywordSet::from_groups(std::move(groups));
    } catch (const Error& e) {
        throw Error(e.kind(), path + ": " + e.what());
    }
}

// "default" resolves to the built-in set, anything else is a file path.
inline KeywordSet load_keywords(const std::string& ref) {
    if (ref.empty() || ref == "default") return build_default_keywords();
    return load_keywords_file(ref);
}

inline std::optional<std::string_view> url_matches(std::string_view url, const KeywordSet& ks) {
    return ks.match(url);
}

// URL-stage filter over in-memory records; preserves input order. The
// returned stats treat this as a standalone stage (n_kept == n_url_pass).
inline std::pair<std::vector<corpus::WebRecord>, corpus::ShardStats> filter_shard(
    std::span<const corpus::WebRecord> records, const KeywordSet& ks) {
    std::vector<corpus::WebRecord> kept;
    corpus::ShardStats stats;
    for (const auto& r : records) {
        ++stats.n_in;
        if (ks.match(r.url)) kept.push_back(r);
    }
    stats.n_url_pass = kept.size();
    stats.n_kept = kept.size();
    return {std::move(kept), stats};
}

}  // namespace sportscorpus::urlfilter
