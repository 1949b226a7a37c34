#pragma once
#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sportscorpus {

// Error with a short, machine-greppable kind tag ("io", "format", "data",
// "config", "protocol"). The CLI prints it as `error: <kind>: <message>`.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// ---- hashing ----

inline constexpr std::uint64_t kFnv64Offset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnv64Prime = 1099511628211ull;

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = kFnv64Offset) {
    for (unsigned char c : data) {
        h ^= c;
        h *= kFnv64Prime;
    }
    return h;
}

// ---- deterministic randomness ----
// std::uniform_*_distribution and std::shuffle are implementation-defined;
// these helpers pin the exact draw sequence so results are bit-identical
// across platforms for a given mt19937_64 state.

inline double random_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;  // 53 random bits in [0,1)
}

inline std::uint64_t random_below(std::mt19937_64& rng, std::uint64_t n) {
    if (n == 0) throw Error("data", "random_below: n must be positive");
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = rng();
    while (v >= limit) v = rng();  // rejection keeps the draw unbiased
    return v % n;
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(random_below(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

// ---- utf-8 ----

// Decodes one UTF-8 character; returns bytes consumed. Invalid sequences
// fall back to a single byte so arbitrary input never stalls.
inline std::size_t decode_utf8(std::string_view s, std::size_t pos, std::uint32_t& cp) {
    const auto b = [&](std::size_t i) { return static_cast<std::uint8_t>(s[i]); };
    std::uint8_t c0 = b(pos);
    if (c0 < 0x80) { cp = c0; return 1; }
    if ((c0 >> 5) == 0x6 && pos + 1 < s.size()) {
        cp = (static_cast<std::uint32_t>(c0 & 0x1F) << 6) | (b(pos + 1) & 0x3F);
        return 2;
    }
    if ((c0 >> 4) == 0xE && pos + 2 < s.size()) {
        cp = (static_cast<std::uint32_t>(c0 & 0x0F) << 12) |
             (static_cast<std::uint32_t>(b(pos + 1) & 0x3F) << 6) | (b(pos + 2) & 0x3F);
        return 3;
    }
    if ((c0 >> 3) == 0x1E && pos + 3 < s.size()) {
        cp = (static_cast<std::uint32_t>(c0 & 0x07) << 18) |
             (static_cast<std::uint32_t>(b(pos + 1) & 0x3F) << 12) |
             (static_cast<std::uint32_t>(b(pos + 2) & 0x3F) << 6) | (b(pos + 3) & 0x3F);
        return 4;
    }
    cp = c0;
    return 1;
}

inline bool is_unicode_space(std::uint32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
        case 0x20: case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// ---- small string/file helpers ----

inline std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

inline std::string_view trim_view(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
    return s.substr(b, e - b);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw Error("io", "read failed for " + path);
    return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot open " + path + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("io", "write failed for " + path);
}

}  // namespace sportscorpus
