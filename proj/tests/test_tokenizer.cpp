#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <optional>
#include <random>
#include <set>

#include "sportscorpus/tokenizer.hpp"
#include "test_util.hpp"

using namespace sportscorpus;
using tokenizer::VocabEntry;
using tokenizer::Vocabulary;

namespace {

// Oracle: at each position scan every entry for the longest matching prefix.
// Greedy matching can dead-end on inputs that are coverable by some other
// segmentation; the oracle reports the stuck offset the same way encode does.
struct NaiveResult {
    std::vector<std::uint32_t> ids;
    std::optional<std::size_t> stuck_at;
};

NaiveResult encode_naive(std::string_view input, const std::vector<VocabEntry>& entries) {
    NaiveResult result;
    std::size_t pos = 0;
    while (pos < input.size()) {
        const VocabEntry* best = nullptr;
        for (const auto& e : entries) {
            if (e.bytes.size() > input.size() - pos) continue;
            if (input.compare(pos, e.bytes.size(), e.bytes) != 0) continue;
            if (!best || e.bytes.size() > best->bytes.size()) best = &e;
        }
        if (!best) {
            result.stuck_at = pos;
            return result;
        }
        result.ids.push_back(best->id);
        pos += best->bytes.size();
    }
    return result;
}

std::vector<VocabEntry> random_vocab(std::mt19937_64& rng, std::size_t max_entries) {
    std::set<std::string> seen;
    std::vector<VocabEntry> entries;
    std::size_t n = 2 + random_below(rng, max_entries - 1);
    std::uint32_t id = 0;
    while (entries.size() < n) {
        std::size_t len = 1 + random_below(rng, 5);
        std::string bytes;
        for (std::size_t i = 0; i < len; ++i)
            bytes.push_back(static_cast<char>('a' + random_below(rng, 4)));
        if (!seen.insert(bytes).second) continue;
        entries.push_back({id++, bytes});
    }
    return entries;
}

}  // namespace

TEST_CASE("vocabulary files load with trie and byte-complete flag") {
    auto vocab = tokenizer::load_vocabulary(testutil::fixture_path("vocab_small.txt"));
    CHECK(vocab.entries().size() == 6);
    CHECK_FALSE(vocab.byte_complete());
    REQUIRE(vocab.bytes_for(3) != nullptr);
    CHECK(*vocab.bytes_for(3) == "abc");

    testutil::TempDir dir("vocab");
    SUBCASE("duplicate token bytes name both ids") {
        write_text_file(dir.file("dup.txt"), "0\tab\n1\tcd\n2\tab\n");
        try {
            tokenizer::load_vocabulary(dir.file("dup.txt"));
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("0") != std::string::npos);
            CHECK(std::string(e.what()).find("2") != std::string::npos);
        }
    }
    SUBCASE("duplicate id is rejected") {
        write_text_file(dir.file("dupid.txt"), "0\tab\n0\tcd\n");
        CHECK_THROWS_AS(tokenizer::load_vocabulary(dir.file("dupid.txt")), Error);
    }
    SUBCASE("empty token is rejected") {
        write_text_file(dir.file("empty.txt"), "0\t\n");
        CHECK_THROWS_AS(tokenizer::load_vocabulary(dir.file("empty.txt")), Error);
    }
    SUBCASE("malformed line is rejected with its number") {
        write_text_file(dir.file("bad.txt"), "0\ta\nnot-a-line\n");
        CHECK_THROWS_WITH_AS(tokenizer::load_vocabulary(dir.file("bad.txt")),
                             doctest::Contains("line 2"), Error);
    }
    SUBCASE("byte-complete vocabulary sets the flag") {
        std::vector<VocabEntry> entries;
        for (int b = 0; b < 256; ++b)
            entries.push_back({static_cast<std::uint32_t>(b), std::string(1, static_cast<char>(b))});
        auto complete = Vocabulary::from_entries(entries);
        CHECK(complete.byte_complete());
    }
}

TEST_CASE("vocabulary save/load round-trips byte-exactly") {
    std::vector<VocabEntry> entries = {
        {0, "plain"},
        {7, std::string("\x00\x01\xff", 3)},
        {9, "tab\there"},
        {12, "back\\slash"},
        {100000, "new\nline\r"},
    };
    auto vocab = Vocabulary::from_entries(entries);
    testutil::TempDir dir("vocab");
    tokenizer::save_vocabulary(vocab, dir.file("v.txt"));
    auto back = tokenizer::load_vocabulary(dir.file("v.txt"));
    REQUIRE(back.entries().size() == entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        CHECK(back.entries()[i].id == entries[i].id);
        CHECK(back.entries()[i].bytes == entries[i].bytes);
    }
}

TEST_CASE("escape round-trips arbitrary byte strings") {
    std::mt19937_64 rng(11);
    for (int round = 0; round < 500; ++round) {
        std::string bytes;
        std::size_t len = random_below(rng, 24);
        for (std::size_t i = 0; i < len; ++i)
            bytes.push_back(static_cast<char>(random_below(rng, 256)));
        std::string escaped = tokenizer::escape_bytes(bytes);
        CHECK(escaped.find('\t') == std::string::npos);
        CHECK(escaped.find('\n') == std::string::npos);
        CHECK(tokenizer::unescape_bytes(escaped) == bytes);
    }
    CHECK_THROWS_AS(tokenizer::unescape_bytes("dangling\\"), Error);
    CHECK_THROWS_AS(tokenizer::unescape_bytes("\\xZ1"), Error);
    CHECK_THROWS_AS(tokenizer::unescape_bytes("\\q"), Error);
}

TEST_CASE("greedy encoding takes the longest match at every position") {
    auto vocab = Vocabulary::from_entries({{1, "a"}, {2, "b"}, {3, "ab"}, {4, "abc"}});
    CHECK(tokenizer::encode("abab", vocab) == std::vector<std::uint32_t>{3, 3});
    CHECK(tokenizer::encode("abcab", vocab) == std::vector<std::uint32_t>{4, 3});
    CHECK(tokenizer::encode("", vocab).empty());

    SUBCASE("uncoverable input reports the byte offset") {
        auto only_a = Vocabulary::from_entries({{1, "a"}});
        try {
            tokenizer::encode("ba", only_a);
            FAIL("expected an error");
        } catch (const tokenizer::EncodeError& e) {
            CHECK(e.offset() == 0);
        }
        try {
            tokenizer::encode("aaxb", only_a);
            FAIL("expected an error");
        } catch (const tokenizer::EncodeError& e) {
            CHECK(e.offset() == 2);
        }
    }
}

TEST_CASE("encode agrees with the naive longest-scan oracle") {
    std::mt19937_64 rng(17);
    int dead_ends = 0;
    for (int round = 0; round < 300; ++round) {
        auto entries = random_vocab(rng, 24);
        auto vocab = Vocabulary::from_entries(entries);
        std::string input;
        std::size_t pieces = random_below(rng, 30);
        for (std::size_t i = 0; i < pieces; ++i)
            input += entries[random_below(rng, entries.size())].bytes;
        auto expected = encode_naive(input, entries);
        if (expected.stuck_at) {
            ++dead_ends;
            try {
                tokenizer::encode(input, vocab);
                FAIL("expected a dead-end at offset ", *expected.stuck_at);
            } catch (const tokenizer::EncodeError& e) {
                CHECK(e.offset() == *expected.stuck_at);
            }
        } else {
            CHECK(tokenizer::encode(input, vocab) == expected.ids);
        }
    }
    // both behaviors should actually be exercised
    CHECK(dead_ends > 0);
    CHECK(dead_ends < 300);
}

TEST_CASE("byte-complete vocabularies round-trip arbitrary input") {
    std::mt19937_64 rng(23);
    std::vector<VocabEntry> entries;
    for (int b = 0; b < 256; ++b)
        entries.push_back({static_cast<std::uint32_t>(b), std::string(1, static_cast<char>(b))});
    std::uint32_t id = 256;
    entries.push_back({id++, "the "});
    entries.push_back({id++, "them"});
    entries.push_back({id++, " athlete"});
    entries.push_back({id++, "\xe2\x9a\xbd"});
    auto vocab = Vocabulary::from_entries(entries);
    REQUIRE(vocab.byte_complete());
    for (int round = 0; round < 300; ++round) {
        std::string input;
        std::size_t len = random_below(rng, 200);
        for (std::size_t i = 0; i < len; ++i)
            input.push_back(static_cast<char>(random_below(rng, 256)));
        auto ids = tokenizer::encode(input, vocab);
        CHECK(tokenizer::decode(ids, vocab) == input);
    }
}

TEST_CASE("token shards round-trip with the fixed binary layout") {
    testutil::TempDir dir("tok");
    std::vector<std::uint32_t> ids = {0, 1, 65535, 4294967295u, 7};
    tokenizer::write_token_shard(ids, dir.file("a.otok"));
    auto shard = tokenizer::read_token_shard(dir.file("a.otok"));
    CHECK(shard.version == tokenizer::kTokenShardVersion);
    CHECK(shard.count == ids.size());
    CHECK(shard.ids == ids);

    std::string raw = read_text_file(dir.file("a.otok"));
    CHECK(raw.substr(0, 4) == "OTOK");
    CHECK(raw.size() == 16 + 4 * ids.size());
    // count field is little-endian at offset 8
    CHECK(static_cast<unsigned char>(raw[8]) == ids.size());
    CHECK(static_cast<unsigned char>(raw[9]) == 0);

    SUBCASE("corrupt count field is an error") {
        raw[8] = 9;  // header says 9 ids, payload has 5
        write_text_file(dir.file("bad.otok"), raw);
        CHECK_THROWS_WITH_AS(tokenizer::read_token_shard(dir.file("bad.otok")),
                             doctest::Contains("corrupt"), Error);
    }
    SUBCASE("bad magic is an error") {
        raw[0] = 'X';
        write_text_file(dir.file("magic.otok"), raw);
        CHECK_THROWS_AS(tokenizer::read_token_shard(dir.file("magic.otok")), Error);
    }
}

TEST_CASE("count_tokens sums shard counts and checks consistency") {
    using tokenizer::TokenShard;
    std::vector<TokenShard> shards;
    shards.push_back(TokenShard::from_ids({1, 2, 3}));
    shards.push_back(TokenShard::from_ids({4, 5, 6, 7, 8}));
    CHECK(tokenizer::count_tokens(shards) == 8);
    CHECK(tokenizer::count_tokens({}) == 0);

    TokenShard corrupt = TokenShard::from_ids({1, 2, 3});
    corrupt.count = 5;
    shards.push_back(corrupt);
    CHECK_THROWS_AS(tokenizer::count_tokens(shards), Error);

    SUBCASE("file-level counting without payload loads") {
        testutil::TempDir dir("tok");
        tokenizer::write_token_shard(std::vector<std::uint32_t>{1, 2, 3}, dir.file("a.otok"));
        tokenizer::write_token_shard(std::vector<std::uint32_t>{9, 9, 9, 9, 9},
                                     dir.file("b.otok"));
        std::vector<std::string> paths = {dir.file("a.otok"), dir.file("b.otok")};
        CHECK(tokenizer::count_token_files(paths) == 8);
    }
}
