// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "nail/errors.hpp"
#include "nail/random.hpp"
#include "nail/vocab.hpp"
#include "synthetic.hpp"

using namespace nail;
using nail::testing::TempDir;
using nail::testing::write_text;

namespace {

Vocabulary toy_vocab() { return Vocabulary::from_tokens({"<unk>", "a", "ab", "b"}); }

std::vector<std::uint32_t> ids_of(const TokenSequence& seq) {
  std::vector<std::uint32_t> out;
  for (auto id : seq.ids) out.push_back(id.value);
  return out;
}

// Reference segmentation: at each position scan the whole vocabulary for the
// longest entry that matches; input is already lowercase ASCII without spaces.
std::vector<std::uint32_t> brute_force_segment(const std::string& word,
                                               const std::vector<std::string>& tokens) {
  std::vector<std::uint32_t> out;
  std::size_t pos = 0;
  while (pos < word.size()) {
    std::size_t best_len = 0;
    std::uint32_t best = 0;
    for (std::uint32_t i = 1; i < tokens.size(); ++i) {
      const auto& t = tokens[i];
      if (t.size() > best_len && word.compare(pos, t.size(), t) == 0) {
        best_len = t.size();
        best = i;
      }
    }
    out.push_back(best);
    pos += best_len == 0 ? 1 : best_len;
  }
  return out;
}

}  // namespace

TEST_CASE("load_vocabulary assigns ids in file order") {
  TempDir dir;
  write_text(dir / "v.txt", "<unk>\na\nab\nb\n");
  const auto vocab = Vocabulary::load(dir / "v.txt");
  CHECK(vocab.size() == 4);
  CHECK(vocab.id_of("ab").value == 2);
  CHECK(vocab.unk_id().value == 0);
  for (std::uint32_t i = 0; i < vocab.size(); ++i) CHECK(vocab.id_of(vocab.token(TokenId{i})).value == i);
}

TEST_CASE("load_vocabulary rejects duplicates and empty files") {
  TempDir dir;
  write_text(dir / "dup.txt", "<unk>\na\nb\na\n");
  try {
    Vocabulary::load(dir / "dup.txt");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }

  write_text(dir / "empty.txt", "");
  CHECK_THROWS_AS(Vocabulary::load(dir / "empty.txt"), FormatError);
  CHECK_THROWS_AS(Vocabulary::load(dir / "missing.txt"), FormatError);
}

TEST_CASE("load_vocabulary accepts CRLF line endings") {
  TempDir dir;
  write_text(dir / "v.txt", "<unk>\r\nfoo\r\n");
  const auto vocab = Vocabulary::load(dir / "v.txt");
  CHECK(vocab.id_of("foo").value == 1);
}

TEST_CASE("tokenize examples") {
  const auto vocab = toy_vocab();
  CHECK(ids_of(tokenize("ab", vocab)) == std::vector<std::uint32_t>{2});
  CHECK(ids_of(tokenize("ba", vocab)) == std::vector<std::uint32_t>{3, 1});
  CHECK(tokenize("", vocab).empty());
  CHECK(tokenize("   \t\n", vocab).empty());
  CHECK(ids_of(tokenize("AB a", vocab)) == std::vector<std::uint32_t>{2, 1});
  CHECK(ids_of(tokenize("abc", vocab)) == std::vector<std::uint32_t>{2, 0});
  CHECK(tokenize("ab", vocab).source_len == 2);
}

TEST_CASE("unmatched multi-byte characters emit a single UNK") {
  const auto vocab = toy_vocab();
  CHECK(ids_of(tokenize("a\xC3\xA9"
                        "b",
                        vocab)) == std::vector<std::uint32_t>{1, 0, 3});
}

TEST_CASE("the UNK string is never produced by segmentation") {
  const auto vocab = Vocabulary::from_tokens({"zz", "a"});
  CHECK(ids_of(tokenize("zz", vocab)) == std::vector<std::uint32_t>{0, 0});
  TokenId out;
  CHECK_FALSE(vocab.lookup("zz", out));
}

TEST_CASE("tokenize matches the brute-force greedy oracle") {
  std::mt19937_64 rng(7);
  const std::string alphabet = "abcd";
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> tokens{"<unk>"};
    std::set<std::string> seen;
    const auto n = 1 + uniform_index(rng, 12);
    while (tokens.size() < n + 1) {
      std::string t;
      const auto len = 1 + uniform_index(rng, 3);
      for (std::size_t i = 0; i < len; ++i) t += alphabet[uniform_index(rng, alphabet.size())];
      if (seen.insert(t).second) tokens.push_back(t);
    }
    const auto vocab = Vocabulary::from_tokens(tokens);

    std::string word;
    const auto len = uniform_index(rng, 12);
    for (std::size_t i = 0; i < len; ++i) word += alphabet[uniform_index(rng, alphabet.size())];

    const auto got = tokenize(word, vocab);
    CHECK(ids_of(got) == brute_force_segment(word, tokens));
    CHECK(ids_of(tokenize(word, vocab)) == ids_of(got));

    // No longer vocabulary entry matches where a token was emitted.
    std::size_t pos = 0;
    for (auto id : got.ids) {
      if (id == vocab.unk_id()) {
        ++pos;
        continue;
      }
      const auto& tok = vocab.token(id);
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        if (tokens[i].size() > tok.size()) CHECK(word.compare(pos, tokens[i].size(), tokens[i]) != 0);
      }
      pos += tok.size();
    }
  }
}

TEST_CASE("featurize_query counts occurrences and drops UNK") {
  const auto vocab = toy_vocab();
  auto qf = featurize_query("a b", vocab);
  REQUIRE(qf.size() == 2);
  CHECK(qf.entries()[0] == QueryFeature::Entry{TokenId{1}, 1.0});
  CHECK(qf.entries()[1] == QueryFeature::Entry{TokenId{3}, 1.0});

  qf = featurize_query("a a", vocab);
  REQUIRE(qf.size() == 1);
  CHECK(qf.entries()[0] == QueryFeature::Entry{TokenId{1}, 2.0});

  CHECK(featurize_query("", vocab).empty());
  CHECK(featurize_query("zzz", vocab).empty());

  qf = featurize_query("a a b", vocab, QueryWeighting::kBinary);
  CHECK(qf.total_weight() == 2.0);
}

TEST_CASE("feature weight sum equals the number of non-UNK tokens") {
  const auto vocab = toy_vocab();
  std::mt19937_64 rng(3);
  const std::string alphabet = "abz ";
  for (int trial = 0; trial < 100; ++trial) {
    std::string text;
    for (std::size_t i = 0; i < uniform_index(rng, 20); ++i) text += alphabet[uniform_index(rng, 4)];
    const auto seq = tokenize(text, vocab);
    std::size_t known = 0;
    for (auto id : seq.ids) known += id != vocab.unk_id();
    CHECK(featurize_query(text, vocab).total_weight() == static_cast<double>(known));
  }
}

TEST_CASE("checksum depends on tokens and order") {
  const auto a = Vocabulary::from_tokens({"<unk>", "a", "b"});
  const auto b = Vocabulary::from_tokens({"<unk>", "b", "a"});
  const auto c = Vocabulary::from_tokens({"<unk>", "a", "b"});
  CHECK(a.checksum() != b.checksum());
  CHECK(a.checksum() == c.checksum());
  Vocabulary copy = a;
  CHECK(copy.id_of("b").value == 2);
}
