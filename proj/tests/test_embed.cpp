// SPDX-License-Identifier: Apache-2.0
#include <unordered_set>

#include "cad/embed.hpp"
#include "cad/errors.hpp"
#include "cad/log.hpp"
#include "cad/numkit/ops.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cad;
using namespace cad::embed;
using cad::numkit::Graph;
using cad::numkit::Tensor;

namespace {

corpus::DatasetSplit split_of(std::vector<std::vector<std::string>> texts) {
  corpus::DatasetSplit s;
  std::size_t d = 0;
  for (const auto& dialogue : texts) {
    corpus::Dialogue dlg;
    dlg.id = "train-" + std::to_string(d++);
    for (std::size_t i = 0; i < dialogue.size(); ++i) dlg.utterances.push_back(corpus::make_utterance("A", dialogue[i], i));
    s.dialogues.push_back(dlg);
  }
  return s;
}

struct QuietLogs {
  QuietLogs() { log::set_level(log::Level::Error); }
  ~QuietLogs() { log::set_level(log::Level::Info); }
};

}  // namespace

TEST_CASE("build_vocab") {
  Vocabulary v = build_vocab(split_of({{"a b a"}}));
  CHECK(v.size() == 4);
  CHECK(v.token(0) == "<pad>");
  CHECK(v.token(1) == "<unk>");
  CHECK(v.token(2) == "a");
  CHECK(v.token(3) == "b");
  CHECK(v.index("only-in-test") == Vocabulary::kUnk);
  CHECK_THROWS_AS(build_vocab(corpus::DatasetSplit{}), ConfigError);
}

TEST_CASE("build_vocab size equals an independent distinct-token recount and ignores order") {
  auto texts = std::vector<std::vector<std::string>>{
      {"Hey, Joey!", "What's up?", "nothing much"}, {"The kangaroo!", "there was no kangaroo"}, {":)", "Hey hey"}};
  auto split = split_of(texts);
  std::unordered_set<std::string> recount;
  for (const auto& d : split.dialogues)
    for (const auto& u : d.utterances) recount.insert(u.tokens.begin(), u.tokens.end());
  recount.erase("<unk>");  // the empty utterance maps to the reserved token
  Vocabulary v = build_vocab(split);
  CHECK(v.size() == recount.size() + 2);

  std::reverse(texts.begin(), texts.end());
  CHECK(build_vocab(split_of(texts)).tokens() == v.tokens());
}

TEST_CASE("Vocabulary::from_tokens validates reserved entries") {
  CHECK_THROWS_AS(Vocabulary::from_tokens({"a", "<unk>"}), DataError);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"<pad>", "<unk>", "x", "x"}), DataError);
  CHECK(Vocabulary::from_tokens({"<pad>", "<unk>", "x"}).index("x") == 2);
}

TEST_CASE("load_word_vectors") {
  testing::TempDir dir;
  Vocabulary v = build_vocab(split_of({{"a b c"}}));
  SUBCASE("partial coverage keeps file values exactly") {
    testing::write_file(dir / "vec.txt", "a 0.5 -1.25 3\nzzz 1 1 1\nc 1e-3 2 -0.0625\n");
    Rng rng(1);
    auto t = load_word_vectors(dir / "vec.txt", v, 3, rng);
    CHECK(t.covered == 2);
    CHECK(t.coverage == doctest::Approx(2.0 / 3.0));
    CHECK(t.matrix.row(v.index("a"))[1] == -1.25);
    CHECK(t.matrix.row(v.index("c"))[0] == 1e-3);
    for (double x : t.matrix.row(0)) CHECK(x == 0.0);
    for (double x : t.matrix.row(v.index("b"))) CHECK((x >= -0.05 && x < 0.05));
  }
  SUBCASE("full coverage") {
    testing::write_file(dir / "vec.txt", "3 2\na 1 2\nb 3 4\nc 5 6\n");
    Rng rng(1);
    CHECK(load_word_vectors(dir / "vec.txt", v, 2, rng).coverage == 1.0);
  }
  SUBCASE("empty file") {
    testing::write_file(dir / "vec.txt", "");
    Rng rng(1);
    auto t = load_word_vectors(dir / "vec.txt", v, 4, rng);
    CHECK(t.coverage == 0.0);
    for (std::size_t r = 1; r < v.size(); ++r) {
      bool nonzero = false;
      for (double x : t.matrix.row(r)) nonzero = nonzero || x != 0.0;
      CHECK(nonzero);
    }
  }
  SUBCASE("wrong width names the line") {
    testing::write_file(dir / "vec.txt", "a 1 2 3\nb 1 2\n");
    Rng rng(1);
    try {
      load_word_vectors(dir / "vec.txt", v, 3, rng);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }
  SUBCASE("same seed, same table") {
    testing::write_file(dir / "vec.txt", "a 1 2\n");
    Rng r1(5), r2(5);
    CHECK(numkit::bitwise_equal(load_word_vectors(dir / "vec.txt", v, 2, r1).matrix,
                                load_word_vectors(dir / "vec.txt", v, 2, r2).matrix));
  }
}

TEST_CASE("feature store loading") {
  testing::TempDir dir;
  testing::write_file(dir / "f.jsonl",
                      "{\"dialogue\":\"train-0\",\"utterance\":1,\"kind\":\"word\",\"token\":0,\"vector\":[1,2]}\n"
                      "\n"
                      "{\"dialogue\":\"train-0\",\"utterance\":1,\"kind\":\"utterance\",\"vector\":[3,4,5]}\n");
  FeatureStore s(2, 3);
  s.load(dir / "f.jsonl");
  CHECK(s.word_count() == 1);
  CHECK(s.utterance_count() == 1);
  REQUIRE(s.word("train-0", 1, 0));
  CHECK((*s.word("train-0", 1, 0))[1] == 2.0);
  CHECK(s.word("train-0", 1, 1) == nullptr);

  testing::write_file(dir / "bad.jsonl",
                      "{\"dialogue\":\"d\",\"utterance\":0,\"kind\":\"word\",\"token\":0,\"vector\":[1,2,3]}\n");
  try {
    s.load(dir / "bad.jsonl");
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("bad.jsonl:1") != std::string::npos);
  }
  testing::write_file(dir / "junk.jsonl", "{\"dialogue\":\"d\"}\n");
  CHECK_THROWS_AS(s.load(dir / "junk.jsonl"), DataError);
}

TEST_CASE("fuse_word_inputs") {
  QuietLogs quiet;
  Vocabulary v = build_vocab(split_of({{"good job"}}));
  corpus::Utterance u = corpus::make_utterance("A", "Good job", 0);
  auto enc = encode_utterance_tokens(u, "train-0", v, 50);
  CHECK(enc.valid_len == 2);

  Tensor table({v.size(), 300});
  for (std::size_t r = 1; r < v.size(); ++r)
    for (std::size_t c = 0; c < 300; ++c) table.at(r, c) = 0.001 * static_cast<double>(r * 1000 + c);

  SUBCASE("known vectors concatenate row by row") {
    FeatureStore store(1024, 2304);
    std::vector<double> ctx0(1024), ctx1(1024);
    for (std::size_t i = 0; i < 1024; ++i) {
      ctx0[i] = std::sin(static_cast<double>(i));
      ctx1[i] = std::cos(static_cast<double>(i));
    }
    store.add_word("train-0", 0, 0, ctx0);
    store.add_word("train-0", 0, 1, ctx1);
    Graph g;
    Tensor fused = fuse_word_inputs(g, g.constant(table), enc, store).value();
    REQUIRE(fused.shape() == numkit::Shape{50, 1324});
    for (std::size_t t = 0; t < 2; ++t) {
      auto row = fused.row(t);
      auto emb = table.row(enc.token_ids[t]);
      const auto& ctx = t == 0 ? ctx0 : ctx1;
      CHECK(std::equal(emb.begin(), emb.end(), row.begin()));
      CHECK(std::equal(ctx.begin(), ctx.end(), row.begin() + 300));
    }
    for (std::size_t t = 2; t < 50; ++t)
      for (double x : fused.row(t)) CHECK(x == 0.0);
  }
  SUBCASE("empty store falls back to zero context") {
    FeatureStore empty(1024, 2304);
    Graph g;
    Tensor fused = fuse_word_inputs(g, g.constant(table), enc, empty).value();
    REQUIRE(fused.shape() == numkit::Shape{50, 1324});
    for (std::size_t c = 300; c < 1324; ++c) CHECK(fused.at(0, c) == 0.0);
    CHECK(fused.at(0, 5) == table.at(enc.token_ids[0], 5));
  }
}

TEST_CASE("fuse_utterance_inputs") {
  QuietLogs quiet;
  Tensor zero_enc({300});
  std::vector<double> zero_feat(2304, 0.0);
  Tensor fused = fuse_utterance_values(zero_enc, zero_feat, 2304);
  CHECK(fused.shape() == numkit::Shape{2604});
  for (double x : fused.data()) CHECK(x == 0.0);

  CHECK_THROWS_AS(fuse_utterance_values(zero_enc, std::vector<double>(10), 2304), DimensionError);

  Tensor enc({300});
  for (std::size_t i = 0; i < 300; ++i) enc[i] = 0.5 * static_cast<double>(i);
  std::vector<double> feat(2304);
  for (std::size_t i = 0; i < 2304; ++i) feat[i] = -static_cast<double>(i);
  FeatureStore store(1024, 2304);
  store.add_utterance("d", 3, feat);
  Graph g;
  Tensor via_graph = fuse_utterance_inputs(g.constant(enc), "d", 3, store).value();
  CHECK(via_graph == fuse_utterance_values(enc, feat, 2304));
  CHECK(via_graph[299] == enc[299]);
  CHECK(via_graph[300 + 2303] == feat[2303]);

  Tensor missing = fuse_utterance_inputs(g.constant(enc), "d", 4, store).value();
  CHECK(missing.size() == 2604);
  for (std::size_t i = 300; i < 2604; ++i) CHECK(missing[i] == 0.0);
}
