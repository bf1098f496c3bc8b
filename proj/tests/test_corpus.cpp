// SPDX-License-Identifier: Apache-2.0
#include <cctype>

#include "cad/corpus.hpp"
#include "cad/errors.hpp"
#include "cad/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cad::corpus;
using Tokens = std::vector<std::string>;

namespace {

std::string join(const Tokens& t) {
  std::string s;
  for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
  return s;
}

}  // namespace

TEST_CASE("label codes are fixed") {
  CHECK(code(EmotionLabel::Neutral) == 0);
  CHECK(code(EmotionLabel::NonNeutral) == 7);
  for (std::size_t c = 0; c < kNumLabels; ++c) CHECK(parse_label(label_name(label_from_code(c))) == label_from_code(c));
  CHECK(parse_label("Non-Neutral") == EmotionLabel::NonNeutral);
  CHECK(parse_label("ANGER") == EmotionLabel::Anger);
  CHECK_THROWS_AS(parse_label("happiness"), cad::DataError);
}

TEST_CASE("normalize_text examples") {
  CHECK(normalize_text("Good job Joe! Well done!") == Tokens{"good", "job", "joe", "!", "well", "done", "!"});
  CHECK(normalize_text("").empty());
  CHECK(normalize_text("There was no kangaroo!") == Tokens{"there", "was", "no", "kangaroo", "!"});
}

TEST_CASE("normalize_text edge cases") {
  CHECK(normalize_text("Oh no-no-no, give me some specifics.") == Tokens{"oh", "nonono", "give", "me", "some", "specifics"});
  CHECK(normalize_text("You fell asleep!!") == Tokens{"you", "fell", "asleep", "!", "!"});
  CHECK(normalize_text("what?!") == Tokens{"what", "?", "!"});
  CHECK(normalize_text("don't  \n\t stop") == Tokens{"dont", "stop"});
  CHECK(normalize_text("great :) see you :D <3 ;) :-(") == Tokens{"great", "see", "you"});
  CHECK(normalize_text("lol haha") == Tokens{"lol", "haha"});
  CHECK(normalize_text("... -- ,,,").empty());
  // Curly quotes and ellipsis (UTF-8) are punctuation too.
  CHECK(normalize_text("\xE2\x80\x9CWell\xE2\x80\xA6\xE2\x80\x9D") == Tokens{"well"});
  // Letters outside ASCII are kept.
  CHECK(normalize_text("Caf\xC3\xA9") == Tokens{"caf\xC3\xA9"});
}

TEST_CASE("property: normalization is idempotent and punctuation-free") {
  const std::string alphabet = "aBcZ09 !?.,;:'\"-()\n\t:)<3@#$%^&*_+=[]{}|\\/~`";
  cad::Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string raw;
    std::size_t len = rng() % 40;
    for (std::size_t i = 0; i < len; ++i) raw += alphabet[rng() % alphabet.size()];
    Tokens once = normalize_text(raw);
    CHECK(normalize_text(join(once)) == once);
    for (const auto& tok : once)
      for (unsigned char c : tok) {
        CHECK_FALSE(std::isupper(c));
        if (std::ispunct(c)) CHECK((c == '!' || c == '?'));
        if (c == '!' || c == '?') CHECK(tok.size() == 1);
      }
  }
}

TEST_CASE("empty-after-normalization utterances keep their position") {
  Utterance u = make_utterance("Joey", ":) ...", 3);
  CHECK(u.empty_after_normalization);
  CHECK(u.tokens == Tokens{"<unk>"});
  CHECK(u.index_in_dialogue == 3);
}

TEST_CASE("pad_or_truncate") {
  Tokens fifty(50, "w");
  auto same = pad_or_truncate(fifty, 50);
  CHECK(same.tokens == fifty);
  CHECK(same.valid_len == 50);

  auto short3 = pad_or_truncate(Tokens{"a", "b", "c"}, 50);
  CHECK(short3.valid_len == 3);
  REQUIRE(short3.tokens.size() == 50);
  CHECK(short3.tokens[2] == "c");
  for (std::size_t i = 3; i < 50; ++i) CHECK(short3.tokens[i] == "<pad>");

  Tokens sixty_one;
  for (int i = 0; i < 61; ++i) sixty_one.push_back("t" + std::to_string(i));
  auto cut = pad_or_truncate(sixty_one, 50);
  CHECK(cut.valid_len == 50);
  CHECK(cut.tokens.front() == "t0");
  CHECK(cut.tokens.back() == "t49");

  CHECK_THROWS_AS(pad_or_truncate(fifty, 0), cad::ConfigError);
}

TEST_CASE("load_corpus on a single synthetic file") {
  cad::testing::TempDir dir;
  cad::testing::write_file(dir / "tiny.json", R"([[{"speaker":"A","utterance":"Hi there!","emotion":"joy"},
                                                {"speaker":"B","utterance":"Go away.","emotion":"Anger"}]])");
  Corpus c = load_corpus(dir / "tiny.json");
  REQUIRE(c.size() == 1);
  const auto& split = c.at(SplitName::Train);
  CHECK(split.dialogues.size() == 1);
  CHECK(split.utterance_count() == 2);
  CHECK(split.dialogues[0].id == "train-0");
  CHECK(split.dialogues[0].utterances[1].gold == EmotionLabel::Anger);
  CHECK(split.dialogues[0].utterances[1].index_in_dialogue == 1);
  auto h = split.histogram();
  CHECK(h[code(EmotionLabel::Joy)] == 1);
  CHECK(h[code(EmotionLabel::Anger)] == 1);
}

TEST_CASE("load_corpus on a directory picks splits by filename") {
  cad::testing::TempDir dir;
  const std::string one = R"([[{"speaker":"A","utterance":"x","emotion":"neutral"}]])";
  cad::testing::write_file(dir / "friends_train.json", one);
  cad::testing::write_file(dir / "friends_dev.json", one);
  cad::testing::write_file(dir / "friends_test.json", one);
  cad::testing::write_file(dir / "notes.txt", "ignored");
  Corpus c = load_corpus(dir.path());
  CHECK(c.size() == 3);
  CHECK(c.at(SplitName::Validation).dialogues[0].id == "validation-0");

  cad::testing::write_file(dir / "more_train.json", one);
  CHECK_THROWS_AS(load_corpus(dir.path()), cad::DataError);
}

TEST_CASE("load_corpus errors name the location") {
  cad::testing::TempDir dir;
  auto expect_error = [&](const std::string& body, const std::string& needle) {
    cad::testing::write_file(dir / "train.json", body);
    try {
      load_corpus(dir / "train.json");
      FAIL("expected DataError");
    } catch (const cad::DataError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
  };
  expect_error(R"([[{"speaker":"A","utterance":"x","emotion":"neutral"}],
                   [{"speaker":"A","utterance":"x","emotion":"neutral"},{"speaker":"B","emotion":"joy"}]])",
               "dialogue train-1, utterance 1");
  expect_error(R"([[{"speaker":"A","utterance":"x","emotion":"elated"}]])", "label error");
  expect_error(R"({"not":"an array"})", "array of dialogues");
  expect_error(R"([[]])", "no utterances");
  expect_error("[[{", "invalid JSON");
  CHECK_THROWS_AS(load_corpus(dir / "missing.json"), cad::DataError);
}

TEST_CASE("property: serialize then load round-trips synthetic corpora") {
  cad::Rng rng(8);
  const Tokens words = {"Hey", "what", "kangaroo!", "no-no", "Really?", "ok", ":)", "Joe's", "caf\xC3\xA9", "\"quoted\""};
  cad::testing::TempDir dir;
  for (int trial = 0; trial < 20; ++trial) {
    DatasetSplit split;
    std::size_t nd = 1 + rng() % 4;
    for (std::size_t d = 0; d < nd; ++d) {
      Dialogue dlg;
      dlg.id = "train-" + std::to_string(d);
      std::size_t nu = 1 + rng() % 5;
      for (std::size_t i = 0; i < nu; ++i) {
        std::string text;
        for (std::size_t w = rng() % 6; w > 0; --w) text += words[rng() % words.size()] + " ";
        Utterance u = make_utterance("S" + std::to_string(rng() % 3), text, i);
        u.gold = label_from_code(rng() % kNumLabels);
        dlg.utterances.push_back(u);
      }
      split.dialogues.push_back(dlg);
    }
    cad::testing::write_file(dir / "train.json", serialize_split(split).dump());
    Corpus loaded = load_corpus(dir / "train.json");
    const auto& back = loaded.at(SplitName::Train);
    REQUIRE(back.dialogues.size() == split.dialogues.size());
    for (std::size_t d = 0; d < nd; ++d) {
      const auto& a = split.dialogues[d];
      const auto& b = back.dialogues[d];
      CHECK(a.id == b.id);
      REQUIRE(a.utterances.size() == b.utterances.size());
      for (std::size_t i = 0; i < a.utterances.size(); ++i) {
        CHECK(a.utterances[i].speaker == b.utterances[i].speaker);
        CHECK(a.utterances[i].raw_text == b.utterances[i].raw_text);
        CHECK(a.utterances[i].tokens == b.utterances[i].tokens);
        CHECK(a.utterances[i].gold == b.utterances[i].gold);
        CHECK(a.utterances[i].empty_after_normalization == b.utterances[i].empty_after_normalization);
      }
    }
  }
}
