#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "helpers.hpp"
#include "inferem/corpus.hpp"

using namespace inferem;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("tokenize lowercases and splits punctuation") {
  CHECK(tokenize("I am SAD.") == std::vector<std::string>{"i", "am", "sad", "."});
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \t ").empty());
  // Worked by hand: the apostrophe is ASCII punctuation, so it stands alone.
  CHECK(tokenize("don't go") == std::vector<std::string>{"don", "'", "t", "go"});
}

TEST_CASE("vocabulary reserves the first four ids") {
  Vocabulary v;
  CHECK(v.size() == 4);
  CHECK(v.token(kPad) == "<pad>");
  CHECK(v.token(kBos) == "<bos>");
  CHECK(v.token(kEos) == "<eos>");
  CHECK(v.token(kUnk) == "<unk>");
  CHECK(v.add("hello") == 4);
  CHECK(v.add("hello") == 4);
  CHECK(v.id("never-seen") == kUnk);
  CHECK(Vocabulary::is_reserved(kUnk));
  CHECK_FALSE(Vocabulary::is_reserved(4));
}

TEST_CASE("encode then decode reproduces in-vocabulary text") {
  Vocabulary v;
  const auto toks = tokenize("My dog, however, was happy!");
  for (const auto& t : toks) v.add(t);
  CHECK(v.decode(v.encode(toks)) == toks);
}

TEST_CASE("vocabulary file round trip keeps ids") {
  testing::TempDir dir("vocab");
  Vocabulary v;
  for (const char* t : {"b", "a", "c"}) v.add(t);
  v.save(dir.path() / "vocab.txt");
  const Vocabulary back = Vocabulary::load(dir.path() / "vocab.txt");
  REQUIRE(back.size() == v.size());
  for (int i = 0; i < static_cast<int>(v.size()); ++i) CHECK(back.token(i) == v.token(i));
}

TEST_CASE("intensity lookup defaults to zero") {
  KnowledgeBase kb;
  kb.set_intensity("joy", 0.83);
  CHECK(kb.intensity("joy") == 0.83);
  CHECK(kb.intensity("absent") == 0.0);
  CHECK(kb.intensity(".") == 0.0);
  CHECK_THROWS_AS(kb.set_intensity("x", 1.5), CorpusError);
  CHECK_THROWS_AS(kb.set_intensity("x", -0.1), CorpusError);
}

TEST_CASE("concept lookup sorts, breaks ties lexicographically and truncates") {
  KnowledgeBase kb(5);
  CHECK(kb.lookup_concepts("unknown").empty());
  kb.add_concept("sad", "unhappy", 0.9);
  const auto one = kb.lookup_concepts("sad");
  REQUIRE(one.size() == 1);
  CHECK(one[0].concept_word == "unhappy");
  CHECK(one[0].score == 0.9);

  for (int i = 0; i < 10; ++i) kb.add_concept("big", "c" + std::to_string(i), 0.1 * (i + 1) - 0.05);
  kb.add_concept("big", "a-tie", 0.95);  // same score as c9, sorts before it
  const auto top = kb.lookup_concepts("big");
  REQUIRE(top.size() == 5);
  CHECK(top[0].concept_word == "a-tie");
  CHECK(top[1].concept_word == "c9");
  CHECK(top[2].concept_word == "c8");
  CHECK(top[4].concept_word == "c6");
  for (std::size_t i = 1; i < top.size(); ++i) CHECK(top[i - 1].score >= top[i].score);
  CHECK_THROWS_AS(kb.add_concept("x", "y", 0.0), CorpusError);
  CHECK_THROWS_AS(kb.add_concept("x", "y", 1.01), CorpusError);
}

TEST_CASE("lexicon files round trip and report bad lines") {
  testing::TempDir dir("lex");
  KnowledgeBase kb(3);
  kb.set_intensity("joy", 0.25);
  kb.add_concept("joy", "delight", 0.5);
  kb.save_intensity(dir.path() / "intensity.tsv");
  kb.save_concepts(dir.path() / "concepts.tsv");
  const KnowledgeBase back = load_knowledge(dir.path(), 3);
  CHECK(back.intensity("joy") == 0.25);
  REQUIRE(back.lookup_concepts("joy").size() == 1);
  CHECK(back.lookup_concepts("joy")[0].score == 0.5);

  write_text(dir.path() / "bad.tsv", "ok\t0.5\nbroken line\n");
  KnowledgeBase bad;
  try {
    bad.load_intensity(dir.path() / "bad.tsv");
    FAIL("expected an error");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("3-row csv gives one dialogue with n = 2 and alternating roles") {
  testing::TempDir dir("csv");
  write_text(dir.path() / "toy.csv",
             "conv_id,utterance_idx,context,prompt,speaker_idx,utterance\n"
             "hit:1,1,sad,x,1,I lost my job_comma_ sadly.\n"
             "hit:1,2,sad,x,2,Oh no! What happened?\n"
             "hit:1,3,sad,x,1,They closed the office.\n");
  std::size_t dropped = 0;
  const auto ds = load_dialogue_csv(dir.path() / "toy.csv", &dropped);
  REQUIRE(ds.size() == 1);
  CHECK(dropped == 0);
  const RawDialogue& d = ds[0];
  CHECK(d.emotion == "sad");
  REQUIRE(d.utterances.size() == 2);
  CHECK(d.utterances[0].role == Role::speaker);
  CHECK(d.utterances[1].role == Role::listener);
  CHECK(d.utterances[0].tokens ==
        std::vector<std::string>{"i", "lost", "my", "job", ",", "sadly", "."});
  CHECK(d.response == std::vector<std::string>{"they", "closed", "the", "office", "."});
  CHECK(d.has_prediction_branch());
}

TEST_CASE("rows are ordered by utterance_idx and single-row conversations are dropped") {
  testing::TempDir dir("csv2");
  write_text(dir.path() / "t.csv",
             "conv_id,utterance_idx,context_emotion,utterance,speaker_idx\n"
             "a,2,joy,second,1\n"
             "b,1,sad,alone,0\n"
             "a,1,joy,first,0\n");
  std::size_t dropped = 0;
  const auto ds = load_dialogue_csv(dir.path() / "t.csv", &dropped);
  CHECK(dropped == 1);
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].utterances.size() == 1);
  CHECK(ds[0].utterances[0].tokens == std::vector<std::string>{"first"});
  CHECK(ds[0].response == std::vector<std::string>{"second"});
  CHECK_FALSE(ds[0].has_prediction_branch());
}

TEST_CASE("malformed rows and missing files are reported") {
  testing::TempDir dir("csv3");
  write_text(dir.path() / "bad.csv",
             "conv_id,utterance_idx,context_emotion,utterance,speaker_idx\n"
             "a,1,joy,fine,0\n"
             "a,x,joy,oops,1\n");
  try {
    load_dialogue_csv(dir.path() / "bad.csv");
    FAIL("expected an error");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  CHECK_THROWS_AS(load_dialogue_csv(dir.path() / "missing.csv"), CorpusError);
  CHECK_THROWS_AS(load_empathetic_dialogues(dir.path() / "nope"), CorpusError);
}

TEST_CASE("synthetic corpus is a pure function of its config") {
  SyntheticConfig cfg;
  cfg.num_emotions = 4;
  cfg.dialogues = 120;
  cfg.seed = 7;
  testing::TempDir a("synA"), b("synB");
  const auto c1 = generate_synthetic_corpus(cfg);
  const auto c2 = generate_synthetic_corpus(cfg);
  write_corpus_dir(a.path(), c1.data, c1.kb);
  write_corpus_dir(b.path(), c2.data, c2.kb);
  for (const char* f : {"train.csv", "valid.csv", "test.csv", "intensity.tsv", "concepts.tsv"}) {
    CHECK(slurp(a.path() / f) == slurp(b.path() / f));
  }
  cfg.seed = 8;
  const auto c3 = generate_synthetic_corpus(cfg);
  testing::TempDir c("synC");
  write_corpus_dir(c.path(), c3.data, c3.kb);
  CHECK(slurp(a.path() / "train.csv") != slurp(c.path() / "train.csv"));
}

TEST_CASE("synthetic corpus labels are uniform within 5 percent") {
  SyntheticConfig cfg;
  cfg.num_emotions = 8;
  cfg.dialogues = 2000;
  const auto corpus = generate_synthetic_corpus(cfg);
  std::map<std::string, int> counts;
  std::size_t total = 0;
  for (const auto* split : {&corpus.data.train, &corpus.data.valid, &corpus.data.test}) {
    for (const auto& d : *split) {
      ++counts[d.emotion];
      ++total;
    }
  }
  CHECK(total == 2000);
  CHECK(counts.size() == 8);
  for (const auto& [name, n] : counts) {
    CHECK(std::abs(static_cast<double>(n) / 2000.0 - 1.0 / 8.0) <= 0.05);
  }
}

TEST_CASE("synthetic corpus: the response reuses the last utterance's topic") {
  SyntheticConfig cfg;
  cfg.num_emotions = 3;
  cfg.dialogues = 60;
  const auto corpus = generate_synthetic_corpus(cfg);
  for (const auto& d : corpus.data.train) {
    const auto& last = d.utterances.back().tokens;
    REQUIRE(last.size() >= 2);
    const std::string& topic = last[1];  // "my <topic> was so <cue> !"
    CHECK(std::find(d.response.begin(), d.response.end(), topic) != d.response.end());
    CHECK(d.utterances.back().role == Role::speaker);
  }
}

TEST_CASE("synthetic corpus rejects a single emotion") {
  SyntheticConfig cfg;
  cfg.num_emotions = 1;
  CHECK_THROWS_AS(generate_synthetic_corpus(cfg), CorpusError);
}

TEST_CASE("written corpus loads back with the same dialogues") {
  SyntheticConfig cfg;
  cfg.num_emotions = 3;
  cfg.dialogues = 50;
  const auto corpus = generate_synthetic_corpus(cfg);
  testing::TempDir dir("rt");
  write_corpus_dir(dir.path(), corpus.data, corpus.kb);
  const Dataset back = load_empathetic_dialogues(dir.path());
  REQUIRE(back.train.size() == corpus.data.train.size());
  for (std::size_t i = 0; i < back.train.size(); ++i) {
    CHECK(back.train[i].emotion == corpus.data.train[i].emotion);
    CHECK(back.train[i].response == corpus.data.train[i].response);
    REQUIRE(back.train[i].utterances.size() == corpus.data.train[i].utterances.size());
    for (std::size_t u = 0; u < back.train[i].utterances.size(); ++u) {
      CHECK(back.train[i].utterances[u].tokens == corpus.data.train[i].utterances[u].tokens);
    }
  }
}

TEST_CASE("encoding maps emotions to sorted class ids and rejects unknown ones") {
  RawDialogue raw;
  raw.id = "x";
  raw.emotion = "sad";
  raw.utterances = {{Role::speaker, {"hello", "world"}}};
  raw.response = {"hi"};
  KnowledgeBase kb;
  kb.add_concept("hello", "greeting", 0.5);
  const Vocabulary v = build_vocabulary({raw}, kb);
  CHECK(v.contains("greeting"));
  const std::vector<std::string> emotions{"joy", "sad"};
  const Dialogue d = encode_dialogue(raw, v, emotions);
  CHECK(d.emotion_label == 1);
  CHECK(d.n() == 1);
  CHECK(d.gold_response == std::vector<int>{v.id("hi")});
  raw.emotion = "bored";
  CHECK_THROWS_AS(encode_dialogue(raw, v, emotions), CorpusError);
}

}  // TEST_SUITE
