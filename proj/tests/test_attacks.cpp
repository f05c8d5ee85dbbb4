#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "helpers.hpp"
#include "synguard/attacks.hpp"
#include "synguard/detect.hpp"
#include "synguard/error.hpp"
#include "synguard/generate.hpp"

using namespace synguard;

namespace {

std::vector<TokenId> project(std::span<const TokenId> tokens, const SynonymTable& table) {
  std::vector<TokenId> out;
  for (TokenId t : tokens) out.push_back(table.representative(t));
  return out;
}

std::vector<TokenId> sorted(std::vector<TokenId> v) {
  std::sort(v.begin(), v.end());
  return v;
}

struct Small {
  Vocabulary vocab = testing::vocab_of({"i", "love", "adore", "like", "cats", "dogs", "big", "large", "huge",
                                        "small", "tiny", ".", ",", "you", "the"});
  SynonymTable table = SynonymTable::parse("love\tadore\tlike\nbig\tlarge\thuge\nsmall\ttiny\n", vocab);
  TokenId id(const std::string& s) const { return *vocab.find(s); }
};

}  // namespace

TEST_SUITE("attacks") {
  TEST_CASE("synonym table parsing") {
    const Small s;
    CHECK(s.table.class_count() == 3);
    CHECK(s.table.representative(s.id("adore")) == s.id("love"));
    CHECK(s.table.representative(s.id("cats")) == s.id("cats"));
    CHECK_FALSE(s.table.has_class(s.id("you")));
    CHECK(s.table.is_boundary(s.id(".")));
    CHECK(s.table.is_boundary(s.id(",")));
    CHECK_FALSE(s.table.is_boundary(s.id("the")));

    // Unknown members are dropped, then classes of one; comments are skipped.
    const auto t = SynonymTable::parse("# comment\nlove\tzzz\nbig\tlarge\tqqq\n\n", s.vocab);
    CHECK(t.class_count() == 1);
    CHECK(t.members(0).size() == 2);
    try {
      SynonymTable::parse("love\tadore\nbig\tlove\n", s.vocab);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line 2") != std::string::npos);
      CHECK(msg.find("line 1") != std::string::npos);
    }
    const auto canon = s.table.canonical_map();
    CHECK(canon.size() == s.vocab.size());
    CHECK(canon[s.id("huge")] == s.id("big"));
  }

  TEST_CASE("bundled synonym table loads against the bundled corpus vocabulary") {
    const auto docs = load_corpus(testing::kDataDir / "corpus.txt", CorpusFormat::plain);
    const Vocabulary v = build_vocab(docs, 4096);
    const auto t = SynonymTable::load(testing::kDataDir / "synonyms.tsv", v);
    CHECK(t.class_count() >= 100);
  }

  TEST_CASE("substitution with epsilon 0 is the identity") {
    const Small s;
    const std::vector<TokenId> text{s.id("i"), s.id("love"), s.id("big"), s.id("cats")};
    Rng rng(1);
    CHECK(synonym_substitute(text, s.table, 0.0, nullptr, rng) == text);
  }

  TEST_CASE("substitution changes exactly ceil(epsilon T) positions to listed synonyms") {
    const Small s;
    std::vector<TokenId> text;
    for (int i = 0; i < 10; ++i) text.push_back(s.id(i % 3 == 0 ? "love" : i % 3 == 1 ? "big" : "small"));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const auto out = synonym_substitute(text, s.table, 0.5, nullptr, rng);
      int changed = 0;
      for (std::size_t i = 0; i < text.size(); ++i)
        if (out[i] != text[i]) {
          ++changed;
          CHECK(s.table.class_of(out[i]) == s.table.class_of(text[i]));
        }
      CHECK(changed == 5);
      CHECK(project(out, s.table) == project(text, s.table));
    }
    CHECK(scaled_count(0.7, 200) == 140);
    CHECK(scaled_count(0.5, 11) == 6);
  }

  TEST_CASE("substitution exhausts eligible positions before the budget") {
    const Small s;
    const std::vector<TokenId> text{s.id("i"), s.id("love"), s.id("you"), s.id(".")};
    Rng rng(2);
    const auto out = synonym_substitute(text, s.table, 1.0, nullptr, rng);
    CHECK(out[0] == text[0]);
    CHECK(out[1] != text[1]);
    CHECK(out[2] == text[2]);
  }

  TEST_CASE("context-aware substitution picks the scorer's preferred synonym") {
    const Small s;
    const std::vector<std::string> train{"i adore cats .", "i adore dogs .", "i like you .", "you adore cats ."};
    std::vector<TokenSequence> corpus;
    for (const auto& t : train) corpus.push_back(tokenize(t, s.vocab));
    const NgramModel scorer = train_ngram(corpus, s.vocab, 3, 0.1);
    const std::vector<TokenId> text = tokenize("i love cats .", s.vocab).ids;

    // Hand evaluation of the add-alpha trigram over the training windows.
    auto logp = [&](TokenId a, TokenId b, TokenId x) {
      double c = 0.0, total = 0.0;
      for (const auto& seq : corpus)
        for (std::size_t i = 0; i + 2 < seq.ids.size(); ++i)
          if (seq.ids[i] == a && seq.ids[i + 1] == b) {
            total += 1.0;
            c += seq.ids[i + 2] == x;
          }
      return std::log((c + 0.1) / (total + 0.1 * s.vocab.size()));
    };
    auto joint = [&](TokenId cand) {
      // Positions 1..3 with position 1 replaced; the first lacks a full context.
      return std::log(1.0 / s.vocab.size()) + logp(text[0], cand, text[2]) + logp(cand, text[2], text[3]);
    };
    const double adore = joint(s.id("adore")), like = joint(s.id("like"));
    REQUIRE(adore > like);
    CHECK(substitution_log_likelihood(scorer, text, 1, s.id("adore")) == doctest::Approx(adore).epsilon(1e-12));
    CHECK(substitution_log_likelihood(scorer, text, 1, s.id("like")) == doctest::Approx(like).epsilon(1e-12));
    Rng rng(3);
    const auto out = synonym_substitute(text, s.table, 1.0, &scorer, rng);
    CHECK(out[1] == s.id("adore"));
  }

  TEST_CASE("copy-paste embeds the watermarked span contiguously") {
    const Small s;
    std::vector<TokenSequence> pool(1);
    pool[0].ids.assign(1500, s.id("the"));
    std::vector<TokenId> wm(200, s.id("cats"));
    Rng rng(4);
    const auto same = copy_paste(wm, pool, 0.0, rng);
    CHECK(same.tokens == wm);
    const auto r = copy_paste(wm, pool, 5.0, rng);
    REQUIRE(r.tokens.size() == 1200);
    REQUIRE(r.insert_at);
    CHECK(std::equal(wm.begin(), wm.end(), r.tokens.begin() + static_cast<std::ptrdiff_t>(*r.insert_at)));
    CHECK(std::count(r.tokens.begin(), r.tokens.end(), s.id("cats")) == 200);
    CHECK_THROWS_AS(copy_paste(wm, pool, 10.0, rng), InvalidArgument);
  }

  TEST_CASE("copy-paste insertion point is randomized") {
    const Small s;
    std::vector<TokenSequence> pool(1);
    pool[0].ids.assign(500, s.id("the"));
    std::vector<TokenId> wm(10, s.id("cats"));
    std::set<std::size_t> seen;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      Rng rng(seed);
      seen.insert(*copy_paste(wm, pool, 2.0, rng).insert_at);
    }
    CHECK(seen.size() > 5);
  }

  TEST_CASE("copy-paste dilutes the g-score as predicted") {
    const auto docs = load_corpus(testing::kDataDir / "corpus.txt", CorpusFormat::plain);
    const Vocabulary v = build_vocab(docs, 1024);
    std::vector<TokenSequence> seqs;
    for (const auto& d : docs) seqs.push_back(tokenize(d.text, v));
    const NgramModel model = train_ngram(seqs, v, 3, 0.1);
    const WatermarkKey key = testing::key_from(41);
    double predicted = 0.0, measured = 0.0;
    const int n = 20;
    for (int i = 0; i < n; ++i) {
      GenParams p;
      p.rng_seed = 700 + i;
      const auto wm = generate_synthid(model, seqs[i].ids, key, p).output;
      REQUIRE(wm.size() == 200);
      Rng rng(800 + i);
      const auto mixed = copy_paste(wm, seqs, 10.0, rng);
      REQUIRE(mixed.tokens.size() == 2200);
      predicted += (200 * g_score(wm, key) + 2000 * 0.5) / 2200;
      measured += g_score(mixed.tokens, key);
    }
    CHECK(std::abs(measured / n - predicted / n) < 0.006);
  }

  TEST_CASE("paraphrase") {
    const Small s;
    const std::vector<TokenId> text =
        tokenize("i love big cats , you like small dogs . the huge dogs , i adore tiny cats .", s.vocab).ids;
    Rng rng(5);
    CHECK(paraphrase(text, s.table, 0.0, 0.0, rng) == text);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng r(seed);
      const auto out = paraphrase(text, s.table, 0.6, 0.7, r);
      CHECK(sorted(project(out, s.table)) == sorted(project(text, s.table)));
    }
  }

  TEST_CASE("paraphrase with full order diversity swaps every adjacent gap once") {
    const Small s;
    const std::vector<TokenId> text = tokenize("i love , big cats , small dogs", s.vocab).ids;
    REQUIRE(split_phrases(text, s.table).size() == 3);
    std::set<std::vector<TokenId>> outcomes;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const auto out = paraphrase(text, s.table, 0.0, 1.0, rng);
      outcomes.insert(out);
      // Two adjacent swaps of phrases A B C: either order gives a rotation.
      const auto p = split_phrases(text, s.table);
      std::vector<TokenId> bca, cab;
      for (int i : {1, 2, 0}) bca.insert(bca.end(), p[i].begin(), p[i].end());
      for (int i : {2, 0, 1}) cab.insert(cab.end(), p[i].begin(), p[i].end());
      CHECK((out == bca || out == cab));
    }
    CHECK(outcomes.size() == 2);
  }

  TEST_CASE("text without punctuation is a single phrase") {
    const Small s;
    const std::vector<TokenId> text = tokenize("i love big cats", s.vocab).ids;
    CHECK(split_phrases(text, s.table).size() == 1);
    Rng rng(6);
    CHECK(paraphrase(text, s.table, 0.0, 1.0, rng) == text);
  }

  TEST_CASE("back-translation") {
    const Small s;
    const std::vector<TokenId> text = tokenize("i love big cats , you like small dogs .", s.vocab).ids;
    Rng rng(7);
    CHECK(back_translate(text, s.table, 1.0, 1, rng) == text);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng r(seed);
      const auto out = back_translate(text, s.table, 0.0, 1, r);
      CHECK(project(out, s.table) == project(text, s.table));
      for (std::size_t i = 0; i < text.size(); ++i)
        if (!s.table.has_class(text[i])) CHECK(out[i] == text[i]);
      Rng w(seed);
      CHECK(sorted(project(back_translate(text, s.table, 0.5, 4, w), s.table)) == sorted(project(text, s.table)));
    }
  }

  TEST_CASE("back-translation changes the closed-form fraction of classed tokens") {
    const Small s;
    std::vector<TokenId> text;
    for (int i = 0; i < 10000; ++i) text.push_back(s.id(i % 2 ? "small" : "big"));
    for (double q : {0.0, 0.5, 0.7, 0.9}) {
      Rng rng(8);
      const auto out = back_translate(text, s.table, q, 1, rng);
      double changed_big = 0, changed_small = 0;
      for (std::size_t i = 0; i < text.size(); ++i) (i % 2 ? changed_small : changed_big) += out[i] != text[i];
      CHECK(std::abs(changed_big / 5000 - (1 - q) * (1 - 1.0 / 3)) <= 0.03);
      CHECK(std::abs(changed_small / 5000 - (1 - q) * (1 - 1.0 / 2)) <= 0.03);
    }
  }

  TEST_CASE("attacks are deterministic under a fixed seed and validate their specs") {
    const Small s;
    const std::vector<TokenId> text = tokenize("i love big cats , you like small dogs .", s.vocab).ids;
    std::vector<TokenSequence> pool{tokenize("the the the the the the the the the the the the the", s.vocab)};
    for (AttackKind kind : {AttackKind::none, AttackKind::substitute, AttackKind::copy_paste, AttackKind::paraphrase,
                            AttackKind::back_translate}) {
      AttackSpec spec;
      spec.kind = kind;
      spec.epsilon = 0.5;
      spec.ratio = 1.0;
      spec.lex_div = 0.5;
      spec.order_div = 0.5;
      spec.fidelity_q = 0.5;
      spec.rng_seed = 77;
      const auto a = apply_attack(text, spec, s.table, nullptr, pool);
      const auto b = apply_attack(text, spec, s.table, nullptr, pool);
      CHECK(a.tokens == b.tokens);
      CHECK(a.insert_at == b.insert_at);
    }
    AttackSpec bad;
    bad.epsilon = 1.5;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = {};
    bad.reorder_window = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = {};
    bad.ratio = -1;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    CHECK(parse_attack_kind("copy-paste") == AttackKind::copy_paste);
    CHECK_THROWS_AS(parse_attack_kind("dipper"), InvalidArgument);
  }
}
