#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "synguard/detect.hpp"
#include "synguard/random.hpp"

using namespace synguard;
using doctest::Approx;

TEST_SUITE("detect") {
  TEST_CASE("mean g-value over stub tables") {
    const int table[2][2] = {{1, 0}, {1, 1}};
    CHECK(mean_g_value(2, 2, [&](std::size_t i, int l) { return table[i][l - 1]; }) == 0.75);
    CHECK(mean_g_value(5, 4, [](std::size_t, int) { return 0; }) == 0.0);
    CHECK_THROWS_AS(mean_g_value(0, 4, [](std::size_t, int) { return 1; }), InvalidArgument);
  }

  TEST_CASE("g_score recomputes the average from seeds and g-values") {
    const WatermarkKey k = testing::key_from(31);
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<TokenId> text(1 + rng.below(60));
      for (auto& t : text) t = static_cast<TokenId>(rng.below(300));
      int total = 0;
      for (std::size_t i = 0; i < text.size(); ++i)
        for (int l = 1; l <= 4; ++l) total += g_value(l, text[i], context_seed(text, i, k), k);
      CHECK(g_score(text, k) == Approx(total / (4.0 * text.size())).epsilon(1e-15));
    }
    CHECK_THROWS_AS(g_score({}, k), InvalidArgument);
  }

  TEST_CASE("semantic score on a repeated token") {
    const WatermarkKey k = testing::key_from(32);
    const SemanticParams p{16, 0.9, 2.0};
    const SemanticModel m(k, p, 10);
    const std::vector<TokenId> text(25, 4);
    const double first = std::tanh(2.0 * m.vector(4).dot(m.empty_embedding()));
    CHECK(semantic_score(text, m) == Approx((first + 24 * std::tanh(2.0)) / 25.0).epsilon(1e-14));
    CHECK_THROWS_AS(semantic_score({}, m), InvalidArgument);
  }

  TEST_CASE("semantic score of a token orthogonal to the empty context is zero") {
    const WatermarkKey k = testing::key_from(33);
    const SemanticModel m(k, SemanticParams{16, 0.9, 2.0}, 2000);
    TokenId found = 0;
    bool any = false;
    for (TokenId t = 0; t < 2000 && !any; ++t)
      if (m.vector(t).dot(m.empty_embedding()) == 0.0) found = t, any = true;
    REQUIRE(any);
    CHECK(semantic_score(std::vector<TokenId>{found}, m) == 0.0);
  }

  TEST_CASE("semantic score uses per-position prefixes") {
    const WatermarkKey k = testing::key_from(34);
    const SemanticModel m(k, SemanticParams{}, 100);
    const std::vector<TokenId> text{1, 7, 3, 3, 50, 8};
    double sum = 0.0;
    for (std::size_t i = 0; i < text.size(); ++i) sum += m.bias(text[i], m.embed(std::span(text).first(i)));
    CHECK(semantic_score(text, m) == Approx(sum / text.size()).epsilon(1e-14));
  }

  TEST_CASE("hybrid combination endpoints") {
    CHECK(combine_scores(1.0, 1.0, 0.7) == Approx(1.0));
    CHECK(combine_scores(0.5, 0.0, 0.5) == 0.5);
    CHECK(combine_scores(0.0, -1.0, 0.3) == 0.0);
  }

  TEST_CASE("delta reductions are bit-exact and scores stay in range") {
    const WatermarkKey k = testing::key_from(35);
    const SemanticModel m(k, SemanticParams{}, 500);
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<TokenId> text(1 + rng.below(100));
      for (auto& t : text) t = static_cast<TokenId>(rng.below(500));
      const auto d0 = hybrid_score(text, k, m, 0.0);
      const auto d1 = hybrid_score(text, k, m, 1.0);
      CHECK(d0.s_hybrid == g_score(text, k));
      CHECK(d1.s_hybrid == (semantic_score(text, m) + 1.0) / 2.0);
      const auto d = hybrid_score(text, k, m, 0.7, 0.55);
      CHECK(d.s_hybrid >= 0.0);
      CHECK(d.s_hybrid <= 1.0);
      CHECK(std::abs(d.s_hybrid - combine_scores(d.s_g, d.s_semantic, 0.7)) <= 1e-12);
      CHECK(d.verdict == (d.s_hybrid > 0.55));
      CHECK(d.length == text.size());
      CHECK(d.delta == 0.7);
      CHECK(d.threshold == 0.55);
    }
    CHECK_THROWS_AS(hybrid_score(std::vector<TokenId>{1}, k, m, 1.5), InvalidArgument);
  }

  TEST_CASE("classification is strict") {
    CHECK(classify(0.9, 0.6));
    CHECK_FALSE(classify(0.6, 0.6));
    CHECK_FALSE(classify(0.59, 0.6));
  }

  TEST_CASE("Hoeffding bound values") {
    CHECK(hoeffding_fp_bound(200, 0.6) == Approx(std::exp(-4.0)).epsilon(1e-14));
    CHECK(hoeffding_fp_bound(200, 0.6) == Approx(0.018316).epsilon(1e-4));
    CHECK(hoeffding_fp_bound(50, 0.6) == Approx(0.367879).epsilon(1e-5));
    CHECK(hoeffding_fp_bound(0, 0.6) == 1.0);
    CHECK_THROWS_AS(hoeffding_fp_bound(50, 0.5), InvalidArgument);
  }

  TEST_CASE("unwatermarked reference text scores near one half") {
    const auto docs = load_corpus(testing::kDataDir / "corpus.txt", CorpusFormat::plain);
    const Vocabulary v = build_vocab(docs, 4096);
    int inside = 0, trials = 0;
    for (std::size_t i = 0; trials < 100 && i < docs.size(); ++i) {
      const auto s = split_sample(docs[i], v, 0, 200);
      if (!s) continue;
      const WatermarkKey k = testing::key_from(500 + i);
      inside += std::abs(g_score(s->reference.ids, k) - 0.5) <= 0.054;
      ++trials;
    }
    REQUIRE(trials == 100);
    CHECK(inside >= 99);
  }

  TEST_CASE("detector pairing") {
    CHECK(paired_detector(Regime::base) == Detector::g_value);
    CHECK(paired_detector(Regime::synthid) == Detector::g_value);
    CHECK(paired_detector(Regime::sir) == Detector::semantic);
    CHECK(paired_detector(Regime::synguard) == Detector::hybrid);
    DetectionScore s;
    s.s_g = 0.1;
    s.s_semantic = 0.2;
    s.s_hybrid = 0.3;
    CHECK(select_score(s, Detector::g_value) == 0.1);
    CHECK(select_score(s, Detector::semantic) == 0.2);
    CHECK(select_score(s, Detector::hybrid) == 0.3);
  }
}
