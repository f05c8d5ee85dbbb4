#include <doctest.h>

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "synguard/lm.hpp"
#include "synguard/random.hpp"

using namespace synguard;
using doctest::Approx;

namespace {

TokenSequence seq(const Vocabulary& v, const std::string& text) { return tokenize(text, v); }

}  // namespace

TEST_SUITE("lm") {
  TEST_CASE("train_ngram counts every window") {
    const Vocabulary v = testing::vocab_of({"a", "b"});
    const std::vector<TokenSequence> corpus{seq(v, "a b a b")};
    const NgramModel m = train_ngram(corpus, v, 2, 0.1);
    const TokenId a = *v.find("a"), b = *v.find("b");
    CHECK(m.count(std::vector<TokenId>{a}, b) == 2);
    CHECK(m.count(std::vector<TokenId>{b}, a) == 1);
    CHECK(m.count(std::vector<TokenId>{b}, b) == 0);
  }

  TEST_CASE("order 1 ignores context") {
    const Vocabulary v = testing::vocab_of({"a", "b"});
    const std::vector<TokenSequence> corpus{seq(v, "a b a a")};
    const NgramModel m = train_ngram(corpus, v, 1, 0.5);
    const TokenId a = *v.find("a"), b = *v.find("b");
    CHECK(m.count({}, a) == 3);
    CHECK(m.count(std::vector<TokenId>{b}, a) == 3);
    CHECK(m.next_logits(std::vector<TokenId>{a}) == m.next_logits(std::vector<TokenId>{b, b}));
  }

  TEST_CASE("add-alpha probability matches the hand-evaluated formula") {
    // |V| = 4: a, b, c, <eos>; P(b|a) = (1 + 1) / (2 + 4) = 1/3.
    const Vocabulary v = Vocabulary::from_surfaces({"a", "b", "c", "<eos>"});
    const std::vector<TokenSequence> corpus{seq(v, "a b"), seq(v, "a c")};
    const NgramModel m = train_ngram(corpus, v, 2, 1.0);
    const LogitVector l = m.next_logits(std::vector<TokenId>{*v.find("a")});
    CHECK(l[*v.find("b")] == Approx(std::log(1.0 / 3.0)).epsilon(1e-15));
    CHECK(std::exp(l[*v.find("a")]) == Approx(1.0 / 6.0));
  }

  TEST_CASE("unseen and short contexts are uniform") {
    const Vocabulary v = testing::vocab_of({"a", "b", "c"});
    const std::vector<TokenSequence> corpus{seq(v, "a b c")};
    const NgramModel m = train_ngram(corpus, v, 3, 0.1);
    for (const auto& ctx : {std::vector<TokenId>{}, std::vector<TokenId>{0}, std::vector<TokenId>{2, 2}}) {
      const LogitVector l = m.next_logits(ctx);
      for (Eigen::Index i = 0; i < l.size(); ++i) CHECK(l[i] == Approx(std::log(1.0 / 5.0)));
    }
  }

  TEST_CASE("next_logits are normalized and deterministic on the bundled corpus") {
    const auto docs = load_corpus(testing::kDataDir / "corpus.txt", CorpusFormat::plain);
    const Vocabulary v = build_vocab(docs, 1024);
    std::vector<TokenSequence> corpus;
    for (const auto& d : docs) corpus.push_back(tokenize(d.text, v));
    const NgramModel m = train_ngram(corpus, v, 3, 0.1);
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const auto& s = corpus[rng.below(corpus.size())].ids;
      const std::size_t pos = rng.below(s.size() + 1);
      const std::span<const TokenId> ctx(s.data(), pos);
      const LogitVector l = m.next_logits(ctx);
      CHECK(l.allFinite());
      CHECK(std::abs(l.array().exp().sum() - 1.0) < 1e-9);
      CHECK(l == m.next_logits(ctx));
    }
  }

  TEST_CASE("model file round trip preserves logits bit-exactly") {
    const Vocabulary v = testing::vocab_of({"a", "b", "c"});
    const std::vector<TokenSequence> corpus{seq(v, "a b c a b a"), seq(v, "c c b")};
    const NgramModel m = train_ngram(corpus, v, 2, 0.25);
    const auto dir = testing::scratch_dir("lm_rt");
    m.save(dir / "m.json");
    const NgramModel back = NgramModel::load(dir / "m.json");
    CHECK(back.order() == 2);
    CHECK(back.alpha() == 0.25);
    CHECK(back.vocab_tag() == m.vocab_tag());
    for (TokenId t = 0; t < v.size(); ++t)
      CHECK(back.next_logits(std::vector<TokenId>{t}) == m.next_logits(std::vector<TokenId>{t}));
  }

  TEST_CASE("invalid models are rejected") {
    const Vocabulary v = testing::vocab_of({"a"});
    CHECK_THROWS_AS(NgramModel(v, 0, 0.1), InvalidArgument);
    CHECK_THROWS_AS(NgramModel(v, 2, 0.0), InvalidArgument);
    CHECK_THROWS_AS(train_ngram({}, v, 2, 0.1), InvalidArgument);
    const auto dir = testing::scratch_dir("lm_bad");
    std::ofstream(dir / "bad.json") << "{\"format\":\"other\"}";
    CHECK_THROWS_AS(NgramModel::load(dir / "bad.json"), FormatError);
  }

  TEST_CASE("softmax_temperature examples") {
    const LogitVector zero = LogitVector::Zero(2);
    const auto p0 = softmax_temperature(zero, 1.0);
    CHECK(p0[0] == 0.5);
    CHECK(p0[1] == 0.5);
    LogitVector l3(2);
    l3 << std::log(3.0), std::log(1.0);
    const auto p3 = softmax_temperature(l3, 1.0);
    CHECK(p3[0] == Approx(0.75).epsilon(1e-14));
    CHECK(p3[1] == Approx(0.25).epsilon(1e-14));
    LogitVector wide(2);
    wide << 5.0, -5.0;
    const auto ph = softmax_temperature(wide, 1e6);
    CHECK(std::abs(ph[0] - 0.5) < 1e-5);
    CHECK(std::abs(ph[1] - 0.5) < 1e-5);
  }

  TEST_CASE("softmax_temperature rejects bad input and is stable") {
    LogitVector bad(2);
    bad << 0.0, std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(softmax_temperature(bad, 1.0), InvalidArgument);
    CHECK_THROWS_AS(softmax_temperature(LogitVector::Zero(2), 0.0), InvalidArgument);
    LogitVector big(3);
    big << 1000.0, 999.0, -1000.0;
    const auto p = softmax_temperature(big, 1.0);
    CHECK(p.allFinite());
    CHECK(p.sum() == Approx(1.0));
    CHECK(p[0] / p[1] == Approx(std::exp(1.0)));
  }

  TEST_CASE("uniform model") {
    const UniformModel u(7, "t");
    const LogitVector l = u.next_logits({});
    CHECK(l.size() == 7);
    CHECK(l.array().exp().sum() == Approx(1.0));
    CHECK(u.vocab_tag() == "t");
  }
}
