#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "synguard/random.hpp"
#include "synguard/semantic.hpp"

using namespace synguard;
using doctest::Approx;

namespace {

Embedding random_unit(Rng& rng, int d) {
  Embedding e(d);
  for (int i = 0; i < d; ++i) e[i] = rng.uniform() - 0.5;
  return e.normalized();
}

}  // namespace

TEST_SUITE("semantic") {
  TEST_CASE("token vectors are deterministic sign vectors of unit norm") {
    const WatermarkKey k = testing::key_from(3);
    for (int d : {8, 16, 64, 100}) {
      const Embedding v = token_vector(17, k, d);
      CHECK(v.size() == d);
      CHECK(v.norm() == Approx(1.0).epsilon(1e-15));
      for (int i = 0; i < d; ++i) CHECK(std::abs(std::abs(v[i]) - 1.0 / std::sqrt(double(d))) < 1e-15);
      CHECK(v == token_vector(17, k, d));
    }
  }

  TEST_CASE("distinct token vectors are nearly orthogonal on average") {
    const WatermarkKey k = testing::key_from(3);
    double sum = 0.0;
    for (TokenId t = 0; t < 1000; ++t) sum += token_vector(2 * t, k, 64).dot(token_vector(2 * t + 1, k, 64));
    CHECK(std::abs(sum / 1000.0) < 0.05);
  }

  TEST_CASE("context embedding examples") {
    const WatermarkKey k = testing::key_from(4);
    const SemanticParams p{16, 0.9, 2.0};
    CHECK(embed_context(std::vector<TokenId>{5}, k, p).isApprox(token_vector(5, k, 16), 1e-15));
    CHECK(embed_context(std::vector<TokenId>{5, 5, 5}, k, p).isApprox(token_vector(5, k, 16), 1e-15));
    const Embedding empty = embed_context({}, k, p);
    CHECK(empty == empty_context_embedding(k, 16));
    CHECK(empty.norm() == Approx(1.0));
    for (TokenId t = 0; t < 100; ++t) CHECK(empty != token_vector(t, k, 16));
  }

  TEST_CASE("context embedding is the normalized decayed sum") {
    const WatermarkKey k = testing::key_from(4);
    const SemanticParams p{32, 0.7, 2.0};
    const std::vector<TokenId> ctx{3, 1, 4, 1, 5, 9, 2, 6};
    Embedding sum = Embedding::Zero(32);
    for (std::size_t j = 0; j < ctx.size(); ++j)
      sum += std::pow(0.7, double(ctx.size() - 1 - j)) * token_vector(ctx[j], k, 32);
    CHECK(embed_context(ctx, k, p).isApprox(sum.normalized(), 1e-12));
  }

  TEST_CASE("a far-past token moves the embedding by at most the analytic bound") {
    const WatermarkKey k = testing::key_from(6);
    const SemanticParams p{64, 0.9, 2.0};
    std::vector<TokenId> a;
    for (TokenId t = 0; t < 30; ++t) a.push_back(100 + t);
    std::vector<TokenId> b = a;
    b[0] = 7;  // age 29
    const double age = 29.0;
    Embedding sum = Embedding::Zero(64);
    for (std::size_t j = 0; j < a.size(); ++j)
      sum += std::pow(0.9, double(a.size() - 1 - j)) * token_vector(a[j], k, 64);
    const double delta = (embed_context(a, k, p) - embed_context(b, k, p)).norm();
    const double dv = (token_vector(a[0], k, 64) - token_vector(b[0], k, 64)).norm();
    CHECK(delta <= 2.0 * std::pow(0.9, age) * dv / sum.norm());
    CHECK(delta <= 2.0 * std::pow(0.9, 20.0) / sum.norm());
  }

  TEST_CASE("semantic bias examples") {
    const WatermarkKey k = testing::key_from(7);
    const SemanticParams p{16, 0.9, 2.0};
    const Embedding v = token_vector(9, k, 16);
    Embedding ortho = v;
    ortho.head(8) *= -1.0;
    CHECK(ortho.norm() == Approx(1.0));
    CHECK(semantic_bias(9, ortho, k, p) == 0.0);
    CHECK(semantic_bias(9, embed_context(std::vector<TokenId>{9}, k, p), k, p) == Approx(0.96403).epsilon(1e-5));
  }

  TEST_CASE("semantic bias vector agrees with the scalar form and stays in (-1, 1)") {
    const WatermarkKey k = testing::key_from(7);
    const SemanticParams p{16, 0.9, 4.0};
    const Vocabulary v = testing::vocab_of({"a", "b", "c", "d", "e", "f"});
    const Embedding e = embed_context(std::vector<TokenId>{0, 3}, k, p);
    const LogitVector bias = semantic_bias_vector(e, v, k, p);
    REQUIRE(bias.size() == 8);
    for (TokenId t : {0u, 4u, 7u}) CHECK(bias[t] == semantic_bias(t, e, k, p));
    CHECK((bias.array().abs() < 1.0).all());
    const SemanticModel model(k, p, 8);
    CHECK((model.bias_vector(e) - bias).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("bias argmax is the best-aligned token by brute force") {
    const WatermarkKey k = testing::key_from(10);
    const SemanticParams p{16, 0.9, 2.0};
    const Vocabulary v = testing::vocab_of({"a", "b", "c", "d", "e", "f"});
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const Embedding e = random_unit(rng, 16);
      TokenId best = 0;
      double best_dot = -2.0;
      for (TokenId t = 0; t < 8; ++t) {
        const double dot = token_vector(t, k, 16).dot(e);
        if (dot > best_dot) best_dot = dot, best = t;
      }
      Eigen::Index arg;
      semantic_bias_vector(e, v, k, p).maxCoeff(&arg);
      CHECK(static_cast<TokenId>(arg) == best);
    }
  }

  TEST_CASE("Lipschitz bound holds on random pairs") {
    const WatermarkKey k = testing::key_from(11);
    Rng rng(6);
    for (double beta : {0.5, 2.0, 8.0}) {
      const SemanticParams p{16, 0.9, beta};
      for (int i = 0; i < 1000; ++i) {
        const auto t = static_cast<TokenId>(rng.below(4096));
        const Embedding e1 = random_unit(rng, 16), e2 = random_unit(rng, 16);
        const double lhs = std::abs(semantic_bias(t, e1, k, p) - semantic_bias(t, e2, k, p));
        CHECK(lhs <= beta * (e1 - e2).norm() + 1e-15);
      }
    }
  }

  TEST_CASE("bias over random pairs has mean near zero") {
    const WatermarkKey k = testing::key_from(12);
    const SemanticParams p;
    Rng rng(7);
    double sum = 0.0;
    for (int i = 0; i < 1000; ++i)
      sum += semantic_bias(static_cast<TokenId>(rng.below(4096)), random_unit(rng, p.d), k, p);
    CHECK(std::abs(sum / 1000.0) < 0.05);
  }

  TEST_CASE("synonyms share the representative vector, so substitution keeps E") {
    const WatermarkKey k = testing::key_from(13);
    const SemanticParams p{16, 0.9, 2.0};
    std::vector<TokenId> canonical{0, 1, 2, 1, 4};  // 3 -> 1
    const SemanticModel m(k, p, 5, canonical);
    CHECK(m.vector(3) == m.vector(1));
    CHECK(m.vector(3) == token_vector(1, k, 16));
    CHECK(m.embed(std::vector<TokenId>{0, 1, 4}) == m.embed(std::vector<TokenId>{0, 3, 4}));
    CHECK(m.bias(3, m.empty_embedding()) == m.bias(1, m.empty_embedding()));
    CHECK_THROWS_AS(SemanticModel(k, p, 5, std::vector<TokenId>{0, 1}), InvalidArgument);
  }

  TEST_CASE("accumulator matches embed_context") {
    const WatermarkKey k = testing::key_from(14);
    const SemanticParams p;
    const SemanticModel m(k, p, 64);
    const std::vector<TokenId> ctx{1, 2, 3, 5, 8, 13, 21, 34};
    SemanticModel::Accumulator acc(m);
    CHECK(acc.embedding() == empty_context_embedding(k, p.d));
    for (std::size_t i = 0; i < ctx.size(); ++i) {
      acc.push(ctx[i]);
      CHECK(acc.embedding().isApprox(embed_context(std::span(ctx).first(i + 1), k, p), 1e-12));
    }
    CHECK_THROWS_AS(acc.push(64), InvalidArgument);
  }

  TEST_CASE("parameter validation") {
    CHECK_THROWS_AS((SemanticParams{4, 0.9, 2.0}).validate(), InvalidArgument);
    CHECK_THROWS_AS((SemanticParams{16, 0.0, 2.0}).validate(), InvalidArgument);
    CHECK_THROWS_AS((SemanticParams{16, 1.5, 2.0}).validate(), InvalidArgument);
    CHECK_THROWS_AS((SemanticParams{16, 0.9, 0.0}).validate(), InvalidArgument);
    CHECK_NOTHROW((SemanticParams{8, 1.0, 0.1}).validate());
  }
}
