#pragma once

// Keyed semantic channel: sign-vector token representations, a recency
// weighted context embedding E and the bounded bias P_W = tanh(beta <v_x, E>).
//
// P_W is 1-Lipschitz in the inner product, so for unit token vectors
//   |P_W(x, E1) - P_W(x, E2)| <= beta * ||E1 - E2||.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "synguard/corpus.hpp"
#include "synguard/lm.hpp"
#include "synguard/prf.hpp"

namespace synguard {

using Embedding = Eigen::VectorXd;

struct SemanticParams {
  int d = 16;
  double gamma = 0.5;
  double beta = 4.0;

  void validate() const;
};

/// Unit vector with components +-1/sqrt(d); signs from the keyed PRF.
Embedding token_vector(TokenId token, const WatermarkKey& key, int d);
/// Embedding of the empty context; domain-separated from every token vector.
Embedding empty_context_embedding(const WatermarkKey& key, int d);

/// normalize(sum_j gamma^age_j v(t_j)) with age 0 for the last token.
Embedding embed_context(std::span<const TokenId> tokens, const WatermarkKey& key,
                        const SemanticParams& params);

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar semantic_bias_from_vectors(const Eigen::MatrixBase<DerivedA>& token_vec,
                                                     const Eigen::MatrixBase<DerivedB>& context,
                                                     typename DerivedA::Scalar beta) {
  return std::tanh(beta * token_vec.dot(context));
}

double semantic_bias(TokenId token, const Embedding& context, const WatermarkKey& key,
                     const SemanticParams& params);

/// Precomputed token vectors for one vocabulary. Tokens in the same synonym
/// class share the vector of the class representative (`canonical[t]`).
class SemanticModel {
 public:
  /// `canonical` maps each id to the id whose vector it uses; empty means identity.
  SemanticModel(const WatermarkKey& key, SemanticParams params, std::size_t vocab_size,
                std::span<const TokenId> canonical = {});

  const SemanticParams& params() const { return params_; }
  std::size_t vocab_size() const { return static_cast<std::size_t>(vectors_.rows()); }
  TokenId canonical(TokenId t) const { return canonical_[t]; }

  auto vector(TokenId t) const { return vectors_.row(static_cast<Eigen::Index>(t)).transpose(); }
  const Embedding& empty_embedding() const { return empty_; }

  Embedding embed(std::span<const TokenId> tokens) const;
  double bias(TokenId token, const Embedding& context) const;
  /// P_W for every vocabulary entry.
  LogitVector bias_vector(const Embedding& context) const;

  /// Running embedding of a growing prefix.
  class Accumulator {
   public:
    explicit Accumulator(const SemanticModel& model);
    void push(TokenId t);
    Embedding embedding() const;
    std::size_t size() const { return count_; }

   private:
    const SemanticModel* model_;
    Embedding sum_;
    std::size_t count_ = 0;
  };

 private:
  SemanticParams params_;
  Eigen::MatrixXd vectors_;  // |V| x d
  Embedding empty_;
  std::vector<TokenId> canonical_;
};

/// Component x = semantic_bias(x, E) over a whole vocabulary.
LogitVector semantic_bias_vector(const Embedding& context, const Vocabulary& vocab,
                                 const WatermarkKey& key, const SemanticParams& params);

}  // namespace synguard
