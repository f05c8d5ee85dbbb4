#pragma once

// Next-token distribution providers: the add-alpha n-gram model, a uniform
// model, and the softmax helpers shared by every sampler.

#include <cmath>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "synguard/corpus.hpp"
#include "synguard/error.hpp"

namespace synguard {

using LogitVector = Eigen::VectorXd;
using ProbabilityVector = Eigen::VectorXd;

/// Softmax of logits / temp, stabilized by max subtraction.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax_temperature(
    const Eigen::MatrixBase<Derived>& logits, typename Derived::Scalar temp) {
  using Scalar = typename Derived::Scalar;
  if (!(temp > Scalar(0))) throw InvalidArgument("softmax: temperature must be positive");
  if (logits.size() == 0) throw InvalidArgument("softmax: empty logits");
  if (!logits.allFinite()) throw InvalidArgument("softmax: non-finite logits");
  const Scalar top = logits.maxCoeff();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> p = ((logits.array() - top) / temp).exp().matrix();
  p /= p.sum();
  return p;
}

/// log(softmax(logits)) without temperature.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> log_softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  if (!logits.allFinite()) throw InvalidArgument("log_softmax: non-finite logits");
  const Scalar top = logits.maxCoeff();
  const Scalar lse = std::log((logits.array() - top).exp().sum());
  return (logits.array() - top - lse).matrix();
}

/// Source of next-token logits over a fixed vocabulary.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::string vocab_tag() const = 0;
  virtual LogitVector next_logits(std::span<const TokenId> context) const = 0;
};

/// Every token equally likely regardless of context.
class UniformModel final : public LanguageModel {
 public:
  UniformModel(std::size_t vocab_size, std::string vocab_tag)
      : size_(vocab_size), tag_(std::move(vocab_tag)) {}
  std::size_t vocab_size() const override { return size_; }
  std::string vocab_tag() const override { return tag_; }
  LogitVector next_logits(std::span<const TokenId>) const override {
    return LogitVector::Constant(static_cast<Eigen::Index>(size_),
                                 -std::log(static_cast<double>(size_)));
  }

 private:
  std::size_t size_;
  std::string tag_;
};

/// Add-alpha smoothed n-gram model. Logits are normalized log-probabilities:
///   logit(x) = ln(count(ctx -> x) + alpha) - ln(total(ctx) + alpha * |V|)
/// where ctx is the last order-1 tokens. Contexts shorter than order-1 or
/// never seen in training give the uniform distribution.
class NgramModel final : public LanguageModel {
 public:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::vector<std::pair<TokenId, std::uint32_t>> next;  // sorted by token
  };

  NgramModel(Vocabulary vocab, std::size_t order, double alpha);

  std::size_t vocab_size() const override { return vocab_.size(); }
  std::string vocab_tag() const override { return vocab_.tag(); }
  LogitVector next_logits(std::span<const TokenId> context) const override;

  const Vocabulary& vocabulary() const { return vocab_; }
  std::size_t order() const { return order_; }
  double alpha() const { return alpha_; }

  /// Raw count of `next` following the (order-1)-token context.
  std::uint64_t count(std::span<const TokenId> context, TokenId next) const;
  std::uint64_t context_total(std::span<const TokenId> context) const;

  void add_sequence(std::span<const TokenId> tokens);
  void save(const std::filesystem::path& path) const;
  static NgramModel load(const std::filesystem::path& path);

 private:
  struct KeyHash {
    std::size_t operator()(const std::vector<TokenId>& k) const noexcept;
  };
  const ContextCounts* lookup(std::span<const TokenId> context) const;

  Vocabulary vocab_;
  std::size_t order_;
  double alpha_;
  std::unordered_map<std::vector<TokenId>, ContextCounts, KeyHash> table_;
};

/// Counts every length-`order` window of every sequence.
NgramModel train_ngram(std::span<const TokenSequence> corpus, const Vocabulary& vocab,
                       std::size_t order, double alpha);

}  // namespace synguard
