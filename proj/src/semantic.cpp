#include "synguard/semantic.hpp"

#include <cmath>

#include "synguard/error.hpp"

namespace synguard {

namespace {

constexpr std::uint64_t kDomainVector = 0x726f7463652d7773ULL;  // "sw-ector"
constexpr std::uint64_t kDomainEmptyVec = 0x74706d652d76772dULL;
constexpr TokenId kNoToken = ~TokenId{0};

Embedding sign_vector(std::uint64_t domain, std::uint64_t token, const WatermarkKey& key, int d) {
  Embedding v(d);
  const double mag = 1.0 / std::sqrt(static_cast<double>(d));
  std::uint64_t bits = 0;
  for (int i = 0; i < d; ++i) {
    if (i % 64 == 0) {
      const std::uint64_t msg[] = {domain, token, static_cast<std::uint64_t>(i / 64)};
      bits = siphash24(key.k0(), key.k1(), msg);
    }
    v[i] = ((bits >> (i % 64)) & 1U) ? mag : -mag;
  }
  return v;
}

Embedding normalized_or(const Embedding& sum, const Embedding& fallback) {
  const double n = sum.norm();
  if (!(n > 0.0)) return fallback;
  return sum / n;
}

}  // namespace

void SemanticParams::validate() const {
  if (d < 8) throw InvalidArgument("semantic params: d must be at least 8");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("semantic params: gamma must lie in (0,1]");
  if (!(beta > 0.0)) throw InvalidArgument("semantic params: beta must be positive");
}

Embedding token_vector(TokenId token, const WatermarkKey& key, int d) {
  return sign_vector(kDomainVector, token, key, d);
}

Embedding empty_context_embedding(const WatermarkKey& key, int d) {
  return sign_vector(kDomainEmptyVec, kNoToken, key, d);
}

Embedding embed_context(std::span<const TokenId> tokens, const WatermarkKey& key,
                        const SemanticParams& params) {
  params.validate();
  if (tokens.empty()) return empty_context_embedding(key, params.d);
  Embedding sum = Embedding::Zero(params.d);
  for (TokenId t : tokens) sum = params.gamma * sum + token_vector(t, key, params.d);
  return normalized_or(sum, empty_context_embedding(key, params.d));
}

double semantic_bias(TokenId token, const Embedding& context, const WatermarkKey& key,
                     const SemanticParams& params) {
  return semantic_bias_from_vectors(token_vector(token, key, params.d), context, params.beta);
}

LogitVector semantic_bias_vector(const Embedding& context, const Vocabulary& vocab,
                                 const WatermarkKey& key, const SemanticParams& params) {
  LogitVector out(static_cast<Eigen::Index>(vocab.size()));
  for (std::size_t x = 0; x < vocab.size(); ++x)
    out[static_cast<Eigen::Index>(x)] = semantic_bias(static_cast<TokenId>(x), context, key, params);
  return out;
}

SemanticModel::SemanticModel(const WatermarkKey& key, SemanticParams params, std::size_t vocab_size,
                             std::span<const TokenId> canonical)
    : params_(params) {
  params_.validate();
  if (!canonical.empty() && canonical.size() != vocab_size)
    throw InvalidArgument("semantic model: canonical map size differs from vocabulary size");
  canonical_.resize(vocab_size);
  for (std::size_t t = 0; t < vocab_size; ++t) {
    canonical_[t] = canonical.empty() ? static_cast<TokenId>(t) : canonical[t];
    if (canonical_[t] >= vocab_size) throw InvalidArgument("semantic model: canonical id out of range");
  }
  vectors_.resize(static_cast<Eigen::Index>(vocab_size), params_.d);
  for (std::size_t t = 0; t < vocab_size; ++t)
    vectors_.row(static_cast<Eigen::Index>(t)) = token_vector(canonical_[t], key, params_.d).transpose();
  empty_ = empty_context_embedding(key, params_.d);
}

Embedding SemanticModel::embed(std::span<const TokenId> tokens) const {
  Accumulator acc(*this);
  for (TokenId t : tokens) acc.push(t);
  return acc.embedding();
}

double SemanticModel::bias(TokenId token, const Embedding& context) const {
  return semantic_bias_from_vectors(vector(token), context, params_.beta);
}

LogitVector SemanticModel::bias_vector(const Embedding& context) const {
  return (params_.beta * (vectors_ * context)).array().tanh().matrix();
}

SemanticModel::Accumulator::Accumulator(const SemanticModel& model)
    : model_(&model), sum_(Embedding::Zero(model.params_.d)) {}

void SemanticModel::Accumulator::push(TokenId t) {
  if (t >= model_->vocab_size()) throw InvalidArgument("semantic model: token id outside vocabulary");
  sum_ = model_->params_.gamma * sum_ + model_->vector(t);
  ++count_;
}

Embedding SemanticModel::Accumulator::embedding() const {
  if (count_ == 0) return model_->empty_;
  return normalized_or(sum_, model_->empty_);
}

}  // namespace synguard
