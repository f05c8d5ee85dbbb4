#include "synguard/generate.hpp"

#include <algorithm>
#include <numeric>

#include "synguard/error.hpp"

namespace synguard {

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::base: return "base";
    case Regime::synthid: return "synthid";
    case Regime::sir: return "sir";
    case Regime::synguard: return "synguard";
  }
  return "?";
}

Regime parse_regime(std::string_view name) {
  for (Regime r : {Regime::base, Regime::synthid, Regime::sir, Regime::synguard})
    if (name == to_string(r)) return r;
  throw InvalidArgument("unknown regime '" + std::string(name) + "' (base|synthid|sir|synguard)");
}

void GenParams::validate() const {
  if (max_tokens < 1) throw InvalidArgument("max_tokens must be at least 1");
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (!(delta >= 0.0 && delta <= 1.0)) throw InvalidArgument("delta must lie in [0,1]");
  if (!(g_scale > 0.0)) throw InvalidArgument("g_scale must be positive");
}

TokenId sample_categorical(const ProbabilityVector& probs, Rng& rng) {
  const double u = rng.uniform() * probs.sum();
  double acc = 0.0;
  Eigen::Index last_positive = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (u < acc) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last_positive);
}

TokenId sample_base(const LanguageModel& model, std::span<const TokenId> context,
                    const GenParams& params, Rng& rng) {
  return sample_categorical(softmax_temperature(model.next_logits(context), params.temperature), rng);
}

TokenId tournament_sample(const ProbabilityVector& probs, ContextSeed seed, const WatermarkKey& key,
                          Rng& rng) {
  key.validate();
  return tournament_select(
      probs, key.m, [&](int l, TokenId x) { return g_value(l, x, seed, key); }, rng);
}

LogitVector g_logit_vector(std::size_t vocab_size, ContextSeed seed, const WatermarkKey& key,
                           double g_scale) {
  LogitVector out(static_cast<Eigen::Index>(vocab_size));
  const double m = key.m;
  for (std::size_t x = 0; x < vocab_size; ++x)
    out[static_cast<Eigen::Index>(x)] =
        g_scale * (g_total(static_cast<TokenId>(x), seed, key) / m - 0.5);
  return out;
}

namespace {

/// Pushes the EOS logit to the bottom so softmax gives it zero mass.
LogitVector& mask_token(LogitVector& logits, StopToken banned) {
  if (banned) logits[static_cast<Eigen::Index>(*banned)] = -1e300;
  return logits;
}

/// Shared driver: `pick(context, output, banned, rng)` chooses the next token.
template <typename Pick>
GenerationRecord run_generation(Regime regime, std::span<const TokenId> prompt,
                                const GenParams& params, const std::string& fingerprint,
                                StopToken eos, Pick&& pick) {
  params.validate();
  GenerationRecord rec;
  rec.prompt.assign(prompt.begin(), prompt.end());
  rec.regime = regime;
  rec.params = params;
  rec.key_fingerprint = fingerprint;
  Rng rng(params.rng_seed);
  std::vector<TokenId> context(prompt.begin(), prompt.end());
  context.reserve(prompt.size() + params.max_tokens);
  rec.output.reserve(params.max_tokens);
  while (rec.output.size() < params.max_tokens) {
    const StopToken banned = eos && rec.output.size() < params.min_tokens ? eos : std::nullopt;
    const TokenId t = pick(std::span<const TokenId>(context), std::span<const TokenId>(rec.output), banned, rng);
    context.push_back(t);
    rec.output.push_back(t);
    if (params.stop_at_eos && eos && t == *eos) break;
  }
  return rec;
}

void check_vocab(const LanguageModel& model, const SemanticModel& semantic) {
  if (model.vocab_size() != semantic.vocab_size())
    throw InvalidArgument("semantic model vocabulary size differs from language model");
}

}  // namespace

GenerationRecord generate_base(const LanguageModel& model, std::span<const TokenId> prompt,
                               const GenParams& params, StopToken eos) {
  return run_generation(Regime::base, prompt, params, "", eos,
                        [&](auto context, auto, StopToken banned, Rng& rng) {
                          LogitVector logits = model.next_logits(context);
                          return sample_categorical(
                              softmax_temperature(mask_token(logits, banned), params.temperature), rng);
                        });
}

GenerationRecord generate_synthid(const LanguageModel& model, std::span<const TokenId> prompt,
                                  const WatermarkKey& key, const GenParams& params, StopToken eos) {
  key.validate();
  return run_generation(Regime::synthid, prompt, params, key.fingerprint(), eos,
                        [&](auto context, auto output, StopToken banned, Rng& rng) {
                          LogitVector logits = model.next_logits(context);
                          const ProbabilityVector probs =
                              softmax_temperature(mask_token(logits, banned), params.temperature);
                          const ContextSeed seed = context_seed(output, output.size(), key);
                          return tournament_sample(probs, seed, key, rng);
                        });
}

GenerationRecord generate_sir(const LanguageModel& model, std::span<const TokenId> prompt,
                              const WatermarkKey& key, const SemanticModel& semantic,
                              const GenParams& params, StopToken eos) {
  check_vocab(model, semantic);
  SemanticModel::Accumulator acc(semantic);
  return run_generation(Regime::sir, prompt, params, key.fingerprint(), eos,
                        [&](auto context, auto output, StopToken banned, Rng& rng) {
                          if (!output.empty()) acc.push(output.back());
                          LogitVector combined = model.next_logits(context) +
                                                 params.delta * semantic.bias_vector(acc.embedding());
                          return sample_categorical(
                              softmax_temperature(mask_token(combined, banned), params.temperature), rng);
                        });
}

GenerationRecord generate_synguard(const LanguageModel& model, std::span<const TokenId> prompt,
                                   const WatermarkKey& key, const SemanticModel& semantic,
                                   const GenParams& params, StopToken eos) {
  key.validate();
  check_vocab(model, semantic);
  SemanticModel::Accumulator acc(semantic);
  return run_generation(
      Regime::synguard, prompt, params, key.fingerprint(), eos,
      [&](auto context, auto output, StopToken banned, Rng& rng) {
        if (!output.empty()) acc.push(output.back());
        const ContextSeed seed = context_seed(output, output.size(), key);
        LogitVector combined =
            (model.next_logits(context) + params.delta * semantic.bias_vector(acc.embedding())) +
            (1.0 - params.delta) * g_logit_vector(model.vocab_size(), seed, key, params.g_scale);
        const ProbabilityVector probs = softmax_temperature(mask_token(combined, banned), params.temperature);
        if (params.hybrid_tournament) return tournament_sample(probs, seed, key, rng);
        return sample_categorical(probs, rng);
      });
}

GenerationRecord generate(Regime regime, const LanguageModel& model, std::span<const TokenId> prompt,
                          const WatermarkKey& key, const SemanticModel& semantic,
                          const GenParams& params, StopToken eos) {
  switch (regime) {
    case Regime::base: return generate_base(model, prompt, params, eos);
    case Regime::synthid: return generate_synthid(model, prompt, key, params, eos);
    case Regime::sir: return generate_sir(model, prompt, key, semantic, params, eos);
    case Regime::synguard: return generate_synguard(model, prompt, key, semantic, params, eos);
  }
  throw InvalidArgument("unknown regime");
}

}  // namespace synguard
