#pragma once

// Text generation regimes: plain sampling, tournament sampling over g-values,
// semantic logit biasing, and the hybrid logit combination
//   logits + delta * P_W + (1 - delta) * P_G.
//
// Watermark seeds and semantic embeddings are computed over the generated
// output only (not the prompt) so that detection needs nothing but the text.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synguard/lm.hpp"
#include "synguard/prf.hpp"
#include "synguard/random.hpp"
#include "synguard/semantic.hpp"

namespace synguard {

enum class Regime { base, synthid, sir, synguard };

std::string_view to_string(Regime r);
Regime parse_regime(std::string_view name);

struct GenParams {
  std::size_t max_tokens = 200;
  double temperature = 1.0;
  double delta = 0.7;
  double g_scale = 4.0;
  std::uint64_t rng_seed = 0;
  /// Hybrid regime only: pick the token by tournament over the combined
  /// distribution instead of a single categorical draw.
  bool hybrid_tournament = false;
  bool stop_at_eos = true;
  /// EOS receives zero probability until this many tokens are out.
  std::size_t min_tokens = 0;

  void validate() const;
};

struct GenerationRecord {
  std::vector<TokenId> prompt;
  std::vector<TokenId> output;
  Regime regime = Regime::base;
  GenParams params;
  std::string key_fingerprint;
};

/// Inverse-CDF draw from a probability vector.
TokenId sample_categorical(const ProbabilityVector& probs, Rng& rng);

TokenId sample_base(const LanguageModel& model, std::span<const TokenId> context,
                    const GenParams& params, Rng& rng);

/// Knockout tournament over 2^m candidates drawn i.i.d. from `probs`. Layer l
/// pairs adjacent survivors; the larger g(l, candidate) wins, the
/// first-listed candidate on ties. `g` is any callable (int l, TokenId) -> int.
template <typename GFn>
TokenId tournament_select(const ProbabilityVector& probs, int m, GFn&& g, Rng& rng) {
  std::vector<TokenId> round(std::size_t{1} << m);
  for (auto& c : round) c = sample_categorical(probs, rng);
  for (int l = 1; l <= m; ++l) {
    for (std::size_t i = 0; i < round.size() / 2; ++i) {
      const TokenId a = round[2 * i];
      const TokenId b = round[2 * i + 1];
      round[i] = g(l, b) > g(l, a) ? b : a;
    }
    round.resize(round.size() / 2);
  }
  return round.front();
}

TokenId tournament_sample(const ProbabilityVector& probs, ContextSeed seed, const WatermarkKey& key,
                          Rng& rng);

/// P_G(x) = g_scale * (g_total(x, seed) / m - 0.5) for every vocabulary entry.
LogitVector g_logit_vector(std::size_t vocab_size, ContextSeed seed, const WatermarkKey& key,
                           double g_scale);

/// EOS id used to stop generation, or nullopt to run to max_tokens.
using StopToken = std::optional<TokenId>;

GenerationRecord generate_base(const LanguageModel& model, std::span<const TokenId> prompt,
                               const GenParams& params, StopToken eos = std::nullopt);
GenerationRecord generate_synthid(const LanguageModel& model, std::span<const TokenId> prompt,
                                  const WatermarkKey& key, const GenParams& params,
                                  StopToken eos = std::nullopt);
GenerationRecord generate_sir(const LanguageModel& model, std::span<const TokenId> prompt,
                              const WatermarkKey& key, const SemanticModel& semantic,
                              const GenParams& params, StopToken eos = std::nullopt);
GenerationRecord generate_synguard(const LanguageModel& model, std::span<const TokenId> prompt,
                                   const WatermarkKey& key, const SemanticModel& semantic,
                                   const GenParams& params, StopToken eos = std::nullopt);

GenerationRecord generate(Regime regime, const LanguageModel& model, std::span<const TokenId> prompt,
                          const WatermarkKey& key, const SemanticModel& semantic,
                          const GenParams& params, StopToken eos = std::nullopt);

}  // namespace synguard
