#pragma once

#include <span>
#include <string_view>

#include "synguard/corpus.hpp"
#include "synguard/error.hpp"
#include "synguard/generate.hpp"
#include "synguard/prf.hpp"
#include "synguard/semantic.hpp"

namespace synguard {

struct DetectionScore {
  double s_g = 0.0;
  double s_semantic = 0.0;
  double s_hybrid = 0.0;
  double delta = 0.0;
  double threshold = 0.0;
  bool verdict = false;
  std::size_t length = 0;
};

/// (1 / (m T)) sum_i sum_l g(i, l) for any callable g(position, layer) -> {0,1}.
template <typename GFn>
double mean_g_value(std::size_t length, int m, GFn&& g) {
  if (length == 0) throw InvalidArgument("cannot score an empty sequence");
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < length; ++i)
    for (int l = 1; l <= m; ++l) total += static_cast<std::uint64_t>(g(i, l));
  return static_cast<double>(total) / (static_cast<double>(m) * static_cast<double>(length));
}

double g_score(std::span<const TokenId> tokens, const WatermarkKey& key);

/// Mean over positions of P_W(t_i, E(t_0..t_{i-1})).
double semantic_score(std::span<const TokenId> tokens, const SemanticModel& semantic);

/// delta * (s_semantic + 1) / 2 + (1 - delta) * s_g.
inline double combine_scores(double s_g, double s_semantic, double delta) {
  return delta * (s_semantic + 1.0) / 2.0 + (1.0 - delta) * s_g;
}

DetectionScore hybrid_score(std::span<const TokenId> tokens, const WatermarkKey& key,
                            const SemanticModel& semantic, double delta, double tau = 0.5);

/// Strict: a score equal to tau is not watermarked.
inline bool classify(double score, double tau) { return score > tau; }

/// exp(-2 T (tau - 0.5)^2). Throws for tau <= 0.5.
double hoeffding_fp_bound(double length, double tau);

/// Which statistic a regime is judged by.
enum class Detector { g_value, semantic, hybrid };

std::string_view to_string(Detector d);
Detector paired_detector(Regime regime);
double select_score(const DetectionScore& s, Detector d);

}  // namespace synguard
