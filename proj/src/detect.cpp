#include "synguard/detect.hpp"

#include <cmath>
#include <vector>

namespace synguard {

double g_score(std::span<const TokenId> tokens, const WatermarkKey& key) {
  key.validate();
  std::vector<ContextSeed> seeds(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) seeds[i] = context_seed(tokens, i, key);
  return mean_g_value(tokens.size(), key.m,
                      [&](std::size_t i, int l) { return g_value(l, tokens[i], seeds[i], key); });
}

double semantic_score(std::span<const TokenId> tokens, const SemanticModel& semantic) {
  if (tokens.empty()) throw InvalidArgument("cannot score an empty sequence");
  SemanticModel::Accumulator acc(semantic);
  double sum = 0.0;
  for (TokenId t : tokens) {
    if (t >= semantic.vocab_size()) throw InvalidArgument("token id outside vocabulary");
    sum += semantic.bias(t, acc.embedding());
    acc.push(t);
  }
  return sum / static_cast<double>(tokens.size());
}

DetectionScore hybrid_score(std::span<const TokenId> tokens, const WatermarkKey& key,
                            const SemanticModel& semantic, double delta, double tau) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw InvalidArgument("delta must lie in [0,1]");
  DetectionScore s;
  s.length = tokens.size();
  s.delta = delta;
  s.threshold = tau;
  s.s_g = g_score(tokens, key);
  s.s_semantic = semantic_score(tokens, semantic);
  s.s_hybrid = combine_scores(s.s_g, s.s_semantic, delta);
  s.verdict = classify(s.s_hybrid, tau);
  return s;
}

double hoeffding_fp_bound(double length, double tau) {
  if (!(tau > 0.5)) throw InvalidArgument("Hoeffding bound needs tau > 0.5");
  if (length < 0) throw InvalidArgument("length must be non-negative");
  const double gap = tau - 0.5;
  return std::exp(-2.0 * length * gap * gap);
}

std::string_view to_string(Detector d) {
  switch (d) {
    case Detector::g_value: return "g_score";
    case Detector::semantic: return "semantic";
    case Detector::hybrid: return "hybrid";
  }
  return "?";
}

Detector paired_detector(Regime regime) {
  switch (regime) {
    case Regime::base:
    case Regime::synthid: return Detector::g_value;
    case Regime::sir: return Detector::semantic;
    case Regime::synguard: return Detector::hybrid;
  }
  return Detector::g_value;
}

double select_score(const DetectionScore& s, Detector d) {
  switch (d) {
    case Detector::g_value: return s.s_g;
    case Detector::semantic: return s.s_semantic;
    case Detector::hybrid: return s.s_hybrid;
  }
  return s.s_hybrid;
}

}  // namespace synguard
