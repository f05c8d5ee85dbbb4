#pragma once

// Detection metrics and the experiment harness: sample construction,
// generation, attack, scoring and aggregation into a report.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synguard/attacks.hpp"
#include "synguard/corpus.hpp"
#include "synguard/detect.hpp"
#include "synguard/generate.hpp"
#include "synguard/lm.hpp"
#include "synguard/records.hpp"
#include "synguard/semantic.hpp"

namespace synguard {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
  double auc = 0.0;
};

/// Threshold sweep over the distinct scores, highest first. AUC is the
/// trapezoidal area, equal to Pr(pos > neg) + Pr(pos == neg) / 2.
RocCurve roc_and_auc(std::span<const double> pos, std::span<const double> neg);

struct ThresholdChoice {
  double tau = 0.0;
  double f1 = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

/// Rates of the rule score > tau.
ThresholdChoice evaluate_threshold(std::span<const double> pos, std::span<const double> neg, double tau);

/// Best F1 over thresholds just below the minimum, at midpoints of adjacent
/// distinct scores, and at the maximum. Ties: lower FPR, then lower tau.
ThresholdChoice best_threshold_f1(std::span<const double> pos, std::span<const double> neg);

/// exp(mean negative log-likelihood of `tokens`), each token conditioned on
/// `context` followed by the tokens before it.
double perplexity(const LanguageModel& model, std::span<const TokenId> tokens,
                  std::span<const TokenId> context = {});

enum class NegativeSource { human, base };

struct ExperimentConfig {
  // Resources.
  std::string corpus;
  CorpusFormat corpus_format = CorpusFormat::plain;
  std::string synonyms;
  std::string model;   // trained n-gram file; empty trains from the corpus
  std::string key;     // key file; empty derives the key from `seed`
  std::string remote;  // logit provider endpoint; empty uses the n-gram
  std::size_t vocab_size = 4096;
  std::size_t order = 3;
  double alpha = 0.1;
  int m = 4;
  int window = 4;
  SemanticParams semantic;
  std::size_t prompt_len = 200;

  // Run.
  Regime regime = Regime::synguard;
  double delta = 0.7;
  double g_scale = 4.0;
  double temperature = 1.0;
  std::size_t length = 200;
  bool hybrid_tournament = false;
  AttackSpec attack;
  std::size_t n_pos = 200;
  std::size_t n_neg = 200;
  NegativeSource negatives = NegativeSource::human;
  std::optional<double> tau;
  std::uint64_t seed = 42;
  std::size_t workers = 1;

  void validate() const;
  /// Generation parameters shared by every sample (rng_seed left at 0).
  GenParams gen_params() const;
  void apply_quick();
};

Json to_json(const ExperimentConfig& c);
/// Missing fields keep defaults; unknown fields are a FormatError.
ExperimentConfig experiment_config_from_json(const Json& j, ExperimentConfig base = {});

struct SampleScore {
  std::size_t sample_id = 0;
  bool positive = false;
  DetectionScore score;
  double value = 0.0;  // the paired detector's statistic
  std::optional<std::size_t> insert_at;
};

struct EvalReport {
  ExperimentConfig config;
  Detector detector = Detector::hybrid;
  std::string key_fingerprint;
  std::string vocab_tag;
  RocCurve roc;
  ThresholdChoice best;
  std::optional<ThresholdChoice> at_tau;
  double mean_score_pos = 0.0;
  double mean_score_neg = 0.0;
  double mean_s_hybrid_pos = 0.0;
  double mean_s_g_pos = 0.0;
  double mean_s_semantic_pos = 0.0;
  double mean_ppl_watermarked = 0.0;
  double mean_ppl_reference = 0.0;
  std::vector<SampleScore> per_sample;
  std::optional<double> wall_time_seconds;
};

Json to_json(const EvalReport& r, bool include_wall_time = true);
/// "fpr,tpr" header then one point per line.
std::string roc_csv(const RocCurve& roc);

/// Loaded resources plus a cache of generated samples, so runs that differ
/// only in attack or detector settings reuse their generations.
class Experiment {
 public:
  explicit Experiment(const ExperimentConfig& config);
  ~Experiment();
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  /// `config` must name the same resources as the constructor's.
  EvalReport run(const ExperimentConfig& config);

  const Vocabulary& vocabulary() const { return vocab_; }
  const LanguageModel& model() const;
  const NgramModel& ngram() const { return *ngram_; }
  const WatermarkKey& key() const { return key_; }
  const SemanticModel& semantic() const { return *semantic_; }
  const SynonymTable& synonyms() const { return synonyms_; }
  std::span<const SplitSample> samples() const { return samples_; }
  std::span<const TokenSequence> pool() const { return pool_; }

 private:
  struct Generated {
    std::vector<TokenId> tokens;
    double ppl = 0.0;
  };
  const std::vector<Generated>& generations(const ExperimentConfig& c, Regime regime, std::size_t count,
                                            std::uint64_t stream);
  void check_resources(const ExperimentConfig& c) const;

  ExperimentConfig resources_;
  Vocabulary vocab_;
  std::unique_ptr<NgramModel> ngram_;
  std::unique_ptr<LanguageModel> remote_;
  WatermarkKey key_;
  SynonymTable synonyms_;
  std::unique_ptr<SemanticModel> semantic_;
  std::vector<SplitSample> samples_;
  std::vector<double> reference_ppl_;
  std::vector<TokenSequence> pool_;
  std::map<std::string, std::vector<Generated>> cache_;
};

EvalReport run_experiment(const ExperimentConfig& config);

struct AblationRow {
  double delta = 0.0;
  EvalReport report;
};

/// One run per delta on the synguard regime with the same master seed.
std::vector<AblationRow> ablate_delta(Experiment& experiment, const ExperimentConfig& config,
                                      std::span<const double> deltas);
Json ablation_to_json(std::span<const AblationRow> rows, bool include_wall_time = true);

/// Run fn(i) for i in [0, n) on `workers` threads. The first failure is
/// rethrown as Error("sample i: ...") once all threads stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace synguard
