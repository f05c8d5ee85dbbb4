#include "synguard/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "synguard/error.hpp"
#include "synguard/remote.hpp"

namespace synguard {

namespace {

void require_nonempty(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw InvalidArgument("metrics need at least one positive and one negative");
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

RocCurve roc_and_auc(std::span<const double> pos, std::span<const double> neg) {
  require_nonempty(pos, neg);
  std::vector<std::pair<double, bool>> all;
  all.reserve(pos.size() + neg.size());
  for (double s : pos) all.emplace_back(s, true);
  for (double s : neg) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  const auto P = static_cast<double>(pos.size());
  const auto N = static_cast<double>(neg.size());
  RocCurve roc;
  roc.points.push_back({0.0, 0.0});
  std::uint64_t tp = 0, fp = 0;
  // Twice the area in units of one (pos, neg) pair, kept integral.
  unsigned __int128 twice_area = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::uint64_t dp = 0, dn = 0;
    const double s = all[i].first;
    for (; i < all.size() && all[i].first == s; ++i) (all[i].second ? dp : dn) += 1;
    twice_area += static_cast<unsigned __int128>(dn) * (2 * tp + dp);
    tp += dp;
    fp += dn;
    roc.points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P});
  }
  roc.auc = static_cast<double>(twice_area) / (2.0 * P * N);
  return roc;
}

ThresholdChoice evaluate_threshold(std::span<const double> pos, std::span<const double> neg, double tau) {
  require_nonempty(pos, neg);
  const auto tp = static_cast<double>(std::count_if(pos.begin(), pos.end(), [&](double s) { return classify(s, tau); }));
  const auto fp = static_cast<double>(std::count_if(neg.begin(), neg.end(), [&](double s) { return classify(s, tau); }));
  const double fn = static_cast<double>(pos.size()) - tp;
  ThresholdChoice c;
  c.tau = tau;
  c.tpr = tp / static_cast<double>(pos.size());
  c.fpr = fp / static_cast<double>(neg.size());
  c.f1 = tp > 0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
  return c;
}

ThresholdChoice best_threshold_f1(std::span<const double> pos, std::span<const double> neg) {
  require_nonempty(pos, neg);
  std::vector<double> distinct(pos.begin(), pos.end());
  distinct.insert(distinct.end(), neg.begin(), neg.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> candidates;
  candidates.push_back(std::nextafter(distinct.front(), -std::numeric_limits<double>::infinity()));
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
    candidates.push_back(distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0);
  candidates.push_back(distinct.back());

  ThresholdChoice best = evaluate_threshold(pos, neg, candidates.front());
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const ThresholdChoice c = evaluate_threshold(pos, neg, candidates[i]);
    if (c.f1 > best.f1 || (c.f1 == best.f1 && c.fpr < best.fpr)) best = c;
  }
  return best;
}

double perplexity(const LanguageModel& model, std::span<const TokenId> tokens,
                  std::span<const TokenId> context) {
  if (tokens.empty()) throw InvalidArgument("perplexity of an empty sequence");
  std::vector<TokenId> prefix(context.begin(), context.end());
  prefix.reserve(context.size() + tokens.size());
  // Geometric mean of inverse probabilities, pivoted on the first term so a
  // constant sequence of values returns that value exactly.
  double pivot = 0.0, log_pivot = 0.0, shifted = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const LogitVector logits = model.next_logits(prefix);
    if (tokens[i] >= static_cast<std::size_t>(logits.size())) throw InvalidArgument("token id outside vocabulary");
    const double top = logits.maxCoeff();
    const double z = (logits.array() - top).exp().sum();
    const double inv_p = z / std::exp(logits[tokens[i]] - top);
    if (!std::isfinite(inv_p)) throw InvalidArgument("perplexity: token has zero probability");
    if (i == 0) {
      pivot = inv_p;
      log_pivot = std::log(inv_p);
    } else {
      shifted += std::log(inv_p) - log_pivot;
    }
    prefix.push_back(tokens[i]);
  }
  return pivot * std::exp(shifted / static_cast<double>(tokens.size()));
}

void ExperimentConfig::validate() const {
  if (corpus.empty()) throw InvalidArgument("config: corpus path is required");
  if (synonyms.empty()) throw InvalidArgument("config: synonyms path is required");
  if (vocab_size < 3) throw InvalidArgument("config: vocab_size must be at least 3");
  if (order < 1) throw InvalidArgument("config: order must be at least 1");
  if (!(alpha > 0.0)) throw InvalidArgument("config: alpha must be positive");
  if (m < 1 || m > 30) throw InvalidArgument("config: m must lie in 1..30");
  if (window < 1) throw InvalidArgument("config: window must be at least 1");
  semantic.validate();
  gen_params().validate();
  attack.validate();
  if (n_pos < 1 || n_neg < 1) throw InvalidArgument("config: n_pos and n_neg must be at least 1");
  if (workers < 1) throw InvalidArgument("config: workers must be at least 1");
}

GenParams ExperimentConfig::gen_params() const {
  GenParams p;
  p.max_tokens = length;
  p.min_tokens = length;
  p.temperature = temperature;
  p.delta = delta;
  p.g_scale = g_scale;
  p.hybrid_tournament = hybrid_tournament;
  return p;
}

void ExperimentConfig::apply_quick() {
  n_pos = n_neg = 50;
  length = 100;
}

namespace {

std::string_view to_string(NegativeSource s) { return s == NegativeSource::human ? "human" : "base"; }

NegativeSource parse_negatives(std::string_view s) {
  if (s == "human") return NegativeSource::human;
  if (s == "base") return NegativeSource::base;
  throw InvalidArgument("negatives must be 'human' or 'base'");
}

template <typename T>
void get_if(const Json& j, const char* name, T& out) {
  if (!j.contains(name)) return;
  try {
    out = j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config field '") + name + "': " + e.what());
  }
}

}  // namespace

Json to_json(const ExperimentConfig& c) {
  Json j{{"corpus", c.corpus},
         {"corpus_format", c.corpus_format == CorpusFormat::plain ? "plain" : "jsonl"},
         {"synonyms", c.synonyms},
         {"model", c.model},
         {"key", c.key},
         {"remote", c.remote},
         {"vocab_size", c.vocab_size},
         {"order", c.order},
         {"alpha", c.alpha},
         {"m", c.m},
         {"window", c.window},
         {"d", c.semantic.d},
         {"gamma", c.semantic.gamma},
         {"beta", c.semantic.beta},
         {"prompt_len", c.prompt_len},
         {"regime", to_string(c.regime)},
         {"delta", c.delta},
         {"g_scale", c.g_scale},
         {"temperature", c.temperature},
         {"length", c.length},
         {"hybrid_tournament", c.hybrid_tournament},
         {"attack", to_json(c.attack)},
         {"n_pos", c.n_pos},
         {"n_neg", c.n_neg},
         {"negatives", to_string(c.negatives)},
         {"tau", c.tau ? Json(*c.tau) : Json(nullptr)},
         {"seed", c.seed},
         {"workers", c.workers}};
  return j;
}

ExperimentConfig experiment_config_from_json(const Json& j, ExperimentConfig c) {
  reject_unknown_keys(j,
                      {"corpus", "corpus_format", "synonyms", "model", "key", "remote", "vocab_size", "order",
                       "alpha", "m", "window", "d", "gamma", "beta", "prompt_len", "regime", "delta", "g_scale",
                       "temperature", "length", "hybrid_tournament", "attack", "n_pos", "n_neg", "negatives",
                       "tau", "seed", "workers"},
                      "config");
  get_if(j, "corpus", c.corpus);
  if (j.contains("corpus_format")) {
    const std::string f = j.at("corpus_format").get<std::string>();
    if (f != "plain" && f != "jsonl") throw FormatError("config: corpus_format must be plain or jsonl");
    c.corpus_format = f == "plain" ? CorpusFormat::plain : CorpusFormat::jsonl;
  }
  get_if(j, "synonyms", c.synonyms);
  get_if(j, "model", c.model);
  get_if(j, "key", c.key);
  get_if(j, "remote", c.remote);
  get_if(j, "vocab_size", c.vocab_size);
  get_if(j, "order", c.order);
  get_if(j, "alpha", c.alpha);
  get_if(j, "m", c.m);
  get_if(j, "window", c.window);
  get_if(j, "d", c.semantic.d);
  get_if(j, "gamma", c.semantic.gamma);
  get_if(j, "beta", c.semantic.beta);
  get_if(j, "prompt_len", c.prompt_len);
  if (j.contains("regime")) c.regime = parse_regime(j.at("regime").get<std::string>());
  get_if(j, "delta", c.delta);
  get_if(j, "g_scale", c.g_scale);
  get_if(j, "temperature", c.temperature);
  get_if(j, "length", c.length);
  get_if(j, "hybrid_tournament", c.hybrid_tournament);
  if (j.contains("attack")) c.attack = attack_spec_from_json(j.at("attack"));
  get_if(j, "n_pos", c.n_pos);
  get_if(j, "n_neg", c.n_neg);
  if (j.contains("negatives")) c.negatives = parse_negatives(j.at("negatives").get<std::string>());
  if (j.contains("tau")) {
    if (j.at("tau").is_null())
      c.tau.reset();
    else
      c.tau = j.at("tau").get<double>();
  }
  get_if(j, "seed", c.seed);
  get_if(j, "workers", c.workers);
  return c;
}

Json to_json(const EvalReport& r, bool include_wall_time) {
  Json cfg = to_json(r.config);
  cfg.erase("workers");  // does not affect results
  Json roc = Json::array();
  for (const auto& p : r.roc.points) roc.push_back(Json::array({p.fpr, p.tpr}));
  Json samples = Json::array();
  for (const auto& s : r.per_sample) {
    Json o{{"sample_id", s.sample_id},
           {"label", s.positive ? "watermarked" : "reference"},
           {"T", s.score.length},
           {"s_g", s.score.s_g},
           {"s_semantic", s.score.s_semantic},
           {"s_hybrid", s.score.s_hybrid},
           {"score", s.value}};
    if (s.insert_at) o["insert_at"] = *s.insert_at;
    samples.push_back(std::move(o));
  }
  Json j{{"config", cfg},
         {"regime", to_string(r.config.regime)},
         {"detector", to_string(r.detector)},
         {"attack", to_json(r.config.attack)},
         {"key_fingerprint", r.key_fingerprint},
         {"vocab_tag", r.vocab_tag},
         {"n_pos", r.config.n_pos},
         {"n_neg", r.config.n_neg},
         {"tpr", r.best.tpr},
         {"fpr", r.best.fpr},
         {"f1", r.best.f1},
         {"auc", r.roc.auc},
         {"best_threshold", r.best.tau}};
  if (r.at_tau)
    j["at_tau"] = Json{{"tau", r.at_tau->tau}, {"tpr", r.at_tau->tpr}, {"fpr", r.at_tau->fpr}, {"f1", r.at_tau->f1}};
  j["mean_score_pos"] = r.mean_score_pos;
  j["mean_score_neg"] = r.mean_score_neg;
  j["mean_s_g_pos"] = r.mean_s_g_pos;
  j["mean_s_semantic_pos"] = r.mean_s_semantic_pos;
  j["mean_s_hybrid_pos"] = r.mean_s_hybrid_pos;
  j["mean_ppl_watermarked"] = r.mean_ppl_watermarked;
  j["mean_ppl_reference"] = r.mean_ppl_reference;
  j["roc_points"] = std::move(roc);
  j["per_sample"] = std::move(samples);
  if (include_wall_time && r.wall_time_seconds) j["wall_time_seconds"] = *r.wall_time_seconds;
  return j;
}

std::string roc_csv(const RocCurve& roc) {
  std::ostringstream out;
  out << std::setprecision(17) << "fpr,tpr\n";
  for (const auto& p : roc.points) out << p.fpr << ',' << p.tpr << '\n';
  return out.str();
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::size_t failed_index = n;
  std::string failed_what;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failed_what = e.what();
        }
        failed = true;
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(body);
    for (auto& t : threads) t.join();
  }
  if (failed) throw Error("sample " + std::to_string(failed_index) + ": " + failed_what);
}

Experiment::Experiment(const ExperimentConfig& config) : resources_(config) {
  config.validate();
  const auto docs = load_corpus(config.corpus, config.corpus_format);
  if (config.model.empty()) {
    vocab_ = build_vocab(docs, config.vocab_size);
    std::vector<TokenSequence> train;
    train.reserve(docs.size());
    for (const auto& d : docs) {
      train.push_back(tokenize(d.text, vocab_));
      train.back().ids.push_back(vocab_.eos_id());
    }
    ngram_ = std::make_unique<NgramModel>(train_ngram(train, vocab_, config.order, config.alpha));
  } else {
    ngram_ = std::make_unique<NgramModel>(NgramModel::load(config.model));
    vocab_ = ngram_->vocabulary();
  }
  if (!config.remote.empty()) remote_ = connect_remote(config.remote, vocab_);

  key_ = config.key.empty() ? WatermarkKey::from_seed(config.seed, config.m, config.window)
                            : load_key(config.key, config.m, config.window);
  synonyms_ = SynonymTable::load(config.synonyms, vocab_);
  const auto canonical = synonyms_.canonical_map();
  semantic_ = std::make_unique<SemanticModel>(key_, config.semantic, vocab_.size(), canonical);

  // Sample order is a seeded permutation of the documents long enough to
  // supply a prompt and a full-length reference; the rest form the pool.
  std::vector<std::size_t> eligible, rest;
  std::vector<TokenSequence> tokens;
  tokens.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    tokens.push_back(tokenize(docs[i].text, vocab_));
    (tokens[i].size() >= config.prompt_len + config.length ? eligible : rest).push_back(i);
  }
  Rng rng(derive_seed(config.seed, 0, 4));
  rng.shuffle(eligible.begin(), eligible.end());
  const std::size_t need = std::max(config.n_pos, config.n_neg);
  if (eligible.size() < need)
    throw InvalidArgument("corpus has " + std::to_string(eligible.size()) + " documents of at least " +
                          std::to_string(config.prompt_len + config.length) + " tokens; " + std::to_string(need) +
                          " needed");
  for (std::size_t k = 0; k < eligible.size(); ++k) {
    const auto& doc = tokens[eligible[k]];
    if (k < need) {
      SplitSample s;
      s.prompt.vocab_tag = s.reference.vocab_tag = vocab_.tag();
      s.prompt.ids.assign(doc.ids.begin(), doc.ids.begin() + static_cast<std::ptrdiff_t>(config.prompt_len));
      s.reference.ids.assign(doc.ids.begin() + static_cast<std::ptrdiff_t>(config.prompt_len),
                             doc.ids.begin() + static_cast<std::ptrdiff_t>(config.prompt_len + config.length));
      samples_.push_back(std::move(s));
    } else {
      rest.push_back(eligible[k]);
    }
  }
  std::sort(rest.begin(), rest.end());
  for (std::size_t i : rest) pool_.push_back(tokens[i]);

  reference_ppl_.resize(samples_.size());
  parallel_for(samples_.size(), config.workers, [&](std::size_t i) {
    reference_ppl_[i] = perplexity(model(), samples_[i].reference.ids, samples_[i].prompt.ids);
  });
}

Experiment::~Experiment() = default;

const LanguageModel& Experiment::model() const {
  return remote_ ? *remote_ : static_cast<const LanguageModel&>(*ngram_);
}

void Experiment::check_resources(const ExperimentConfig& c) const {
  const auto& r = resources_;
  const bool same = c.corpus == r.corpus && c.corpus_format == r.corpus_format && c.synonyms == r.synonyms &&
                    c.model == r.model && c.key == r.key && c.remote == r.remote && c.vocab_size == r.vocab_size &&
                    c.order == r.order && c.alpha == r.alpha && c.m == r.m && c.window == r.window &&
                    c.semantic.d == r.semantic.d && c.semantic.gamma == r.semantic.gamma &&
                    c.semantic.beta == r.semantic.beta && c.prompt_len == r.prompt_len && c.length == r.length &&
                    c.seed == r.seed && std::max(c.n_pos, c.n_neg) <= samples_.size();
  if (!same) throw InvalidArgument("experiment config names different resources than the loaded experiment");
}

const std::vector<Experiment::Generated>& Experiment::generations(const ExperimentConfig& c, Regime regime,
                                                                  std::size_t count, std::uint64_t stream) {
  GenParams base = c.gen_params();
  Json key = to_json(base);
  key["regime"] = to_string(regime);
  key["stream"] = stream;
  key["seed"] = c.seed;
  auto& cached = cache_[key.dump()];
  if (cached.size() >= count) return cached;

  const std::size_t start = cached.size();
  cached.resize(count);
  parallel_for(count - start, c.workers, [&](std::size_t k) {
    const std::size_t i = start + k;
    GenParams p = base;
    p.rng_seed = derive_seed(c.seed, i, stream);
    const auto& prompt = samples_[i].prompt.ids;
    GenerationRecord rec = generate(regime, model(), prompt, key_, *semantic_, p, vocab_.eos_id());
    cached[i].ppl = perplexity(model(), rec.output, prompt);
    cached[i].tokens = std::move(rec.output);
  });
  return cached;
}

EvalReport Experiment::run(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  c.validate();
  check_resources(c);

  EvalReport report;
  report.config = c;
  report.detector = paired_detector(c.regime);
  report.key_fingerprint = key_.fingerprint();
  report.vocab_tag = vocab_.tag();

  const auto& pos_gen = generations(c, c.regime, c.n_pos, 1);
  const std::vector<Generated>* neg_gen = nullptr;
  if (c.negatives == NegativeSource::base) neg_gen = &generations(c, Regime::base, c.n_neg, 3);

  const std::size_t total = c.n_pos + c.n_neg;
  report.per_sample.resize(total);
  parallel_for(total, c.workers, [&](std::size_t k) {
    SampleScore& s = report.per_sample[k];
    std::vector<TokenId> text;
    if (k < c.n_pos) {
      s.sample_id = k;
      s.positive = true;
      AttackSpec spec = c.attack;
      spec.rng_seed = derive_seed(c.seed ^ c.attack.rng_seed, k, 2);
      AttackResult attacked = apply_attack(pos_gen[k].tokens, spec, synonyms_, &model(), pool_);
      text = std::move(attacked.tokens);
      if (c.attack.kind == AttackKind::copy_paste) s.insert_at = attacked.insert_at;
    } else {
      s.sample_id = k - c.n_pos;
      text = neg_gen ? (*neg_gen)[s.sample_id].tokens : samples_[s.sample_id].reference.ids;
    }
    s.score = hybrid_score(text, key_, *semantic_, c.delta, c.tau.value_or(0.5));
    s.value = select_score(s.score, report.detector);
  });

  std::vector<double> pos, neg, sg, ssem, shyb, ppl_w, ppl_r;
  for (const auto& s : report.per_sample) {
    if (s.positive) {
      pos.push_back(s.value);
      sg.push_back(s.score.s_g);
      ssem.push_back(s.score.s_semantic);
      shyb.push_back(s.score.s_hybrid);
    } else {
      neg.push_back(s.value);
    }
  }
  for (std::size_t i = 0; i < c.n_pos; ++i) ppl_w.push_back(pos_gen[i].ppl);
  for (std::size_t i = 0; i < c.n_neg; ++i) ppl_r.push_back(neg_gen ? (*neg_gen)[i].ppl : reference_ppl_[i]);

  report.roc = roc_and_auc(pos, neg);
  report.best = best_threshold_f1(pos, neg);
  if (c.tau) report.at_tau = evaluate_threshold(pos, neg, *c.tau);
  report.mean_score_pos = mean_of(pos);
  report.mean_score_neg = mean_of(neg);
  report.mean_s_g_pos = mean_of(sg);
  report.mean_s_semantic_pos = mean_of(ssem);
  report.mean_s_hybrid_pos = mean_of(shyb);
  report.mean_ppl_watermarked = mean_of(ppl_w);
  report.mean_ppl_reference = mean_of(ppl_r);
  report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

EvalReport run_experiment(const ExperimentConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  Experiment ex(config);
  EvalReport r = ex.run(config);
  r.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<AblationRow> ablate_delta(Experiment& experiment, const ExperimentConfig& config,
                                      std::span<const double> deltas) {
  if (deltas.empty()) throw InvalidArgument("ablation needs at least one delta");
  std::vector<AblationRow> rows;
  for (double d : deltas) {
    ExperimentConfig c = config;
    c.regime = Regime::synguard;
    c.delta = d;
    rows.push_back({d, experiment.run(c)});
  }
  return rows;
}

Json ablation_to_json(std::span<const AblationRow> rows, bool include_wall_time) {
  Json table = Json::array();
  Json reports = Json::array();
  for (const auto& row : rows) {
    table.push_back(Json{{"delta", row.delta},
                         {"tpr", row.report.best.tpr},
                         {"fpr", row.report.best.fpr},
                         {"f1", row.report.best.f1},
                         {"auc", row.report.roc.auc}});
    reports.push_back(to_json(row.report, include_wall_time));
  }
  return Json{{"table", table}, {"reports", reports}};
}

}  // namespace synguard
