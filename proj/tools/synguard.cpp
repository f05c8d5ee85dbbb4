// synguard: command-line front end for training, key generation, watermarked
// generation, attacks, detection and evaluation.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "synguard/attacks.hpp"
#include "synguard/corpus.hpp"
#include "synguard/detect.hpp"
#include "synguard/error.hpp"
#include "synguard/eval.hpp"
#include "synguard/generate.hpp"
#include "synguard/lm.hpp"
#include "synguard/prf.hpp"
#include "synguard/records.hpp"
#include "synguard/remote.hpp"
#include "synguard/semantic.hpp"

namespace fs = std::filesystem;
using namespace synguard;

namespace {

#ifndef SYNGUARD_DATA_DIR
#define SYNGUARD_DATA_DIR "data"
#endif

const std::string kDefaultCorpus = std::string(SYNGUARD_DATA_DIR) + "/corpus.txt";
const std::string kDefaultSynonyms = std::string(SYNGUARD_DATA_DIR) + "/synonyms.tsv";

/// Raised for bad flag values discovered after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string corpus = kDefaultCorpus;
  std::string format = "plain";
  std::string synonyms = kDefaultSynonyms;
  std::string model;
  std::string key;
  std::string remote;
  std::string input;
  std::string out;
  std::string config;
  std::string prompts;
  std::string regime = "synguard";
  std::string attack = "none";
  std::string negatives = "human";
  ExperimentConfig defaults;
  double delta = defaults.delta;
  double g_scale = defaults.g_scale;
  double temp = defaults.temperature;
  int m = defaults.m;
  int window = defaults.window;
  int d = defaults.semantic.d;
  double gamma = defaults.semantic.gamma;
  double beta = defaults.semantic.beta;
  std::size_t max_tokens = defaults.length;
  std::size_t prompt_len = defaults.prompt_len;
  std::size_t n = 1;
  std::size_t n_pos = defaults.n_pos;
  std::size_t n_neg = defaults.n_neg;
  std::size_t vocab_size = defaults.vocab_size;
  std::size_t order = defaults.order;
  double alpha = defaults.alpha;
  double epsilon = 0.0;
  double ratio = 0.0;
  double lex_div = 0.0;
  double order_div = 0.0;
  double fidelity_q = 1.0;
  std::size_t reorder_window = AttackSpec{}.reorder_window;
  double tau = 0.5;
  std::uint64_t seed = defaults.seed;
  std::size_t workers = 1;
  bool quick = false;
  bool hybrid_tournament = false;
  std::vector<double> deltas{0.0, 0.1, 0.3, 0.5, 0.7, 1.0};
};

void echo_config(const Json& j) { std::cout << "config " << j.dump() << std::endl; }

std::ofstream open_out(const fs::path& path) {
  if (path.empty()) throw UsageError("--out is required");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_file(const fs::path& path, const std::string& contents) {
  auto out = open_out(path);
  out << contents;
  if (!out) throw Error("failed writing " + path.string());
}

CorpusFormat corpus_format(const std::string& f) {
  if (f == "plain") return CorpusFormat::plain;
  if (f == "jsonl") return CorpusFormat::jsonl;
  throw UsageError("--format must be plain or jsonl");
}

template <typename F>
auto as_usage(F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

WatermarkKey require_key(const Options& o) {
  if (o.key.empty()) throw UsageError("--key FILE is required (create one with 'synguard keygen')");
  return load_key(o.key, o.m, o.window);
}

NgramModel require_model(const Options& o) {
  if (o.model.empty()) throw UsageError("--model FILE is required (create one with 'synguard train-lm')");
  return NgramModel::load(o.model);
}

SemanticParams semantic_params(const Options& o) {
  SemanticParams p{o.d, o.gamma, o.beta};
  as_usage([&] { p.validate(); return 0; });
  return p;
}

SemanticModel make_semantic(const Options& o, const WatermarkKey& key, const Vocabulary& vocab) {
  const SynonymTable table = SynonymTable::load(o.synonyms, vocab);
  const auto canonical = table.canonical_map();
  return SemanticModel(key, semantic_params(o), vocab.size(), canonical);
}

AttackSpec attack_spec(const Options& o) {
  AttackSpec a;
  a.kind = as_usage([&] { return parse_attack_kind(o.attack); });
  a.epsilon = o.epsilon;
  a.ratio = o.ratio;
  a.lex_div = o.lex_div;
  a.order_div = o.order_div;
  a.fidelity_q = o.fidelity_q;
  a.reorder_window = o.reorder_window;
  a.rng_seed = o.seed;
  as_usage([&] { a.validate(); return 0; });
  return a;
}

/// Token sequences under test: generation/attack JSONL records or plain text
/// with one blank-line-separated block per sample.
struct Sample {
  std::string id;
  std::string regime;
  std::vector<TokenId> tokens;
};

std::vector<Sample> read_samples(const fs::path& path, const Vocabulary& vocab, const std::string& default_regime) {
  std::vector<Sample> out;
  const std::string contents = read_file(path);
  const bool jsonl = path.extension() == ".jsonl" || path.extension() == ".json";
  if (jsonl) {
    std::istringstream in(contents);
    const auto records = read_jsonl(in);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& j = records[i];
      if (!j.contains("output_ids")) throw FormatError(path.string() + ": record " + std::to_string(i + 1) + " has no output_ids");
      Sample s;
      s.id = j.contains("sample_id") ? j.at("sample_id").dump() : std::to_string(i);
      if (s.id.size() >= 2 && s.id.front() == '"') s.id = s.id.substr(1, s.id.size() - 2);
      s.regime = j.value("regime", default_regime);
      s.tokens = j.at("output_ids").get<std::vector<TokenId>>();
      for (TokenId t : s.tokens)
        if (t >= vocab.size()) throw FormatError(path.string() + ": token id " + std::to_string(t) + " outside vocabulary");
      out.push_back(std::move(s));
    }
  } else {
    const auto docs = parse_corpus(contents, CorpusFormat::plain);
    for (std::size_t i = 0; i < docs.size(); ++i)
      out.push_back({std::to_string(i), default_regime, tokenize(docs[i].text, vocab).ids});
  }
  return out;
}

int cmd_train_lm(const Options& o) {
  if (o.order < 1) throw UsageError("--order must be at least 1");
  if (!(o.alpha > 0)) throw UsageError("--alpha must be positive");
  if (o.vocab_size < 3) throw UsageError("--vocab-size must be at least 3");
  echo_config(Json{{"corpus", o.corpus}, {"format", o.format}, {"vocab_size", o.vocab_size},
                   {"order", o.order}, {"alpha", o.alpha}, {"out", o.out}});
  if (o.out.empty()) throw UsageError("--out is required");
  const auto docs = load_corpus(o.corpus, corpus_format(o.format));
  const Vocabulary vocab = build_vocab(docs, o.vocab_size);
  std::vector<TokenSequence> seqs;
  for (const auto& d : docs) {
    seqs.push_back(tokenize(d.text, vocab));
    seqs.back().ids.push_back(vocab.eos_id());
  }
  const NgramModel model = train_ngram(seqs, vocab, o.order, o.alpha);
  if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
  model.save(o.out);
  std::cout << "trained order-" << o.order << " model over " << vocab.size() << " surfaces (tag " << vocab.tag()
            << ") -> " << o.out << "\n";
  return 0;
}

int cmd_keygen(const Options& o, bool seeded) {
  echo_config(Json{{"m", o.m}, {"window", o.window}, {"seeded", seeded}, {"out", o.out}});
  if (o.out.empty()) throw UsageError("--out is required");
  const WatermarkKey key = seeded ? WatermarkKey::from_seed(o.seed, o.m, o.window) : WatermarkKey::random(o.m, o.window);
  if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
  save_key(key, o.out);
  std::cout << "key fingerprint " << key.fingerprint() << " -> " << o.out << "\n";
  return 0;
}

int cmd_generate(const Options& o) {
  const Regime regime = as_usage([&] { return parse_regime(o.regime); });
  GenParams base;
  base.max_tokens = o.max_tokens;
  base.temperature = o.temp;
  base.delta = o.delta;
  base.g_scale = o.g_scale;
  base.hybrid_tournament = o.hybrid_tournament;
  as_usage([&] { base.validate(); return 0; });
  echo_config(Json{{"model", o.model}, {"key", o.key}, {"synonyms", o.synonyms}, {"remote", o.remote},
                   {"prompts", o.prompts}, {"corpus", o.prompts.empty() ? o.corpus : ""}, {"n", o.n},
                   {"prompt_len", o.prompt_len}, {"regime", to_string(regime)}, {"m", o.m}, {"window", o.window},
                   {"d", o.d}, {"gamma", o.gamma}, {"beta", o.beta}, {"params", to_json(base)}, {"seed", o.seed},
                   {"out", o.out}});
  auto out = open_out(o.out);
  const NgramModel ngram = require_model(o);
  const Vocabulary& vocab = ngram.vocabulary();
  const WatermarkKey key = require_key(o);
  const SemanticModel semantic = make_semantic(o, key, vocab);
  std::unique_ptr<RemoteModel> remote;
  if (!o.remote.empty()) remote = connect_remote(o.remote, vocab);
  const LanguageModel& model = remote ? static_cast<const LanguageModel&>(*remote) : ngram;

  std::vector<std::vector<TokenId>> prompts;
  if (!o.prompts.empty()) {
    for (const auto& d : parse_corpus(read_file(o.prompts), CorpusFormat::plain))
      prompts.push_back(tokenize(d.text, vocab).ids);
  } else {
    const auto docs = load_corpus(o.corpus, corpus_format(o.format));
    for (const auto& d : docs) {
      if (prompts.size() == o.n) break;
      if (auto s = split_sample(d, vocab, o.prompt_len, 1)) prompts.push_back(s->prompt.ids);
    }
  }
  if (prompts.empty()) throw Error("no prompts available");
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    GenParams p = base;
    p.rng_seed = derive_seed(o.seed, i, 1);
    const GenerationRecord rec = generate(regime, model, prompts[i], key, semantic, p, vocab.eos_id());
    Json j = to_json(rec);
    j["sample_id"] = std::to_string(i);
    out << to_jsonl_line(j);
  }
  std::cout << "wrote " << prompts.size() << " records -> " << o.out << "\n";
  return 0;
}

int cmd_attack(const Options& o) {
  const AttackSpec spec = attack_spec(o);
  echo_config(Json{{"input", o.input}, {"model", o.model}, {"synonyms", o.synonyms}, {"corpus", o.corpus},
                   {"attack", to_json(spec)}, {"out", o.out}});
  if (o.input.empty()) throw UsageError("--input is required");
  auto out = open_out(o.out);
  const NgramModel ngram = require_model(o);
  const Vocabulary& vocab = ngram.vocabulary();
  const SynonymTable table = SynonymTable::load(o.synonyms, vocab);
  std::vector<TokenSequence> pool;
  if (spec.kind == AttackKind::copy_paste)
    for (const auto& d : load_corpus(o.corpus, corpus_format(o.format))) pool.push_back(tokenize(d.text, vocab));

  std::istringstream in(read_file(o.input));
  const auto records = read_jsonl(in);
  for (std::size_t i = 0; i < records.size(); ++i) {
    Json j = records[i];
    if (!j.contains("output_ids")) throw FormatError(o.input + ": record " + std::to_string(i + 1) + " has no output_ids");
    const auto tokens = j.at("output_ids").get<std::vector<TokenId>>();
    AttackSpec s = spec;
    s.rng_seed = derive_seed(o.seed, i, 2);
    const AttackResult res = apply_attack(tokens, s, table, &ngram, pool);
    j["output_ids"] = res.tokens;
    j["attack"] = to_json(spec);
    if (res.insert_at) j["insert_at"] = *res.insert_at;
    out << to_jsonl_line(j);
  }
  std::cout << "attacked " << records.size() << " records -> " << o.out << "\n";
  return 0;
}

int cmd_detect(const Options& o) {
  if (!(o.delta >= 0 && o.delta <= 1)) throw UsageError("--delta must lie in [0,1]");
  echo_config(Json{{"input", o.input}, {"model", o.model}, {"key", o.key}, {"synonyms", o.synonyms},
                   {"m", o.m}, {"window", o.window}, {"d", o.d}, {"gamma", o.gamma}, {"beta", o.beta},
                   {"delta", o.delta}, {"tau", o.tau}, {"regime", o.regime}, {"out", o.out}});
  if (o.input.empty()) throw UsageError("--input is required");
  as_usage([&] { return parse_regime(o.regime); });
  auto out = open_out(o.out);
  const NgramModel ngram = require_model(o);
  const Vocabulary& vocab = ngram.vocabulary();
  const WatermarkKey key = require_key(o);
  const SemanticModel semantic = make_semantic(o, key, vocab);
  std::size_t flagged = 0, total = 0;
  for (const auto& s : read_samples(o.input, vocab, o.regime)) {
    if (s.tokens.empty()) continue;
    const DetectionScore score = hybrid_score(s.tokens, key, semantic, o.delta, o.tau);
    const Detector det = paired_detector(as_usage([&] { return parse_regime(s.regime); }));
    DetectionRecord rec{s.id, s.regime, score.s_g, score.s_semantic, score.s_hybrid, score.length};
    Json j = to_json(rec);
    j["verdict"] = classify(select_score(score, det), o.tau);
    out << to_jsonl_line(j);
    flagged += j["verdict"].get<bool>() ? 1 : 0;
    ++total;
  }
  std::cout << "scored " << total << " texts, " << flagged << " above tau -> " << o.out << "\n";
  return 0;
}

ExperimentConfig experiment_config(const Options& o, const CLI::App& sub) {
  ExperimentConfig c;
  c.corpus = o.corpus;
  c.synonyms = o.synonyms;
  if (!o.config.empty()) {
    try {
      c = experiment_config_from_json(Json::parse(read_file(o.config)), c);
    } catch (const nlohmann::json::parse_error& e) {
      throw UsageError(o.config + ": " + e.what());
    } catch (const FormatError& e) {
      throw UsageError(o.config + ": " + e.what());
    }
  }
  auto given = [&](const char* flag) { return sub.count(flag) > 0; };
  if (given("--corpus")) c.corpus = o.corpus;
  if (given("--format")) c.corpus_format = corpus_format(o.format);
  if (given("--synonyms")) c.synonyms = o.synonyms;
  if (given("--model")) c.model = o.model;
  if (given("--key")) c.key = o.key;
  if (given("--remote")) c.remote = o.remote;
  if (given("--vocab-size")) c.vocab_size = o.vocab_size;
  if (given("--order")) c.order = o.order;
  if (given("--alpha")) c.alpha = o.alpha;
  if (given("--m")) c.m = o.m;
  if (given("--window")) c.window = o.window;
  if (given("--d")) c.semantic.d = o.d;
  if (given("--gamma")) c.semantic.gamma = o.gamma;
  if (given("--beta")) c.semantic.beta = o.beta;
  if (given("--prompt-len")) c.prompt_len = o.prompt_len;
  if (given("--regime")) c.regime = as_usage([&] { return parse_regime(o.regime); });
  if (given("--delta")) c.delta = o.delta;
  if (given("--g-scale")) c.g_scale = o.g_scale;
  if (given("--temp")) c.temperature = o.temp;
  if (given("--hybrid-tournament")) c.hybrid_tournament = o.hybrid_tournament;
  if (o.quick) c.apply_quick();
  if (given("--max-tokens")) c.length = o.max_tokens;
  if (given("--n-pos")) c.n_pos = o.n_pos;
  if (given("--n-neg")) c.n_neg = o.n_neg;
  if (given("--negatives")) {
    if (o.negatives != "human" && o.negatives != "base") throw UsageError("--negatives must be human or base");
    c.negatives = o.negatives == "human" ? NegativeSource::human : NegativeSource::base;
  }
  if (given("--tau")) c.tau = o.tau;
  if (given("--seed")) c.seed = o.seed;
  if (given("--workers")) c.workers = o.workers;
  if (given("--attack")) c.attack.kind = as_usage([&] { return parse_attack_kind(o.attack); });
  if (given("--epsilon")) c.attack.epsilon = o.epsilon;
  if (given("--ratio")) c.attack.ratio = o.ratio;
  if (given("--lex-div")) c.attack.lex_div = o.lex_div;
  if (given("--order-div")) c.attack.order_div = o.order_div;
  if (given("--fidelity-q")) c.attack.fidelity_q = o.fidelity_q;
  if (given("--reorder-window")) c.attack.reorder_window = o.reorder_window;
  as_usage([&] { c.validate(); return 0; });
  return c;
}

int cmd_eval(const Options& o, const CLI::App& sub) {
  const ExperimentConfig c = experiment_config(o, sub);
  echo_config(to_json(c));
  if (o.out.empty()) throw UsageError("--out DIR is required");
  const EvalReport r = run_experiment(c);
  write_file(fs::path(o.out) / "report.json", to_json(r).dump(2) + "\n");
  write_file(fs::path(o.out) / "roc.csv", roc_csv(r.roc));
  std::cout << "regime " << to_string(c.regime) << " detector " << to_string(r.detector) << ": auc " << r.roc.auc
            << " f1 " << r.best.f1 << " tpr " << r.best.tpr << " fpr " << r.best.fpr << " tau* " << r.best.tau
            << "\nwrote " << (fs::path(o.out) / "report.json").string() << "\n";
  return 0;
}

int cmd_ablate(const Options& o, const CLI::App& sub) {
  ExperimentConfig c = experiment_config(o, sub);
  c.regime = Regime::synguard;
  for (double d : o.deltas)
    if (!(d >= 0 && d <= 1)) throw UsageError("--deltas values must lie in [0,1]");
  Json echo = to_json(c);
  echo["deltas"] = o.deltas;
  echo_config(echo);
  if (o.out.empty()) throw UsageError("--out DIR is required");
  Experiment ex(c);
  const auto rows = ablate_delta(ex, c, o.deltas);
  write_file(fs::path(o.out) / "ablation.json", ablation_to_json(rows).dump(2) + "\n");
  std::ostringstream table;
  table << "delta,tpr,fpr,f1,auc\n";
  for (const auto& row : rows) {
    table << row.delta << ',' << row.report.best.tpr << ',' << row.report.best.fpr << ',' << row.report.best.f1
          << ',' << row.report.roc.auc << '\n';
    std::ostringstream name;
    name << "roc_delta_" << row.delta << ".csv";
    write_file(fs::path(o.out) / name.str(), roc_csv(row.report.roc));
  }
  write_file(fs::path(o.out) / "ablation.csv", table.str());
  std::cout << table.str() << "wrote " << (fs::path(o.out) / "ablation.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SynGuard text watermarking: generation, attacks, detection and evaluation"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train-lm", "Train the n-gram language model on a corpus");
  auto* keygen = app.add_subcommand("keygen", "Create a watermark key file");
  auto* gen = app.add_subcommand("generate", "Generate text under a watermarking regime (JSONL out)");
  auto* attack = app.add_subcommand("attack", "Apply an attack to generated records (JSONL in/out)");
  auto* detect = app.add_subcommand("detect", "Score texts or JSONL records (JSONL out)");
  auto* eval = app.add_subcommand("eval", "Run a detection experiment (report.json + roc.csv in --out)");
  auto* ablate = app.add_subcommand("ablate", "Sweep the semantic weight delta (ablation.json in --out)");

  auto corpus_opts = [&](CLI::App* s) {
    s->add_option("--corpus", o.corpus, "Corpus file")->capture_default_str();
    s->add_option("--format", o.format, "Corpus format: plain|jsonl")->capture_default_str();
  };
  auto lm_opts = [&](CLI::App* s) {
    s->add_option("--vocab-size", o.vocab_size, "Vocabulary size including <unk> and <eos>")->capture_default_str();
    s->add_option("--order", o.order, "n-gram order")->capture_default_str();
    s->add_option("--alpha", o.alpha, "Add-alpha smoothing constant")->capture_default_str();
  };
  auto key_opts = [&](CLI::App* s) {
    s->add_option("--key", o.key, "Key file (64 hex characters)");
    s->add_option("--m", o.m, "Number of g-functions")->capture_default_str();
    s->add_option("--window", o.window, "Context window for seeds")->capture_default_str();
  };
  auto semantic_opts = [&](CLI::App* s) {
    s->add_option("--synonyms", o.synonyms, "Synonym table")->capture_default_str();
    s->add_option("--d", o.d, "Semantic embedding dimension")->capture_default_str();
    s->add_option("--gamma", o.gamma, "Semantic recency decay")->capture_default_str();
    s->add_option("--beta", o.beta, "Semantic bias sharpness")->capture_default_str();
  };
  auto gen_opts = [&](CLI::App* s) {
    s->add_option("--regime", o.regime, "base|synthid|sir|synguard")->capture_default_str();
    s->add_option("--delta", o.delta, "Semantic weight")->capture_default_str();
    s->add_option("--g-scale", o.g_scale, "Scale of the g-value logits")->capture_default_str();
    s->add_option("--temp", o.temp, "Sampling temperature")->capture_default_str();
    s->add_option("--max-tokens", o.max_tokens, "Tokens per generation")->capture_default_str();
    s->add_option("--prompt-len", o.prompt_len, "Prompt length in tokens")->capture_default_str();
    s->add_flag("--hybrid-tournament", o.hybrid_tournament, "Tournament sampling over the hybrid distribution");
    s->add_option("--remote", o.remote, "Logit provider endpoint (tcp:HOST:PORT or exec:COMMAND)");
  };
  auto attack_opts = [&](CLI::App* s) {
    s->add_option("--attack", o.attack, "none|substitute|copy_paste|paraphrase|back_translate")->capture_default_str();
    s->add_option("--epsilon", o.epsilon, "Substitution ratio")->capture_default_str();
    s->add_option("--ratio", o.ratio, "Copy-paste length multiple")->capture_default_str();
    s->add_option("--lex-div", o.lex_div, "Paraphrase lexical diversity")->capture_default_str();
    s->add_option("--order-div", o.order_div, "Paraphrase order diversity")->capture_default_str();
    s->add_option("--fidelity-q", o.fidelity_q, "Back-translation fidelity")->capture_default_str();
    s->add_option("--reorder-window", o.reorder_window, "Back-translation reorder window")->capture_default_str();
  };
  auto seed_opt = [&](CLI::App* s) { s->add_option("--seed", o.seed, "Random seed")->capture_default_str(); };

  corpus_opts(train);
  lm_opts(train);
  train->add_option("--out", o.out, "Model file to write");

  key_opts(keygen);
  seed_opt(keygen);
  keygen->add_option("--out", o.out, "Key file to write");

  key_opts(gen);
  semantic_opts(gen);
  gen_opts(gen);
  corpus_opts(gen);
  seed_opt(gen);
  gen->add_option("--model", o.model, "Trained model file");
  gen->add_option("--prompts", o.prompts, "Prompt file, one blank-line-separated block per prompt");
  gen->add_option("--n", o.n, "Number of corpus prompts when --prompts is absent")->capture_default_str();
  gen->add_option("--out", o.out, "JSONL file to write");

  attack_opts(attack);
  corpus_opts(attack);
  seed_opt(attack);
  attack->add_option("--synonyms", o.synonyms, "Synonym table")->capture_default_str();
  attack->add_option("--model", o.model, "Trained model file (vocabulary and substitution scorer)");
  attack->add_option("--input", o.input, "Generation JSONL");
  attack->add_option("--out", o.out, "JSONL file to write");

  key_opts(detect);
  semantic_opts(detect);
  detect->add_option("--model", o.model, "Trained model file (vocabulary)");
  detect->add_option("--input", o.input, "Text file (blank-line-separated samples) or JSONL records");
  detect->add_option("--delta", o.delta, "Semantic weight")->capture_default_str();
  detect->add_option("--tau", o.tau, "Decision threshold")->capture_default_str();
  detect->add_option("--regime", o.regime, "Regime assumed for plain text inputs")->capture_default_str();
  detect->add_option("--out", o.out, "JSONL file to write");

  for (auto* s : {eval, ablate}) {
    corpus_opts(s);
    lm_opts(s);
    key_opts(s);
    semantic_opts(s);
    gen_opts(s);
    attack_opts(s);
    seed_opt(s);
    s->add_option("--config", o.config, "Experiment config JSON; flags override it");
    s->add_option("--model", o.model, "Trained model file (default: train from --corpus)");
    s->add_option("--n-pos", o.n_pos, "Watermarked samples")->capture_default_str();
    s->add_option("--n-neg", o.n_neg, "Reference samples")->capture_default_str();
    s->add_option("--negatives", o.negatives, "human|base")->capture_default_str();
    s->add_option("--tau", o.tau, "Also report rates at this threshold");
    s->add_option("--workers", o.workers, "Worker threads")->capture_default_str();
    s->add_flag("--quick", o.quick, "n = 50/50, T = 100");
    s->add_option("--out", o.out, "Output directory");
  }
  ablate->add_option("--deltas", o.deltas, "Semantic weights to sweep")->delimiter(',')->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return cmd_train_lm(o);
    if (keygen->parsed()) return cmd_keygen(o, keygen->count("--seed") > 0);
    if (gen->parsed()) return cmd_generate(o);
    if (attack->parsed()) return cmd_attack(o);
    if (detect->parsed()) return cmd_detect(o);
    if (eval->parsed()) return cmd_eval(o, *eval);
    if (ablate->parsed()) return cmd_ablate(o, *ablate);
  } catch (const UsageError& e) {
    std::cerr << "synguard: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "synguard: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
