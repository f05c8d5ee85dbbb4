#include "synguard/attacks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <utility>
#include <limits>

#include "synguard/error.hpp"

namespace synguard {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    const std::size_t tab = line.find('\t', start);
    const std::size_t end = tab == std::string::npos ? line.size() : tab;
    std::string field = line.substr(start, end - start);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.pop_back();
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.erase(0, 1);
    if (!field.empty()) out.push_back(std::move(field));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

bool punct_surface(const std::string& s) {
  return s.size() == 1 && std::ispunct(static_cast<unsigned char>(s[0])) && s[0] != '_';
}

void check_unit(double x, const char* name) {
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument(std::string(name) + " must lie in [0,1]");
}

}  // namespace

SynonymTable SynonymTable::parse(std::string_view contents, const Vocabulary& vocab) {
  SynonymTable table;
  table.class_of_.assign(vocab.size(), kNone);
  table.boundary_.resize(vocab.size());
  for (std::size_t t = 0; t < vocab.size(); ++t)
    table.boundary_[t] = punct_surface(vocab.surface(static_cast<TokenId>(t)));

  std::unordered_map<std::string, std::size_t> seen;  // surface -> line
  std::istringstream in{std::string(contents)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_tabs(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    std::vector<TokenId> members;
    for (const auto& f : fields) {
      if (auto [it, inserted] = seen.emplace(f, line_no); !inserted)
        throw FormatError("synonym table line " + std::to_string(line_no) + ": '" + f +
                          "' already listed on line " + std::to_string(it->second));
      if (auto id = vocab.find(f); id && *id != vocab.unk_id() && *id != vocab.eos_id())
        members.push_back(*id);
    }
    if (members.size() < 2) continue;
    const auto cls = static_cast<std::uint32_t>(table.classes_.size());
    for (TokenId t : members) table.class_of_[t] = cls;
    table.classes_.push_back(std::move(members));
  }
  return table;
}

SynonymTable SynonymTable::load(const std::filesystem::path& path, const Vocabulary& vocab) {
  return parse(read_file(path), vocab);
}

std::optional<std::size_t> SynonymTable::class_of(TokenId t) const {
  if (t >= class_of_.size() || class_of_[t] == kNone) return std::nullopt;
  return class_of_[t];
}

TokenId SynonymTable::representative(TokenId t) const {
  const auto cls = class_of(t);
  return cls ? classes_[*cls].front() : t;
}

std::vector<TokenId> SynonymTable::canonical_map() const {
  std::vector<TokenId> out(class_of_.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = representative(static_cast<TokenId>(t));
  return out;
}

std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::substitute: return "substitute";
    case AttackKind::copy_paste: return "copy_paste";
    case AttackKind::paraphrase: return "paraphrase";
    case AttackKind::back_translate: return "back_translate";
  }
  return "?";
}

AttackKind parse_attack_kind(std::string_view name) {
  for (AttackKind k : {AttackKind::none, AttackKind::substitute, AttackKind::copy_paste,
                       AttackKind::paraphrase, AttackKind::back_translate})
    if (name == to_string(k)) return k;
  if (name == "copy-paste") return AttackKind::copy_paste;
  if (name == "back-translate") return AttackKind::back_translate;
  throw InvalidArgument("unknown attack '" + std::string(name) +
                        "' (none|substitute|copy_paste|paraphrase|back_translate)");
}

void AttackSpec::validate() const {
  check_unit(epsilon, "epsilon");
  check_unit(lex_div, "lex_div");
  check_unit(order_div, "order_div");
  check_unit(fidelity_q, "fidelity_q");
  if (!(ratio >= 0.0) || !std::isfinite(ratio)) throw InvalidArgument("ratio must be non-negative");
  if (reorder_window < 1) throw InvalidArgument("reorder_window must be at least 1");
}

std::size_t scaled_count(double x, std::size_t n) {
  const double v = x * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(v - 1e-9 * std::max(1.0, v)));
}

double substitution_log_likelihood(const LanguageModel& scorer, std::span<const TokenId> tokens,
                                   std::size_t pos, TokenId candidate, std::size_t span) {
  std::vector<TokenId> seq(tokens.begin(), tokens.end());
  seq[pos] = candidate;
  const std::size_t end = std::min(seq.size(), pos + std::max<std::size_t>(span, 1));
  double total = 0.0;
  for (std::size_t j = pos; j < end; ++j) {
    const LogitVector lp = log_softmax(scorer.next_logits(std::span<const TokenId>(seq).first(j)));
    total += lp[seq[j]];
  }
  return total;
}

std::vector<TokenId> synonym_substitute(std::span<const TokenId> tokens, const SynonymTable& table,
                                        double epsilon, const LanguageModel* scorer, Rng& rng) {
  check_unit(epsilon, "epsilon");
  std::vector<TokenId> out(tokens.begin(), tokens.end());
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (table.has_class(out[i])) eligible.push_back(i);
  rng.shuffle(eligible.begin(), eligible.end());
  const std::size_t budget = std::min(scaled_count(epsilon, out.size()), eligible.size());
  for (std::size_t k = 0; k < budget; ++k) {
    const std::size_t pos = eligible[k];
    const TokenId original = out[pos];
    std::vector<TokenId> candidates;
    for (TokenId c : table.members(*table.class_of(original)))
      if (c != original) candidates.push_back(c);
    if (scorer == nullptr) {
      out[pos] = candidates[rng.below(candidates.size())];
      continue;
    }
    TokenId best = candidates.front();
    double best_ll = -std::numeric_limits<double>::infinity();
    for (TokenId c : candidates) {
      const double ll = substitution_log_likelihood(*scorer, out, pos, c);
      if (ll > best_ll) {
        best_ll = ll;
        best = c;
      }
    }
    out[pos] = best;
  }
  return out;
}

AttackResult copy_paste(std::span<const TokenId> watermarked, std::span<const TokenSequence> pool,
                        double ratio, Rng& rng) {
  if (!(ratio >= 0.0) || !std::isfinite(ratio)) throw InvalidArgument("ratio must be non-negative");
  const std::size_t need = scaled_count(ratio, watermarked.size());
  AttackResult res;
  if (need == 0) {
    res.tokens.assign(watermarked.begin(), watermarked.end());
    res.insert_at = 0;
    return res;
  }
  std::size_t available = 0;
  for (const auto& s : pool) available += s.size();
  if (available < need)
    throw InvalidArgument("copy_paste: natural pool has " + std::to_string(available) +
                          " tokens, need " + std::to_string(need));

  // A contiguous window of the concatenated pool.
  std::size_t offset = rng.below(available - need + 1);
  std::vector<TokenId> natural;
  natural.reserve(need);
  for (const auto& s : pool) {
    if (natural.size() == need) break;
    if (offset >= s.size()) {
      offset -= s.size();
      continue;
    }
    const std::size_t take = std::min(s.size() - offset, need - natural.size());
    natural.insert(natural.end(), s.ids.begin() + static_cast<std::ptrdiff_t>(offset),
                   s.ids.begin() + static_cast<std::ptrdiff_t>(offset + take));
    offset = 0;
  }

  const std::size_t split = rng.below(need + 1);
  res.tokens.reserve(need + watermarked.size());
  res.tokens.insert(res.tokens.end(), natural.begin(), natural.begin() + static_cast<std::ptrdiff_t>(split));
  res.tokens.insert(res.tokens.end(), watermarked.begin(), watermarked.end());
  res.tokens.insert(res.tokens.end(), natural.begin() + static_cast<std::ptrdiff_t>(split), natural.end());
  res.insert_at = split;
  return res;
}

std::vector<std::vector<TokenId>> split_phrases(std::span<const TokenId> tokens,
                                                const SynonymTable& table) {
  std::vector<std::vector<TokenId>> phrases;
  std::vector<TokenId> cur;
  for (TokenId t : tokens) {
    cur.push_back(t);
    if (table.is_boundary(t)) phrases.push_back(std::exchange(cur, {}));
  }
  if (!cur.empty()) phrases.push_back(std::move(cur));
  return phrases;
}

std::vector<TokenId> paraphrase(std::span<const TokenId> tokens, const SynonymTable& table,
                                double lex_div, double order_div, Rng& rng) {
  check_unit(order_div, "order_div");
  const std::vector<TokenId> lexical = synonym_substitute(tokens, table, lex_div, nullptr, rng);
  auto phrases = split_phrases(lexical, table);
  if (phrases.size() >= 2) {
    std::vector<std::size_t> gaps(phrases.size() - 1);
    std::iota(gaps.begin(), gaps.end(), std::size_t{0});
    rng.shuffle(gaps.begin(), gaps.end());
    const std::size_t swaps = std::min(scaled_count(order_div, gaps.size()), gaps.size());
    for (std::size_t k = 0; k < swaps; ++k) std::swap(phrases[gaps[k]], phrases[gaps[k] + 1]);
  }
  std::vector<TokenId> out;
  out.reserve(lexical.size());
  for (const auto& p : phrases) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<TokenId> back_translate(std::span<const TokenId> tokens, const SynonymTable& table,
                                    double fidelity_q, std::size_t reorder_window, Rng& rng) {
  check_unit(fidelity_q, "fidelity_q");
  if (reorder_window < 1) throw InvalidArgument("reorder_window must be at least 1");
  std::vector<TokenId> out(tokens.begin(), tokens.end());
  // u and the replacement pick are drawn for every token so that runs with
  // different q share their randomness.
  for (auto& t : out) {
    const double u = rng.uniform();
    const std::uint64_t pick = rng.next();
    const auto cls = table.class_of(t);
    if (!cls || u < fidelity_q) continue;
    const auto members = table.members(*cls);
    t = members[pick % members.size()];
  }
  for (std::size_t start = 0; reorder_window > 1 && start < out.size(); start += reorder_window) {
    const std::size_t end = std::min(out.size(), start + reorder_window);
    rng.shuffle(out.begin() + static_cast<std::ptrdiff_t>(start), out.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

AttackResult apply_attack(std::span<const TokenId> tokens, const AttackSpec& spec,
                          const SynonymTable& table, const LanguageModel* scorer,
                          std::span<const TokenSequence> pool) {
  spec.validate();
  Rng rng(spec.rng_seed);
  AttackResult res;
  switch (spec.kind) {
    case AttackKind::none: res.tokens.assign(tokens.begin(), tokens.end()); break;
    case AttackKind::substitute: res.tokens = synonym_substitute(tokens, table, spec.epsilon, scorer, rng); break;
    case AttackKind::copy_paste: res = copy_paste(tokens, pool, spec.ratio, rng); break;
    case AttackKind::paraphrase: res.tokens = paraphrase(tokens, table, spec.lex_div, spec.order_div, rng); break;
    case AttackKind::back_translate:
      res.tokens = back_translate(tokens, table, spec.fidelity_q, spec.reorder_window, rng);
      break;
  }
  return res;
}

}  // namespace synguard
