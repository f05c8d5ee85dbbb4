#pragma once

// Meaning-preserving text attacks. Each one changes a watermarked token
// sequence in a way that keeps its content under the synonym-class projection:
// lexical substitution, dilution with natural text, phrase reordering, and a
// noisy round-trip channel standing in for machine translation.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synguard/corpus.hpp"
#include "synguard/lm.hpp"
#include "synguard/random.hpp"

namespace synguard {

/// Disjoint synonym classes over one vocabulary. File format: one class per
/// line, members tab-separated, first member is the representative.
class SynonymTable {
 public:
  SynonymTable() = default;

  /// Members absent from `vocab` are dropped, then classes with fewer than
  /// two remaining members. A surface listed in two classes is a FormatError.
  static SynonymTable parse(std::string_view contents, const Vocabulary& vocab);
  static SynonymTable load(const std::filesystem::path& path, const Vocabulary& vocab);

  std::size_t class_count() const { return classes_.size(); }
  std::size_t vocab_size() const { return class_of_.size(); }
  std::span<const TokenId> members(std::size_t cls) const { return classes_.at(cls); }
  /// Class index of `t`, or nullopt.
  std::optional<std::size_t> class_of(TokenId t) const;
  bool has_class(TokenId t) const { return class_of(t).has_value(); }
  /// First member of the class of `t`, or `t` itself.
  TokenId representative(TokenId t) const;
  /// representative() for every id; feeds SemanticModel.
  std::vector<TokenId> canonical_map() const;
  /// True for single-character punctuation tokens, which delimit phrases.
  bool is_boundary(TokenId t) const { return t < boundary_.size() && boundary_[t]; }

 private:
  static constexpr std::uint32_t kNone = ~std::uint32_t{0};
  std::vector<std::vector<TokenId>> classes_;
  std::vector<std::uint32_t> class_of_;
  std::vector<bool> boundary_;
};

enum class AttackKind { none, substitute, copy_paste, paraphrase, back_translate };

std::string_view to_string(AttackKind k);
AttackKind parse_attack_kind(std::string_view name);

struct AttackSpec {
  AttackKind kind = AttackKind::none;
  double epsilon = 0.0;
  double ratio = 0.0;
  double lex_div = 0.0;
  double order_div = 0.0;
  double fidelity_q = 1.0;
  std::size_t reorder_window = 3;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct AttackResult {
  std::vector<TokenId> tokens;
  /// copy_paste only: index of the first watermarked token in the output.
  std::optional<std::size_t> insert_at;
};

/// ceil(x * n) robust to representation error in x (0.7 * 200 -> 140).
std::size_t scaled_count(double x, std::size_t n);

/// Replace up to ceil(epsilon * T) randomly ordered classed positions by
/// another member of their class. With a scorer, the member maximizing
/// substitution_log_likelihood wins; without one, a uniform member.
std::vector<TokenId> synonym_substitute(std::span<const TokenId> tokens, const SynonymTable& table,
                                        double epsilon, const LanguageModel* scorer, Rng& rng);

/// Joint log-probability of tokens[pos .. pos+span) given everything before,
/// with tokens[pos] replaced by `candidate`. This scores the candidate against
/// both its left context and the words that follow it.
double substitution_log_likelihood(const LanguageModel& scorer, std::span<const TokenId> tokens,
                                   std::size_t pos, TokenId candidate, std::size_t span = 3);

/// Embed the watermarked sequence in ceil(ratio * T) contiguous natural
/// tokens taken from the pool, split at a random insertion point.
AttackResult copy_paste(std::span<const TokenId> watermarked, std::span<const TokenSequence> pool,
                        double ratio, Rng& rng);

/// Phrases end after each boundary token; trailing tokens form a final phrase.
std::vector<std::vector<TokenId>> split_phrases(std::span<const TokenId> tokens,
                                                const SynonymTable& table);

std::vector<TokenId> paraphrase(std::span<const TokenId> tokens, const SynonymTable& table,
                                double lex_div, double order_div, Rng& rng);

std::vector<TokenId> back_translate(std::span<const TokenId> tokens, const SynonymTable& table,
                                    double fidelity_q, std::size_t reorder_window, Rng& rng);

/// Dispatch on spec.kind with an rng seeded from spec.rng_seed.
AttackResult apply_attack(std::span<const TokenId> tokens, const AttackSpec& spec,
                          const SynonymTable& table, const LanguageModel* scorer,
                          std::span<const TokenSequence> pool);

}  // namespace synguard
