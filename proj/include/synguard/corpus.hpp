#pragma once

// Corpus ingestion, vocabulary and the toy word-level tokenizer.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace synguard {

using TokenId = std::uint32_t;

struct Document {
  std::string text;
};

enum class CorpusFormat { plain, jsonl };

/// Contiguous id space over distinct surfaces, with designated UNK and EOS ids.
class Vocabulary {
 public:
  static constexpr std::string_view kUnkSurface = "<unk>";
  static constexpr std::string_view kEosSurface = "<eos>";

  Vocabulary() = default;

  /// Throws FormatError on duplicate surfaces, fewer than two entries, or a
  /// missing end-of-sequence surface. When no UNK surface is present the EOS
  /// id doubles as UNK.
  static Vocabulary from_surfaces(std::vector<std::string> surfaces);

  std::size_t size() const { return surfaces_.size(); }
  TokenId unk_id() const { return unk_id_; }
  TokenId eos_id() const { return eos_id_; }
  const std::string& surface(TokenId id) const { return surfaces_.at(id); }
  const std::vector<std::string>& surfaces() const { return surfaces_; }

  std::optional<TokenId> find(std::string_view surface) const;
  /// find() with UNK fallback.
  TokenId lookup(std::string_view surface) const;

  /// Stable identifier: FNV-1a 64 over every surface followed by '\n', as
  /// 16 lowercase hex digits.
  const std::string& tag() const { return tag_; }

 private:
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId unk_id_ = 0;
  TokenId eos_id_ = 0;
  std::string tag_;
};

std::string vocabulary_tag(const std::vector<std::string>& surfaces);

struct TokenSequence {
  std::vector<TokenId> ids;
  std::string vocab_tag;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  std::span<const TokenId> span() const { return ids; }
};

struct SplitSample {
  TokenSequence prompt;
  TokenSequence reference;
};

/// One document per blank-line-separated block (plain) or per non-empty
/// line carrying a "text" field (jsonl). Block text is kept byte-exact.
std::vector<Document> load_corpus(const std::filesystem::path& path, CorpusFormat format);
std::vector<Document> parse_corpus(std::string_view contents, CorpusFormat format);

/// The max_size - 2 most frequent surfaces (ties: first occurrence), then
/// <unk> and <eos>.
Vocabulary build_vocab(std::span<const Document> corpus, std::size_t max_size);

/// Lowercase, split on whitespace, detach ASCII punctuation as single tokens.
std::vector<std::string> split_words(std::string_view text);
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);
std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab);

/// nullopt when the document is shorter than prompt_len + ref_len tokens.
std::optional<SplitSample> split_sample(const Document& doc, const Vocabulary& vocab,
                                        std::size_t prompt_len, std::size_t ref_len);

/// One surface per line, line number = id.
void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocabulary(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

}  // namespace synguard
