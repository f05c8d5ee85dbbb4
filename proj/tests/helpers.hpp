#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "synguard/corpus.hpp"
#include "synguard/lm.hpp"
#include "synguard/prf.hpp"
#include "stub_protocol.hpp"

namespace testing {

inline const std::filesystem::path kDataDir = SYNGUARD_DATA_DIR;

/// Vocabulary over `words` followed by <unk> and <eos>.
inline synguard::Vocabulary vocab_of(std::initializer_list<std::string> words) {
  std::vector<std::string> s(words);
  s.emplace_back(synguard::Vocabulary::kUnkSurface);
  s.emplace_back(synguard::Vocabulary::kEosSurface);
  return synguard::Vocabulary::from_surfaces(std::move(s));
}

inline synguard::WatermarkKey key_from(std::uint64_t seed, int m = 4, int window = 4) {
  return synguard::WatermarkKey::from_seed(seed, m, window);
}

/// In-process twin of the stub server's echo model.
class EchoModel final : public synguard::LanguageModel {
 public:
  EchoModel(std::size_t vocab_size, std::string tag) : size_(vocab_size), tag_(std::move(tag)) {}
  std::size_t vocab_size() const override { return size_; }
  std::string vocab_tag() const override { return tag_; }
  synguard::LogitVector next_logits(std::span<const synguard::TokenId> context) const override {
    const auto v = stub::echo_logits(context, size_);
    return Eigen::Map<const synguard::LogitVector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

 private:
  std::size_t size_;
  std::string tag_;
};

/// Fixed logits regardless of context.
class FixedModel final : public synguard::LanguageModel {
 public:
  explicit FixedModel(synguard::LogitVector logits) : logits_(std::move(logits)) {}
  std::size_t vocab_size() const override { return static_cast<std::size_t>(logits_.size()); }
  std::string vocab_tag() const override { return "fixed"; }
  synguard::LogitVector next_logits(std::span<const synguard::TokenId>) const override { return logits_; }

 private:
  synguard::LogitVector logits_;
};

/// Fresh empty directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("synguard_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
