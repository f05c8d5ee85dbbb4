#include "synguard/lm.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace synguard {

std::size_t NgramModel::KeyHash::operator()(const std::vector<TokenId>& k) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ k.size();
  for (TokenId t : k) {
    h ^= t + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

NgramModel::NgramModel(Vocabulary vocab, std::size_t order, double alpha)
    : vocab_(std::move(vocab)), order_(order), alpha_(alpha) {
  if (order_ < 1) throw InvalidArgument("n-gram order must be at least 1");
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_))
    throw InvalidArgument("n-gram alpha must be positive");
}

void NgramModel::add_sequence(std::span<const TokenId> tokens) {
  if (tokens.size() < order_) return;
  const std::size_t ctx_len = order_ - 1;
  std::vector<TokenId> key(ctx_len);
  for (std::size_t i = 0; i + order_ <= tokens.size(); ++i) {
    std::copy_n(tokens.begin() + i, ctx_len, key.begin());
    TokenId next = tokens[i + ctx_len];
    if (next >= vocab_.size()) throw InvalidArgument("token id outside vocabulary");
    auto& entry = table_[key];
    ++entry.total;
    auto it = std::lower_bound(entry.next.begin(), entry.next.end(), next,
                               [](const auto& p, TokenId t) { return p.first < t; });
    if (it != entry.next.end() && it->first == next)
      ++it->second;
    else
      entry.next.insert(it, {next, 1});
  }
}

const NgramModel::ContextCounts* NgramModel::lookup(std::span<const TokenId> context) const {
  const std::size_t ctx_len = order_ - 1;
  if (context.size() < ctx_len) return nullptr;
  std::vector<TokenId> key(context.end() - static_cast<std::ptrdiff_t>(ctx_len), context.end());
  auto it = table_.find(key);
  return it == table_.end() ? nullptr : &it->second;
}

LogitVector NgramModel::next_logits(std::span<const TokenId> context) const {
  const double v = static_cast<double>(vocab_.size());
  const ContextCounts* entry = lookup(context);
  const double total = entry ? static_cast<double>(entry->total) : 0.0;
  const double log_norm = std::log(total + alpha_ * v);
  LogitVector logits =
      LogitVector::Constant(static_cast<Eigen::Index>(vocab_.size()), std::log(alpha_) - log_norm);
  if (entry) {
    for (auto [tok, c] : entry->next)
      logits[static_cast<Eigen::Index>(tok)] = std::log(static_cast<double>(c) + alpha_) - log_norm;
  }
  return logits;
}

std::uint64_t NgramModel::count(std::span<const TokenId> context, TokenId next) const {
  const ContextCounts* entry = lookup(context);
  if (!entry) return 0;
  auto it = std::lower_bound(entry->next.begin(), entry->next.end(), next,
                             [](const auto& p, TokenId t) { return p.first < t; });
  return (it != entry->next.end() && it->first == next) ? it->second : 0;
}

std::uint64_t NgramModel::context_total(std::span<const TokenId> context) const {
  const ContextCounts* entry = lookup(context);
  return entry ? entry->total : 0;
}

void NgramModel::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = "synguard-ngram";
  j["order"] = order_;
  j["alpha"] = alpha_;
  j["vocab_tag"] = vocab_.tag();
  j["vocab"] = vocab_.surfaces();
  // Sorted so that the file is byte-stable across runs.
  std::vector<std::pair<const std::vector<TokenId>*, const ContextCounts*>> rows;
  rows.reserve(table_.size());
  for (const auto& [k, v] : table_) rows.emplace_back(&k, &v);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return *a.first < *b.first; });
  auto& counts = j["counts"] = nlohmann::json::array();
  for (const auto& [k, v] : rows) {
    nlohmann::json row = nlohmann::json::array();
    row.push_back(*k);
    nlohmann::json nexts = nlohmann::json::array();
    for (auto [tok, c] : v->next) nexts.push_back({tok, c});
    row.push_back(std::move(nexts));
    counts.push_back(std::move(row));
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump() << '\n';
}

NgramModel NgramModel::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("model file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != "synguard-ngram")
    throw FormatError(path.string() + " is not a synguard n-gram model");
  try {
    NgramModel model(Vocabulary::from_surfaces(j.at("vocab").get<std::vector<std::string>>()),
                     j.at("order").get<std::size_t>(), j.at("alpha").get<double>());
    if (j.contains("vocab_tag") && j["vocab_tag"].get<std::string>() != model.vocab_.tag())
      throw FormatError(path.string() + ": vocabulary tag does not match stored vocabulary");
    for (const auto& row : j.at("counts")) {
      auto key = row.at(0).get<std::vector<TokenId>>();
      if (key.size() != model.order_ - 1) throw FormatError("context length does not match order");
      ContextCounts cc;
      for (const auto& n : row.at(1)) {
        auto tok = n.at(0).get<TokenId>();
        auto c = n.at(1).get<std::uint32_t>();
        if (tok >= model.vocab_.size()) throw FormatError("token id outside vocabulary");
        cc.next.emplace_back(tok, c);
        cc.total += c;
      }
      std::sort(cc.next.begin(), cc.next.end());
      model.table_.emplace(std::move(key), std::move(cc));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed model file " + path.string() + ": " + e.what());
  }
}

NgramModel train_ngram(std::span<const TokenSequence> corpus, const Vocabulary& vocab,
                       std::size_t order, double alpha) {
  if (corpus.empty()) throw InvalidArgument("train_ngram: empty corpus");
  NgramModel model(vocab, order, alpha);
  for (const auto& seq : corpus) model.add_sequence(seq.ids);
  return model;
}

}  // namespace synguard
