#include "synguard/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "synguard/error.hpp"

namespace synguard {

namespace {

bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) && c != '_'; }

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

std::string vocabulary_tag(const std::vector<std::string>& surfaces) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const auto& s : surfaces) {
    for (unsigned char c : s) mix(c);
    mix('\n');
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Vocabulary Vocabulary::from_surfaces(std::vector<std::string> surfaces) {
  if (surfaces.size() < 2) throw FormatError("vocabulary needs at least 2 entries");
  Vocabulary v;
  v.index_.reserve(surfaces.size());
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    if (!v.index_.emplace(surfaces[i], static_cast<TokenId>(i)).second)
      throw FormatError("duplicate vocabulary surface '" + surfaces[i] + "' at id " +
                        std::to_string(i));
  }
  auto find_any = [&v](std::initializer_list<std::string_view> names) -> std::optional<TokenId> {
    for (auto n : names)
      if (auto it = v.index_.find(std::string(n)); it != v.index_.end()) return it->second;
    return std::nullopt;
  };
  auto eos = find_any({kEosSurface, "</s>", "<|endoftext|>"});
  if (!eos) throw FormatError("vocabulary has no end-of-sequence surface (<eos>)");
  v.eos_id_ = *eos;
  v.unk_id_ = find_any({kUnkSurface}).value_or(*eos);
  v.tag_ = vocabulary_tag(surfaces);
  v.surfaces_ = std::move(surfaces);
  return v;
}

std::optional<TokenId> Vocabulary::find(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::lookup(std::string_view surface) const {
  return find(surface).value_or(unk_id_);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Document> parse_corpus(std::string_view contents, CorpusFormat format) {
  std::vector<Document> docs;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::string block;
  bool in_block = false;
  while (pos <= contents.size()) {
    std::size_t end = contents.find('\n', pos);
    bool last = end == std::string_view::npos;
    if (last) end = contents.size();
    std::string_view line = contents.substr(pos, end - pos);
    ++line_no;
    if (format == CorpusFormat::jsonl) {
      if (!is_blank(line)) {
        nlohmann::json rec;
        try {
          rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
          throw FormatError("malformed jsonl record at line " + std::to_string(line_no) + ": " +
                            e.what());
        }
        if (!rec.is_object() || !rec.contains("text") || !rec["text"].is_string())
          throw FormatError("jsonl record at line " + std::to_string(line_no) +
                            " has no string \"text\" field");
        docs.push_back({rec["text"].get<std::string>()});
      }
    } else if (is_blank(line)) {
      if (in_block) docs.push_back({std::move(block)});
      block.clear();
      in_block = false;
    } else {
      if (in_block) block += '\n';
      block.append(line);
      in_block = true;
    }
    if (last) break;
    pos = end + 1;
  }
  if (in_block) docs.push_back({std::move(block)});
  return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  return parse_corpus(read_file(path), format);
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    }
  }
  flush();
  return out;
}

Vocabulary build_vocab(std::span<const Document> corpus, std::size_t max_size) {
  if (corpus.empty()) throw InvalidArgument("build_vocab: empty corpus");
  if (max_size < 2) throw InvalidArgument("build_vocab: max_size must be at least 2");
  struct Entry {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Entry> freq;
  std::vector<std::string> order;
  for (const auto& doc : corpus) {
    for (auto& w : split_words(doc.text)) {
      auto [it, inserted] = freq.try_emplace(w, Entry{0, order.size()});
      if (inserted) order.push_back(w);
      ++it->second.count;
    }
  }
  if (order.empty()) throw InvalidArgument("build_vocab: corpus yields zero tokens");
  freq.erase(std::string(Vocabulary::kUnkSurface));
  freq.erase(std::string(Vocabulary::kEosSurface));
  std::erase_if(order, [&](const std::string& w) { return !freq.contains(w); });
  std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    return freq[a].count > freq[b].count;
  });
  if (order.size() > max_size - 2) order.resize(max_size - 2);
  order.emplace_back(Vocabulary::kUnkSurface);
  order.emplace_back(Vocabulary::kEosSurface);
  return Vocabulary::from_surfaces(std::move(order));
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSequence seq;
  seq.vocab_tag = vocab.tag();
  for (const auto& w : split_words(text)) seq.ids.push_back(vocab.lookup(w));
  return seq;
}

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& s = vocab.surface(ids[i]);
    if (i > 0) out += ' ';
    out += s;
  }
  return out;
}

std::optional<SplitSample> split_sample(const Document& doc, const Vocabulary& vocab,
                                        std::size_t prompt_len, std::size_t ref_len) {
  if (ref_len < 1) throw InvalidArgument("split_sample: ref_len must be at least 1");
  TokenSequence all = tokenize(doc.text, vocab);
  if (all.size() < prompt_len + ref_len) return std::nullopt;
  SplitSample s;
  s.prompt.vocab_tag = s.reference.vocab_tag = vocab.tag();
  s.prompt.ids.assign(all.ids.begin(), all.ids.begin() + prompt_len);
  s.reference.ids.assign(all.ids.begin() + prompt_len, all.ids.begin() + prompt_len + ref_len);
  return s;
}

void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& s : vocab.surfaces()) out << s << '\n';
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::string contents = read_file(path);
  std::vector<std::string> surfaces;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t end = contents.find('\n', pos);
    if (end == std::string::npos) end = contents.size();
    surfaces.emplace_back(contents.substr(pos, end - pos));
    pos = end + 1;
  }
  return Vocabulary::from_surfaces(std::move(surfaces));
}

}  // namespace synguard
