#include "relcap/data/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "relcap/data/tokenize.hpp"

namespace relcap::data {

namespace {
const std::vector<std::string> kSpecials = {"<pad>", "<bos>", "<eos>", "<unk>"};
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  Vocabulary v;
  v.tokens_ = kSpecials;
  for (auto& w : words) {
    if (w.empty()) throw std::invalid_argument("Vocabulary: empty word");
    if (std::find(kSpecials.begin(), kSpecials.end(), w) != kSpecials.end()) {
      throw std::invalid_argument("Vocabulary: reserved token '" + w + "' in word list");
    }
    v.tokens_.push_back(std::move(w));
  }
  for (TokenId i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], i).second) {
      throw std::invalid_argument("Vocabulary: duplicate word '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count) {
  if (corpus.empty()) throw std::invalid_argument("Vocabulary::build: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> words;
  words.reserve(kept.size());
  for (auto& [tok, n] : kept) words.push_back(tok);
  return from_words(std::move(words));
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? model::kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) throw std::out_of_range("Vocabulary: id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<TokenId> Vocabulary::encode_text(std::string_view text) const { return encode(tokenize(text)); }

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> words;
  for (TokenId i : ids) {
    if (i == model::kPad || i == model::kBos || i == model::kEos) continue;
    words.push_back(token(i));
  }
  return join(words);
}

std::vector<std::string> Vocabulary::words() const {
  return {tokens_.begin() + static_cast<std::ptrdiff_t>(kSpecials.size()), tokens_.end()};
}

void Vocabulary::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("Vocabulary: cannot write " + path.string());
  for (const auto& w : words()) out << w << '\n';
}

Vocabulary Vocabulary::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Vocabulary: cannot read " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    words.push_back(line);
  }
  return from_words(std::move(words));
}

}  // namespace relcap::data
