#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "relcap/model/config.hpp"

namespace relcap::data {

using model::TokenId;

// Token <-> id bijection. Ids 0..3 are <pad>, <bos>, <eos>, <unk>; corpus
// words follow in descending frequency, ties broken lexicographically.
class Vocabulary {
 public:
  // Words seen fewer than min_count times are left out and encode to <unk>.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count = 3);
  // Words in id order, specials excluded (id = 4 + position).
  static Vocabulary from_words(std::vector<std::string> words);

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;
  std::vector<TokenId> encode_text(std::string_view text) const;
  // Drops <pad>/<bos>/<eos> and joins with single spaces.
  std::string decode(std::span<const TokenId> ids) const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<std::string> words() const;

  // Plain text, one word per line; line k (0-based) holds id k + 4.
  void write(const std::filesystem::path& path) const;
  static Vocabulary read(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace relcap::data
