#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace kdvqa {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kSepId = 3;
inline constexpr int kMaskId = 4;
inline constexpr int kSpecialTokenCount = 5;

inline bool is_special_id(int id) { return id >= 0 && id < kSpecialTokenCount; }

// Lowercased whole-word tokens; every ASCII punctuation character is a token
// of its own.
std::vector<std::string> tokenize_words(std::string_view text);

class Vocabulary {
 public:
  // Only the five special tokens.
  Vocabulary();

  // `tokens[i]` gets id i. The first five entries must be the special tokens.
  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(token_of_.size()); }
  int content_size() const { return size() - kSpecialTokenCount; }

  // kUnkId for unknown tokens.
  int id_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  // Throws Error(kRange) for ids outside [0, size()).
  const std::string& token_of(int id) const;

  const std::vector<std::string>& tokens() const { return token_of_; }

  bool operator==(const Vocabulary& other) const { return token_of_ == other.token_of_; }

 private:
  std::vector<std::string> token_of_;
  std::map<std::string, int, std::less<>> id_of_;
};

// [CLS] content... [SEP]; never contains [PAD].
struct TokenSequence {
  std::vector<int> ids;

  std::size_t size() const { return ids.size(); }
  bool operator==(const TokenSequence&) const = default;
};

// Tokens ranked by descending frequency, ties broken lexicographically.
// Throws Error(kConfig) when max_size <= 5.
Vocabulary build_vocab(const std::vector<std::string>& sentences, int max_size, int min_count = 1);

// Throws Error(kConfig) when max_len < 3. Content beyond max_len - 2 tokens is
// dropped.
TokenSequence encode(std::string_view text, const Vocabulary& vocab, int max_len);

// Space-joined content tokens; special ids are skipped.
std::string decode(const TokenSequence& sequence, const Vocabulary& vocab);

// JSON object token -> id.
nlohmann::json to_json(const Vocabulary& vocab);
Vocabulary vocabulary_from_json(const nlohmann::json& j);

}  // namespace kdvqa
