#include "kdvqa/tokenizer.h"

#include <algorithm>
#include <array>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "kdvqa/error.h"
#include "kdvqa/text.h"

namespace kdvqa {
namespace {

constexpr std::array<std::string_view, kSpecialTokenCount> kSpecialTokens = {
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) ||
         (u >= 123 && u <= 126);
}

std::vector<std::string> special_tokens() {
  return {kSpecialTokens.begin(), kSpecialTokens.end()};
}

}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(to_lower_ascii(current));
    current.clear();
  };
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      current.push_back(c);
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() : Vocabulary(special_tokens()) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : token_of_(std::move(tokens)) {
  if (token_of_.size() < kSpecialTokenCount) {
    fail(ErrorCode::kValidation, "vocabulary must start with the five special tokens");
  }
  for (int i = 0; i < kSpecialTokenCount; ++i) {
    if (token_of_[static_cast<std::size_t>(i)] != kSpecialTokens[static_cast<std::size_t>(i)]) {
      fail(ErrorCode::kValidation, "vocabulary id " + std::to_string(i) + " must be " +
                                       std::string(kSpecialTokens[static_cast<std::size_t>(i)]));
    }
  }
  for (std::size_t i = 0; i < token_of_.size(); ++i) {
    if (!id_of_.emplace(token_of_[i], static_cast<int>(i)).second) {
      fail(ErrorCode::kDuplicate, "duplicate vocabulary token '" + token_of_[i] + "'");
    }
  }
}

int Vocabulary::id_of(std::string_view token) const {
  auto it = id_of_.find(token);
  return it == id_of_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return id_of_.find(token) != id_of_.end(); }

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) {
    fail(ErrorCode::kRange, "token id " + std::to_string(id) + " outside vocabulary of size " +
                                std::to_string(size()));
  }
  return token_of_[static_cast<std::size_t>(id)];
}

Vocabulary build_vocab(const std::vector<std::string>& sentences, int max_size, int min_count) {
  if (max_size <= kSpecialTokenCount) {
    fail(ErrorCode::kConfig, "vocabulary max_size must exceed the 5 special tokens");
  }
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& s : sentences) {
    for (auto& w : tokenize_words(s)) ++counts[std::move(w)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [token, count] : counts) {
    if (count >= static_cast<std::size_t>(std::max(min_count, 1))) ranked.emplace_back(token, count);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  auto tokens = special_tokens();
  const auto room = static_cast<std::size_t>(max_size - kSpecialTokenCount);
  for (std::size_t i = 0; i < ranked.size() && i < room; ++i) tokens.push_back(ranked[i].first);
  return Vocabulary(std::move(tokens));
}

TokenSequence encode(std::string_view text, const Vocabulary& vocab, int max_len) {
  if (max_len < 3) fail(ErrorCode::kConfig, "max_len must be at least 3");
  TokenSequence seq;
  seq.ids.push_back(kClsId);
  const auto budget = static_cast<std::size_t>(max_len - 2);
  for (const auto& w : tokenize_words(text)) {
    if (seq.ids.size() - 1 >= budget) break;
    seq.ids.push_back(vocab.id_of(w));
  }
  seq.ids.push_back(kSepId);
  return seq;
}

std::string decode(const TokenSequence& sequence, const Vocabulary& vocab) {
  std::string out;
  for (int id : sequence.ids) {
    const auto& token = vocab.token_of(id);
    if (is_special_id(id)) continue;
    if (!out.empty()) out += ' ';
    out += token;
  }
  return out;
}

nlohmann::json to_json(const Vocabulary& vocab) {
  nlohmann::json j = nlohmann::json::object();
  for (int i = 0; i < vocab.size(); ++i) j[vocab.token_of(i)] = i;
  return j;
}

Vocabulary vocabulary_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::kFormat, "vocabulary must be a JSON object");
  std::vector<std::string> tokens(j.size());
  std::vector<bool> seen(j.size(), false);
  for (const auto& [token, value] : j.items()) {
    const int id = value.get<int>();
    if (id < 0 || static_cast<std::size_t>(id) >= tokens.size() || seen[static_cast<std::size_t>(id)]) {
      fail(ErrorCode::kFormat, "vocabulary ids must form the range 0..n-1 without gaps");
    }
    seen[static_cast<std::size_t>(id)] = true;
    tokens[static_cast<std::size_t>(id)] = token;
  }
  return Vocabulary(std::move(tokens));
}

}  // namespace kdvqa
