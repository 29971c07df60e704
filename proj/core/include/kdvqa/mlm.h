#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kdvqa/rng.h"
#include "kdvqa/tokenizer.h"

namespace kdvqa {

inline constexpr int kIgnoreLabel = -100;

// BERT corruption recipe: select 15% of the maskable tokens; of those, 80%
// become [MASK], 10% a random content token, 10% stay unchanged.
struct MaskingPolicy {
  int select_percent = 15;
  double mask_probability = 0.8;
  double random_probability = 0.1;
};

enum class MaskAction { kMask, kRandom, kKeep };

struct MaskedExample {
  TokenSequence input;
  std::vector<int> labels;  // original id at selected positions, kIgnoreLabel elsewhere
  std::vector<MaskAction> actions;  // one per selected position, in position order
  int selection_count = 0;

  bool operator==(const MaskedExample&) const = default;
};

// Number of positions to select among m maskable ones: max(1, round(0.15 m)),
// rounding half up. Exact integer arithmetic.
int masked_count(int maskable, const MaskingPolicy& policy = {});

// Maskable positions hold content ids (>= 5); [CLS], [SEP], [PAD], [UNK] and
// [MASK] positions are never selected. Throws Error(kPrecondition) when no
// position is maskable.
MaskedExample mask_sequence(const TokenSequence& ids, const Vocabulary& vocab, Rng& rng,
                            const MaskingPolicy& policy = {});

struct MlmDataset {
  std::vector<MaskedExample> examples;
  std::vector<std::size_t> source_index;  // sentence index each example came from
  std::size_t skipped = 0;                 // sentences without content tokens
};

// One example per sentence that has a content token. Sentence i draws from
// its own stream derive_seed(seed, {i}), so any subset is reproducible.
// Throws Error(kPrecondition) when every sentence is skipped.
MlmDataset build_mlm_dataset(const std::vector<std::string>& sentences, const Vocabulary& vocab,
                             int max_len, std::uint64_t seed, const MaskingPolicy& policy = {});

// Same, over pre-encoded sequences.
MlmDataset build_mlm_dataset(const std::vector<TokenSequence>& sequences, const Vocabulary& vocab,
                             std::uint64_t seed, const MaskingPolicy& policy = {});

nlohmann::json to_json(const MaskedExample& example);

}  // namespace kdvqa
