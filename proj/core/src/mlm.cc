#include "kdvqa/mlm.h"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "kdvqa/error.h"

namespace kdvqa {

int masked_count(int maskable, const MaskingPolicy& policy) {
  if (maskable <= 0) return 0;
  const int rounded = (policy.select_percent * maskable + 50) / 100;
  return std::max(1, rounded);
}

MaskedExample mask_sequence(const TokenSequence& ids, const Vocabulary& vocab, Rng& rng,
                            const MaskingPolicy& policy) {
  std::vector<std::size_t> maskable;
  for (std::size_t i = 0; i < ids.ids.size(); ++i) {
    if (!is_special_id(ids.ids[i])) maskable.push_back(i);
  }
  if (maskable.empty()) {
    fail(ErrorCode::kPrecondition, "mask_sequence: sequence has no maskable tokens");
  }
  const auto k = static_cast<std::size_t>(masked_count(static_cast<int>(maskable.size()), policy));

  // Partial Fisher-Yates: the first k entries become a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(maskable.size() - i);
    std::swap(maskable[i], maskable[j]);
  }
  std::vector<std::size_t> selected(maskable.begin(), maskable.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(selected.begin(), selected.end());

  MaskedExample ex;
  ex.input = ids;
  ex.labels.assign(ids.ids.size(), kIgnoreLabel);
  ex.selection_count = static_cast<int>(k);
  const int content = vocab.content_size();
  for (std::size_t pos : selected) {
    ex.labels[pos] = ids.ids[pos];
    const double u = rng.uniform();
    if (u < policy.mask_probability) {
      ex.input.ids[pos] = kMaskId;
      ex.actions.push_back(MaskAction::kMask);
    } else if (u < policy.mask_probability + policy.random_probability) {
      ex.input.ids[pos] =
          kSpecialTokenCount + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(content)));
      ex.actions.push_back(MaskAction::kRandom);
    } else {
      ex.actions.push_back(MaskAction::kKeep);
    }
  }
  return ex;
}

MlmDataset build_mlm_dataset(const std::vector<TokenSequence>& sequences, const Vocabulary& vocab,
                             std::uint64_t seed, const MaskingPolicy& policy) {
  MlmDataset dataset;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& seq = sequences[i];
    const bool has_content =
        std::any_of(seq.ids.begin(), seq.ids.end(), [](int id) { return !is_special_id(id); });
    if (!has_content) {
      ++dataset.skipped;
      continue;
    }
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    dataset.examples.push_back(mask_sequence(seq, vocab, rng, policy));
    dataset.source_index.push_back(i);
  }
  if (dataset.examples.empty()) {
    fail(ErrorCode::kPrecondition, "MLM dataset is empty: no sentence has an in-vocabulary token");
  }
  return dataset;
}

MlmDataset build_mlm_dataset(const std::vector<std::string>& sentences, const Vocabulary& vocab,
                             int max_len, std::uint64_t seed, const MaskingPolicy& policy) {
  std::vector<TokenSequence> sequences;
  sequences.reserve(sentences.size());
  for (const auto& s : sentences) sequences.push_back(encode(s, vocab, max_len));
  return build_mlm_dataset(sequences, vocab, seed, policy);
}

nlohmann::json to_json(const MaskedExample& example) {
  return {{"input_ids", example.input.ids}, {"labels", example.labels}};
}

}  // namespace kdvqa
