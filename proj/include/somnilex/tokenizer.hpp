#pragma once

#include <span>
#include <vector>

#include "somnilex/common.hpp"
#include "somnilex/epochs.hpp"
#include "somnilex/recording.hpp"
#include "somnilex/stages.hpp"

namespace somnilex {

// Subwindow geometry. The defaults decompose a 30 s epoch into 13
// overlapping 3 s tokens: token j covers samples [225*j, 225*j + 300), so
// consecutive tokens overlap by 75 samples and token 12 ends exactly at
// sample 3000. Window and stride are exposed so the duration/overlap
// trade-off can be studied; token count follows from the geometry.
struct TokenizerConfig {
  double window_s = 3.0;
  double stride_s = 2.25;

  int window_samples(int fs_hz = kSampleRateHz) const {
    return static_cast<int>(window_s * fs_hz + 0.5);
  }
  int stride_samples(int fs_hz = kSampleRateHz) const {
    return static_cast<int>(stride_s * fs_hz + 0.5);
  }
  int num_tokens(int epoch_samples = kEpochSamples,
                 int fs_hz = kSampleRateHz) const {
    const int w = window_samples(fs_hz);
    const int s = stride_samples(fs_hz);
    if (w <= 0 || s <= 0 || w > epoch_samples)
      throw ConfigError("tokenizer window/stride do not fit the epoch");
    return (epoch_samples - w) / s + 1;
  }
};

// The token decomposition of one epoch for one modality: `num_tokens` rows
// of `token_len` samples, row-major, copied from the source epoch with no
// re-scaling.
struct TokenBatch {
  int num_tokens = 0;
  int token_len = 0;
  std::vector<float> tokens;
  int source_epoch_index = 0;
  Modality modality = Modality::EEG1;

  std::span<const float> token(int j) const {
    return std::span<const float>(tokens).subspan(
        static_cast<std::size_t>(j) * token_len, token_len);
  }
};

inline TokenBatch tokenize_epoch(std::span<const float> epoch,
                                 int epoch_index = 0,
                                 Modality modality = Modality::EEG1,
                                 const TokenizerConfig& cfg = {}) {
  if (epoch.size() != static_cast<std::size_t>(kEpochSamples))
    throw ShapeError("tokenize_epoch expects exactly " +
                     std::to_string(kEpochSamples) + " samples, got " +
                     std::to_string(epoch.size()));
  TokenBatch out;
  out.num_tokens = cfg.num_tokens();
  out.token_len = cfg.window_samples();
  out.source_epoch_index = epoch_index;
  out.modality = modality;
  const int stride = cfg.stride_samples();
  out.tokens.resize(static_cast<std::size_t>(out.num_tokens) * out.token_len);
  for (int j = 0; j < out.num_tokens; ++j) {
    const int offset = j * stride;
    std::copy(epoch.begin() + offset, epoch.begin() + offset + out.token_len,
              out.tokens.begin() + static_cast<std::size_t>(j) * out.token_len);
  }
  return out;
}

// Maps tokenize_epoch over all epochs of all modalities. Output order is
// modality-major, epoch-minor: all of EEG1's epochs, then EEG2's, then EOG's.
inline std::vector<TokenBatch> tokenize_recording(
    const std::vector<EpochTensor>& per_modality,
    const TokenizerConfig& cfg = {}) {
  std::vector<TokenBatch> out;
  for (std::size_t m = 0; m < per_modality.size(); ++m) {
    const auto& epochs = per_modality[m];
    for (int e = 0; e < epochs.num_epochs; ++e)
      out.push_back(tokenize_epoch(epochs.epoch(e), e,
                                   static_cast<Modality>(m), cfg));
  }
  return out;
}

}  // namespace somnilex
