#pragma once

#include <span>
#include <vector>

#include "somnilex/common.hpp"
#include "somnilex/stages.hpp"

namespace somnilex {

// Non-overlapping 30 s epochs of one channel at 100 Hz, shape
// (num_epochs, 3000), row-major.
struct EpochTensor {
  int num_epochs = 0;
  std::vector<float> data;
  // Samples dropped from the trailing partial epoch, if any. Callers that
  // ingest files should surface this in their logs.
  int discarded_samples = 0;

  std::span<const float> epoch(int i) const {
    return std::span<const float>(data).subspan(
        static_cast<std::size_t>(i) * kEpochSamples, kEpochSamples);
  }
  std::span<float> epoch(int i) {
    return std::span<float>(data).subspan(
        static_cast<std::size_t>(i) * kEpochSamples, kEpochSamples);
  }
};

// Splits a continuous 100 Hz signal into consecutive, non-overlapping 30 s
// epochs. Epoch k covers samples [3000k, 3000k + 3000); a trailing partial
// epoch is discarded and reported via EpochTensor::discarded_samples.
inline EpochTensor epoch_split(std::span<const float> signal) {
  EpochTensor out;
  out.num_epochs = static_cast<int>(signal.size() / kEpochSamples);
  out.discarded_samples =
      static_cast<int>(signal.size() -
                       static_cast<std::size_t>(out.num_epochs) * kEpochSamples);
  out.data.assign(signal.begin(),
                  signal.begin() +
                      static_cast<std::size_t>(out.num_epochs) * kEpochSamples);
  return out;
}

}  // namespace somnilex
