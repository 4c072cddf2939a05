#pragma once

#include <string>
#include <vector>

#include "somnilex/common.hpp"
#include "somnilex/stages.hpp"

namespace somnilex {

// The three channels used for modeling, in fixed order. "Modality" always
// refers to this ordering throughout the library.
enum class Modality : int { EEG1 = 0, EEG2 = 1, EOG = 2 };
inline constexpr int kNumModalities = 3;
inline constexpr std::array<const char*, kNumModalities> kModalityNames = {
    "EEG1", "EEG2", "EOG"};

inline const char* modality_name(Modality m) {
  return kModalityNames[static_cast<int>(m)];
}

inline Modality modality_from_name(std::string_view name) {
  for (int i = 0; i < kNumModalities; ++i)
    if (name == kModalityNames[i]) return static_cast<Modality>(i);
  throw ConfigError("unknown modality: " + std::string(name));
}

struct Channel {
  std::string name;
  std::vector<float> samples;  // microvolts
};

// One subject's multichannel recording at a uniform sample rate.
struct Recording {
  std::string subject_id;
  std::vector<Channel> channels;
  int sample_rate_hz = kSampleRateHz;

  const Channel& channel(std::string_view name) const {
    for (const auto& c : channels)
      if (c.name == name) return c;
    throw ConfigError("recording " + subject_id + " has no channel named " +
                      std::string(name));
  }

  std::size_t num_samples() const {
    return channels.empty() ? 0 : channels.front().samples.size();
  }

  void validate() const {
    for (const auto& c : channels)
      if (c.samples.size() != num_samples())
        throw ShapeError("channel " + c.name + " length " +
                         std::to_string(c.samples.size()) +
                         " differs from channel " + channels.front().name +
                         " length " + std::to_string(num_samples()));
  }
};

// Per-epoch stage labels, one per 30 s epoch.
struct Hypnogram {
  std::vector<Stage> labels;
  static constexpr int epoch_seconds = kEpochSeconds;
};

}  // namespace somnilex
