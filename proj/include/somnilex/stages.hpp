#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "somnilex/common.hpp"

namespace somnilex {

// The five scored sleep stages. The index order is fixed: it defines class
// indices for the classifier, rows/columns of confusion matrices and the
// byte values in dataset label files.
enum class Stage : std::uint8_t { Wake = 0, N1 = 1, N2 = 2, N3 = 3, Rem = 4 };

inline constexpr int kNumStages = 5;
inline constexpr int kEpochSeconds = 30;
inline constexpr int kSampleRateHz = 100;
inline constexpr int kEpochSamples = kEpochSeconds * kSampleRateHz;  // 3000

inline constexpr std::array<const char*, kNumStages> kStageNames = {
    "W", "N1", "N2", "N3", "REM"};

inline const char* stage_name(Stage s) {
  return kStageNames[static_cast<int>(s)];
}

inline Stage stage_from_index(int idx) {
  if (idx < 0 || idx >= kNumStages)
    throw ConfigError("stage index out of range [0,5): " + std::to_string(idx));
  return static_cast<Stage>(idx);
}

inline Stage stage_from_name(std::string_view name) {
  for (int i = 0; i < kNumStages; ++i)
    if (name == kStageNames[i]) return static_cast<Stage>(i);
  throw ConfigError("unknown stage label: " + std::string(name));
}

}  // namespace somnilex
