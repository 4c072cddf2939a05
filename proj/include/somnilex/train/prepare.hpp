#pragma once

#include <string>
#include <vector>

#include "somnilex/common.hpp"
#include "somnilex/dataset.hpp"
#include "somnilex/epochs.hpp"
#include "somnilex/filters.hpp"
#include "somnilex/recording.hpp"

namespace somnilex {

// A subject after band-pass filtering and epoch splitting: per-modality
// epoch tensors aligned with the stage labels, ready for tokenization.
struct PreparedSubject {
  std::string subject_id;
  std::vector<EpochTensor> modalities;  // one per Modality, fixed order
  std::vector<Stage> labels;
};

using PreparedDataset = std::vector<PreparedSubject>;

// Filters (unless the record is already marked filtered) and splits one
// subject. Channels are selected by modality name; the record must carry
// EEG1, EEG2 and EOG channels at 100 Hz.
inline PreparedSubject prepare_subject(const SubjectRecord& subj,
                                       const FilterSpec& bandpass) {
  if (subj.recording.sample_rate_hz != kSampleRateHz)
    throw ConfigError("subject " + subj.recording.subject_id + " is at " +
                      std::to_string(subj.recording.sample_rate_hz) +
                      " Hz; prepare expects " + std::to_string(kSampleRateHz));
  PreparedSubject out;
  out.subject_id = subj.recording.subject_id;
  out.labels = subj.hypnogram.labels;
  for (int m = 0; m < kNumModalities; ++m) {
    const Channel& ch = subj.recording.channel(kModalityNames[m]);
    EpochTensor epochs;
    if (subj.filtered) {
      epochs = epoch_split(ch.samples);
    } else {
      std::vector<float> filtered =
          filtfilt(bandpass, std::span<const float>(ch.samples));
      epochs = epoch_split(filtered);
    }
    if (epochs.num_epochs != static_cast<int>(out.labels.size()))
      throw ShapeError("subject " + out.subject_id + ": " +
                       std::to_string(epochs.num_epochs) +
                       " epochs from channel " + ch.name + " but " +
                       std::to_string(out.labels.size()) + " labels");
    out.modalities.push_back(std::move(epochs));
  }
  return out;
}

inline PreparedDataset prepare_dataset(const std::vector<SubjectRecord>& subjects) {
  const FilterSpec bandpass = design_bandpass(0.5, 49.9, kSampleRateHz, 5);
  PreparedDataset out;
  out.reserve(subjects.size());
  for (const auto& s : subjects) out.push_back(prepare_subject(s, bandpass));
  return out;
}

}  // namespace somnilex
