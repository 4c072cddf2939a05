#pragma once

#include <string>
#include <vector>

#include "somnilex/train/trainer.hpp"

namespace somnilex {

struct AblationRow {
  std::string name;
  ModelConfig config;
  CrossValReport report;
};

inline std::string modality_set_name(const std::vector<Modality>& mods) {
  std::string s;
  for (std::size_t i = 0; i < mods.size(); ++i) {
    if (i) s += "+";
    s += modality_name(mods[i]);
  }
  return s;
}

// Controlled comparison over fusion {gcn, concat} x temporal
// {full, cnn_only} x modality subsets {all, EEG1, EEG2, EOG}: every variant
// is cross-validated with the same fold plan and the same seeds, so rows
// differ only in the architecture flags.
inline std::vector<AblationRow> ablation_suite(const PreparedDataset& data,
                                               const ModelConfig& base,
                                               const TrainConfig& tcfg,
                                               const FoldPlan& plan,
                                               int parallel = 1) {
  const std::vector<std::vector<Modality>> modality_sets = {
      {Modality::EEG1, Modality::EEG2, Modality::EOG},
      {Modality::EEG1},
      {Modality::EEG2},
      {Modality::EOG},
  };
  std::vector<AblationRow> rows;
  for (Fusion fusion : {Fusion::Gcn, Fusion::Concat}) {
    for (Temporal temporal : {Temporal::Full, Temporal::CnnOnly}) {
      for (const auto& mods : modality_sets) {
        AblationRow row;
        row.config = base;
        row.config.fusion = fusion;
        row.config.temporal = temporal;
        row.config.modalities = mods;
        row.name = std::string(fusion_name(fusion)) + "/" +
                   temporal_name(temporal) + "/" + modality_set_name(mods);
        row.report = cross_validate(data, row.config, tcfg, plan, parallel);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

}  // namespace somnilex
