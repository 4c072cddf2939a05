#pragma once

#include <string>
#include <vector>

#include "somnilex/common.hpp"
#include "somnilex/recording.hpp"

namespace somnilex {

enum class Fusion { Gcn, Concat };
enum class Temporal { Full, CnnOnly };
enum class InterPool { Mean, Last };

inline const char* fusion_name(Fusion f) {
  return f == Fusion::Gcn ? "gcn" : "concat";
}
inline Fusion fusion_from_name(const std::string& s) {
  if (s == "gcn") return Fusion::Gcn;
  if (s == "concat") return Fusion::Concat;
  throw ConfigError("unknown fusion mode: " + s + " (expected gcn|concat)");
}
inline const char* temporal_name(Temporal t) {
  return t == Temporal::Full ? "full" : "cnn_only";
}
inline Temporal temporal_from_name(const std::string& s) {
  if (s == "full") return Temporal::Full;
  if (s == "cnn_only") return Temporal::CnnOnly;
  throw ConfigError("unknown temporal mode: " + s + " (expected full|cnn_only)");
}

// Network hyperparameters. The defaults are the full-scale architecture:
// 64-dim CNN token embeddings from four branches of 16 maps each,
// 128-dim transformers with two stacked layers at both hierarchy levels,
// a 7-epoch context window and GCN fusion over the three modality nodes.
// `desk()` is the reduced preset sized for CPU-scale experiments.
struct ModelConfig {
  int d_cnn = 64;
  int cnn_branch_channels = 16;
  std::vector<int> cnn_kernels = {16, 32, 64, 128};
  int cnn_trunk_kernel = 8;
  int cnn_pool = 4;  // max-pool kernel and stride after the trunk conv
  int d_tr = 128;
  int num_heads = 4;
  int d_ff = 256;
  int transformer_layers = 2;
  int context_window = 7;
  double dropout = 0.1;
  Fusion fusion = Fusion::Gcn;
  Temporal temporal = Temporal::Full;
  std::vector<Modality> modalities = {Modality::EEG1, Modality::EEG2,
                                      Modality::EOG};
  int num_classes = 5;
  int tokens_per_epoch = 13;
  int token_len = 300;
  bool share_encoders = false;
  InterPool inter_pool = InterPool::Mean;

  static ModelConfig full_scale() { return ModelConfig{}; }

  // Reduced preset for CPU-scale runs. Last-position pooling of the context
  // window replaces mean pooling here: with the positional tables starting
  // at zero, mean pooling blurs which epoch of the window is being
  // classified and the desk-sized model fails to get off the ground within
  // the short schedule.
  static ModelConfig desk() {
    ModelConfig c;
    c.d_cnn = 8;
    c.cnn_branch_channels = 2;
    c.d_tr = 16;
    c.num_heads = 2;
    c.d_ff = 32;
    c.inter_pool = InterPool::Last;
    return c;
  }

  int num_modalities() const { return static_cast<int>(modalities.size()); }

  void validate() const {
    if (modalities.empty()) throw ConfigError("model needs at least 1 modality");
    for (std::size_t i = 0; i < modalities.size(); ++i)
      for (std::size_t j = i + 1; j < modalities.size(); ++j)
        if (modalities[i] == modalities[j])
          throw ConfigError("duplicate modality in config");
    if (d_tr % num_heads != 0)
      throw ConfigError("d_tr=" + std::to_string(d_tr) +
                        " must be divisible by num_heads=" +
                        std::to_string(num_heads));
    if (d_cnn != cnn_branch_channels * static_cast<int>(cnn_kernels.size()))
      throw ConfigError(
          "d_cnn must equal cnn_branch_channels * number of CNN branches");
    if (context_window < 1) throw ConfigError("context_window must be >= 1");
    if (transformer_layers < 1)
      throw ConfigError("transformer_layers must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("dropout must lie in [0, 1)");
    if (tokens_per_epoch < 1 || token_len < 1)
      throw ConfigError("token geometry must be positive");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  }
};

}  // namespace somnilex
