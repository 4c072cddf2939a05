#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "somnilex/model/config.hpp"
#include "somnilex/train/ablation.hpp"
#include "somnilex/train/trainer.hpp"

namespace somnilex {

using nlohmann::json;

inline json to_json(const ModelConfig& c) {
  json j;
  j["d_cnn"] = c.d_cnn;
  j["cnn_branch_channels"] = c.cnn_branch_channels;
  j["cnn_kernels"] = c.cnn_kernels;
  j["cnn_trunk_kernel"] = c.cnn_trunk_kernel;
  j["cnn_pool"] = c.cnn_pool;
  j["d_tr"] = c.d_tr;
  j["num_heads"] = c.num_heads;
  j["d_ff"] = c.d_ff;
  j["transformer_layers"] = c.transformer_layers;
  j["context_window"] = c.context_window;
  j["dropout"] = c.dropout;
  j["fusion"] = fusion_name(c.fusion);
  j["temporal"] = temporal_name(c.temporal);
  std::vector<std::string> mods;
  for (Modality m : c.modalities) mods.push_back(modality_name(m));
  j["modalities"] = mods;
  j["num_classes"] = c.num_classes;
  j["tokens_per_epoch"] = c.tokens_per_epoch;
  j["token_len"] = c.token_len;
  j["share_encoders"] = c.share_encoders;
  j["inter_pool"] = c.inter_pool == InterPool::Mean ? "mean" : "last";
  return j;
}

inline ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.d_cnn = j.at("d_cnn");
  c.cnn_branch_channels = j.at("cnn_branch_channels");
  c.cnn_kernels = j.at("cnn_kernels").get<std::vector<int>>();
  c.cnn_trunk_kernel = j.at("cnn_trunk_kernel");
  c.cnn_pool = j.at("cnn_pool");
  c.d_tr = j.at("d_tr");
  c.num_heads = j.at("num_heads");
  c.d_ff = j.at("d_ff");
  c.transformer_layers = j.at("transformer_layers");
  c.context_window = j.at("context_window");
  c.dropout = j.at("dropout");
  c.fusion = fusion_from_name(j.at("fusion"));
  c.temporal = temporal_from_name(j.at("temporal"));
  c.modalities.clear();
  for (const auto& m : j.at("modalities"))
    c.modalities.push_back(modality_from_name(m.get<std::string>()));
  c.num_classes = j.at("num_classes");
  c.tokens_per_epoch = j.at("tokens_per_epoch");
  c.token_len = j.at("token_len");
  c.share_encoders = j.at("share_encoders");
  c.inter_pool =
      j.at("inter_pool") == "mean" ? InterPool::Mean : InterPool::Last;
  c.validate();
  return c;
}

inline json to_json(const TrainConfig& c) {
  json j;
  j["train_epochs"] = c.train_epochs;
  j["batch_windows"] = c.batch_windows;
  j["learning_rate"] = c.adam.learning_rate;
  j["weight_decay"] = c.adam.weight_decay;
  j["beta1"] = c.adam.beta1;
  j["beta2"] = c.adam.beta2;
  j["epsilon"] = c.adam.epsilon;
  j["seed"] = c.seed;
  j["use_class_weights"] = c.use_class_weights;
  j["tokenizer_window_s"] = c.tokenizer.window_s;
  j["tokenizer_stride_s"] = c.tokenizer.stride_s;
  return j;
}

inline json to_json(const MetricsReport& m) {
  json j;
  j["confusion"] = m.confusion;
  j["total"] = m.total;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["macro_f1"] = m.macro_f1;
  j["kappa"] = m.kappa;
  j["f1_undefined"] = m.f1_undefined;
  return j;
}

inline json to_json(const TrainHistory& h) {
  json j;
  j["train_loss"] = h.train_loss;
  j["val_loss"] = h.val_loss;
  j["val_accuracy"] = h.val_accuracy;
  j["learning_rate"] = h.learning_rate;
  return j;
}

inline json to_json(const FoldPlan& p) {
  json j;
  j["k"] = p.k;
  json a = json::object();
  for (const auto& [id, fold] : p.assignments) a[id] = fold;
  j["assignments"] = a;
  return j;
}

inline json to_json(const CrossValReport& r) {
  json j;
  j["plan"] = to_json(r.plan);
  json folds = json::array();
  for (const auto& f : r.folds) {
    json jf;
    jf["fold"] = f.fold;
    jf["val_subjects"] = f.val_subjects;
    jf["metrics"] = to_json(f.metrics);
    jf["mean_loss"] = f.mean_loss;
    jf["history"] = to_json(f.history);
    jf["best_val_accuracy"] = f.best_val_accuracy;
    jf["best_epoch"] = f.best_epoch;
    folds.push_back(jf);
  }
  j["folds"] = folds;
  json agg;
  agg["pooled_metrics"] = to_json(r.pooled);
  agg["mean_accuracy"] = r.mean_accuracy;
  agg["std_accuracy"] = r.std_accuracy;
  agg["mean_macro_f1"] = r.mean_mf1;
  agg["std_macro_f1"] = r.std_mf1;
  // The pooled kappa is computed from the summed confusion matrix; the
  // mean/std pair aggregates the per-fold kappas. Both are reported.
  agg["kappa_pooled"] = r.kappa_pooled;
  agg["kappa_mean"] = r.kappa_mean;
  agg["kappa_std"] = r.kappa_std;
  j["aggregate"] = agg;
  return j;
}

inline json to_json(const std::vector<AblationRow>& rows) {
  json j = json::array();
  for (const auto& row : rows) {
    json jr;
    jr["name"] = row.name;
    jr["config"] = to_json(row.config);
    jr["report"] = to_json(row.report);
    j.push_back(jr);
  }
  return j;
}

inline std::string crossval_table(const CrossValReport& r) {
  std::string out;
  char buf[256];
  out += "fold  val_subjects                 accuracy  macro_f1   kappa\n";
  for (const auto& f : r.folds) {
    std::string subjects;
    for (std::size_t i = 0; i < f.val_subjects.size(); ++i) {
      if (i) subjects += ",";
      subjects += f.val_subjects[i];
    }
    if (subjects.size() > 27) subjects = subjects.substr(0, 24) + "...";
    std::snprintf(buf, sizeof buf, "%4d  %-27s  %8.4f  %8.4f  %6.4f\n", f.fold,
                  subjects.c_str(), f.metrics.accuracy, f.metrics.macro_f1,
                  f.metrics.kappa);
    out += buf;
  }
  std::snprintf(buf, sizeof buf,
                "mean  accuracy %.4f +- %.4f   macro_f1 %.4f +- %.4f\n",
                r.mean_accuracy, r.std_accuracy, r.mean_mf1, r.std_mf1);
  out += buf;
  std::snprintf(buf, sizeof buf,
                "kappa pooled %.4f   per-fold mean %.4f +- %.4f\n",
                r.kappa_pooled, r.kappa_mean, r.kappa_std);
  out += buf;
  out += "pooled " + r.pooled.to_table();
  return out;
}

inline std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out;
  char buf[256];
  out +=
      "variant                            accuracy        macro_f1        "
      "kappa(pooled)\n";
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%-33s  %.4f+-%.4f  %.4f+-%.4f  %.4f\n",
                  row.name.c_str(), row.report.mean_accuracy,
                  row.report.std_accuracy, row.report.mean_mf1,
                  row.report.std_mf1, row.report.kappa_pooled);
    out += buf;
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << body;
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace somnilex
