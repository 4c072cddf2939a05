#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "somnilex/ad/adam.hpp"
#include "somnilex/ad/ops.hpp"
#include "somnilex/model/network.hpp"
#include "somnilex/tokenizer.hpp"
#include "somnilex/train/folds.hpp"
#include "somnilex/train/metrics.hpp"
#include "somnilex/train/prepare.hpp"

namespace somnilex {

struct TrainConfig {
  int train_epochs = 15;
  int batch_windows = 32;  // consecutive windows per mini-batch
  ad::AdamHyper adam;      // lr 1e-3, weight decay 1e-4, step schedule below
  std::uint64_t seed = 1;
  bool use_class_weights = false;
  TokenizerConfig tokenizer;

  void validate(const ModelConfig& mcfg) const {
    if (train_epochs < 1) throw ConfigError("train_epochs must be >= 1");
    if (batch_windows < 1) throw ConfigError("batch_windows must be >= 1");
    adam.validate();
    if (tokenizer.num_tokens() != mcfg.tokens_per_epoch ||
        tokenizer.window_samples() != mcfg.token_len)
      throw ConfigError(
          "tokenizer geometry (" + std::to_string(tokenizer.num_tokens()) +
          " tokens of " + std::to_string(tokenizer.window_samples()) +
          ") does not match the model (" +
          std::to_string(mcfg.tokens_per_epoch) + " of " +
          std::to_string(mcfg.token_len) + ")");
  }
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
  std::vector<double> learning_rate;
};

struct TrainResult {
  ad::ParameterStore<float> best_params;
  TrainHistory history;
  double best_val_accuracy = 0.0;
  int best_epoch = -1;
  std::uint64_t final_checksum = 0;  // checksum of the final (not best) weights
};

namespace train_detail {

// One mini-batch: `count` consecutive windows (one per epoch) of a subject.
struct Chunk {
  int subject;
  int start_epoch;
  int count;
};

inline std::vector<Chunk> make_chunks(const PreparedDataset& data,
                                      const std::vector<int>& subject_idx,
                                      int batch_windows) {
  std::vector<Chunk> chunks;
  for (int s : subject_idx) {
    const int n = static_cast<int>(data[s].labels.size());
    for (int start = 0; start < n; start += batch_windows)
      chunks.push_back({s, start, std::min(batch_windows, n - start)});
  }
  return chunks;
}

// Builds the model inputs for a chunk: per-modality (E_local, T, token_len)
// token tensors covering the chunk plus up to window-1 context epochs before
// it, window index lists (left-edge repetition at the subject start), and
// targets.
template <class S>
struct ChunkInputs {
  std::vector<ad::NodePtr<S>> tokens;  // per modality
  std::vector<std::vector<int>> windows;
  std::vector<int> targets;
};

template <class S>
ChunkInputs<S> build_chunk_inputs(const PreparedDataset& data,
                                  const Chunk& chunk, const ModelConfig& mcfg,
                                  const TokenizerConfig& tok) {
  const PreparedSubject& subj = data[chunk.subject];
  const int W = mcfg.context_window;
  const int ctx_start = std::max(0, chunk.start_epoch - (W - 1));
  const int e_local = chunk.start_epoch + chunk.count - ctx_start;
  const int T = mcfg.tokens_per_epoch;
  const int L = mcfg.token_len;
  const int stride = tok.stride_samples();

  ChunkInputs<S> out;
  for (Modality mod : mcfg.modalities) {
    const EpochTensor& eps = subj.modalities[static_cast<int>(mod)];
    ad::Tensor<S> t({e_local, T, L});
    S* dst = t.ptr();
    for (int e = 0; e < e_local; ++e) {
      const std::span<const float> src = eps.epoch(ctx_start + e);
      for (int j = 0; j < T; ++j) {
        const float* s0 = src.data() + static_cast<std::size_t>(j) * stride;
        for (int l = 0; l < L; ++l) *dst++ = static_cast<S>(s0[l]);
      }
    }
    out.tokens.push_back(ad::leaf(std::move(t)));
  }
  out.windows.reserve(chunk.count);
  out.targets.reserve(chunk.count);
  for (int i = chunk.start_epoch; i < chunk.start_epoch + chunk.count; ++i) {
    std::vector<int> idx(W);
    for (int j = 0; j < W; ++j)
      idx[j] = std::max(0, i - (W - 1) + j) - ctx_start;
    out.windows.push_back(std::move(idx));
    out.targets.push_back(static_cast<int>(subj.labels[i]));
  }
  return out;
}

inline void check_disjoint(const PreparedDataset& data,
                           const std::vector<int>& train_idx,
                           const std::vector<int>& val_idx) {
  std::set<std::string> train_ids;
  for (int i : train_idx) train_ids.insert(data[i].subject_id);
  for (int i : val_idx)
    if (train_ids.count(data[i].subject_id))
      throw ConfigError("subject " + data[i].subject_id +
                        " appears in both the training and validation split");
}

}  // namespace train_detail

struct EvalResult {
  MetricsReport metrics;
  double mean_loss = 0.0;
  std::map<std::string, std::vector<Stage>> predictions;
};

// Inference over whole subjects: every epoch is scored (early epochs through
// the left-edge repetition rule). Uses running batch-norm statistics and no
// dropout; safe to run concurrently over an immutable parameter snapshot.
inline EvalResult evaluate_model(SleepModel<float>& model,
                                 const PreparedDataset& data,
                                 const std::vector<int>& subject_idx,
                                 const TokenizerConfig& tok = {}) {
  using namespace train_detail;
  if (subject_idx.empty()) throw ConfigError("evaluate: empty split");
  ad::NoGradGuard off;
  ForwardCtx<float> ctx;  // training=false
  EvalResult out;
  std::vector<Stage> truth_all, pred_all;
  double loss_sum = 0.0;
  std::int64_t loss_count = 0;
  const std::vector<Chunk> chunks = make_chunks(data, subject_idx, 128);
  for (const Chunk& c : chunks) {
    auto in = build_chunk_inputs<float>(data, c, model.config, tok);
    auto logits = model.window_logits(in.tokens, in.windows, ctx);
    auto loss = ad::cross_entropy(logits, in.targets);
    loss_sum += static_cast<double>(loss->value.data[0]) * c.count;
    loss_count += c.count;
    auto& pred = out.predictions[data[c.subject].subject_id];
    const int K = model.config.num_classes;
    for (int i = 0; i < c.count; ++i) {
      const float* row = logits->value.ptr() + static_cast<std::size_t>(i) * K;
      int best = 0;
      for (int k = 1; k < K; ++k)
        if (row[k] > row[best]) best = k;
      pred.push_back(stage_from_index(best));
      truth_all.push_back(data[c.subject].labels[c.start_epoch + i]);
      pred_all.push_back(stage_from_index(best));
    }
  }
  out.mean_loss = loss_sum / static_cast<double>(loss_count);
  out.metrics = compute_metrics(truth_all, pred_all);
  return out;
}

// End-to-end training: mini-batch SGD over context windows with Adam, the
// step learning-rate schedule (x0.1 every 5 epochs) and a fixed epoch
// budget; the checkpoint with the best validation accuracy is retained.
// Batches are runs of consecutive windows of one subject, so the encoder
// work shared by overlapping windows is computed once per epoch per pass.
// Fully deterministic given the seed: init, batch order and dropout each
// draw from streams derived from it.
inline TrainResult train_model(const PreparedDataset& data,
                               const std::vector<int>& train_idx,
                               const std::vector<int>& val_idx,
                               const ModelConfig& mcfg,
                               const TrainConfig& tcfg) {
  using namespace train_detail;
  mcfg.validate();
  tcfg.validate(mcfg);
  if (train_idx.empty()) throw ConfigError("train: empty training split");
  if (val_idx.empty()) throw ConfigError("train: empty validation split");
  check_disjoint(data, train_idx, val_idx);

  SleepModel<float> model(mcfg, derive_seed(tcfg.seed, "init"));
  Rng dropout_rng(derive_seed(tcfg.seed, "dropout"));

  std::vector<double> class_weights;
  const std::vector<double>* cw = nullptr;
  if (tcfg.use_class_weights) {
    std::array<std::int64_t, kNumStages> counts{};
    std::int64_t total = 0;
    for (int s : train_idx)
      for (Stage st : data[s].labels) {
        counts[static_cast<int>(st)]++;
        ++total;
      }
    class_weights.resize(kNumStages);
    for (int c = 0; c < kNumStages; ++c)
      class_weights[c] =
          counts[c] > 0
              ? static_cast<double>(total) / (kNumStages * static_cast<double>(counts[c]))
              : 0.0;
    cw = &class_weights;
  }

  TrainResult result;
  result.best_params = model.params.clone();

  std::vector<Chunk> chunks = make_chunks(data, train_idx, tcfg.batch_windows);
  for (int epoch = 0; epoch < tcfg.train_epochs; ++epoch) {
    ad::AdamHyper hyper = tcfg.adam;
    hyper.learning_rate = ad::step_lr(epoch, tcfg.adam.learning_rate);

    Rng order_rng(derive_seed(tcfg.seed, "batch-order",
                              static_cast<std::uint64_t>(epoch)));
    order_rng.shuffle(chunks);

    double loss_sum = 0.0;
    std::int64_t window_count = 0;
    ForwardCtx<float> ctx;
    ctx.training = true;
    ctx.dropout_rng = &dropout_rng;
    for (const Chunk& c : chunks) {
      auto in = build_chunk_inputs<float>(data, c, mcfg, tcfg.tokenizer);
      auto logits = model.window_logits(in.tokens, in.windows, ctx);
      auto loss = ad::cross_entropy(logits, in.targets, cw);
      model.params.zero_grad();
      ad::backward(loss);
      ad::adam_step(model.params, hyper);
      loss_sum += static_cast<double>(loss->value.data[0]) * c.count;
      window_count += c.count;
    }

    EvalResult val = evaluate_model(model, data, val_idx, tcfg.tokenizer);
    result.history.train_loss.push_back(loss_sum /
                                        static_cast<double>(window_count));
    result.history.val_loss.push_back(val.mean_loss);
    result.history.val_accuracy.push_back(val.metrics.accuracy);
    result.history.learning_rate.push_back(hyper.learning_rate);
    if (val.metrics.accuracy > result.best_val_accuracy ||
        result.best_epoch < 0) {
      result.best_val_accuracy = val.metrics.accuracy;
      result.best_epoch = epoch;
      result.best_params = model.params.clone();
    }
  }
  result.final_checksum = model.params.checksum();
  return result;
}

struct FoldResult {
  int fold = 0;
  std::vector<std::string> val_subjects;
  MetricsReport metrics;
  double mean_loss = 0.0;
  TrainHistory history;
  double best_val_accuracy = 0.0;
  int best_epoch = -1;
  std::map<std::string, std::vector<Stage>> predictions;
  // Populated only when cross_validate(..., keep_weights=true).
  std::shared_ptr<ad::ParameterStore<float>> best_params;
};

struct CrossValReport {
  FoldPlan plan;
  std::vector<FoldResult> folds;
  MetricsReport pooled;  // metrics of the summed fold confusions
  double mean_accuracy = 0.0, std_accuracy = 0.0;
  double mean_mf1 = 0.0, std_mf1 = 0.0;
  double kappa_pooled = 0.0;    // kappa of the pooled confusion
  double kappa_mean = 0.0, kappa_std = 0.0;  // across folds
};

// Subject-wise k-fold cross-validation. Each fold trains on the complement
// and is evaluated on its held-out subjects with the fold's best-validation
// checkpoint. Per-fold seeds derive from the base seed and the fold index,
// so folds are independent and may run in parallel.
inline CrossValReport cross_validate(const PreparedDataset& data,
                                     const ModelConfig& mcfg,
                                     const TrainConfig& tcfg,
                                     const FoldPlan& plan, int parallel = 1,
                                     bool keep_weights = false) {
  std::map<std::string, int> subject_to_index;
  for (std::size_t i = 0; i < data.size(); ++i)
    subject_to_index[data[i].subject_id] = static_cast<int>(i);
  for (const auto& [id, fold] : plan.assignments)
    if (!subject_to_index.count(id))
      throw ConfigError("fold plan references unknown subject " + id);

  CrossValReport report;
  report.plan = plan;
  report.folds.resize(plan.k);

  auto run_fold = [&](int f) {
    std::vector<int> train_idx, val_idx;
    for (const auto& [id, fold] : plan.assignments) {
      (fold == f ? val_idx : train_idx).push_back(subject_to_index.at(id));
    }
    TrainConfig fold_cfg = tcfg;
    fold_cfg.seed = derive_seed(tcfg.seed, "fold", static_cast<std::uint64_t>(f));
    TrainResult tr = train_model(data, train_idx, val_idx, mcfg, fold_cfg);
    SleepModel<float> best(mcfg, /*init_seed=*/0);
    best.params.assign_from(tr.best_params);
    EvalResult ev = evaluate_model(best, data, val_idx, tcfg.tokenizer);
    FoldResult& fr = report.folds[f];
    fr.fold = f;
    fr.val_subjects = plan.fold_subjects(f);
    fr.metrics = ev.metrics;
    fr.mean_loss = ev.mean_loss;
    fr.history = tr.history;
    fr.best_val_accuracy = tr.best_val_accuracy;
    fr.best_epoch = tr.best_epoch;
    fr.predictions = ev.predictions;
    if (keep_weights)
      fr.best_params = std::make_shared<ad::ParameterStore<float>>(
          std::move(tr.best_params));
  };

  if (parallel <= 1) {
    for (int f = 0; f < plan.k; ++f) run_fold(f);
  } else {
    for (int f0 = 0; f0 < plan.k; f0 += parallel) {
      std::vector<std::thread> pool;
      for (int f = f0; f < std::min(plan.k, f0 + parallel); ++f)
        pool.emplace_back(run_fold, f);
      for (auto& t : pool) t.join();
    }
  }

  std::vector<std::vector<std::int64_t>> pooled(
      kNumStages, std::vector<std::int64_t>(kNumStages, 0));
  double acc_sum = 0.0, acc_sq = 0.0, mf1_sum = 0.0, mf1_sq = 0.0;
  double kap_sum = 0.0, kap_sq = 0.0;
  for (const FoldResult& fr : report.folds) {
    for (int i = 0; i < kNumStages; ++i)
      for (int j = 0; j < kNumStages; ++j)
        pooled[i][j] += fr.metrics.confusion[i][j];
    acc_sum += fr.metrics.accuracy;
    acc_sq += fr.metrics.accuracy * fr.metrics.accuracy;
    mf1_sum += fr.metrics.macro_f1;
    mf1_sq += fr.metrics.macro_f1 * fr.metrics.macro_f1;
    kap_sum += fr.metrics.kappa;
    kap_sq += fr.metrics.kappa * fr.metrics.kappa;
  }
  const double k = static_cast<double>(plan.k);
  auto finish_std = [k](double sum, double sq) {
    const double mean = sum / k;
    const double var = std::max(0.0, sq / k - mean * mean);
    return std::sqrt(var);
  };
  report.pooled = metrics_from_confusion(pooled);
  report.mean_accuracy = acc_sum / k;
  report.std_accuracy = finish_std(acc_sum, acc_sq);
  report.mean_mf1 = mf1_sum / k;
  report.std_mf1 = finish_std(mf1_sum, mf1_sq);
  report.kappa_pooled = report.pooled.kappa;
  report.kappa_mean = kap_sum / k;
  report.kappa_std = finish_std(kap_sum, kap_sq);
  return report;
}

}  // namespace somnilex
