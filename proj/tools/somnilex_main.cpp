// somnilex command-line interface: synthesize datasets, preprocess
// recordings, train and cross-validate the staging model, run the ablation
// grid and export hypnograms. Every run with an --out directory writes its
// resolved configuration next to its outputs so results are reproducible
// from the recorded flags alone.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "somnilex/somnilex.hpp"

namespace fs = std::filesystem;
using namespace somnilex;

namespace {

struct ModelOptions {
  std::string scale = "desk";
  int d_cnn = -1;
  int branch_channels = -1;
  int d_tr = -1;
  int heads = -1;
  int d_ff = -1;
  int layers = -1;
  int window = -1;
  double dropout = -1.0;
  std::string fusion = "gcn";
  std::string temporal = "full";
  std::string modalities = "EEG1,EEG2,EOG";
  bool share_encoders = false;
  std::string inter_pool;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--model-scale", scale,
                    "model preset: desk (reduced) or paper (full-size)")
        ->check(CLI::IsMember({"desk", "paper"}))
        ->capture_default_str();
    cmd->add_option("--d-cnn", d_cnn, "CNN token embedding width");
    cmd->add_option("--branch-channels", branch_channels,
                    "feature maps per CNN branch");
    cmd->add_option("--d-tr", d_tr, "transformer embedding width");
    cmd->add_option("--heads", heads, "attention heads");
    cmd->add_option("--d-ff", d_ff, "transformer feed-forward width");
    cmd->add_option("--layers", layers, "transformer layers per level");
    cmd->add_option("--window", window, "context window length in epochs");
    cmd->add_option("--dropout", dropout, "dropout probability");
    cmd->add_option("--fusion", fusion, "fusion mode: gcn or concat")
        ->check(CLI::IsMember({"gcn", "concat"}))
        ->capture_default_str();
    cmd->add_option("--temporal", temporal, "temporal mode: full or cnn_only")
        ->check(CLI::IsMember({"full", "cnn_only"}))
        ->capture_default_str();
    cmd->add_option("--modalities", modalities,
                    "comma-separated subset of EEG1,EEG2,EOG")
        ->capture_default_str();
    cmd->add_flag("--share-encoders", share_encoders,
                  "share one encoder stack across modalities");
    cmd->add_option("--inter-pool", inter_pool,
                    "context pooling: mean or last (default per preset)")
        ->check(CLI::IsMember({"mean", "last"}));
  }

  ModelConfig resolve() const {
    ModelConfig c = scale == "paper" ? ModelConfig::full_scale()
                                     : ModelConfig::desk();
    if (d_cnn > 0) c.d_cnn = d_cnn;
    if (branch_channels > 0) c.cnn_branch_channels = branch_channels;
    if (d_tr > 0) c.d_tr = d_tr;
    if (heads > 0) c.num_heads = heads;
    if (d_ff > 0) c.d_ff = d_ff;
    if (layers > 0) c.transformer_layers = layers;
    if (window > 0) c.context_window = window;
    if (dropout >= 0.0) c.dropout = dropout;
    c.fusion = fusion_from_name(fusion);
    c.temporal = temporal_from_name(temporal);
    c.modalities.clear();
    std::string tok;
    std::istringstream ms(modalities);
    while (std::getline(ms, tok, ',')) c.modalities.push_back(modality_from_name(tok));
    c.share_encoders = share_encoders;
    if (!inter_pool.empty())
      c.inter_pool = inter_pool == "mean" ? InterPool::Mean : InterPool::Last;
    c.validate();
    return c;
  }
};

struct TrainOptions {
  int train_epochs = 15;
  int batch_windows = 32;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  bool class_weights = false;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--train-epochs", train_epochs, "training epoch budget")
        ->capture_default_str();
    cmd->add_option("--batch-windows", batch_windows,
                    "consecutive windows per mini-batch")
        ->capture_default_str();
    cmd->add_option("--lr", lr, "base Adam learning rate")
        ->capture_default_str();
    cmd->add_option("--weight-decay", weight_decay, "L2 weight decay")
        ->capture_default_str();
    cmd->add_flag("--class-weights", class_weights,
                  "weight the loss by inverse class frequency");
  }

  TrainConfig resolve(std::uint64_t seed) const {
    TrainConfig t;
    t.train_epochs = train_epochs;
    t.batch_windows = batch_windows;
    t.adam.learning_rate = lr;
    t.adam.weight_decay = weight_decay;
    t.use_class_weights = class_weights;
    t.seed = seed;
    return t;
  }
};

void write_run_config(const fs::path& out_dir, const json& j) {
  fs::create_directories(out_dir);
  write_text_file((out_dir / "run_config.json").string(), j.dump(2) + "\n");
}

PreparedDataset load_prepared(const std::string& data_dir) {
  return prepare_dataset(read_native_dataset(data_dir));
}

std::vector<std::string> subject_ids(const PreparedDataset& data) {
  std::vector<std::string> ids;
  for (const auto& s : data) ids.push_back(s.subject_id);
  return ids;
}

Hypnogram labels_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file: " + path);
  Hypnogram h;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    h.labels.push_back(stage_from_name(line));
  }
  return h;
}

// --- subcommand bodies -----------------------------------------------------

int run_synth(const std::string& out_dir, SynthConfig& sc) {
  auto subjects = synth_dataset(sc);
  write_native_dataset(out_dir, subjects);
  json j;
  j["command"] = "synth";
  j["seed"] = sc.seed;
  j["num_subjects"] = sc.num_subjects;
  j["epochs_per_subject"] = sc.epochs_per_subject;
  j["context_coupled"] = sc.context_coupled;
  j["coupling_weak"] = sc.coupling_weak;
  j["noise_std"] = sc.noise_std;
  j["start_stage"] = stage_name(sc.start_stage);
  std::vector<std::vector<double>> tm;
  for (const auto& row : sc.transition_matrix)
    tm.emplace_back(row.begin(), row.end());
  j["transition_matrix"] = tm;
  write_run_config(out_dir, j);
  std::printf("wrote %d subjects x %d epochs to %s\n", sc.num_subjects,
              sc.epochs_per_subject, out_dir.c_str());
  return 0;
}

int run_preprocess(const std::string& in_path, const std::string& out_dir,
                   const std::string& labels_path, const std::string& eeg1,
                   const std::string& eeg2, const std::string& eog,
                   const std::string& subject_override) {
  const FilterSpec bp100 = design_bandpass(0.5, 49.9, 100, 5);

  auto process_record = [&](SubjectRecord subj) {
    // Band-pass at the native rate; a 200 Hz recording is decimated with
    // the 200 Hz design serving as the anti-alias filter.
    SubjectRecord out;
    out.recording.subject_id = subj.recording.subject_id;
    out.recording.sample_rate_hz = kSampleRateHz;
    out.hypnogram = subj.hypnogram;
    out.filtered = true;
    for (auto& ch : subj.recording.channels) {
      std::vector<float> sig;
      if (subj.recording.sample_rate_hz == 200) {
        const FilterSpec bp200 = design_bandpass(0.5, 49.9, 200, 5);
        sig = resample_half(ch.samples, bp200);
      } else if (subj.recording.sample_rate_hz == kSampleRateHz) {
        sig = filtfilt(bp100, std::span<const float>(ch.samples));
      } else {
        throw ConfigError("unsupported sample rate " +
                          std::to_string(subj.recording.sample_rate_hz) +
                          " Hz on channel " + ch.name);
      }
      out.recording.channels.push_back({ch.name, std::move(sig)});
    }
    // Trim to whole epochs shared by signal and labels.
    auto epochs_available =
        static_cast<int>(out.recording.num_samples() / kEpochSamples);
    int n = std::min<int>(epochs_available,
                          static_cast<int>(out.hypnogram.labels.size()));
    if (n < epochs_available || out.recording.num_samples() % kEpochSamples)
      std::fprintf(stderr,
                   "%s: trimmed to %d whole labeled epochs (%zu samples in)\n",
                   out.recording.subject_id.c_str(), n,
                   subj.recording.num_samples());
    out.hypnogram.labels.resize(n);
    for (auto& ch : out.recording.channels)
      ch.samples.resize(static_cast<std::size_t>(n) * kEpochSamples);
    write_native_subject(fs::path(out_dir) / out.recording.subject_id, out);
  };

  auto import_edf = [&](const fs::path& edf_path, const fs::path& label_path) {
    EdfData edf = read_edf(edf_path.string());
    std::string sid = subject_override.empty() ? edf_path.stem().string()
                                               : subject_override;
    SubjectRecord subj;
    subj.recording.subject_id = sid;
    subj.recording.sample_rate_hz = edf.sample_rate(0);
    // Select and rename the three modeled channels.
    const std::vector<std::pair<std::string, std::string>> mapping = {
        {eeg1, "EEG1"}, {eeg2, "EEG2"}, {eog, "EOG"}};
    for (const auto& [want, canonical] : mapping) {
      bool found = false;
      for (std::size_t i = 0; i < edf.signals.size(); ++i) {
        if (edf.signals[i].label == want) {
          if (edf.sample_rate(static_cast<int>(i)) !=
              subj.recording.sample_rate_hz)
            throw ConfigError("channel " + want +
                              " has a different sample rate than the first "
                              "selected channel");
          subj.recording.channels.push_back(
              {canonical, edf.physical(static_cast<int>(i))});
          found = true;
          break;
        }
      }
      if (!found)
        throw ConfigError("EDF file " + edf_path.string() +
                          " has no channel labelled \"" + want +
                          "\" (use --eeg1/--eeg2/--eog to map names)");
    }
    subj.hypnogram = labels_from_file(label_path.string());
    subj.filtered = false;
    process_record(std::move(subj));
  };

  if (fs::is_directory(in_path) && fs::exists(fs::path(in_path) / "")) {
    bool any_edf = false;
    for (const auto& e : fs::directory_iterator(in_path))
      if (e.path().extension() == ".edf") any_edf = true;
    if (any_edf) {
      for (const auto& e : fs::directory_iterator(in_path)) {
        if (e.path().extension() != ".edf") continue;
        fs::path lbl = e.path();
        lbl.replace_extension(".labels.txt");
        if (!fs::exists(lbl))
          throw IoError("missing label sidecar " + lbl.string());
        import_edf(e.path(), lbl);
      }
    } else {
      for (auto& subj : read_native_dataset(in_path)) process_record(subj);
    }
  } else {
    if (labels_path.empty())
      throw ConfigError("preprocessing a single EDF file requires --labels");
    import_edf(in_path, labels_path);
  }

  json j;
  j["command"] = "preprocess";
  j["in"] = in_path;
  j["labels"] = labels_path;
  j["eeg1"] = eeg1;
  j["eeg2"] = eeg2;
  j["eog"] = eog;
  write_run_config(out_dir, j);
  std::printf("preprocessed dataset written to %s\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "somnilex: hierarchical multimodal sleep staging at desk scale"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI/TOML file");

  // ---- synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  SynthConfig sc;
  std::string synth_out;
  std::string start_stage = "W";
  synth->add_option("--subjects", sc.num_subjects, "number of subjects")
      ->capture_default_str();
  synth->add_option("--epochs", sc.epochs_per_subject, "epochs per subject")
      ->capture_default_str();
  synth->add_option("--seed", sc.seed, "generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_flag("--coupled", sc.context_coupled,
                  "context-coupled mode: event density depends on the "
                  "previous epoch's stage");
  synth->add_option("--coupling-weak", sc.coupling_weak,
                    "density multiplier right after a stage change")
      ->capture_default_str();
  synth->add_option("--noise-std", sc.noise_std, "background noise (uV)")
      ->capture_default_str();
  synth->add_option("--start-stage", start_stage, "initial stage label")
      ->capture_default_str();

  // ---- preprocess
  auto* prep = app.add_subcommand(
      "preprocess", "band-pass filter and epoch a dataset (EDF or native)");
  std::string prep_in, prep_out, prep_labels, prep_subject;
  std::string prep_eeg1 = "EEG1", prep_eeg2 = "EEG2", prep_eog = "EOG";
  prep->add_option("--in", prep_in, "EDF file, directory of .edf files, or native dataset")
      ->required();
  prep->add_option("--out", prep_out, "output dataset directory")->required();
  prep->add_option("--labels", prep_labels,
                   "label file for a single EDF (one of W/N1/N2/N3/REM per line)");
  prep->add_option("--eeg1", prep_eeg1, "EDF channel name for EEG1")
      ->capture_default_str();
  prep->add_option("--eeg2", prep_eeg2, "EDF channel name for EEG2")
      ->capture_default_str();
  prep->add_option("--eog", prep_eog, "EDF channel name for EOG")
      ->capture_default_str();
  prep->add_option("--subject", prep_subject, "override subject id");

  // ---- train
  auto* train = app.add_subcommand("train", "train one model on a split");
  std::string train_data, train_out, val_subjects;
  std::uint64_t train_seed = 1;
  int holdout = 1;
  ModelOptions train_model_opts;
  TrainOptions train_train_opts;
  train->add_option("--data", train_data, "native dataset directory")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--seed", train_seed, "seed for init/batching/dropout")
      ->capture_default_str();
  train->add_option("--holdout", holdout,
                    "validation subjects held out (seeded shuffle)")
      ->capture_default_str();
  train->add_option("--val-subjects", val_subjects,
                    "explicit comma-separated validation subject ids");
  train_model_opts.add_flags(train);
  train_train_opts.add_flags(train);

  // ---- crossval
  auto* cv = app.add_subcommand("crossval",
                                "subject-wise k-fold cross-validation");
  std::string cv_data, cv_out;
  std::uint64_t cv_seed = 1;
  int cv_folds = 4, cv_parallel = 1;
  ModelOptions cv_model_opts;
  TrainOptions cv_train_opts;
  cv->add_option("--data", cv_data, "native dataset directory")->required();
  cv->add_option("--out", cv_out, "output directory")->required();
  cv->add_option("--folds", cv_folds, "fold count")->capture_default_str();
  cv->add_option("--seed", cv_seed, "seed")->capture_default_str();
  cv->add_option("--parallel", cv_parallel, "folds trained concurrently")
      ->capture_default_str();
  cv_model_opts.add_flags(cv);
  cv_train_opts.add_flags(cv);

  // ---- evaluate
  auto* eval = app.add_subcommand("evaluate",
                                  "evaluate saved weights on a dataset");
  std::string eval_data, eval_weights, eval_out, eval_subjects;
  eval->add_option("--data", eval_data, "native dataset directory")->required();
  eval->add_option("--weights", eval_weights,
                   "checkpoint file (model_config.json expected beside it)")
      ->required();
  eval->add_option("--out", eval_out, "output directory")->required();
  eval->add_option("--subjects", eval_subjects,
                   "comma-separated subject ids (default: all)");

  // ---- ablate
  auto* abl = app.add_subcommand(
      "ablate", "fusion x temporal x modality ablation grid under shared folds");
  std::string abl_data, abl_out;
  std::uint64_t abl_seed = 1;
  int abl_folds = 4, abl_parallel = 1;
  ModelOptions abl_model_opts;
  TrainOptions abl_train_opts;
  abl->add_option("--data", abl_data, "native dataset directory")->required();
  abl->add_option("--out", abl_out, "output directory")->required();
  abl->add_option("--folds", abl_folds, "fold count")->capture_default_str();
  abl->add_option("--seed", abl_seed, "seed")->capture_default_str();
  abl->add_option("--parallel", abl_parallel, "folds trained concurrently")
      ->capture_default_str();
  abl_model_opts.add_flags(abl);
  abl_train_opts.add_flags(abl);

  // ---- hypnogram
  auto* hyp = app.add_subcommand(
      "hypnogram", "export truth-vs-predicted stage columns for one subject");
  std::string hyp_data, hyp_weights, hyp_subject, hyp_out;
  hyp->add_option("--data", hyp_data, "native dataset directory")->required();
  hyp->add_option("--weights", hyp_weights, "checkpoint file")->required();
  hyp->add_option("--subject", hyp_subject, "subject id")->required();
  hyp->add_option("--out", hyp_out, "output text file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) {
      sc.start_stage = stage_from_name(start_stage);
      return run_synth(synth_out, sc);
    }

    if (prep->parsed())
      return run_preprocess(prep_in, prep_out, prep_labels, prep_eeg1,
                            prep_eeg2, prep_eog, prep_subject);

    if (train->parsed()) {
      auto data = load_prepared(train_data);
      ModelConfig mcfg = train_model_opts.resolve();
      TrainConfig tcfg = train_train_opts.resolve(train_seed);
      std::vector<int> train_idx, val_idx;
      if (!val_subjects.empty()) {
        std::set<std::string> val_set;
        std::string tok;
        std::istringstream vs(val_subjects);
        while (std::getline(vs, tok, ',')) val_set.insert(tok);
        for (std::size_t i = 0; i < data.size(); ++i)
          (val_set.count(data[i].subject_id) ? val_idx : train_idx)
              .push_back(static_cast<int>(i));
      } else {
        auto ids = subject_ids(data);
        Rng rng(derive_seed(train_seed, "holdout"));
        std::vector<int> order(data.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        rng.shuffle(order);
        for (std::size_t i = 0; i < order.size(); ++i)
          (i + holdout >= order.size() ? val_idx : train_idx).push_back(order[i]);
      }
      TrainResult res = train_model(data, train_idx, val_idx, mcfg, tcfg);

      fs::create_directories(train_out);
      res.best_params.save((fs::path(train_out) / "model.ckpt").string());
      write_text_file((fs::path(train_out) / "model_config.json").string(),
                      to_json(mcfg).dump(2) + "\n");
      json hist = to_json(res.history);
      hist["best_epoch"] = res.best_epoch;
      hist["best_val_accuracy"] = res.best_val_accuracy;
      char cs[32];
      std::snprintf(cs, sizeof cs, "%016llx",
                    static_cast<unsigned long long>(res.final_checksum));
      hist["final_weights_checksum"] = cs;
      write_text_file((fs::path(train_out) / "history.json").string(),
                      hist.dump(2) + "\n");
      json j;
      j["command"] = "train";
      j["data"] = train_data;
      j["seed"] = train_seed;
      j["holdout"] = holdout;
      j["val_subjects"] = val_subjects;
      j["model"] = to_json(mcfg);
      j["train"] = to_json(tcfg);
      write_run_config(train_out, j);
      std::printf("best val accuracy %.4f (epoch %d); checkpoint at %s\n",
                  res.best_val_accuracy, res.best_epoch,
                  (fs::path(train_out) / "model.ckpt").c_str());
      return 0;
    }

    if (cv->parsed()) {
      auto data = load_prepared(cv_data);
      ModelConfig mcfg = cv_model_opts.resolve();
      TrainConfig tcfg = cv_train_opts.resolve(cv_seed);
      FoldPlan plan = make_folds(subject_ids(data), cv_folds, cv_seed);
      CrossValReport rep = cross_validate(data, mcfg, tcfg, plan, cv_parallel,
                                          /*keep_weights=*/true);

      fs::create_directories(cv_out);
      write_text_file((fs::path(cv_out) / "report.json").string(),
                      to_json(rep).dump(2) + "\n");
      write_text_file((fs::path(cv_out) / "report.txt").string(),
                      crossval_table(rep));
      write_text_file((fs::path(cv_out) / "model_config.json").string(),
                      to_json(mcfg).dump(2) + "\n");
      for (const auto& fr : rep.folds)
        if (fr.best_params)
          fr.best_params->save(
              (fs::path(cv_out) / ("fold" + std::to_string(fr.fold) + ".ckpt"))
                  .string());
      json j;
      j["command"] = "crossval";
      j["data"] = cv_data;
      j["folds"] = cv_folds;
      j["seed"] = cv_seed;
      j["model"] = to_json(mcfg);
      j["train"] = to_json(tcfg);
      write_run_config(cv_out, j);
      std::printf("%s", crossval_table(rep).c_str());
      return 0;
    }

    if (eval->parsed()) {
      auto data = load_prepared(eval_data);
      const fs::path wpath(eval_weights);
      const fs::path cfg_path = wpath.parent_path() / "model_config.json";
      if (!fs::exists(cfg_path))
        throw IoError("expected model configuration beside the checkpoint: " +
                      cfg_path.string());
      std::ifstream cfg_in(cfg_path);
      json jc = json::parse(cfg_in);
      ModelConfig mcfg = model_config_from_json(jc);

      SleepModel<float> model(mcfg, 0);
      model.params.load(eval_weights);
      std::vector<int> idx;
      if (eval_subjects.empty()) {
        for (std::size_t i = 0; i < data.size(); ++i) idx.push_back(static_cast<int>(i));
      } else {
        std::set<std::string> want;
        std::string tok;
        std::istringstream ss(eval_subjects);
        while (std::getline(ss, tok, ',')) want.insert(tok);
        for (std::size_t i = 0; i < data.size(); ++i)
          if (want.count(data[i].subject_id)) idx.push_back(static_cast<int>(i));
        if (idx.empty()) throw ConfigError("no matching subjects in dataset");
      }
      EvalResult ev = evaluate_model(model, data, idx);
      fs::create_directories(eval_out);
      json jr;
      jr["metrics"] = to_json(ev.metrics);
      jr["mean_loss"] = ev.mean_loss;
      write_text_file((fs::path(eval_out) / "metrics.json").string(),
                      jr.dump(2) + "\n");
      write_text_file((fs::path(eval_out) / "metrics.txt").string(),
                      ev.metrics.to_table());
      json j;
      j["command"] = "evaluate";
      j["data"] = eval_data;
      j["weights"] = eval_weights;
      j["subjects"] = eval_subjects;
      j["model"] = jc;
      write_run_config(eval_out, j);
      std::printf("%s", ev.metrics.to_table().c_str());
      return 0;
    }

    if (abl->parsed()) {
      auto data = load_prepared(abl_data);
      ModelConfig base = abl_model_opts.resolve();
      TrainConfig tcfg = abl_train_opts.resolve(abl_seed);
      FoldPlan plan = make_folds(subject_ids(data), abl_folds, abl_seed);
      auto rows = ablation_suite(data, base, tcfg, plan, abl_parallel);
      fs::create_directories(abl_out);
      write_text_file((fs::path(abl_out) / "ablation.json").string(),
                      to_json(rows).dump(2) + "\n");
      write_text_file((fs::path(abl_out) / "ablation.txt").string(),
                      ablation_table(rows));
      json j;
      j["command"] = "ablate";
      j["data"] = abl_data;
      j["folds"] = abl_folds;
      j["seed"] = abl_seed;
      j["model"] = to_json(base);
      j["train"] = to_json(tcfg);
      write_run_config(abl_out, j);
      std::printf("%s", ablation_table(rows).c_str());
      return 0;
    }

    if (hyp->parsed()) {
      auto data = load_prepared(hyp_data);
      const fs::path wpath(hyp_weights);
      const fs::path cfg_path = wpath.parent_path() / "model_config.json";
      std::ifstream cfg_in(cfg_path);
      if (!cfg_in)
        throw IoError("expected model configuration beside the checkpoint: " +
                      cfg_path.string());
      json jc = json::parse(cfg_in);
      ModelConfig mcfg = model_config_from_json(jc);

      SleepModel<float> model(mcfg, 0);
      model.params.load(hyp_weights);
      int subject = -1;
      for (std::size_t i = 0; i < data.size(); ++i)
        if (data[i].subject_id == hyp_subject) subject = static_cast<int>(i);
      if (subject < 0)
        throw ConfigError("subject " + hyp_subject + " not in dataset");
      EvalResult ev = evaluate_model(model, data, {subject});
      Hypnogram truth{data[subject].labels};
      Hypnogram pred{ev.predictions.at(hyp_subject)};
      export_hypnogram(truth, pred, hyp_out);
      std::printf("hypnogram written to %s (accuracy %.4f)\n", hyp_out.c_str(),
                  ev.metrics.accuracy);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
