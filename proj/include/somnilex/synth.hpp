#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "somnilex/common.hpp"
#include "somnilex/dataset.hpp"
#include "somnilex/recording.hpp"
#include "somnilex/stages.hpp"

namespace somnilex {

// Expected event counts per 30 s epoch, by event type. These densities (and
// the amplitudes in SynthConfig) are calibration knobs for the synthetic
// task, not physiological claims; defaults are tuned so the stages are
// separable at desk scale.
struct EventRates {
  double spindles = 3.0;            // N2: 11-16 Hz bursts, 0.5-2 s
  double k_complexes = 1.5;         // N2: high-amplitude biphasic transients
  double delta_bursts = 6.0;        // N3: <4 Hz high-amplitude bursts, 1-2 s
  double rem_bursts = 5.0;          // REM: sawtooth-like EOG deflections
  double blinks = 4.0;              // W: EOG blink pulses
  double alpha_bursts = 6.0;        // W: 8-12 Hz; N1 reuses these attenuated
  double slow_eye_movements = 3.0;  // N1: slow rolling EOG
  double theta_bursts = 4.0;        // REM: low-amplitude 4-7 Hz EEG
};

struct SynthConfig {
  std::uint64_t seed = 1;
  int num_subjects = 4;
  int epochs_per_subject = 120;
  std::array<std::array<double, kNumStages>, kNumStages> transition_matrix = {{
      // rows: from W, N1, N2, N3, REM; columns in the same order
      {0.84, 0.16, 0.00, 0.00, 0.00},
      {0.08, 0.55, 0.27, 0.00, 0.10},
      {0.00, 0.05, 0.72, 0.15, 0.08},
      {0.00, 0.00, 0.25, 0.75, 0.00},
      {0.10, 0.08, 0.05, 0.00, 0.77},
  }};
  Stage start_stage = Stage::Wake;
  EventRates event_rates;
  double noise_std = 8.0;  // background noise, microvolts

  // Context-coupled mode: the density of an epoch's discriminative events
  // depends on the previous epoch's stage. An epoch whose stage differs from
  // its predecessor has all event rates scaled by `coupling_weak`, so such
  // epochs are close to ambiguous in isolation and the preceding epochs are
  // needed to resolve them.
  bool context_coupled = false;
  double coupling_weak = 0.2;

  // Event amplitudes in microvolts.
  double alpha_amp = 30.0;
  double spindle_amp = 40.0;
  double kcomplex_amp = 75.0;
  double delta_amp = 90.0;
  double saw_amp = 60.0;
  double blink_amp = 80.0;
  double sem_amp = 40.0;
  double theta_amp = 15.0;

  // Continuous per-stage background rhythms (microvolts). Each stage keeps
  // a slowly enveloped oscillation in its characteristic band across the
  // whole epoch, so every token carries stage information in addition to
  // the sparse events above.
  double cont_wake_alpha = 22.0;   // 9-11 Hz on EEG
  double cont_n1_theta = 18.0;     // 4-7 Hz on EEG
  double cont_n2_sigma = 14.0;     // 12-15 Hz on EEG
  double cont_n3_delta = 55.0;     // 0.7-2 Hz on EEG
  double cont_rem_theta = 10.0;    // 4-8 Hz on EEG, low amplitude
  double cont_rem_beta = 8.0;      // 18-24 Hz on EEG
  double cont_rem_eog = 16.0;      // 1-3 Hz roll on EOG

  void validate() const {
    for (int r = 0; r < kNumStages; ++r) {
      double sum = 0.0;
      for (int c = 0; c < kNumStages; ++c) {
        if (transition_matrix[r][c] < 0.0)
          throw ConfigError("transition matrix has a negative entry");
        sum += transition_matrix[r][c];
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("transition matrix row " + std::to_string(r) +
                          " sums to " + std::to_string(sum) + ", expected 1");
    }
    for (double rate :
         {event_rates.spindles, event_rates.k_complexes,
          event_rates.delta_bursts, event_rates.rem_bursts, event_rates.blinks,
          event_rates.alpha_bursts, event_rates.slow_eye_movements,
          event_rates.theta_bursts})
      if (rate < 0.0) throw ConfigError("event rates must be nonnegative");
    if (noise_std < 0.0) throw ConfigError("noise_std must be nonnegative");
    if (epochs_per_subject < 7)
      throw ConfigError(
          "epochs_per_subject must be at least 7 (the model consumes "
          "7-epoch context windows), got " +
          std::to_string(epochs_per_subject));
    if (num_subjects < 1) throw ConfigError("num_subjects must be positive");
  }
};

namespace synth_detail {

inline int poisson(Rng& rng, double lambda) {
  if (lambda <= 0.0) return 0;
  const double l = std::exp(-lambda);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.uniform();
  } while (p > l);
  return k - 1;
}

// Whole-span oscillation with a slow sinusoidal envelope, added in place.
inline void add_oscillation(std::vector<float>& x, int start, int len,
                            double freq_hz, double amp, double phase,
                            double env_freq_hz, double env_phase, int fs) {
  const int end = std::min<int>(start + len, static_cast<int>(x.size()));
  for (int i = start; i < end; ++i) {
    const double t = static_cast<double>(i - start);
    const double env =
        0.75 + 0.25 * std::sin(2.0 * M_PI * env_freq_hz * t / fs + env_phase);
    x[i] += static_cast<float>(amp * env *
                               std::sin(2.0 * M_PI * freq_hz * t / fs + phase));
  }
}

// Hann-windowed sinusoidal burst added in place.
inline void add_burst(std::vector<float>& x, int start, int len, double freq_hz,
                      double amp, double phase, int fs) {
  const int end = std::min<int>(start + len, static_cast<int>(x.size()));
  for (int i = start; i < end; ++i) {
    const double t = static_cast<double>(i - start);
    const double env = 0.5 * (1.0 - std::cos(2.0 * M_PI * t / len));
    x[i] += static_cast<float>(amp * env *
                               std::sin(2.0 * M_PI * freq_hz * t / fs + phase));
  }
}

// Biphasic transient: a sharp lobe followed by a slower opposite lobe.
inline void add_biphasic(std::vector<float>& x, int start, int len, double amp) {
  const int sharp = len / 3;
  const int end = std::min<int>(start + len, static_cast<int>(x.size()));
  for (int i = start; i < end; ++i) {
    const int t = i - start;
    double v;
    if (t < sharp)
      v = -std::sin(M_PI * t / sharp);
    else
      v = 0.6 * std::sin(M_PI * (t - sharp) / (len - sharp));
    x[i] += static_cast<float>(amp * v);
  }
}

// Sawtooth-like deflection: slow ramp, fast return, lightly smoothed ends.
inline void add_saw(std::vector<float>& x, int start, int len, double amp,
                    double polarity) {
  const int end = std::min<int>(start + len, static_cast<int>(x.size()));
  const int ramp = std::max(1, (len * 4) / 5);
  for (int i = start; i < end; ++i) {
    const int t = i - start;
    double v = (t < ramp) ? static_cast<double>(t) / ramp
                          : 1.0 - static_cast<double>(t - ramp) / (len - ramp);
    const double edge = std::min({t + 1, end - i, 8});
    x[i] += static_cast<float>(polarity * amp * v * (edge / 8.0));
  }
}

// Smooth positive pulse (blink-like).
inline void add_pulse(std::vector<float>& x, int start, int len, double amp) {
  const int end = std::min<int>(start + len, static_cast<int>(x.size()));
  for (int i = start; i < end; ++i) {
    const double t = static_cast<double>(i - start);
    const double h = 0.5 * (1.0 - std::cos(2.0 * M_PI * t / len));
    x[i] += static_cast<float>(amp * h * h);
  }
}

struct NoiseState {
  double lp = 0.0;
};

// Pink-ish background: one-pole low-passed white noise mixed with a white
// component, state carried across epochs for continuity.
inline void add_background(std::vector<float>& x, int start, int len,
                           double std_uv, Rng& rng, NoiseState& st) {
  for (int i = start; i < start + len; ++i) {
    const double w = rng.normal();
    st.lp = 0.95 * st.lp + 0.05 * w;
    x[i] += static_cast<float>(std_uv * (6.0 * st.lp + 0.35 * w));
  }
}

}  // namespace synth_detail

// Deterministic labeled polysomnography generator. Stage sequences follow
// the Markov transition matrix; waveforms are background noise plus
// stage-conditioned events (spindles and K-complexes in N2, delta bursts in
// N3, EOG sawtooth deflections in REM, alpha plus blinks in W, attenuated
// alpha with slow eye movements in N1).
inline std::vector<SubjectRecord> synth_dataset(const SynthConfig& cfg) {
  using namespace synth_detail;
  cfg.validate();
  const int fs = kSampleRateHz;
  const int n_per_subject = cfg.epochs_per_subject * kEpochSamples;

  std::vector<SubjectRecord> out;
  out.reserve(cfg.num_subjects);
  for (int s = 0; s < cfg.num_subjects; ++s) {
    Rng rng(derive_seed(cfg.seed, "synth-subject", static_cast<std::uint64_t>(s)));

    SubjectRecord subj;
    char id[16];
    std::snprintf(id, sizeof id, "S%03d", s);
    subj.recording.subject_id = id;
    subj.recording.sample_rate_hz = fs;
    subj.filtered = false;
    for (const char* name : kModalityNames)
      subj.recording.channels.push_back(
          {name, std::vector<float>(n_per_subject, 0.0f)});
    auto& eeg1 = subj.recording.channels[0].samples;
    auto& eeg2 = subj.recording.channels[1].samples;
    auto& eog = subj.recording.channels[2].samples;

    // Stage sequence.
    auto& labels = subj.hypnogram.labels;
    labels.resize(cfg.epochs_per_subject);
    labels[0] = cfg.start_stage;
    for (int e = 1; e < cfg.epochs_per_subject; ++e) {
      const auto& row = cfg.transition_matrix[static_cast<int>(labels[e - 1])];
      const double u = rng.uniform();
      double acc = 0.0;
      int next = kNumStages - 1;
      for (int c = 0; c < kNumStages; ++c) {
        acc += row[c];
        if (u < acc) {
          next = c;
          break;
        }
      }
      labels[e] = static_cast<Stage>(next);
    }

    NoiseState bg1, bg2, bg3;
    for (int e = 0; e < cfg.epochs_per_subject; ++e) {
      const int base = e * kEpochSamples;
      add_background(eeg1, base, kEpochSamples, cfg.noise_std, rng, bg1);
      add_background(eeg2, base, kEpochSamples, cfg.noise_std, rng, bg2);
      add_background(eog, base, kEpochSamples, cfg.noise_std, rng, bg3);

      double density = 1.0;
      if (cfg.context_coupled && e > 0 && labels[e] != labels[e - 1])
        density = cfg.coupling_weak;

      auto place = [&](double min_s, double max_s, int& start, int& len) {
        len = static_cast<int>(rng.uniform(min_s, max_s) * fs);
        start = base + static_cast<int>(rng.uniform_int(
                           static_cast<std::uint64_t>(kEpochSamples - len)));
      };

      // Continuous stage rhythm on both EEG channels (EOG for REM roll),
      // then the sparse canonical events on top. In coupled mode both are
      // scaled by the density factor.
      auto eeg_rhythm = [&](double f_lo, double f_hi, double amp) {
        const double f = rng.uniform(f_lo, f_hi);
        const double ph = rng.uniform(0.0, 2.0 * M_PI);
        const double ef = rng.uniform(0.05, 0.2);
        const double eph = rng.uniform(0.0, 2.0 * M_PI);
        add_oscillation(eeg1, base, kEpochSamples, f, amp * density, ph, ef,
                        eph, fs);
        add_oscillation(eeg2, base, kEpochSamples, f, amp * 0.85 * density,
                        ph + 0.4, ef, eph, fs);
      };

      const EventRates& er = cfg.event_rates;
      switch (labels[e]) {
        case Stage::Wake: {
          eeg_rhythm(9.0, 11.0, cfg.cont_wake_alpha);
          for (int k = poisson(rng, er.alpha_bursts * density); k-- > 0;) {
            int st, len;
            place(1.0, 3.0, st, len);
            const double f = rng.uniform(8.0, 12.0);
            const double ph = rng.uniform(0.0, 2.0 * M_PI);
            add_burst(eeg1, st, len, f, cfg.alpha_amp, ph, fs);
            add_burst(eeg2, st, len, f, cfg.alpha_amp * 0.85, ph, fs);
          }
          for (int k = poisson(rng, er.blinks * density); k-- > 0;) {
            int st, len;
            place(0.5, 1.0, st, len);
            add_pulse(eog, st, len, cfg.blink_amp * density);
          }
          break;
        }
        case Stage::N1: {
          eeg_rhythm(4.0, 7.0, cfg.cont_n1_theta);
          for (int k = poisson(rng, er.alpha_bursts * 0.5 * density); k-- > 0;) {
            int st, len;
            place(1.0, 3.0, st, len);
            const double f = rng.uniform(8.0, 12.0);
            const double ph = rng.uniform(0.0, 2.0 * M_PI);
            add_burst(eeg1, st, len, f, cfg.alpha_amp * 0.4, ph, fs);
            add_burst(eeg2, st, len, f, cfg.alpha_amp * 0.34, ph, fs);
          }
          for (int k = poisson(rng, er.slow_eye_movements * density); k-- > 0;) {
            int st, len;
            place(1.5, 4.0, st, len);
            add_burst(eog, st, len, rng.uniform(0.3, 0.8), cfg.sem_amp * density,
                      rng.uniform(0.0, 2.0 * M_PI), fs);
          }
          break;
        }
        case Stage::N2: {
          eeg_rhythm(12.0, 15.0, cfg.cont_n2_sigma);
          for (int k = poisson(rng, er.spindles * density); k-- > 0;) {
            int st, len;
            place(0.5, 2.0, st, len);
            const double f = rng.uniform(11.0, 16.0);
            const double ph = rng.uniform(0.0, 2.0 * M_PI);
            add_burst(eeg1, st, len, f, cfg.spindle_amp, ph, fs);
            add_burst(eeg2, st, len, f, cfg.spindle_amp * 0.85, ph, fs);
          }
          for (int k = poisson(rng, er.k_complexes * density); k-- > 0;) {
            int st, len;
            place(0.5, 1.0, st, len);
            add_biphasic(eeg1, st, len, cfg.kcomplex_amp);
            add_biphasic(eeg2, st, len, cfg.kcomplex_amp * 0.85);
          }
          break;
        }
        case Stage::N3: {
          eeg_rhythm(0.7, 2.0, cfg.cont_n3_delta);
          for (int k = poisson(rng, er.delta_bursts * density); k-- > 0;) {
            int st, len;
            place(1.0, 2.0, st, len);
            const double f = rng.uniform(0.75, 3.5);
            const double ph = rng.uniform(0.0, 2.0 * M_PI);
            add_burst(eeg1, st, len, f, cfg.delta_amp, ph, fs);
            add_burst(eeg2, st, len, f, cfg.delta_amp * 0.9, ph, fs);
          }
          break;
        }
        case Stage::Rem: {
          eeg_rhythm(4.0, 8.0, cfg.cont_rem_theta);
          eeg_rhythm(18.0, 24.0, cfg.cont_rem_beta);
          add_oscillation(eog, base, kEpochSamples, rng.uniform(1.0, 3.0),
                          cfg.cont_rem_eog * density,
                          rng.uniform(0.0, 2.0 * M_PI), rng.uniform(0.05, 0.2),
                          rng.uniform(0.0, 2.0 * M_PI), fs);
          for (int k = poisson(rng, er.rem_bursts * density); k-- > 0;) {
            int st, len;
            place(0.3, 2.0, st, len);
            add_saw(eog, st, len, cfg.saw_amp, rng.uniform() < 0.5 ? 1.0 : -1.0);
          }
          for (int k = poisson(rng, er.theta_bursts * density); k-- > 0;) {
            int st, len;
            place(0.8, 2.0, st, len);
            const double f = rng.uniform(4.0, 7.0);
            const double ph = rng.uniform(0.0, 2.0 * M_PI);
            add_burst(eeg1, st, len, f, cfg.theta_amp, ph, fs);
            add_burst(eeg2, st, len, f, cfg.theta_amp * 0.85, ph, fs);
          }
          break;
        }
      }
    }
    out.push_back(std::move(subj));
  }
  return out;
}

}  // namespace somnilex
