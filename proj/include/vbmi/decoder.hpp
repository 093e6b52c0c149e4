#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "vbmi/codebook.hpp"
#include "vbmi/epochs.hpp"

namespace vbmi::decode {

// Compatibility fingerprint carried by every trained model and checked when a
// stored template set is loaded against a live session.
struct ModelMeta {
  double fs_hz{250.0};
  std::uint32_t epoch_samples{280};
  std::uint32_t montage_hash{0};
  std::uint32_t code_hash{0};
  std::vector<std::uint32_t> class_lags;  // circular code lag per class

  std::size_t n_classes() const { return class_lags.size(); }
};

// Per-class correlation scores with the resulting selection. Ties resolve to
// the lowest class index and are flagged.
struct ScoreVector {
  Eigen::VectorXd scores;  // one entry per class, in [-1, 1]
  int decision{0};
  double margin{0.0};  // top score minus runner-up
  bool tie{false};
};

// argmax + margin + tie flag over a raw score vector
ScoreVector make_decision(Eigen::VectorXd scores);

// Pearson correlation; returns 0 when either input is constant.
double pearson(const Eigen::Ref<const Eigen::VectorXd>& x,
               const Eigen::Ref<const Eigen::VectorXd>& y);

// Spatial filters maximizing trial-to-trial reproducibility per class, plus
// per-class template means. Scoring runs the whole filter ensemble.
struct TrcaModel {
  Eigen::MatrixXd filters;                 // channels x classes, unit-norm columns
  std::vector<Eigen::MatrixXd> templates;  // per class, channels x samples
  ModelMeta meta;
};

// epochs: mean-removed labeled trials, >= 2 per class, labels 0..K-1.
// meta.class_lags may be pre-filled (size K) or left empty.
TrcaModel trca_train(const std::vector<dsp::Epoch>& epochs, ModelMeta meta);
ScoreVector trca_score(const TrcaModel& model, const Eigen::MatrixXd& epoch);

// Discriminant filters over delay-embedded, reference-projected epochs.
struct TdcaModel {
  int n_delays{5};
  int n_components{4};
  double gamma{1e-6};
  Eigen::MatrixXd filters;                   // channels*(delays+1) x components
  std::vector<Eigen::MatrixXd> projections;  // per class, samples x samples
  std::vector<Eigen::MatrixXd> templates;    // per class, components x 2*samples
  ModelMeta meta;
};

// Rows-stacked delayed copies [X shifted by 0..n_delays, zero-padded at the
// tail]: (channels*(n_delays+1)) x samples.
Eigen::MatrixXd embed_delays(const Eigen::MatrixXd& epoch, int n_delays);

// Per-class +/-1 code waveform rows used as projection references.
std::vector<Eigen::MatrixXd> code_references(const code::CodeSequence& code,
                                             const std::vector<std::size_t>& lags, double fs_hz);

// references: one full-row-rank matrix (rows x samples) per class.
TdcaModel tdca_train(const std::vector<dsp::Epoch>& epochs,
                     const std::vector<Eigen::MatrixXd>& references, ModelMeta meta,
                     int n_delays = 5, int n_components = 4, double gamma = 1e-6);
ScoreVector tdca_score(const TdcaModel& model, const Eigen::MatrixXd& epoch);

// Mean of per-trial score vectors; the default multi-trial combination rule.
ScoreVector aggregate_trials(const std::vector<ScoreVector>& scores);

// Element-wise mean of same-shaped trials; the alternative combination rule
// (average the epochs, score once).
Eigen::MatrixXd mean_epoch(const std::vector<Eigen::MatrixXd>& trials);

// Wall-clock microseconds for one full selection: score every trial, then
// aggregate. Used by the latency gate.
double infer_latency_probe(const TrcaModel& model, const std::vector<Eigen::MatrixXd>& trials);
double infer_latency_probe(const TdcaModel& model, const std::vector<Eigen::MatrixXd>& trials);

}  // namespace vbmi::decode
