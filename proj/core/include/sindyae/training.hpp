#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sindyae/autoencoder.hpp"
#include "sindyae/datagen.hpp"
#include "sindyae/sindy_model.hpp"

namespace sindyae {

struct TrainConfig {
  int input_dim = 0;
  int latent_dim = 0;
  std::vector<int> encoder_widths;
  std::vector<int> decoder_widths;
  double learning_rate = 1e-3;
  int batch_size = 1024;
  int epochs_main = 0;
  int epochs_refine = 0;
  double threshold = 0.1;
  int threshold_interval = 500;
  double lambda1 = 0.0;  // dx/dt (or d2x/dt2) SINDy loss
  double lambda2 = 0.0;  // dz/dt (or d2z/dt2) SINDy loss
  double lambda3 = 0.0;  // L1 on Xi
  LibrarySpec library;
  std::uint64_t seed = 0;
  int validation_interval = 100;

  LossWeights weights() const { return {lambda1, lambda2, lambda3}; }
  void validate() const;
};

struct FinalMetrics {
  double val_fuv_x = 0.0;
  double val_fuv_dx = 0.0;  // ddx for second-order models
  double val_fuv_dz = 0.0;  // ddz for second-order models
  int active_terms = 0;
};

struct TrainedModel {
  NetworkParams network;
  SindyModel sindy;
  TrainConfig config;
  FinalMetrics metrics;
};

struct EpochRecord {
  int epoch = 0;
  LossComponents loss;
  int active_terms = 0;
  std::optional<double> val_fuv_x;
  std::optional<double> val_fuv_dx;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
};

struct TrainOutcome {
  TrainedModel model;
  TrainHistory history;
  bool failed = false;
  std::string failure;
};

/// Network parameters, coefficients, mask and optimizer state at epoch 0.
struct TrainingState {
  NetworkParams network;
  Matrix xi;
  Matrix mask;
  std::vector<AdamState> optimizer;  // one per tensor, encoder then decoder then Xi
};

/// Xavier weights drawn in layer order (encoder W_0.., then decoder W_0..)
/// from seeded_rng(config.seed), zero biases, Xi and mask all ones.
TrainingState initialize(const TrainConfig& config);

/// Υ <- Υ o 1(|Ξ| >= threshold), then Ξ <- Υ o Ξ. Returns the number of
/// entries removed.
int apply_threshold(Matrix& xi, Matrix& mask, double threshold);

/// Called after each epoch with the record just written and the current
/// parameters, coefficients and mask; return false to stop.
using EpochCallback = std::function<bool(const EpochRecord&, const TrainingState&)>;

/// epochs_main epochs of shuffled minibatch Adam with thresholding every
/// threshold_interval epochs, then epochs_refine epochs with the mask frozen and
/// lambda3 = 0. Validation FUVs are logged every validation_interval epochs and
/// at the last epoch. A non-finite loss stops training with `failed` set.
TrainOutcome train(const Dataset& train_set, const Dataset* validation, const TrainConfig& config,
                   const EpochCallback& on_epoch = {});

/// Seed of run k: config.seed + k.
std::uint64_t run_seed(const TrainConfig& config, int k);

/// Independent runs over seeds config.seed + k, k < n_seeds, returned in seed
/// order. `threads` > 1 runs seeds concurrently.
std::vector<TrainOutcome> run_multi_seed(const Dataset& train_set, const Dataset* validation,
                                         const TrainConfig& config, int n_seeds, int threads = 1);

}  // namespace sindyae
