#pragma once

// Supervised trainer for the MLP dynamics backend, and construction of
// good/bad checkpoint pairs from its snapshots.
//
// The loss is
//
//   answer_w * CE(decode(h^T), gold)
//     + latent_w * sum_t mse(h^t, embed(gold step t))     (latent_cot only)
//
// with gradients computed by exact backpropagation through the unrolled
// T-step recursion. The encoder is a fixed featurizer and is never trained.
// Plain SGD; no adaptive optimizer state, so a (cfg, data) pair pins the
// final parameters bit for bit.
//
// By default training unrolls the plain recursion; refinement stays an
// inference-time mechanism. The refine_during_training flag instead unrolls
// the refined recursion (residual blending and contrastive search against a
// fixed reference pair), with backprop kept exact through both, including
// the reference Jacobians.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latref/dynamics.hpp"
#include "latref/engine.hpp"
#include "latref/tasks.hpp"

namespace latref {

struct TrainingDiverged : std::runtime_error {
  explicit TrainingDiverged(const std::string& m) : std::runtime_error(m) {}
};

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 0.05;
  int batch_size = 16;
  uint64_t seed = 0;
  double answer_loss_weight = 1.0;
  double latent_loss_weight = 1.0;
  std::vector<int> checkpoint_epochs;  // each in [1, epochs]

  // model shape and unroll length
  int dim = 32;
  int hidden = 64;
  int steps_T = 3;

  bool refine_during_training = false;
  RefinementConfig train_refine;  // used only when refine_during_training

  // when set, every snapshot is also written here as
  // "ckpt_epoch_<N>.json" plus the final model as "ckpt_final.json"
  std::optional<std::string> snapshot_dir;

  void validate() const;
};

// Trainable-parameter gradients (encoder excluded by construction).
struct MlpGrads {
  Matrix W1;
  std::vector<double> b1;
  Matrix W2;
  std::vector<double> b2;
  Matrix decode_W;
  std::vector<double> decode_b;

  static MlpGrads zeros_like(const MlpParams& p);
  void accumulate(const MlpGrads& o);
  void scale(double s);
};

// Loss terms and unroll settings for a single instance; shared between the
// trainer and the finite-difference checks in the test suite.
struct LossSettings {
  SupervisionFormat format = SupervisionFormat::latent_cot;
  double answer_weight = 1.0;
  double latent_weight = 1.0;
  int steps_T = 3;
  bool refine_active = false;
  RefinementConfig refine;               // when refine_active
  const CheckpointPair* pair = nullptr;  // required when refine uses search
};

// Loss of one instance under the current parameters.
double instance_loss(const MlpModel& model, const TaskInstance& x, const LossSettings& s);

// Adds this instance's exact parameter gradients into grads; returns the
// instance loss.
double accumulate_instance_gradients(const MlpModel& model, const TaskInstance& x,
                                     const LossSettings& s, MlpGrads& grads);

struct Snapshot {
  int epoch = 0;
  MlpModel model;
};

struct TrainResult {
  MlpModel model;
  std::vector<Snapshot> snapshots;
  std::vector<double> epoch_losses;  // mean per-instance loss per epoch
};

// refine_pair is consulted only when cfg.refine_during_training is set and
// the refinement mode includes search. When init_model is given, training
// resumes from its parameters (cfg.dim/hidden are ignored); otherwise a
// fresh model is drawn from cfg.seed.
TrainResult train_mlp(const std::vector<TaskInstance>& data, SupervisionFormat format,
                      const TrainConfig& cfg, const CheckpointPair* refine_pair = nullptr,
                      const MlpModel* init_model = nullptr);

struct PairReport {
  CheckpointPair pair;
  // plain-recursion validation accuracy of each side; negative when no
  // validation data was supplied
  double bad_accuracy_pct = -1.0;
  double good_accuracy_pct = -1.0;
  // set when the good snapshot does not beat the bad one; reported, never
  // fatal
  bool accuracy_warning = false;
};

// bad_epoch must precede good_epoch; both snapshots must exist. When
// val_data is given, both sides are scored with plain recursion over
// steps_T latent steps and the ordering is checked.
PairReport make_checkpoint_pair(const std::vector<Snapshot>& snapshots, int bad_epoch,
                                int good_epoch,
                                const std::vector<TaskInstance>* val_data = nullptr,
                                int steps_T = 3);

}  // namespace latref
