#pragma once

// Latent-dynamics model abstraction: the step function f, its decode head,
// and the fixed encoder that produces h^0. Two backends:
//
//   MlpModel    trainable two-layer tanh MLP over the latent space, linear
//               decode head, fixed random linear encoder. The desk-scale
//               stand-in for a frozen decoder block.
//   OracleModel deterministic per-instance testbed whose correct trajectory
//               is known by construction.
//
// Models are immutable after construction; all member calls are const and
// safe for concurrent use.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "latref/core.hpp"
#include "latref/matrix.hpp"
#include "latref/tasks.hpp"

namespace latref {

// Fixed (untrained) linear featurizer W: R^F -> R^d, seeded once per run.
// Both question features and gold step features pass through it, so gold
// trajectories live in the same space the model reasons in.
class Featurizer {
 public:
  Featurizer(int dim, int feature_width, uint64_t seed);
  explicit Featurizer(Matrix weights);

  LatentState embed(const std::vector<double>& features) const;
  int dim() const { return weights_.rows; }
  int feature_width() const { return weights_.cols; }
  const Matrix& weights() const { return weights_; }

 private:
  Matrix weights_;
};

class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual int dim() const = 0;
  virtual int n_choices() const = 0;
  // f: one latent update. Pure; preserves dimension.
  virtual LatentState step(const LatentState& h) const = 0;
  virtual AnswerDistribution decode(const LatentState& h) const = 0;
  // Produces h^0 from the task's question features.
  virtual LatentState encode(const TaskInstance& x) const = 0;
};

// Dimension-checked wrappers used by callers that hold models abstractly.
LatentState model_step(const DynamicsModel& m, const LatentState& h);
AnswerDistribution decode_answer(const DynamicsModel& m, const LatentState& h);

struct MlpParams {
  Matrix W1;                     // H x d
  std::vector<double> b1;       // H
  Matrix W2;                     // d x H
  std::vector<double> b2;       // d
  Matrix decode_W;               // C x d
  std::vector<double> decode_b;  // C
  Matrix encoder_W;              // d x F (fixed, never trained)

  int dim() const { return W2.rows; }
  int hidden() const { return W1.rows; }
  int n_choices() const { return decode_W.rows; }
  int feature_width() const { return encoder_W.cols; }
  void validate() const;  // shape consistency and finiteness
  bool operator==(const MlpParams& o) const;
};

class MlpModel : public DynamicsModel {
 public:
  MlpModel(MlpParams params, std::vector<std::string> labels);

  // Gaussian init scaled for stable tanh activations; encoder drawn from the
  // same seed so a run seed pins the whole model.
  static MlpModel init_random(int dim, int hidden, int feature_width, int n_choices,
                              uint64_t seed);

  int dim() const override { return params_.dim(); }
  int n_choices() const override { return params_.n_choices(); }
  LatentState step(const LatentState& h) const override;
  AnswerDistribution decode(const LatentState& h) const override;
  LatentState encode(const TaskInstance& x) const override;

  LatentState encode_features(const std::vector<double>& features) const;

  const MlpParams& params() const { return params_; }
  const std::vector<std::string>& labels() const { return labels_; }
  Featurizer featurizer() const { return Featurizer(params_.encoder_W); }

 private:
  MlpParams params_;
  std::vector<std::string> labels_;
};

// Per-instance oracle. Holds the anchor trajectory (h*_0 = embedded question,
// then the embedded gold steps g_1..g_n). step(h) finds the nearest anchor
// and pulls the state a fraction `pull` of the way toward the next one, so a
// clean run walks the gold trajectory without any internal step counter and
// step stays a pure function of its input.
//
// sigma > 0 adds pseudo-noise derived by hashing the input state bits with
// noise_seed: repeated calls with the same input return identical output,
// and whole runs are bit-reproducible.
//
// repel=true inverts the pull (an anti-oracle that moves away from the gold
// trajectory), used as the weak reference in constructed arms.
class OracleModel : public DynamicsModel {
 public:
  struct Options {
    double pull = 1.0;    // lambda in (0,1]
    double sigma = 0.0;   // noise scale, >= 0
    bool repel = false;
    uint64_t noise_seed = 0;
  };

  OracleModel(const TaskInstance& instance, const Featurizer& featurizer, Options opt);

  int dim() const override;
  int n_choices() const override { return static_cast<int>(choice_embeddings_.size()); }
  LatentState step(const LatentState& h) const override;
  // Distance scoring against the embedded choices; at the gold terminal
  // state the argmax is the gold label by construction.
  AnswerDistribution decode(const LatentState& h) const override;
  LatentState encode(const TaskInstance& x) const override;

  // The gold step the model would pull toward from state h. Exposed so the
  // contraction property is directly checkable.
  const LatentState& target_for(const LatentState& h) const;
  const std::vector<LatentState>& anchors() const { return anchors_; }

 private:
  Options opt_;
  std::vector<LatentState> anchors_;            // h*_0, g_1..g_n
  std::vector<LatentState> choice_embeddings_;  // aligned with labels_
  std::vector<std::string> labels_;
  LatentState encoded_question_;
};

// Good/bad model snapshots used as contrastive references.
struct CheckpointPair {
  std::shared_ptr<const DynamicsModel> good;
  std::shared_ptr<const DynamicsModel> bad;

  // Throws if either side is missing or dimensions disagree with engine_dim.
  void validate(int engine_dim) const;
};

}  // namespace latref
