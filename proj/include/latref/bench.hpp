#pragma once

// Experiment harness: ablations over the four refinement modes,
// hyperparameter sweeps, step-wise trace analysis, token-efficiency
// accounting, and training-vs-inference cost arms.
//
// Reports other than the cost report are pure functions of (inputs, seeds)
// and serialize byte-identically across runs; the cost report additionally
// records measured wall time and peak memory, which naturally vary.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "latref/dynamics.hpp"
#include "latref/engine.hpp"
#include "latref/train.hpp"

namespace latref {

// Supplies the model-under-test and the reference pair for one instance.
// Fixed arms return the same bundle for every instance; oracle arms build
// per-instance models whose noise stream is derived from (arm seed, eval
// seed, instance id).
class ArmProvider {
 public:
  struct Bundle {
    std::shared_ptr<const DynamicsModel> model;
    CheckpointPair pair;
  };

  virtual ~ArmProvider() = default;
  virtual Bundle get(const TaskInstance& x, uint64_t seed) const = 0;
};

class FixedArm : public ArmProvider {
 public:
  FixedArm(std::shared_ptr<const DynamicsModel> model, CheckpointPair pair)
      : bundle_{std::move(model), std::move(pair)} {}
  Bundle get(const TaskInstance&, uint64_t) const override { return bundle_; }

 private:
  Bundle bundle_;
};

// The constructed oracle arm: a noisy oracle as the model under test, a
// clean oracle as the good reference and an anti-oracle (pull inverted) as
// the bad one. The contrastive update then pulls states back toward the
// clean trajectory, so refinement has a known, verifiable effect.
struct OracleArmOptions {
  double pull = 1.0;
  double sigma = 0.35;
  uint64_t arm_seed = 0;
};

class OracleArm : public ArmProvider {
 public:
  OracleArm(std::shared_ptr<const Featurizer> featurizer, OracleArmOptions opt)
      : featurizer_(std::move(featurizer)), opt_(opt) {}
  Bundle get(const TaskInstance& x, uint64_t seed) const override;

  const OracleArmOptions& options() const { return opt_; }

 private:
  std::shared_ptr<const Featurizer> featurizer_;
  OracleArmOptions opt_;
};

// Accuracy of one arm at one seed. Internally tallied two ways (streaming
// counter and batch recount) which must agree exactly.
struct ArmEval {
  int total = 0;
  int correct = 0;
  double accuracy_pct = 0.0;
};

ArmEval evaluate_arm(const std::vector<TaskInstance>& testset, const ArmProvider& arm,
                     const RefinementConfig& cfg, uint64_t seed);

// ---------------------------------------------------------------------------
// Ablation over the four mode arms.

struct AblationRow {
  RefineMode mode = RefineMode::none;
  double accuracy_pct = 0.0;
  // relative gain vs the none row, in percent; 0 for the none row itself
  double gain_pct = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;  // none, residual, search, both
  std::vector<uint64_t> seeds;
  int instance_count = 0;
};

AblationReport run_ablation(const std::vector<TaskInstance>& testset, const ArmProvider& arm,
                            const RefinementConfig& base_cfg, const std::vector<uint64_t>& seeds);
AblationReport run_ablation(const std::vector<TaskInstance>& testset,
                            std::shared_ptr<const DynamicsModel> model, CheckpointPair pair,
                            const RefinementConfig& base_cfg, const std::vector<uint64_t>& seeds);

void write_ablation_csv(const AblationReport& r, const std::string& path);
AblationReport read_ablation_csv(const std::string& path);

// ---------------------------------------------------------------------------
// (alpha, eta) sensitivity sweep.

struct SweepGrid {
  std::vector<double> alphas;
  std::vector<double> etas;
  Matrix accuracy_pct;  // |alphas| x |etas|, complete
  int rounds_R = 1;
};

// Alphas must lie in [0.01, 1] and etas must be positive. Every cell is
// evaluated with base_cfg at (alpha, eta, rounds_R) and the given seed.
SweepGrid run_sweep(const std::vector<TaskInstance>& testset, const ArmProvider& arm,
                    const RefinementConfig& base_cfg, const std::vector<double>& alphas,
                    const std::vector<double>& etas, int rounds_R, uint64_t seed);

void write_sweep_csv(const SweepGrid& g, const std::string& path);
SweepGrid read_sweep_csv(const std::string& path);

// Default sweep grids: five alphas spanning [0.01, 1] and five etas in a log
// grid spanning a 4900x dynamic range around eta_center.
std::vector<double> default_sweep_alphas();
std::vector<double> default_sweep_etas(double eta_center);

// ---------------------------------------------------------------------------
// Token efficiency.

struct TokenReportRow {
  std::string family;
  int instances = 0;
  double mean_cot_tokens = 0.0;          // k tokens per gold step, plus the answer
  double mean_latent_text_tokens = 0.0;  // the answer only
  double latent_markers_per_query = 0.0; // steps_T, reported separately (non-text)
  double reduction_pct = 0.0;            // (1 - latent/cot) * 100; 0 when cot <= latent
};

struct TokenReport {
  int tokens_per_step = 10;
  std::vector<TokenReportRow> rows;  // one per family present, in family enum order
};

TokenReport run_token_report(const std::vector<TaskInstance>& testset, const RefinementConfig& cfg,
                             int tokens_per_step);

void write_token_csv(const TokenReport& r, const std::string& path);
TokenReport read_token_csv(const std::string& path);

// ---------------------------------------------------------------------------
// Step-wise trace analysis.

struct FlipCase {
  size_t instance_index = 0;
  TraceRecord record;
};

// Scans the testset and returns up to max_cases instances whose baseline
// argmax is wrong while the refined argmax is the gold label.
std::vector<FlipCase> find_flip_cases(const std::vector<TaskInstance>& testset,
                                      const ArmProvider& arm, const RefinementConfig& cfg,
                                      uint64_t seed, size_t max_cases);

// ---------------------------------------------------------------------------
// Training-vs-inference cost arms.

struct CostArm {
  std::string name;
  double accuracy_pct = 0.0;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
  long peak_rss_kb = 0;  // process peak RSS observed after the arm (coarse)
};

struct CostReport {
  std::vector<CostArm> arms;  // baseline, infer_refine, train_refine, both_refine
};

struct CostOptions {
  TrainConfig base_train;       // base run; snapshots must include bad_epoch
  int bad_epoch = 5;            // early snapshot used as the weak reference
  int extra_epochs = 10;        // continued refined training for arms 3 and 4
  RefinementConfig eval_cfg;    // refinement used at inference (mode both)
};

// Four arms sharing the identical test set: plain model with plain
// inference, plain model with refined inference (writes no checkpoints),
// continued refined training with plain inference, and continued refined
// training with refined inference.
CostReport run_cost_arms(const std::vector<TaskInstance>& trainset,
                         const std::vector<TaskInstance>& testset, const CostOptions& opt);

void write_cost_csv(const CostReport& r, const std::string& path);

// ---------------------------------------------------------------------------
// Oracle-arm calibration.

// Searches for a noise level where the plain-recursion (mode none) accuracy
// over the testset falls inside [target_lo, target_hi] percent. Deterministic
// for fixed inputs. Throws if no such sigma exists in the bracket.
double calibrate_oracle_sigma(const std::vector<TaskInstance>& testset,
                              std::shared_ptr<const Featurizer> featurizer,
                              const RefinementConfig& plain_cfg, double pull, uint64_t arm_seed,
                              uint64_t eval_seed, double target_lo, double target_hi);

}  // namespace latref
