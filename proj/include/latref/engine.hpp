#pragma once

// Full inference loop: encode the question, iterate T refined latent steps,
// decode the final state. Every run records the complete trajectory; at desk
// scale the overhead is negligible and every analysis needs it.

#include <string>
#include <vector>

#include "latref/dynamics.hpp"
#include "latref/refine.hpp"

#include <json.hpp>

namespace latref {

struct StepRecord {
  // one entry per refinement round applied at this step (exactly one entry
  // for plain steps)
  std::vector<RoundDiagnostics> rounds;
};

struct Trajectory {
  std::string instance_id;
  RefinementConfig config;
  std::vector<LatentState> states;  // h^0..h^T, length T+1
  std::vector<StepRecord> steps;    // length T
  AnswerDistribution answer;
  std::string predicted;
  std::string gold;
};

// Runs Algorithm-style inference: h^0 = encode(x), then steps_T refined
// latent steps, then decode(h^T). Deterministic for fixed inputs. pair may
// be null for modes that need no references.
Trajectory run_inference(const TaskInstance& x, const DynamicsModel& model,
                         const CheckpointPair* pair, const RefinementConfig& cfg);

// Before/after comparison of one instance: the answer distribution under
// plain recursion (mode none) against the configured mode.
struct TraceRecord {
  std::string instance_id;
  std::string gold;
  AnswerDistribution baseline;  // mode none
  AnswerDistribution refined;   // cfg.mode
  std::string baseline_predicted;
  std::string refined_predicted;
  bool flipped = false;  // argmax changed
};

TraceRecord trace_compare(const TaskInstance& x, const DynamicsModel& model,
                          const CheckpointPair* pair, const RefinementConfig& cfg);

// Trajectory export, one JSON document per instance. Field names are stable;
// see the README.
nlohmann::json trajectory_to_json(const Trajectory& t);
void write_trajectory(const Trajectory& t, const std::string& path);

// Plain accuracy of argmax-equals-gold over a test set with a fixed model.
struct EvalSummary {
  int total = 0;
  int correct = 0;
  std::vector<bool> correct_flags;  // per instance, input order
  double accuracy_pct() const { return total == 0 ? 0.0 : 100.0 * correct / total; }
};

EvalSummary evaluate_accuracy(const std::vector<TaskInstance>& testset, const DynamicsModel& model,
                              const CheckpointPair* pair, const RefinementConfig& cfg);

}  // namespace latref
