#pragma once

// The two inference-time refinement operators.
//
// Residual refinement blends the previous latent with the raw model output:
//
//   h <- alpha * h_prev + (1 - alpha) * f(h_prev)
//
// Contrastive feedback search nudges the latent using outputs of a strong
// ("good") and a weak ("bad") reference model evaluated at the current
// state. With the references held constant, the contrastive objective
//
//   L(h) = mse(h, h_good) - mse(h, h_bad)
//
// is linear in h and its gradient has the closed form (2/d)(h_bad - h_good),
// independent of h. The default update descends L (toward the good output,
// away from the bad one); literal_sign=true ascends instead, for comparison
// runs.
//
// Everything here is a pure function over immutable inputs and never touches
// model parameters.

#include <optional>
#include <vector>

#include "latref/core.hpp"
#include "latref/dynamics.hpp"

namespace latref {

struct ContrastiveGradient {
  std::vector<double> values;
  // inputs the gradient was computed from
  LatentState h;
  LatentState h_good;
  LatentState h_bad;
};

// core::lerp with the roles named; alpha == 1 keeps the previous state
// untouched, alpha == 0 is the plain update.
LatentState residual_refine(const LatentState& prev, const LatentState& raw_next, double alpha);

// Exact gradient of L(h) = mse(h, h_good) - mse(h, h_bad) with the
// references treated as constants: (2/d)(h_bad - h_good).
ContrastiveGradient contrastive_gradient(const LatentState& h, const LatentState& h_good,
                                         const LatentState& h_bad);

// Contrastive objective value, shared by diagnostics and tests.
double contrastive_objective(const LatentState& h, const LatentState& h_good,
                             const LatentState& h_bad);

// Default: h - eta * grad (descends L by exactly eta*||grad||^2).
// literal_sign: h + eta * grad.
LatentState contrastive_update(const LatentState& h, const ContrastiveGradient& grad, double eta,
                               bool literal_sign);

// What one refinement round recorded, for trajectory diagnostics.
struct RoundDiagnostics {
  LatentState raw_output;                    // f(h) this round
  std::optional<LatentState> post_residual;  // set when residual was applied
  std::optional<double> grad_norm;           // set when search was applied
  std::optional<double> objective_before;
  std::optional<double> objective_after;
};

// One latent step under cfg.mode with an explicit round count:
//   none      f(h_prev) regardless of rounds
//   residual  per round: residual blend of the previous state with f
//   search    per round: plain f, then one contrastive update at the new
//             state (references are fed the post-update-input state, i.e.
//             the state the search is correcting)
//   both      per round: residual blend, then contrastive update
// rounds == 0 degrades to a plain step for every mode.
// pair may be null when cfg.mode needs no references.
LatentState refinement_round_n(const LatentState& h_prev, const DynamicsModel& model,
                               const CheckpointPair* pair, const RefinementConfig& cfg, int rounds,
                               std::vector<RoundDiagnostics>* diagnostics = nullptr);

// refinement_round_n with cfg.rounds_R rounds.
LatentState refinement_round(const LatentState& h_prev, const DynamicsModel& model,
                             const CheckpointPair* pair, const RefinementConfig& cfg,
                             std::vector<RoundDiagnostics>* diagnostics = nullptr);

// Rounds granted to latent step t (1-based) under cfg.rounds_policy:
// per_step grants rounds_R at every step, per_query spends a total budget of
// rounds_R one round per step from step 1 onward.
int rounds_for_step(const RefinementConfig& cfg, int step);

}  // namespace latref
