#include "latref/refine.hpp"

#include <cmath>

namespace latref {

LatentState residual_refine(const LatentState& prev, const LatentState& raw_next, double alpha) {
  return lerp(prev, raw_next, alpha);
}

ContrastiveGradient contrastive_gradient(const LatentState& h, const LatentState& h_good,
                                         const LatentState& h_bad) {
  if (h.dim() != h_good.dim() || h.dim() != h_bad.dim())
    throw DimensionMismatch("contrastive_gradient: dimension mismatch");
  if (h.dim() == 0) throw DimensionMismatch("contrastive_gradient: zero-dimensional state");
  ContrastiveGradient g;
  g.h = h;
  g.h_good = h_good;
  g.h_bad = h_bad;
  g.values.resize(static_cast<size_t>(h.dim()));
  const double scale = 2.0 / h.dim();
  // The h-quadratic terms of the two mse halves cancel, so the gradient does
  // not depend on h at all.
  for (int i = 0; i < h.dim(); ++i)
    g.values[static_cast<size_t>(i)] = scale * (h_bad[i] - h_good[i]);
  return g;
}

double contrastive_objective(const LatentState& h, const LatentState& h_good,
                             const LatentState& h_bad) {
  return mse(h, h_good) - mse(h, h_bad);
}

LatentState contrastive_update(const LatentState& h, const ContrastiveGradient& grad, double eta,
                               bool literal_sign) {
  if (!(eta > 0.0)) throw ConfigError("contrastive_update: eta must be positive");
  if (static_cast<int>(grad.values.size()) != h.dim())
    throw DimensionMismatch("contrastive_update: gradient dim != state dim");
  const double signed_eta = literal_sign ? eta : -eta;
  LatentState out = LatentState::zeros(h.dim());
  for (int i = 0; i < h.dim(); ++i) out[i] = h[i] + signed_eta * grad.values[static_cast<size_t>(i)];
  return out;
}

LatentState refinement_round_n(const LatentState& h_prev, const DynamicsModel& model,
                               const CheckpointPair* pair, const RefinementConfig& cfg, int rounds,
                               std::vector<RoundDiagnostics>* diagnostics) {
  cfg.validate();
  if (rounds < 0) throw ConfigError("refinement_round: rounds must be >= 0");
  const bool use_residual = cfg.mode == RefineMode::residual || cfg.mode == RefineMode::both;
  const bool use_search = cfg.mode == RefineMode::search || cfg.mode == RefineMode::both;
  if (use_search) {
    if (pair == nullptr) throw ConfigError("refinement_round: search mode needs a checkpoint pair");
    pair->validate(model.dim());
  }

  if (cfg.mode == RefineMode::none || rounds == 0) {
    LatentState out = model_step(model, h_prev);
    if (diagnostics) {
      RoundDiagnostics d;
      d.raw_output = out;
      diagnostics->push_back(std::move(d));
    }
    return out;
  }

  LatentState h = h_prev;
  for (int r = 0; r < rounds; ++r) {
    RoundDiagnostics diag;
    const LatentState raw = model_step(model, h);
    diag.raw_output = raw;
    if (use_residual) {
      h = residual_refine(h, raw, cfg.alpha);
      diag.post_residual = h;
    } else {
      h = raw;
    }
    if (use_search) {
      const LatentState h_good = model_step(*pair->good, h);
      const LatentState h_bad = model_step(*pair->bad, h);
      const ContrastiveGradient g = contrastive_gradient(h, h_good, h_bad);
      diag.grad_norm = l2_norm(g.values);
      diag.objective_before = contrastive_objective(h, h_good, h_bad);
      h = contrastive_update(h, g, cfg.eta, cfg.literal_sign);
      diag.objective_after = contrastive_objective(h, h_good, h_bad);
    }
    h.check_finite("refinement_round");
    if (diagnostics) diagnostics->push_back(std::move(diag));
  }
  return h;
}

LatentState refinement_round(const LatentState& h_prev, const DynamicsModel& model,
                             const CheckpointPair* pair, const RefinementConfig& cfg,
                             std::vector<RoundDiagnostics>* diagnostics) {
  return refinement_round_n(h_prev, model, pair, cfg, cfg.rounds_R, diagnostics);
}

int rounds_for_step(const RefinementConfig& cfg, int step) {
  if (cfg.rounds_policy == RoundsPolicy::per_step) return cfg.rounds_R;
  return step <= cfg.rounds_R ? 1 : 0;
}

}  // namespace latref
