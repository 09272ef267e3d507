#pragma once

// Shared test helpers: random states, exact-comparison predicates, tiny
// fixture instances.

#include <cmath>
#include <cstring>
#include <vector>

#include "latref/core.hpp"
#include "latref/rng.hpp"
#include "latref/tasks.hpp"

namespace latref::testing {

inline LatentState random_state(int dim, Rng& rng, double scale = 1.0) {
  LatentState h = LatentState::zeros(dim);
  for (int i = 0; i < dim; ++i) h[i] = scale * rng.gaussian();
  return h;
}

inline bool bits_equal(double a, double b) {
  if (a == 0.0 && b == 0.0) return true;  // either signed zero
  return std::memcmp(&a, &b, sizeof a) == 0;
}

// 0-ulp state comparison: bitwise equality, signed zeros identified.
inline bool states_equal_exact(const LatentState& a, const LatentState& b) {
  if (a.dim() != b.dim()) return false;
  for (int i = 0; i < a.dim(); ++i)
    if (!bits_equal(a[i], b[i])) return false;
  return true;
}

inline bool states_close(const LatentState& a, const LatentState& b, double tol) {
  if (a.dim() != b.dim()) return false;
  for (int i = 0; i < a.dim(); ++i)
    if (std::abs(a[i] - b[i]) > tol * std::max(1.0, std::abs(b[i]))) return false;
  return true;
}

// Minimal hand-built instance whose features are already in latent-friendly
// one-hot form; width controls both question and step feature width.
inline TaskInstance tiny_instance(int width, int step_index, int gold_value, int decoy_value,
                                  int question_index = -1) {
  TaskInstance x;
  x.id = "tiny";
  x.family = TaskFamily::mod_chain;
  x.question_features.assign(static_cast<size_t>(width), 0.0);
  if (question_index >= 0) x.question_features[static_cast<size_t>(question_index)] = 1.0;
  else x.question_features[0] = 1.0;
  x.choices = {{"a", gold_value}, {"b", decoy_value}};
  x.gold = "a";
  std::vector<double> step(static_cast<size_t>(width), 0.0);
  step[static_cast<size_t>(step_index)] = 1.0;
  x.steps.push_back(std::move(step));
  ModChainMeta meta;
  meta.start = 0;
  meta.modulus = width;
  meta.ops = {{'+', step_index}};
  x.meta = meta;
  return x;
}

}  // namespace latref::testing
