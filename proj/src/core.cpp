#include "latref/core.hpp"

#include <algorithm>
#include <cmath>

namespace latref {

bool LatentState::all_finite() const {
  for (double x : values)
    if (!std::isfinite(x)) return false;
  return true;
}

void LatentState::check_finite(const char* where) const {
  if (!all_finite()) throw ValidationError(std::string(where) + ": non-finite latent entry");
}

namespace {
void require_same_dim(const LatentState& a, const LatentState& b, const char* op) {
  if (a.dim() != b.dim())
    throw DimensionMismatch(std::string(op) + ": dimension mismatch (" + std::to_string(a.dim()) +
                            " vs " + std::to_string(b.dim()) + ")");
}
}  // namespace

double mse(const LatentState& a, const LatentState& b) {
  require_same_dim(a, b, "mse");
  if (a.dim() == 0) throw DimensionMismatch("mse: zero-dimensional state");
  double acc = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / a.dim();
}

LatentState lerp(const LatentState& prev, const LatentState& next, double alpha) {
  require_same_dim(prev, next, "lerp");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("lerp: alpha must be in [0,1], got " + std::to_string(alpha));
  LatentState out = LatentState::zeros(prev.dim());
  const double beta = 1.0 - alpha;
  for (int i = 0; i < prev.dim(); ++i) out[i] = alpha * prev[i] + beta * next[i];
  return out;
}

double distance(const LatentState& a, const LatentState& b) {
  require_same_dim(a, b, "distance");
  double acc = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double l2_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

const char* to_string(RefineMode m) {
  switch (m) {
    case RefineMode::none: return "none";
    case RefineMode::residual: return "residual";
    case RefineMode::search: return "search";
    case RefineMode::both: return "both";
  }
  return "?";
}

RefineMode parse_mode(const std::string& s) {
  if (s == "none") return RefineMode::none;
  if (s == "residual") return RefineMode::residual;
  if (s == "search") return RefineMode::search;
  if (s == "both") return RefineMode::both;
  throw ConfigError("unknown mode '" + s + "' (expected none|residual|search|both)");
}

const char* to_string(RoundsPolicy p) {
  return p == RoundsPolicy::per_step ? "per_step" : "per_query";
}

RoundsPolicy parse_rounds_policy(const std::string& s) {
  if (s == "per_step") return RoundsPolicy::per_step;
  if (s == "per_query") return RoundsPolicy::per_query;
  throw ConfigError("unknown rounds policy '" + s + "' (expected per_step|per_query)");
}

void RefinementConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("alpha must be in [0,1], got " + std::to_string(alpha));
  if (!(eta > 0.0)) throw ConfigError("eta must be positive, got " + std::to_string(eta));
  if (steps_T < 1) throw ConfigError("steps_T must be >= 1, got " + std::to_string(steps_T));
  if (rounds_R < 0) throw ConfigError("rounds_R must be >= 0, got " + std::to_string(rounds_R));
}

AnswerDistribution AnswerDistribution::from_logits(std::vector<std::string> labels,
                                                   const std::vector<double>& logits) {
  if (labels.size() != logits.size())
    throw DimensionMismatch("from_logits: label/logit count mismatch");
  if (labels.empty()) throw ValidationError("from_logits: empty choice set");
  AnswerDistribution d;
  d.labels = std::move(labels);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  d.probabilities.reserve(logits.size());
  for (double z : logits) {
    const double e = std::exp(z - mx);
    d.probabilities.push_back(e);
    sum += e;
  }
  for (double& p : d.probabilities) p /= sum;
  return d;
}

int AnswerDistribution::argmax() const {
  int best = 0;
  for (int i = 1; i < static_cast<int>(probabilities.size()); ++i)
    if (probabilities[static_cast<size_t>(i)] > probabilities[static_cast<size_t>(best)]) best = i;
  return best;
}

void AnswerDistribution::validate() const {
  if (labels.size() != probabilities.size())
    throw ValidationError("AnswerDistribution: label/probability count mismatch");
  if (labels.empty()) throw ValidationError("AnswerDistribution: empty");
  double sum = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError("AnswerDistribution: probability out of [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("AnswerDistribution: probabilities sum to " + std::to_string(sum));
}

std::vector<std::string> default_choice_labels(int n) {
  if (n < 1 || n > 26) throw ValidationError("choice count must be in [1,26]");
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('a' + i)));
  return out;
}

}  // namespace latref
