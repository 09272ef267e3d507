#pragma once

// Domain types and exact vector arithmetic shared by every other component.
// All math is 64-bit; the tolerances asserted by the verification suite
// assume it.

#include <stdexcept>
#include <string>
#include <vector>

namespace latref {

struct DimensionMismatch : std::invalid_argument {
  explicit DimensionMismatch(const std::string& m) : std::invalid_argument(m) {}
};

struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& m) : std::invalid_argument(m) {}
};

struct ValidationError : std::invalid_argument {
  explicit ValidationError(const std::string& m) : std::invalid_argument(m) {}
};

// One continuous-thought vector h in R^d.
struct LatentState {
  std::vector<double> values;

  LatentState() = default;
  explicit LatentState(std::vector<double> v) : values(std::move(v)) {}
  static LatentState zeros(int dim) { return LatentState(std::vector<double>(dim, 0.0)); }

  int dim() const { return static_cast<int>(values.size()); }
  double& operator[](int i) { return values[static_cast<size_t>(i)]; }
  double operator[](int i) const { return values[static_cast<size_t>(i)]; }

  bool all_finite() const;
  // Throws ValidationError if any entry is NaN or Inf.
  void check_finite(const char* where) const;

  bool operator==(const LatentState& o) const { return values == o.values; }
};

// Mean squared error between two same-dimension states: (1/d) * sum (a_i-b_i)^2.
// The mean normalization (not the sum) is part of the contract; step sizes
// elsewhere are calibrated against the resulting 2/d gradient scale.
double mse(const LatentState& a, const LatentState& b);

// Componentwise alpha*prev + (1-alpha)*next, alpha in [0,1].
LatentState lerp(const LatentState& prev, const LatentState& next, double alpha);

// Euclidean distance between states; shared by diagnostics and tests.
double distance(const LatentState& a, const LatentState& b);
double l2_norm(const std::vector<double>& v);

enum class RefineMode { none, residual, search, both };

const char* to_string(RefineMode m);
RefineMode parse_mode(const std::string& s);  // throws ConfigError on unknown name

enum class RoundsPolicy { per_step, per_query };

const char* to_string(RoundsPolicy p);
RoundsPolicy parse_rounds_policy(const std::string& s);

// Knobs of the inference-time refinement loop.
//
//   alpha     memory rate: fraction of the previous latent kept per step
//   eta       step size of the contrastive latent update
//   steps_T   latent steps per query
//   rounds_R  refinement rounds; interpretation depends on rounds_policy:
//             per_step  = R rounds applied at every latent step,
//             per_query = a total budget of R rounds, spent one per step
//             from step 1 onward. The two agree when R(per_step)=1 and
//             R(per_query)>=T.
//   literal_sign  when true the contrastive update ascends the contrastive
//             objective (update follows the printed-equation sign) instead
//             of descending it; kept for comparison runs.
struct RefinementConfig {
  double alpha = 0.5;
  double eta = 0.1;
  int steps_T = 3;
  int rounds_R = 1;
  RefineMode mode = RefineMode::both;
  bool literal_sign = false;
  RoundsPolicy rounds_policy = RoundsPolicy::per_step;

  void validate() const;  // throws ConfigError
  RefinementConfig with_mode(RefineMode m) const {
    RefinementConfig c = *this;
    c.mode = m;
    return c;
  }
};

// Normalized scores over answer choices.
struct AnswerDistribution {
  std::vector<std::string> labels;
  std::vector<double> probabilities;

  static AnswerDistribution from_logits(std::vector<std::string> labels,
                                        const std::vector<double>& logits);

  int argmax() const;
  const std::string& predicted_label() const { return labels[static_cast<size_t>(argmax())]; }

  // Enforces the distribution invariants: sums to 1 within 1e-9, each
  // probability in [0,1], one probability per label.
  void validate() const;
};

// Default choice labels "a", "b", ... for n choices.
std::vector<std::string> default_choice_labels(int n);

}  // namespace latref
