#include "latref/dynamics.hpp"

#include <cmath>

#include "latref/rng.hpp"

namespace latref {

Featurizer::Featurizer(int dim, int feature_width, uint64_t seed) {
  if (dim < 1 || feature_width < 1) throw ConfigError("Featurizer: dim and width must be >= 1");
  Rng rng(hash_mix(seed, 0xfea712e5u));
  // Unit-norm features map to roughly unit-norm embeddings.
  weights_ = Matrix::random_gaussian(dim, feature_width, 1.0 / std::sqrt(double(dim)), rng);
}

Featurizer::Featurizer(Matrix weights) : weights_(std::move(weights)) {
  if (weights_.rows < 1 || weights_.cols < 1) throw ConfigError("Featurizer: empty weights");
  if (!weights_.all_finite()) throw ValidationError("Featurizer: non-finite weights");
}

LatentState Featurizer::embed(const std::vector<double>& features) const {
  if (static_cast<int>(features.size()) != weights_.cols)
    throw DimensionMismatch("Featurizer: feature width " + std::to_string(features.size()) +
                            " != " + std::to_string(weights_.cols));
  LatentState h(weights_.matvec(features));
  h.check_finite("Featurizer::embed");
  return h;
}

LatentState model_step(const DynamicsModel& m, const LatentState& h) {
  if (h.dim() != m.dim())
    throw DimensionMismatch("model_step: state dim " + std::to_string(h.dim()) + " != model dim " +
                            std::to_string(m.dim()));
  LatentState out = m.step(h);
  if (out.dim() != m.dim()) throw DimensionMismatch("model_step: backend changed dimension");
  out.check_finite("model_step");
  return out;
}

AnswerDistribution decode_answer(const DynamicsModel& m, const LatentState& h) {
  if (h.dim() != m.dim())
    throw DimensionMismatch("decode_answer: state dim " + std::to_string(h.dim()) +
                            " != model dim " + std::to_string(m.dim()));
  AnswerDistribution d = m.decode(h);
  d.validate();
  return d;
}

void MlpParams::validate() const {
  const int d = dim(), H = hidden(), C = n_choices(), F = feature_width();
  if (d < 1 || H < 1 || C < 2 || F < 1) throw ValidationError("MlpParams: degenerate shape");
  if (W1.rows != H || W1.cols != d) throw ValidationError("MlpParams: W1 shape");
  if (static_cast<int>(b1.size()) != H) throw ValidationError("MlpParams: b1 shape");
  if (W2.rows != d || W2.cols != H) throw ValidationError("MlpParams: W2 shape");
  if (static_cast<int>(b2.size()) != d) throw ValidationError("MlpParams: b2 shape");
  if (decode_W.rows != C || decode_W.cols != d) throw ValidationError("MlpParams: decode_W shape");
  if (static_cast<int>(decode_b.size()) != C) throw ValidationError("MlpParams: decode_b shape");
  if (encoder_W.rows != d) throw ValidationError("MlpParams: encoder_W shape");
  auto finite = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  if (!W1.all_finite() || !W2.all_finite() || !decode_W.all_finite() || !encoder_W.all_finite() ||
      !finite(b1) || !finite(b2) || !finite(decode_b))
    throw ValidationError("MlpParams: non-finite parameter");
}

bool MlpParams::operator==(const MlpParams& o) const {
  return W1 == o.W1 && b1 == o.b1 && W2 == o.W2 && b2 == o.b2 && decode_W == o.decode_W &&
         decode_b == o.decode_b && encoder_W == o.encoder_W;
}

MlpModel::MlpModel(MlpParams params, std::vector<std::string> labels)
    : params_(std::move(params)), labels_(std::move(labels)) {
  params_.validate();
  if (static_cast<int>(labels_.size()) != params_.n_choices())
    throw ValidationError("MlpModel: label count != decode head rows");
}

MlpModel MlpModel::init_random(int dim, int hidden, int feature_width, int n_choices,
                               uint64_t seed) {
  Rng rng(hash_mix(seed, 0x1417u));
  MlpParams p;
  p.W1 = Matrix::random_gaussian(hidden, dim, 1.0 / std::sqrt(double(dim)), rng);
  p.b1.assign(static_cast<size_t>(hidden), 0.0);
  p.W2 = Matrix::random_gaussian(dim, hidden, 1.0 / std::sqrt(double(hidden)), rng);
  p.b2.assign(static_cast<size_t>(dim), 0.0);
  p.decode_W = Matrix::random_gaussian(n_choices, dim, 1.0 / std::sqrt(double(dim)), rng);
  p.decode_b.assign(static_cast<size_t>(n_choices), 0.0);
  p.encoder_W = Featurizer(dim, feature_width, seed).weights();
  return MlpModel(std::move(p), default_choice_labels(n_choices));
}

LatentState MlpModel::step(const LatentState& h) const {
  std::vector<double> a = params_.W1.matvec(h.values);
  for (int i = 0; i < params_.hidden(); ++i)
    a[static_cast<size_t>(i)] = std::tanh(a[static_cast<size_t>(i)] + params_.b1[static_cast<size_t>(i)]);
  std::vector<double> out = params_.W2.matvec(a);
  for (int i = 0; i < params_.dim(); ++i) out[static_cast<size_t>(i)] += params_.b2[static_cast<size_t>(i)];
  return LatentState(std::move(out));
}

AnswerDistribution MlpModel::decode(const LatentState& h) const {
  std::vector<double> logits = params_.decode_W.matvec(h.values);
  for (int i = 0; i < params_.n_choices(); ++i)
    logits[static_cast<size_t>(i)] += params_.decode_b[static_cast<size_t>(i)];
  return AnswerDistribution::from_logits(labels_, logits);
}

LatentState MlpModel::encode(const TaskInstance& x) const {
  return encode_features(x.question_features);
}

LatentState MlpModel::encode_features(const std::vector<double>& features) const {
  if (static_cast<int>(features.size()) != params_.feature_width())
    throw DimensionMismatch("MlpModel::encode: feature width " + std::to_string(features.size()) +
                            " != encoder width " + std::to_string(params_.feature_width()));
  return LatentState(params_.encoder_W.matvec(features));
}

namespace {
// Softness of the distance-based decode head. Argmax is unaffected.
constexpr double kDecodeTemperature = 1.0;
}  // namespace

OracleModel::OracleModel(const TaskInstance& instance, const Featurizer& featurizer, Options opt)
    : opt_(opt) {
  instance.validate();
  if (!(opt_.pull > 0.0 && opt_.pull <= 1.0))
    throw ConfigError("OracleModel: pull must be in (0,1], got " + std::to_string(opt_.pull));
  if (opt_.sigma < 0.0) throw ConfigError("OracleModel: sigma must be >= 0");
  if (featurizer.feature_width() != instance.feature_width())
    throw DimensionMismatch("OracleModel: featurizer width != instance feature width");

  encoded_question_ = featurizer.embed(instance.question_features);
  anchors_.push_back(encoded_question_);
  for (const auto& s : instance.steps) anchors_.push_back(featurizer.embed(s));

  for (int c = 0; c < static_cast<int>(instance.choices.size()); ++c) {
    choice_embeddings_.push_back(featurizer.embed(choice_feature_vector(instance, c)));
    labels_.push_back(instance.choices[static_cast<size_t>(c)].label);
  }
}

int OracleModel::dim() const { return anchors_.front().dim(); }

const LatentState& OracleModel::target_for(const LatentState& h) const {
  if (h.dim() != dim()) throw DimensionMismatch("OracleModel::target_for: dim mismatch");
  const int last = static_cast<int>(anchors_.size()) - 1;
  // Ties keep the latest anchor so a walk over repeated gold values (equal
  // consecutive embeddings) still advances instead of stalling.
  int nearest = 0;
  double best = distance(h, anchors_[0]);
  for (int i = 1; i <= last; ++i) {
    const double d = distance(h, anchors_[static_cast<size_t>(i)]);
    if (d <= best) {
      best = d;
      nearest = i;
    }
  }
  return anchors_[static_cast<size_t>(std::min(nearest + 1, last))];
}

LatentState OracleModel::step(const LatentState& h) const {
  const LatentState& target = target_for(h);
  LatentState out = LatentState::zeros(dim());
  if (!opt_.repel && opt_.pull == 1.0) {
    out = target;  // full pull lands on the gold step exactly
  } else {
    const double direction = opt_.repel ? -opt_.pull : opt_.pull;
    for (int i = 0; i < dim(); ++i) out[i] = h[i] + direction * (target[i] - h[i]);
  }
  if (opt_.sigma > 0.0) {
    Rng noise(hash_double_bits(h.values, opt_.noise_seed));
    for (int i = 0; i < dim(); ++i) out[i] += opt_.sigma * noise.gaussian();
  }
  return out;
}

AnswerDistribution OracleModel::decode(const LatentState& h) const {
  std::vector<double> logits;
  logits.reserve(choice_embeddings_.size());
  for (const auto& emb : choice_embeddings_) {
    const double d = distance(h, emb);
    logits.push_back(-(d * d) / kDecodeTemperature);
  }
  return AnswerDistribution::from_logits(labels_, logits);
}

LatentState OracleModel::encode(const TaskInstance& x) const {
  (void)x;
  return encoded_question_;
}

void CheckpointPair::validate(int engine_dim) const {
  if (!good || !bad) throw ValidationError("CheckpointPair: missing reference model");
  if (good->dim() != engine_dim || bad->dim() != engine_dim)
    throw DimensionMismatch("CheckpointPair: reference dim != engine dim");
}

}  // namespace latref
