#include "latref/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "latref/checkpoint.hpp"
#include "latref/refine.hpp"
#include "latref/rng.hpp"

namespace latref {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("TrainConfig: learning rate must be >= 0");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (dim < 1 || hidden < 1) throw ConfigError("TrainConfig: dim and hidden must be >= 1");
  if (steps_T < 1) throw ConfigError("TrainConfig: steps_T must be >= 1");
  if (!(answer_loss_weight >= 0.0) || !(latent_loss_weight >= 0.0))
    throw ConfigError("TrainConfig: loss weights must be >= 0");
  for (int e : checkpoint_epochs)
    if (e < 1 || e > epochs)
      throw ConfigError("TrainConfig: checkpoint epoch " + std::to_string(e) +
                        " outside [1," + std::to_string(epochs) + "]");
  if (refine_during_training) train_refine.validate();
}

MlpGrads MlpGrads::zeros_like(const MlpParams& p) {
  MlpGrads g;
  g.W1 = Matrix::zeros(p.W1.rows, p.W1.cols);
  g.b1.assign(p.b1.size(), 0.0);
  g.W2 = Matrix::zeros(p.W2.rows, p.W2.cols);
  g.b2.assign(p.b2.size(), 0.0);
  g.decode_W = Matrix::zeros(p.decode_W.rows, p.decode_W.cols);
  g.decode_b.assign(p.decode_b.size(), 0.0);
  return g;
}

void MlpGrads::accumulate(const MlpGrads& o) {
  W1.add_scaled(o.W1, 1.0);
  W2.add_scaled(o.W2, 1.0);
  decode_W.add_scaled(o.decode_W, 1.0);
  for (size_t i = 0; i < b1.size(); ++i) b1[i] += o.b1[i];
  for (size_t i = 0; i < b2.size(); ++i) b2[i] += o.b2[i];
  for (size_t i = 0; i < decode_b.size(); ++i) decode_b[i] += o.decode_b[i];
}

void MlpGrads::scale(double s) {
  for (auto& x : W1.data) x *= s;
  for (auto& x : W2.data) x *= s;
  for (auto& x : decode_W.data) x *= s;
  for (auto& x : b1) x *= s;
  for (auto& x : b2) x *= s;
  for (auto& x : decode_b) x *= s;
}

namespace {

using Vec = std::vector<double>;

void vec_axpy(Vec& y, const Vec& x, double a) {
  for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

// One unrolled round with everything the backward pass needs.
struct RoundTape {
  Vec h_in;
  Vec z;    // tanh hidden of the main model
  Vec raw;  // main model output
  Vec hr;   // post-residual state (== raw when residual is off)
  bool residual = false;
  bool search = false;
  Vec zg, zb;  // reference tanh activations at hr
  Vec h_out;
};

struct Tape {
  std::vector<std::vector<RoundTape>> steps;  // [T][rounds]
  std::vector<Vec> states;                    // h^0..h^T
  Vec probs;
  int gold_index = -1;
  std::vector<Vec> latent_targets;  // embedded gold steps, 1-based offset by -1
  int supervised_steps = 0;
};

Vec mlp_forward(const MlpParams& p, const Vec& h, Vec& z_out) {
  Vec a = p.W1.matvec(h);
  for (size_t i = 0; i < a.size(); ++i) a[i] = std::tanh(a[i] + p.b1[i]);
  z_out = a;
  Vec raw = p.W2.matvec(a);
  for (size_t i = 0; i < raw.size(); ++i) raw[i] += p.b2[i];
  return raw;
}

// J^T u of a reference MLP step evaluated where z was recorded.
Vec mlp_input_jacobian_t(const MlpParams& p, const Vec& z, const Vec& u) {
  Vec v = p.W2.tmatvec(u);
  for (size_t i = 0; i < v.size(); ++i) v[i] *= 1.0 - z[i] * z[i];
  return p.W1.tmatvec(v);
}

const MlpParams& require_mlp(const DynamicsModel& m, const char* side) {
  const auto* mlp = dynamic_cast<const MlpModel*>(&m);
  if (!mlp)
    throw ConfigError(std::string("refined training requires MLP ") + side +
                      " reference checkpoints");
  return mlp->params();
}

int gold_index_of(const TaskInstance& x) {
  for (int i = 0; i < static_cast<int>(x.choices.size()); ++i)
    if (x.choices[static_cast<size_t>(i)].label == x.gold) return i;
  throw ValidationError(x.id + ": gold label missing");
}

// Unrolls the recursion (plain or refined), the decode softmax, and the
// latent targets. Returns the total loss.
double forward_pass(const MlpModel& model, const TaskInstance& x, const LossSettings& s,
                    Tape& tape) {
  const MlpParams& p = model.params();
  const bool refined = s.refine_active && s.refine.mode != RefineMode::none;
  const bool use_residual =
      refined && (s.refine.mode == RefineMode::residual || s.refine.mode == RefineMode::both);
  const bool use_search =
      refined && (s.refine.mode == RefineMode::search || s.refine.mode == RefineMode::both);
  const MlpParams* good = nullptr;
  const MlpParams* bad = nullptr;
  if (use_search) {
    if (!s.pair) throw ConfigError("refined training with search needs a checkpoint pair");
    good = &require_mlp(*s.pair->good, "good");
    bad = &require_mlp(*s.pair->bad, "bad");
  }

  tape.gold_index = gold_index_of(x);
  Vec h = p.encoder_W.matvec(x.question_features);
  tape.states.push_back(h);

  const double grad_scale = 2.0 / p.dim();
  for (int t = 1; t <= s.steps_T; ++t) {
    int rounds = refined ? rounds_for_step(s.refine, t) : 1;
    if (rounds == 0) rounds = -1;  // marker: single plain round
    std::vector<RoundTape> round_tapes;
    const int n_rounds = rounds < 0 ? 1 : rounds;
    for (int r = 0; r < n_rounds; ++r) {
      RoundTape rt;
      rt.h_in = h;
      rt.raw = mlp_forward(p, h, rt.z);
      const bool plain = rounds < 0 || !refined;
      rt.residual = !plain && use_residual;
      rt.search = !plain && use_search;
      if (rt.residual) {
        rt.hr.resize(rt.raw.size());
        for (size_t i = 0; i < rt.raw.size(); ++i)
          rt.hr[i] = s.refine.alpha * h[i] + (1.0 - s.refine.alpha) * rt.raw[i];
      } else {
        rt.hr = rt.raw;
      }
      if (rt.search) {
        Vec outg = mlp_forward(*good, rt.hr, rt.zg);
        Vec outb = mlp_forward(*bad, rt.hr, rt.zb);
        const double signed_eta = s.refine.literal_sign ? s.refine.eta : -s.refine.eta;
        rt.h_out = rt.hr;
        for (size_t i = 0; i < rt.h_out.size(); ++i)
          rt.h_out[i] += signed_eta * (grad_scale * (outb[i] - outg[i]));
      } else {
        rt.h_out = rt.hr;
      }
      h = rt.h_out;
      round_tapes.push_back(std::move(rt));
    }
    tape.steps.push_back(std::move(round_tapes));
    tape.states.push_back(h);
  }

  // decode + cross entropy
  Vec logits = p.decode_W.matvec(h);
  for (size_t i = 0; i < logits.size(); ++i) logits[i] += p.decode_b[i];
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  tape.probs.resize(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    tape.probs[i] = std::exp(logits[i] - mx);
    denom += tape.probs[i];
  }
  for (auto& q : tape.probs) q /= denom;
  double loss =
      s.answer_weight * -std::log(std::max(tape.probs[static_cast<size_t>(tape.gold_index)], 1e-300));

  // latent supervision
  if (s.format == SupervisionFormat::latent_cot) {
    tape.supervised_steps = std::min<int>(s.steps_T, x.n_steps());
    for (int t = 1; t <= tape.supervised_steps; ++t) {
      Vec target = p.encoder_W.matvec(x.steps[static_cast<size_t>(t - 1)]);
      const Vec& ht = tape.states[static_cast<size_t>(t)];
      double acc = 0.0;
      for (size_t i = 0; i < target.size(); ++i) {
        const double d = ht[i] - target[i];
        acc += d * d;
      }
      loss += s.latent_weight * acc / p.dim();
      tape.latent_targets.push_back(std::move(target));
    }
  }
  return loss;
}

}  // namespace

double instance_loss(const MlpModel& model, const TaskInstance& x, const LossSettings& s) {
  Tape tape;
  return forward_pass(model, x, s, tape);
}

double accumulate_instance_gradients(const MlpModel& model, const TaskInstance& x,
                                     const LossSettings& s, MlpGrads& grads) {
  Tape tape;
  const double loss = forward_pass(model, x, s, tape);
  const MlpParams& p = model.params();
  const double grad_scale = 2.0 / p.dim();

  // decode head
  Vec dlogits = tape.probs;
  dlogits[static_cast<size_t>(tape.gold_index)] -= 1.0;
  for (auto& v : dlogits) v *= s.answer_weight;
  grads.decode_W.add_outer(dlogits, tape.states.back(), 1.0);
  vec_axpy(grads.decode_b, dlogits, 1.0);
  Vec u = p.decode_W.tmatvec(dlogits);

  auto add_latent_term = [&](int t, Vec& dest) {
    if (s.format != SupervisionFormat::latent_cot) return;
    if (t < 1 || t > tape.supervised_steps) return;
    const Vec& target = tape.latent_targets[static_cast<size_t>(t - 1)];
    const Vec& ht = tape.states[static_cast<size_t>(t)];
    for (size_t i = 0; i < dest.size(); ++i)
      dest[i] += s.latent_weight * grad_scale * (ht[i] - target[i]);
  };
  add_latent_term(s.steps_T, u);

  const MlpParams* good = nullptr;
  const MlpParams* bad = nullptr;
  if (s.refine_active && s.pair &&
      (s.refine.mode == RefineMode::search || s.refine.mode == RefineMode::both)) {
    good = &require_mlp(*s.pair->good, "good");
    bad = &require_mlp(*s.pair->bad, "bad");
  }

  for (int t = s.steps_T; t >= 1; --t) {
    const auto& rounds = tape.steps[static_cast<size_t>(t - 1)];
    for (int r = static_cast<int>(rounds.size()) - 1; r >= 0; --r) {
      const RoundTape& rt = rounds[static_cast<size_t>(r)];
      // through the contrastive update
      Vec u_hr = u;
      if (rt.search) {
        const double signed_eta = s.refine.literal_sign ? s.refine.eta : -s.refine.eta;
        const Vec jb = mlp_input_jacobian_t(*bad, rt.zb, u);
        const Vec jg = mlp_input_jacobian_t(*good, rt.zg, u);
        for (size_t i = 0; i < u_hr.size(); ++i)
          u_hr[i] += signed_eta * grad_scale * (jb[i] - jg[i]);
      }
      // through the residual blend
      Vec u_raw;
      Vec u_carry(u_hr.size(), 0.0);
      if (rt.residual) {
        u_raw = u_hr;
        for (auto& v : u_raw) v *= 1.0 - s.refine.alpha;
        u_carry = u_hr;
        for (auto& v : u_carry) v *= s.refine.alpha;
      } else {
        u_raw = u_hr;
      }
      // through the main MLP
      vec_axpy(grads.b2, u_raw, 1.0);
      grads.W2.add_outer(u_raw, rt.z, 1.0);
      Vec w = p.W2.tmatvec(u_raw);
      for (size_t i = 0; i < w.size(); ++i) w[i] *= 1.0 - rt.z[i] * rt.z[i];
      vec_axpy(grads.b1, w, 1.0);
      grads.W1.add_outer(w, rt.h_in, 1.0);
      Vec u_in = p.W1.tmatvec(w);
      for (size_t i = 0; i < u.size(); ++i) u[i] = u_carry[i] + u_in[i];
    }
    add_latent_term(t - 1, u);
  }
  return loss;
}

namespace {

void apply_sgd(MlpParams& p, const MlpGrads& g, double lr) {
  p.W1.add_scaled(g.W1, -lr);
  p.W2.add_scaled(g.W2, -lr);
  p.decode_W.add_scaled(g.decode_W, -lr);
  for (size_t i = 0; i < p.b1.size(); ++i) p.b1[i] -= lr * g.b1[i];
  for (size_t i = 0; i < p.b2.size(); ++i) p.b2[i] -= lr * g.b2[i];
  for (size_t i = 0; i < p.decode_b.size(); ++i) p.decode_b[i] -= lr * g.decode_b[i];
}

}  // namespace

TrainResult train_mlp(const std::vector<TaskInstance>& data, SupervisionFormat format,
                      const TrainConfig& cfg, const CheckpointPair* refine_pair,
                      const MlpModel* init_model) {
  cfg.validate();
  if (data.empty()) throw ValidationError("train_mlp: empty dataset");
  const int F = data.front().feature_width();
  const int C = static_cast<int>(data.front().choices.size());
  const auto labels = default_choice_labels(C);
  for (const auto& x : data) {
    x.validate();
    if (x.feature_width() != F) throw ValidationError("train_mlp: inconsistent feature widths");
    if (x.choice_labels() != labels) throw ValidationError("train_mlp: inconsistent choice labels");
  }

  MlpModel model = init_model ? *init_model
                              : MlpModel::init_random(cfg.dim, cfg.hidden, F, C, cfg.seed);
  if (model.params().feature_width() != F)
    throw ValidationError("train_mlp: init model encoder width != data feature width");
  MlpParams params = model.params();

  LossSettings settings;
  settings.format = format;
  settings.answer_weight = cfg.answer_loss_weight;
  settings.latent_weight = cfg.latent_loss_weight;
  settings.steps_T = cfg.steps_T;
  settings.refine_active = cfg.refine_during_training;
  settings.refine = cfg.train_refine;
  settings.pair = refine_pair;

  TrainResult result{model, {}, {}};
  Rng order_rng(hash_mix(cfg.seed, 0x7ea14u));
  std::vector<int> order(data.size());
  for (size_t i = 0; i < data.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng epoch_rng = order_rng.fork(static_cast<uint64_t>(epoch));
    epoch_rng.shuffle(order);

    double epoch_loss = 0.0;
    size_t cursor = 0;
    while (cursor < order.size()) {
      const size_t batch_end = std::min(order.size(), cursor + static_cast<size_t>(cfg.batch_size));
      MlpGrads grads = MlpGrads::zeros_like(params);
      MlpModel current(params, labels);
      for (size_t i = cursor; i < batch_end; ++i)
        epoch_loss +=
            accumulate_instance_gradients(current, data[static_cast<size_t>(order[i])], settings, grads);
      grads.scale(1.0 / static_cast<double>(batch_end - cursor));
      apply_sgd(params, grads, cfg.learning_rate);
      cursor = batch_end;
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss))
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                             " (loss is not finite); lower the learning rate");
    result.epoch_losses.push_back(epoch_loss);

    if (std::find(cfg.checkpoint_epochs.begin(), cfg.checkpoint_epochs.end(), epoch) !=
        cfg.checkpoint_epochs.end())
      result.snapshots.push_back({epoch, MlpModel(params, labels)});
  }

  result.model = MlpModel(params, labels);
  if (cfg.snapshot_dir) {
    std::filesystem::create_directories(*cfg.snapshot_dir);
    for (const auto& snap : result.snapshots)
      save_checkpoint(snap.model,
                      *cfg.snapshot_dir + "/ckpt_epoch_" + std::to_string(snap.epoch) + ".json");
    save_checkpoint(result.model, *cfg.snapshot_dir + "/ckpt_final.json");
  }
  return result;
}

PairReport make_checkpoint_pair(const std::vector<Snapshot>& snapshots, int bad_epoch,
                                int good_epoch, const std::vector<TaskInstance>* val_data,
                                int steps_T) {
  if (bad_epoch >= good_epoch)
    throw ConfigError("make_checkpoint_pair: bad epoch " + std::to_string(bad_epoch) +
                      " must precede good epoch " + std::to_string(good_epoch));
  const MlpModel* bad = nullptr;
  const MlpModel* good = nullptr;
  for (const auto& s : snapshots) {
    if (s.epoch == bad_epoch) bad = &s.model;
    if (s.epoch == good_epoch) good = &s.model;
  }
  if (!bad) throw ConfigError("make_checkpoint_pair: no snapshot at epoch " + std::to_string(bad_epoch));
  if (!good)
    throw ConfigError("make_checkpoint_pair: no snapshot at epoch " + std::to_string(good_epoch));

  PairReport report;
  report.pair.good = std::make_shared<MlpModel>(*good);
  report.pair.bad = std::make_shared<MlpModel>(*bad);
  if (val_data && !val_data->empty()) {
    RefinementConfig plain;
    plain.mode = RefineMode::none;
    plain.steps_T = steps_T;
    report.bad_accuracy_pct = evaluate_accuracy(*val_data, *bad, nullptr, plain).accuracy_pct();
    report.good_accuracy_pct = evaluate_accuracy(*val_data, *good, nullptr, plain).accuracy_pct();
    report.accuracy_warning = report.good_accuracy_pct < report.bad_accuracy_pct;
  }
  return report;
}

}  // namespace latref
