#include "latref/engine.hpp"

#include <fstream>

namespace latref {

namespace {

void validate_inputs(const TaskInstance& x, const DynamicsModel& model, const CheckpointPair* pair,
                     const RefinementConfig& cfg) {
  cfg.validate();
  x.validate();
  if (model.dim() < 1) throw ValidationError("run_inference: zero-dimensional model");
  const bool needs_pair = cfg.mode == RefineMode::search || cfg.mode == RefineMode::both;
  if (needs_pair) {
    if (pair == nullptr) throw ConfigError("run_inference: mode needs a checkpoint pair");
    pair->validate(model.dim());
  }
}

}  // namespace

Trajectory run_inference(const TaskInstance& x, const DynamicsModel& model,
                         const CheckpointPair* pair, const RefinementConfig& cfg) {
  validate_inputs(x, model, pair, cfg);

  Trajectory t;
  t.instance_id = x.id;
  t.config = cfg;
  t.gold = x.gold;
  t.states.reserve(static_cast<size_t>(cfg.steps_T) + 1);

  LatentState h = model.encode(x);
  h.check_finite("run_inference: h0");
  t.states.push_back(h);

  for (int step = 1; step <= cfg.steps_T; ++step) {
    StepRecord rec;
    h = refinement_round_n(h, model, pair, cfg, rounds_for_step(cfg, step), &rec.rounds);
    t.states.push_back(h);
    t.steps.push_back(std::move(rec));
  }

  t.answer = decode_answer(model, h);
  t.predicted = t.answer.predicted_label();
  return t;
}

TraceRecord trace_compare(const TaskInstance& x, const DynamicsModel& model,
                          const CheckpointPair* pair, const RefinementConfig& cfg) {
  const Trajectory baseline = run_inference(x, model, pair, cfg.with_mode(RefineMode::none));
  const Trajectory refined = run_inference(x, model, pair, cfg);
  TraceRecord r;
  r.instance_id = x.id;
  r.gold = x.gold;
  r.baseline = baseline.answer;
  r.refined = refined.answer;
  r.baseline_predicted = baseline.predicted;
  r.refined_predicted = refined.predicted;
  r.flipped = r.baseline_predicted != r.refined_predicted;
  return r;
}

nlohmann::json trajectory_to_json(const Trajectory& t) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["instance_id"] = t.instance_id;
  j["config"] = {{"alpha", t.config.alpha},
                 {"eta", t.config.eta},
                 {"steps_T", t.config.steps_T},
                 {"rounds_R", t.config.rounds_R},
                 {"mode", to_string(t.config.mode)},
                 {"literal_sign", t.config.literal_sign},
                 {"rounds_policy", to_string(t.config.rounds_policy)}};
  nlohmann::json states = nlohmann::json::array();
  for (const auto& s : t.states) states.push_back(s.values);
  j["states"] = std::move(states);

  nlohmann::json steps = nlohmann::json::array();
  for (const auto& rec : t.steps) {
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& d : rec.rounds) {
      nlohmann::json r;
      r["raw_output"] = d.raw_output.values;
      if (d.post_residual) r["post_residual"] = d.post_residual->values;
      if (d.grad_norm) r["grad_norm"] = *d.grad_norm;
      if (d.objective_before) r["objective_before"] = *d.objective_before;
      if (d.objective_after) r["objective_after"] = *d.objective_after;
      rounds.push_back(std::move(r));
    }
    steps.push_back({{"rounds", std::move(rounds)}});
  }
  j["steps"] = std::move(steps);
  j["answer"] = {{"labels", t.answer.labels}, {"probabilities", t.answer.probabilities}};
  j["predicted"] = t.predicted;
  j["gold"] = t.gold;
  return j;
}

void write_trajectory(const Trajectory& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << trajectory_to_json(t).dump(1) << '\n';
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

EvalSummary evaluate_accuracy(const std::vector<TaskInstance>& testset, const DynamicsModel& model,
                              const CheckpointPair* pair, const RefinementConfig& cfg) {
  EvalSummary s;
  s.correct_flags.reserve(testset.size());
  for (const auto& x : testset) {
    const Trajectory t = run_inference(x, model, pair, cfg);
    const bool ok = t.predicted == x.gold;
    s.correct_flags.push_back(ok);
    s.total += 1;
    s.correct += ok ? 1 : 0;
  }
  return s;
}

}  // namespace latref
