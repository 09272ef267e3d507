#include "latref/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <sys/resource.h>

#include "latref/csv.hpp"
#include "latref/rng.hpp"

namespace latref {

namespace {

long current_peak_rss_kb() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return u.ru_maxrss;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<RefineMode> kAblationModes = {RefineMode::none, RefineMode::residual,
                                                RefineMode::search, RefineMode::both};

}  // namespace

ArmProvider::Bundle OracleArm::get(const TaskInstance& x, uint64_t seed) const {
  OracleModel::Options main_opt;
  main_opt.pull = opt_.pull;
  main_opt.sigma = opt_.sigma;
  main_opt.noise_seed = hash_mix(hash_mix(opt_.arm_seed, seed), fnv1a64(x.id));
  OracleModel::Options good_opt;
  good_opt.pull = opt_.pull;
  OracleModel::Options bad_opt;
  bad_opt.pull = opt_.pull;
  bad_opt.repel = true;

  Bundle b;
  b.model = std::make_shared<OracleModel>(x, *featurizer_, main_opt);
  b.pair.good = std::make_shared<OracleModel>(x, *featurizer_, good_opt);
  b.pair.bad = std::make_shared<OracleModel>(x, *featurizer_, bad_opt);
  return b;
}

ArmEval evaluate_arm(const std::vector<TaskInstance>& testset, const ArmProvider& arm,
                     const RefinementConfig& cfg, uint64_t seed) {
  ArmEval e;
  std::vector<bool> flags;
  flags.reserve(testset.size());
  for (const auto& x : testset) {
    const auto bundle = arm.get(x, seed);
    const Trajectory t = run_inference(x, *bundle.model, &bundle.pair, cfg);
    const bool ok = t.predicted == x.gold;
    flags.push_back(ok);
    e.total += 1;
    e.correct += ok ? 1 : 0;  // streaming tally
  }
  // independent batch recount; must agree with the streaming tally exactly
  int recount = 0;
  for (bool f : flags) recount += f ? 1 : 0;
  if (recount != e.correct) throw std::logic_error("evaluate_arm: tally cross-check failed");
  e.accuracy_pct = e.total == 0 ? 0.0 : 100.0 * e.correct / e.total;
  return e;
}

namespace {

double mean_accuracy(const std::vector<TaskInstance>& testset, const ArmProvider& arm,
                     const RefinementConfig& cfg, const std::vector<uint64_t>& seeds) {
  double acc = 0.0;
  for (uint64_t s : seeds) acc += evaluate_arm(testset, arm, cfg, s).accuracy_pct;
  return acc / static_cast<double>(seeds.size());
}

}  // namespace

AblationReport run_ablation(const std::vector<TaskInstance>& testset, const ArmProvider& arm,
                            const RefinementConfig& base_cfg, const std::vector<uint64_t>& seeds) {
  if (testset.empty()) throw ValidationError("run_ablation: empty testset");
  if (seeds.empty()) throw ValidationError("run_ablation: need at least one seed");
  base_cfg.validate();

  AblationReport report;
  report.seeds = seeds;
  report.instance_count = static_cast<int>(testset.size());
  double none_acc = 0.0;
  for (RefineMode mode : kAblationModes) {
    AblationRow row;
    row.mode = mode;
    row.accuracy_pct = mean_accuracy(testset, arm, base_cfg.with_mode(mode), seeds);
    if (mode == RefineMode::none) {
      none_acc = row.accuracy_pct;
      row.gain_pct = 0.0;
    } else {
      row.gain_pct = none_acc > 0.0 ? 100.0 * (row.accuracy_pct - none_acc) / none_acc : 0.0;
    }
    report.rows.push_back(row);
  }
  return report;
}

AblationReport run_ablation(const std::vector<TaskInstance>& testset,
                            std::shared_ptr<const DynamicsModel> model, CheckpointPair pair,
                            const RefinementConfig& base_cfg, const std::vector<uint64_t>& seeds) {
  FixedArm arm(std::move(model), std::move(pair));
  return run_ablation(testset, arm, base_cfg, seeds);
}

namespace {
const std::vector<std::string> kAblationHeader = {"mode", "accuracy_pct", "gain_pct",
                                                  "instance_count", "seeds"};
}

void write_ablation_csv(const AblationReport& r, const std::string& path) {
  std::string seeds;
  for (size_t i = 0; i < r.seeds.size(); ++i)
    seeds += (i ? ";" : "") + std::to_string(r.seeds[i]);
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : r.rows)
    rows.push_back({to_string(row.mode), format_double(row.accuracy_pct),
                    format_double(row.gain_pct), std::to_string(r.instance_count), seeds});
  write_csv(path, kAblationHeader, rows);
}

AblationReport read_ablation_csv(const std::string& path) {
  AblationReport r;
  for (const auto& row : read_csv(path, kAblationHeader)) {
    if (row.size() != 5) throw std::runtime_error(path + ": malformed ablation row");
    AblationRow a;
    a.mode = parse_mode(row[0]);
    a.accuracy_pct = parse_double(row[1]);
    a.gain_pct = parse_double(row[2]);
    r.instance_count = std::stoi(row[3]);
    if (r.seeds.empty()) {
      std::string cell = row[4];
      size_t pos = 0;
      while (pos != std::string::npos && !cell.empty()) {
        const size_t next = cell.find(';', pos);
        r.seeds.push_back(std::stoull(cell.substr(pos, next - pos)));
        pos = next == std::string::npos ? next : next + 1;
      }
    }
    r.rows.push_back(a);
  }
  return r;
}

SweepGrid run_sweep(const std::vector<TaskInstance>& testset, const ArmProvider& arm,
                    const RefinementConfig& base_cfg, const std::vector<double>& alphas,
                    const std::vector<double>& etas, int rounds_R, uint64_t seed) {
  if (testset.empty()) throw ValidationError("run_sweep: empty testset");
  if (alphas.empty() || etas.empty()) throw ValidationError("run_sweep: empty grid");
  for (double a : alphas)
    if (!(a >= 0.01 && a <= 1.0))
      throw ConfigError("run_sweep: alpha " + std::to_string(a) + " outside [0.01,1]");
  for (double e : etas)
    if (!(e > 0.0)) throw ConfigError("run_sweep: eta must be positive");

  SweepGrid g;
  g.alphas = alphas;
  g.etas = etas;
  g.rounds_R = rounds_R;
  g.accuracy_pct = Matrix(static_cast<int>(alphas.size()), static_cast<int>(etas.size()));
  for (size_t ai = 0; ai < alphas.size(); ++ai) {
    for (size_t ei = 0; ei < etas.size(); ++ei) {
      RefinementConfig cfg = base_cfg;
      cfg.alpha = alphas[ai];
      cfg.eta = etas[ei];
      cfg.rounds_R = rounds_R;
      g.accuracy_pct.at(static_cast<int>(ai), static_cast<int>(ei)) =
          evaluate_arm(testset, arm, cfg, seed).accuracy_pct;
    }
  }
  return g;
}

namespace {
const std::vector<std::string> kSweepHeader = {"alpha", "eta", "accuracy_pct"};
}

void write_sweep_csv(const SweepGrid& g, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (size_t ai = 0; ai < g.alphas.size(); ++ai)
    for (size_t ei = 0; ei < g.etas.size(); ++ei)
      rows.push_back({format_double(g.alphas[ai]), format_double(g.etas[ei]),
                      format_double(g.accuracy_pct.at(static_cast<int>(ai), static_cast<int>(ei)))});
  write_csv(path, kSweepHeader, rows);
}

SweepGrid read_sweep_csv(const std::string& path) {
  const auto rows = read_csv(path, kSweepHeader);
  SweepGrid g;
  std::vector<double> alphas, etas;
  for (const auto& row : rows) {
    if (row.size() != 3) throw std::runtime_error(path + ": malformed sweep row");
    const double a = parse_double(row[0]);
    const double e = parse_double(row[1]);
    if (alphas.empty() || alphas.back() != a) alphas.push_back(a);
    if (alphas.size() == 1) etas.push_back(e);
  }
  g.alphas = alphas;
  g.etas = etas;
  g.accuracy_pct = Matrix(static_cast<int>(alphas.size()), static_cast<int>(etas.size()));
  size_t idx = 0;
  for (size_t ai = 0; ai < alphas.size(); ++ai)
    for (size_t ei = 0; ei < etas.size(); ++ei, ++idx)
      g.accuracy_pct.at(static_cast<int>(ai), static_cast<int>(ei)) = parse_double(rows[idx][2]);
  return g;
}

std::vector<double> default_sweep_alphas() { return {0.01, 0.25, 0.5, 0.75, 1.0}; }

std::vector<double> default_sweep_etas(double eta_center) {
  // log grid spanning a ~4900x range, matching the relative dynamic range of
  // the [1, 5000] step-size scan this harness mirrors
  return {eta_center / 70.0, eta_center / 8.4, eta_center, eta_center * 8.4, eta_center * 70.0};
}

TokenReport run_token_report(const std::vector<TaskInstance>& testset, const RefinementConfig& cfg,
                             int tokens_per_step) {
  if (testset.empty()) throw ValidationError("run_token_report: empty testset");
  if (tokens_per_step < 1) throw ConfigError("run_token_report: tokens_per_step must be >= 1");
  cfg.validate();

  TokenReport report;
  report.tokens_per_step = tokens_per_step;
  for (TaskFamily family : {TaskFamily::dag_reach, TaskFamily::mod_chain}) {
    long long cot_total = 0;
    int count = 0;
    for (const auto& x : testset) {
      if (x.family != family) continue;
      x.validate();
      // steps rendered at k tokens each, plus one answer token
      cot_total += static_cast<long long>(tokens_per_step) * x.n_steps() + 1;
      count += 1;
    }
    if (count == 0) continue;
    TokenReportRow row;
    row.family = to_string(family);
    row.instances = count;
    row.mean_cot_tokens = static_cast<double>(cot_total) / count;
    row.mean_latent_text_tokens = 1.0;  // the answer; latent steps emit no text
    row.latent_markers_per_query = static_cast<double>(cfg.steps_T);
    row.reduction_pct = row.mean_cot_tokens > row.mean_latent_text_tokens
                            ? 100.0 * (1.0 - row.mean_latent_text_tokens / row.mean_cot_tokens)
                            : 0.0;
    report.rows.push_back(row);
  }
  return report;
}

namespace {
const std::vector<std::string> kTokenHeader = {"family",
                                               "instances",
                                               "mean_cot_tokens",
                                               "mean_latent_text_tokens",
                                               "latent_markers_per_query",
                                               "reduction_pct"};
}

void write_token_csv(const TokenReport& r, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : r.rows)
    rows.push_back({row.family, std::to_string(row.instances), format_double(row.mean_cot_tokens),
                    format_double(row.mean_latent_text_tokens),
                    format_double(row.latent_markers_per_query), format_double(row.reduction_pct)});
  write_csv(path, kTokenHeader, rows);
}

TokenReport read_token_csv(const std::string& path) {
  TokenReport r;
  for (const auto& row : read_csv(path, kTokenHeader)) {
    if (row.size() != 6) throw std::runtime_error(path + ": malformed token row");
    TokenReportRow t;
    t.family = row[0];
    t.instances = std::stoi(row[1]);
    t.mean_cot_tokens = parse_double(row[2]);
    t.mean_latent_text_tokens = parse_double(row[3]);
    t.latent_markers_per_query = parse_double(row[4]);
    t.reduction_pct = parse_double(row[5]);
    r.rows.push_back(t);
  }
  return r;
}

std::vector<FlipCase> find_flip_cases(const std::vector<TaskInstance>& testset,
                                      const ArmProvider& arm, const RefinementConfig& cfg,
                                      uint64_t seed, size_t max_cases) {
  std::vector<FlipCase> cases;
  for (size_t i = 0; i < testset.size() && cases.size() < max_cases; ++i) {
    const auto bundle = arm.get(testset[i], seed);
    TraceRecord rec = trace_compare(testset[i], *bundle.model, &bundle.pair, cfg);
    if (rec.baseline_predicted != rec.gold && rec.refined_predicted == rec.gold)
      cases.push_back({i, std::move(rec)});
  }
  return cases;
}

CostReport run_cost_arms(const std::vector<TaskInstance>& trainset,
                         const std::vector<TaskInstance>& testset, const CostOptions& opt) {
  if (trainset.empty() || testset.empty()) throw ValidationError("run_cost_arms: empty dataset");
  opt.eval_cfg.validate();

  TrainConfig base_cfg = opt.base_train;
  if (std::find(base_cfg.checkpoint_epochs.begin(), base_cfg.checkpoint_epochs.end(),
                opt.bad_epoch) == base_cfg.checkpoint_epochs.end())
    base_cfg.checkpoint_epochs.push_back(opt.bad_epoch);

  CostReport report;
  const RefinementConfig plain_cfg = opt.eval_cfg.with_mode(RefineMode::none);

  auto t0 = std::chrono::steady_clock::now();
  TrainResult base = train_mlp(trainset, SupervisionFormat::latent_cot, base_cfg);
  const double base_train_seconds = seconds_since(t0);

  const MlpModel* bad_snapshot = nullptr;
  for (const auto& s : base.snapshots)
    if (s.epoch == opt.bad_epoch) bad_snapshot = &s.model;
  if (!bad_snapshot) throw ConfigError("run_cost_arms: missing bad-epoch snapshot");
  CheckpointPair pair;
  pair.good = std::make_shared<MlpModel>(base.model);
  pair.bad = std::make_shared<MlpModel>(*bad_snapshot);

  // arm 1: plain model, plain inference
  t0 = std::chrono::steady_clock::now();
  const EvalSummary base_plain = evaluate_accuracy(testset, base.model, nullptr, plain_cfg);
  report.arms.push_back({"baseline", base_plain.accuracy_pct(), base_train_seconds,
                         seconds_since(t0), current_peak_rss_kb()});

  // arm 2: plain model, refined inference; trains nothing, writes nothing
  t0 = std::chrono::steady_clock::now();
  const EvalSummary infer_refined = evaluate_accuracy(testset, base.model, &pair, opt.eval_cfg);
  report.arms.push_back(
      {"infer_refine", infer_refined.accuracy_pct(), 0.0, seconds_since(t0), current_peak_rss_kb()});

  // arms 3 and 4: continue training with refinement unrolled
  TrainConfig cont_cfg = base_cfg;
  cont_cfg.epochs = opt.extra_epochs;
  cont_cfg.checkpoint_epochs.clear();
  cont_cfg.refine_during_training = true;
  cont_cfg.train_refine = opt.eval_cfg;
  cont_cfg.snapshot_dir.reset();
  t0 = std::chrono::steady_clock::now();
  TrainResult continued = train_mlp(trainset, SupervisionFormat::latent_cot, cont_cfg, &pair,
                                    &base.model);
  const double cont_train_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const EvalSummary cont_plain = evaluate_accuracy(testset, continued.model, nullptr, plain_cfg);
  report.arms.push_back({"train_refine", cont_plain.accuracy_pct(),
                         base_train_seconds + cont_train_seconds, seconds_since(t0),
                         current_peak_rss_kb()});

  t0 = std::chrono::steady_clock::now();
  const EvalSummary cont_refined = evaluate_accuracy(testset, continued.model, &pair, opt.eval_cfg);
  report.arms.push_back({"both_refine", cont_refined.accuracy_pct(),
                         base_train_seconds + cont_train_seconds, seconds_since(t0),
                         current_peak_rss_kb()});
  return report;
}

void write_cost_csv(const CostReport& r, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& arm : r.arms)
    rows.push_back({arm.name, format_double(arm.accuracy_pct), format_double(arm.train_seconds),
                    format_double(arm.eval_seconds), std::to_string(arm.peak_rss_kb)});
  write_csv(path, {"arm", "accuracy_pct", "train_seconds", "eval_seconds", "peak_rss_kb"}, rows);
}

double calibrate_oracle_sigma(const std::vector<TaskInstance>& testset,
                              std::shared_ptr<const Featurizer> featurizer,
                              const RefinementConfig& plain_cfg, double pull, uint64_t arm_seed,
                              uint64_t eval_seed, double target_lo, double target_hi) {
  if (!(target_lo < target_hi)) throw ConfigError("calibrate_oracle_sigma: bad target band");
  const RefinementConfig cfg = plain_cfg.with_mode(RefineMode::none);
  double lo = 1e-3, hi = 8.0;

  auto accuracy_at = [&](double sigma) {
    OracleArmOptions o;
    o.pull = pull;
    o.sigma = sigma;
    o.arm_seed = arm_seed;
    OracleArm arm(featurizer, o);
    return evaluate_arm(testset, arm, cfg, eval_seed).accuracy_pct;
  };

  // accuracy decreases with noise: geometric bisection until it lands in the
  // band
  if (accuracy_at(hi) > target_hi)
    throw ConfigError("calibrate_oracle_sigma: accuracy stays above the band");
  if (accuracy_at(lo) < target_lo)
    throw ConfigError("calibrate_oracle_sigma: accuracy stays below the band");
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = std::sqrt(lo * hi);
    const double acc = accuracy_at(mid);
    if (acc > target_hi) {
      lo = mid;
    } else if (acc < target_lo) {
      hi = mid;
    } else {
      return mid;
    }
  }
  throw ConfigError("calibrate_oracle_sigma: no sigma found in band");
}

}  // namespace latref
