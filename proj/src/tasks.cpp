#include "latref/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "latref/rng.hpp"
#include <json.hpp>

namespace latref {

using nlohmann::json;

const char* to_string(TaskFamily f) {
  return f == TaskFamily::dag_reach ? "dag_reach" : "mod_chain";
}

TaskFamily parse_family(const std::string& s) {
  if (s == "dag_reach") return TaskFamily::dag_reach;
  if (s == "mod_chain") return TaskFamily::mod_chain;
  throw ConfigError("unknown task family '" + s + "'");
}

const ChoiceOption& TaskInstance::gold_choice() const {
  for (const auto& c : choices)
    if (c.label == gold) return c;
  throw ValidationError("instance " + id + ": gold label '" + gold + "' not among choices");
}

std::vector<std::string> TaskInstance::choice_labels() const {
  std::vector<std::string> out;
  out.reserve(choices.size());
  for (const auto& c : choices) out.push_back(c.label);
  return out;
}

void TaskInstance::validate() const {
  if (id.empty()) throw ValidationError("instance with empty id");
  if (question_features.empty()) throw ValidationError(id + ": empty question features");
  for (double x : question_features)
    if (!std::isfinite(x)) throw ValidationError(id + ": non-finite question feature");
  if (steps.empty()) throw ValidationError(id + ": no gold steps");
  for (const auto& s : steps) {
    if (static_cast<int>(s.size()) != feature_width())
      throw ValidationError(id + ": step feature width " + std::to_string(s.size()) +
                            " != question width " + std::to_string(feature_width()));
    for (double x : s)
      if (!std::isfinite(x)) throw ValidationError(id + ": non-finite step feature");
  }
  if (choices.size() < 2) throw ValidationError(id + ": needs at least 2 choices");
  std::set<std::string> labels;
  std::set<long long> values;
  for (const auto& c : choices) {
    if (!labels.insert(c.label).second) throw ValidationError(id + ": duplicate choice label");
    if (!values.insert(c.value).second) throw ValidationError(id + ": duplicate choice value");
  }
  if (!labels.count(gold)) throw ValidationError(id + ": gold label not among choices");
}

bool TaskInstance::operator==(const TaskInstance& o) const {
  return id == o.id && family == o.family && question_features == o.question_features &&
         choices == o.choices && gold == o.gold && steps == o.steps && meta == o.meta;
}

namespace {

void l2_normalize(std::vector<double>& v) {
  double n = l2_norm(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
}

std::vector<double> one_hot_padded(int index, int hot_width, int total_width) {
  std::vector<double> v(static_cast<size_t>(total_width), 0.0);
  (void)hot_width;
  v[static_cast<size_t>(index)] = 1.0;
  return v;
}

}  // namespace

// Layout: [current-node one-hot (N) | slot membership of the current node
// (C) | choice panel (C x N) | adjacency (N x N)]. Question features place
// the root as the current node; step features place the path node reached at
// that step. The panel and adjacency context rides along in every state (as
// a hidden state would carry its question), and segments are energy-balanced
// so none of them vanishes from the latent supervision signal.
int dag_reach_feature_width(int nodes, int n_choices) {
  return nodes + n_choices + n_choices * nodes + nodes * nodes;
}

namespace {

// One reasoning-state feature vector: "the walk is now at node cur".
std::vector<double> dag_state_features(int nodes, int n_choices,
                                       const std::vector<long long>& slot_nodes,
                                       const std::vector<std::pair<int, int>>& edges, int cur) {
  const int F = dag_reach_feature_width(nodes, n_choices);
  std::vector<double> s(static_cast<size_t>(F), 0.0);
  s[static_cast<size_t>(cur)] = 1.0;
  for (int c = 0; c < n_choices; ++c)
    if (slot_nodes[static_cast<size_t>(c)] == cur) s[static_cast<size_t>(nodes + c)] = 1.0;
  const double panel_scale = 1.0 / std::sqrt(static_cast<double>(n_choices));
  const int panel_base = nodes + n_choices;
  for (int c = 0; c < n_choices; ++c)
    s[static_cast<size_t>(panel_base + c * nodes + slot_nodes[static_cast<size_t>(c)])] = panel_scale;
  const double adj_scale = 1.0 / std::sqrt(static_cast<double>(edges.size()));
  const int adj_base = panel_base + n_choices * nodes;
  for (const auto& [u, v] : edges) s[static_cast<size_t>(adj_base + u * nodes + v)] = adj_scale;
  return s;
}

}  // namespace

// A corpus shares one skeleton DAG drawn from the seed: a spine chain (the
// walkable backbone) plus sink pool nodes receiving distractor branches.
// Each instance roots the question at a spine position; the gold path runs
// depth hops down the spine (unique by construction, since spine nodes keep
// in-degree 1 and pool nodes are sinks), and decoys are drawn from nodes
// provably unreachable from the root: earlier spine nodes and pool nodes
// whose feeders all sit before the root.
std::vector<TaskInstance> gen_dag_reach(const DagReachParams& p) {
  if (p.count < 1) throw InfeasibleTask("gen_dag_reach: count must be >= 1");
  if (p.depth < 1) throw InfeasibleTask("gen_dag_reach: depth must be >= 1");
  if (p.nodes < p.depth + 2) throw InfeasibleTask("gen_dag_reach: need nodes >= depth + 2");
  if (p.n_choices < 2 || p.n_choices > 26)
    throw InfeasibleTask("gen_dag_reach: n_choices must be in [2,26]");
  if (p.distractors < 1) throw InfeasibleTask("gen_dag_reach: need at least one distractor edge");

  const int decoy_count = p.n_choices - 1;
  // spine must host the root ladder: decoy_count earlier nodes plus the
  // depth-long gold path
  const int min_spine = p.depth + p.n_choices;
  if (p.nodes - 2 < min_spine)
    throw InfeasibleTask("gen_dag_reach: need nodes >= " + std::to_string(min_spine + 2) +
                         " for depth " + std::to_string(p.depth) + " with " +
                         std::to_string(p.n_choices) + " choices");
  const int pool_count = std::min(std::max(2, p.nodes / 4), p.nodes - min_spine);
  const int spine_count = p.nodes - pool_count;
  const int last = spine_count - 1;  // spine positions 0..last

  Rng corpus_rng(p.seed);
  std::vector<int> perm(static_cast<size_t>(p.nodes));
  for (int i = 0; i < p.nodes; ++i) perm[static_cast<size_t>(i)] = i;
  corpus_rng.shuffle(perm);
  const std::vector<int> spine(perm.begin(), perm.begin() + spine_count);
  const std::vector<int> pool(perm.begin() + spine_count, perm.end());

  std::set<std::pair<int, int>> edge_set;
  std::vector<std::pair<int, int>> edges;
  auto add_edge = [&](int u, int v) {
    if (edge_set.insert({u, v}).second) edges.push_back({u, v});
  };
  for (int i = 0; i < last; ++i)
    add_edge(spine[static_cast<size_t>(i)], spine[static_cast<size_t>(i + 1)]);

  // distractor branches: spine -> pool sinks
  std::vector<int> max_feeder(static_cast<size_t>(pool_count), -1);  // spine index feeding each pool node
  for (int placed = 0; placed < p.distractors; ++placed) {
    std::vector<std::pair<int, int>> candidates;  // (spine index, pool index)
    for (int si = 0; si <= last; ++si)
      for (int pi = 0; pi < pool_count; ++pi)
        if (!edge_set.count({spine[static_cast<size_t>(si)], pool[static_cast<size_t>(pi)]}))
          candidates.push_back({si, pi});
    if (candidates.empty())
      throw InfeasibleTask("gen_dag_reach: cannot place " + std::to_string(p.distractors) +
                           " distractor edges with nodes=" + std::to_string(p.nodes));
    const auto [si, pi] =
        candidates[static_cast<size_t>(corpus_rng.uniform_int(static_cast<int>(candidates.size())))];
    add_edge(spine[static_cast<size_t>(si)], pool[static_cast<size_t>(pi)]);
    max_feeder[static_cast<size_t>(pi)] = std::max(max_feeder[static_cast<size_t>(pi)], si);
  }

  const int root_lo = decoy_count;        // enough unreachable spine nodes before the root
  const int root_hi = last - p.depth;     // gold path must fit
  if (root_hi < root_lo)
    throw InfeasibleTask("gen_dag_reach: spine too short for the root ladder");

  const auto labels = default_choice_labels(p.n_choices);
  std::vector<TaskInstance> out;
  out.reserve(static_cast<size_t>(p.count));
  for (int k = 0; k < p.count; ++k) {
    Rng rng = corpus_rng.fork(static_cast<uint64_t>(k));
    const int root_idx = root_lo + rng.uniform_int(root_hi - root_lo + 1);
    const int root = spine[static_cast<size_t>(root_idx)];
    std::vector<int> path;
    for (int t = 1; t <= p.depth; ++t) path.push_back(spine[static_cast<size_t>(root_idx + t)]);
    const int target = path.back();

    // decoys: unreachable from the root
    std::vector<int> decoy_pool;
    for (int j = 0; j < root_idx; ++j) decoy_pool.push_back(spine[static_cast<size_t>(j)]);
    for (int pi = 0; pi < pool_count; ++pi)
      if (max_feeder[static_cast<size_t>(pi)] < root_idx) decoy_pool.push_back(pool[static_cast<size_t>(pi)]);
    rng.shuffle(decoy_pool);
    std::vector<int> choice_nodes;
    choice_nodes.push_back(target);
    for (int c = 0; c < decoy_count; ++c) choice_nodes.push_back(decoy_pool[static_cast<size_t>(c)]);
    rng.shuffle(choice_nodes);

    TaskInstance inst;
    inst.id = "dag-" + std::to_string(p.seed) + "-" + std::to_string(k);
    inst.family = TaskFamily::dag_reach;
    std::vector<long long> slot_nodes;
    for (int c = 0; c < p.n_choices; ++c) {
      inst.choices.push_back({labels[static_cast<size_t>(c)], choice_nodes[static_cast<size_t>(c)]});
      slot_nodes.push_back(choice_nodes[static_cast<size_t>(c)]);
      if (choice_nodes[static_cast<size_t>(c)] == target) inst.gold = labels[static_cast<size_t>(c)];
    }

    inst.question_features = dag_state_features(p.nodes, p.n_choices, slot_nodes, edges, root);
    for (int v : path)
      inst.steps.push_back(dag_state_features(p.nodes, p.n_choices, slot_nodes, edges, v));

    DagReachMeta meta;
    meta.nodes = p.nodes;
    meta.root = root;
    meta.edges = edges;
    meta.gold_path = path;
    inst.meta = std::move(meta);

    inst.validate();
    out.push_back(std::move(inst));
  }
  return out;
}

int mod_chain_feature_width(int chain_len, long long modulus, int n_choices) {
  const int m = static_cast<int>(modulus);
  return m + chain_len * (2 + m) + n_choices * m;
}

std::vector<TaskInstance> gen_mod_chain(const ModChainParams& p) {
  if (p.count < 1) throw InfeasibleTask("gen_mod_chain: count must be >= 1");
  if (p.chain_len < 1) throw InfeasibleTask("gen_mod_chain: chain_len must be >= 1");
  if (p.modulus < 5) throw InfeasibleTask("gen_mod_chain: modulus must be >= 5");
  if (p.n_choices < 2 || p.n_choices > 26)
    throw InfeasibleTask("gen_mod_chain: n_choices must be in [2,26]");
  if (p.modulus < p.n_choices)
    throw InfeasibleTask("gen_mod_chain: modulus too small for " + std::to_string(p.n_choices) +
                         " distinct choices");

  const int m = static_cast<int>(p.modulus);
  const int F = mod_chain_feature_width(p.chain_len, p.modulus, p.n_choices);
  const auto labels = default_choice_labels(p.n_choices);

  std::vector<TaskInstance> out;
  out.reserve(static_cast<size_t>(p.count));
  Rng corpus_rng(p.seed);
  for (int k = 0; k < p.count; ++k) {
    Rng rng = corpus_rng.fork(static_cast<uint64_t>(k));

    ModChainMeta meta;
    meta.modulus = p.modulus;
    meta.start = rng.uniform_int(m);
    std::vector<long long> values;
    long long v = meta.start;
    for (int i = 0; i < p.chain_len; ++i) {
      ModChainOp op;
      if (rng.uniform01() < 0.5) {
        op.op = '+';
        op.operand = 1 + rng.uniform_int(m - 1);
        v = (v + op.operand) % p.modulus;
      } else {
        op.op = '*';
        op.operand = 2 + rng.uniform_int(m - 2);
        v = (v * op.operand) % p.modulus;
      }
      meta.ops.push_back(op);
      values.push_back(v);
    }
    const long long gold_value = values.back();

    // Decoys: distinct residues != gold value.
    std::vector<long long> residues;
    for (long long r = 0; r < p.modulus; ++r)
      if (r != gold_value) residues.push_back(r);
    rng.shuffle(residues);
    std::vector<long long> choice_values;
    choice_values.push_back(gold_value);
    for (int c = 0; c < p.n_choices - 1; ++c) choice_values.push_back(residues[static_cast<size_t>(c)]);
    rng.shuffle(choice_values);

    TaskInstance inst;
    inst.id = "chain-" + std::to_string(p.seed) + "-" + std::to_string(k);
    inst.family = TaskFamily::mod_chain;
    for (int c = 0; c < p.n_choices; ++c) {
      inst.choices.push_back({labels[static_cast<size_t>(c)], choice_values[static_cast<size_t>(c)]});
      if (choice_values[static_cast<size_t>(c)] == gold_value) inst.gold = labels[static_cast<size_t>(c)];
    }

    // Features: [start one-hot | per-op (type pair, operand one-hot) | choice
    // slots one-hot], unit norm.
    std::vector<double> q(static_cast<size_t>(F), 0.0);
    q[static_cast<size_t>(meta.start)] = 1.0;
    for (int i = 0; i < p.chain_len; ++i) {
      const int base = m + i * (2 + m);
      const auto& op = meta.ops[static_cast<size_t>(i)];
      q[static_cast<size_t>(base + (op.op == '+' ? 0 : 1))] = 1.0;
      q[static_cast<size_t>(base + 2 + op.operand)] = 1.0;
    }
    const int choice_base = m + p.chain_len * (2 + m);
    for (int c = 0; c < p.n_choices; ++c)
      q[static_cast<size_t>(choice_base + c * m + choice_values[static_cast<size_t>(c)])] = 1.0;
    l2_normalize(q);
    inst.question_features = std::move(q);

    for (long long val : values) inst.steps.push_back(one_hot_padded(static_cast<int>(val), m, F));
    inst.meta = std::move(meta);

    inst.validate();
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<double> choice_feature_vector(const TaskInstance& instance, int slot_index) {
  instance.validate();
  if (slot_index < 0 || slot_index >= static_cast<int>(instance.choices.size()))
    throw ValidationError(instance.id + ": choice slot out of range");
  const long long value = instance.choices[static_cast<size_t>(slot_index)].value;
  if (instance.family == TaskFamily::dag_reach) {
    const auto& m = std::get<DagReachMeta>(instance.meta);
    std::vector<long long> slot_nodes;
    for (const auto& c : instance.choices) slot_nodes.push_back(c.value);
    return dag_state_features(m.nodes, static_cast<int>(instance.choices.size()), slot_nodes,
                              m.edges, static_cast<int>(value));
  }
  const int F = instance.feature_width();
  if (value < 0 || value >= F) throw ValidationError(instance.id + ": choice value out of range");
  std::vector<double> v(static_cast<size_t>(F), 0.0);
  v[static_cast<size_t>(value)] = 1.0;
  return v;
}

namespace {

constexpr int kSchemaVersion = 1;

json instance_to_json(const TaskInstance& inst) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["id"] = inst.id;
  j["family"] = to_string(inst.family);
  j["question_features"] = inst.question_features;
  json choices = json::array();
  for (const auto& c : inst.choices) choices.push_back({{"label", c.label}, {"value", c.value}});
  j["choices"] = choices;
  j["gold"] = inst.gold;
  j["steps"] = inst.steps;
  if (inst.family == TaskFamily::dag_reach) {
    const auto& m = std::get<DagReachMeta>(inst.meta);
    json edges = json::array();
    for (const auto& [u, v] : m.edges) edges.push_back(json::array({u, v}));
    j["meta"] = {{"nodes", m.nodes}, {"root", m.root}, {"edges", edges}, {"gold_path", m.gold_path}};
  } else {
    const auto& m = std::get<ModChainMeta>(inst.meta);
    json ops = json::array();
    for (const auto& op : m.ops) ops.push_back(json::array({std::string(1, op.op), op.operand}));
    j["meta"] = {{"start", m.start}, {"modulus", m.modulus}, {"ops", ops}};
  }
  return j;
}

TaskInstance instance_from_json(const json& j) {
  if (!j.is_object()) throw std::runtime_error("record is not an object");
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
    throw std::runtime_error("missing schema_version");
  if (j["schema_version"].get<int>() != kSchemaVersion)
    throw std::runtime_error("unsupported schema_version " + j["schema_version"].dump());
  for (const char* field : {"id", "family", "question_features", "choices", "gold", "steps", "meta"})
    if (!j.contains(field)) throw std::runtime_error(std::string("missing field '") + field + "'");

  TaskInstance inst;
  inst.id = j["id"].get<std::string>();
  inst.family = parse_family(j["family"].get<std::string>());
  inst.question_features = j["question_features"].get<std::vector<double>>();
  for (const auto& c : j["choices"])
    inst.choices.push_back({c.at("label").get<std::string>(), c.at("value").get<long long>()});
  inst.gold = j["gold"].get<std::string>();
  inst.steps = j["steps"].get<std::vector<std::vector<double>>>();
  const auto& mj = j["meta"];
  if (inst.family == TaskFamily::dag_reach) {
    DagReachMeta m;
    m.nodes = mj.at("nodes").get<int>();
    m.root = mj.at("root").get<int>();
    for (const auto& e : mj.at("edges")) m.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    m.gold_path = mj.at("gold_path").get<std::vector<int>>();
    inst.meta = std::move(m);
  } else {
    ModChainMeta m;
    m.start = mj.at("start").get<long long>();
    m.modulus = mj.at("modulus").get<long long>();
    for (const auto& o : mj.at("ops")) {
      const auto s = o.at(0).get<std::string>();
      if (s != "+" && s != "*") throw std::runtime_error("bad op '" + s + "'");
      m.ops.push_back({s[0], o.at(1).get<long long>()});
    }
    inst.meta = std::move(m);
  }
  inst.validate();
  return inst;
}

}  // namespace

void write_jsonl(const std::vector<TaskInstance>& instances, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw JsonlError("cannot open '" + path + "' for writing");
  for (const auto& inst : instances) out << instance_to_json(inst).dump() << '\n';
  if (!out) throw JsonlError("write to '" + path + "' failed");
}

std::vector<TaskInstance> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw JsonlError("cannot open '" + path + "'");
  std::vector<TaskInstance> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(instance_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw JsonlError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

const char* to_string(SupervisionFormat f) {
  switch (f) {
    case SupervisionFormat::no_cot: return "no_cot";
    case SupervisionFormat::cot: return "cot";
    case SupervisionFormat::latent_cot: return "latent_cot";
  }
  return "?";
}

SupervisionFormat parse_format(const std::string& s) {
  if (s == "no_cot") return SupervisionFormat::no_cot;
  if (s == "cot") return SupervisionFormat::cot;
  if (s == "latent_cot") return SupervisionFormat::latent_cot;
  throw ConfigError("unknown supervision format '" + s + "'");
}

TrainingExample supervision_view(const TaskInstance& instance, SupervisionFormat format) {
  instance.validate();
  TrainingExample ex;
  ex.input_features = instance.question_features;
  ex.answer = instance.gold;
  switch (format) {
    case SupervisionFormat::no_cot:
      break;
    case SupervisionFormat::cot: {
      // Steps rendered as an explicit output sequence, answer index appended.
      for (const auto& s : instance.steps)
        ex.cot_sequence.insert(ex.cot_sequence.end(), s.begin(), s.end());
      int gold_index = 0;
      for (int i = 0; i < static_cast<int>(instance.choices.size()); ++i)
        if (instance.choices[static_cast<size_t>(i)].label == instance.gold) gold_index = i;
      ex.cot_sequence.push_back(static_cast<double>(gold_index));
      break;
    }
    case SupervisionFormat::latent_cot:
      ex.step_targets = instance.steps;
      break;
  }
  return ex;
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

Split split_of(uint64_t corpus_seed, const std::string& id) {
  const uint64_t h = hash_mix(corpus_seed, fnv1a64(id));
  const uint64_t bucket = h % 100;
  if (bucket < 80) return Split::train;
  if (bucket < 90) return Split::validation;
  return Split::test;
}

std::vector<TaskInstance> filter_split(const std::vector<TaskInstance>& all, uint64_t corpus_seed,
                                       Split which) {
  std::vector<TaskInstance> out;
  for (const auto& inst : all)
    if (split_of(corpus_seed, inst.id) == which) out.push_back(inst);
  return out;
}

}  // namespace latref
