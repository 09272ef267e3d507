#pragma once

// Synthetic multi-step reasoning tasks with gold intermediate steps, plus
// supervision views and JSONL persistence.
//
// Two families:
//   dag_reach  "which candidate node can A reach?" over a rooted DAG with a
//              unique gold path and distractor branches.
//   mod_chain  "start value, then a chain of +k / *k operations mod m";
//              intermediate values are the gold steps.
//
// Question features and step features share one fixed width per corpus so a
// single linear featurizer can embed both into the model's latent space.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "latref/core.hpp"

namespace latref {

struct InfeasibleTask : std::invalid_argument {
  explicit InfeasibleTask(const std::string& m) : std::invalid_argument(m) {}
};

// Malformed dataset file; message names the offending line.
struct JsonlError : std::runtime_error {
  explicit JsonlError(const std::string& m) : std::runtime_error(m) {}
};

enum class TaskFamily { dag_reach, mod_chain };

const char* to_string(TaskFamily f);
TaskFamily parse_family(const std::string& s);

struct ChoiceOption {
  std::string label;  // "a".."e"
  long long value;    // node id (dag_reach) or residue value (mod_chain)
  bool operator==(const ChoiceOption& o) const { return label == o.label && value == o.value; }
};

// Raw problem statement kept alongside the feature encoding so independent
// verifiers can replay the task without decoding features.
struct DagReachMeta {
  int nodes = 0;
  int root = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> gold_path;  // nodes after the root, length == depth
  bool operator==(const DagReachMeta& o) const {
    return nodes == o.nodes && root == o.root && edges == o.edges && gold_path == o.gold_path;
  }
};

struct ModChainOp {
  char op = '+';  // '+' or '*'
  long long operand = 0;
  bool operator==(const ModChainOp& o) const { return op == o.op && operand == o.operand; }
};

struct ModChainMeta {
  long long start = 0;
  long long modulus = 0;
  std::vector<ModChainOp> ops;
  bool operator==(const ModChainMeta& o) const {
    return start == o.start && modulus == o.modulus && ops == o.ops;
  }
};

struct TaskInstance {
  std::string id;
  TaskFamily family = TaskFamily::dag_reach;
  std::vector<double> question_features;
  std::vector<ChoiceOption> choices;
  std::string gold;                        // gold choice label
  std::vector<std::vector<double>> steps;  // gold step feature vectors, length n >= 1
  std::variant<DagReachMeta, ModChainMeta> meta;

  int feature_width() const { return static_cast<int>(question_features.size()); }
  int n_steps() const { return static_cast<int>(steps.size()); }
  const ChoiceOption& gold_choice() const;
  std::vector<std::string> choice_labels() const;

  // Structural invariants: gold label present, n >= 1, consistent feature
  // widths, >= 2 distinct choices. Throws ValidationError.
  void validate() const;

  bool operator==(const TaskInstance& o) const;
};

struct DagReachParams {
  int count = 1;
  int nodes = 10;
  int depth = 3;
  int distractors = 4;  // edges branching off the reachable side
  int n_choices = 5;
  uint64_t seed = 0;
};

// Generated instances are a pure function of the params; instance k is drawn
// from a sub-stream of (seed, k), so any partition of the count range
// regenerates identical instances.
std::vector<TaskInstance> gen_dag_reach(const DagReachParams& p);

struct ModChainParams {
  int count = 1;
  int chain_len = 3;
  long long modulus = 23;
  int n_choices = 5;
  uint64_t seed = 0;
};

std::vector<TaskInstance> gen_mod_chain(const ModChainParams& p);

// Feature widths, exposed so featurizers can be sized without generating.
int dag_reach_feature_width(int nodes, int n_choices);
int mod_chain_feature_width(int chain_len, long long modulus, int n_choices);

// Feature-space encoding of "the reasoning concluded at choice slot c". For
// the gold slot this equals the final gold step's feature vector, which is
// what distance-scoring decode heads rely on.
std::vector<double> choice_feature_vector(const TaskInstance& instance, int slot_index);

// JSONL persistence, one instance per line, schema-versioned.
void write_jsonl(const std::vector<TaskInstance>& instances, const std::string& path);
std::vector<TaskInstance> read_jsonl(const std::string& path);

enum class SupervisionFormat { no_cot, cot, latent_cot };

const char* to_string(SupervisionFormat f);
SupervisionFormat parse_format(const std::string& s);

// One training example under a given supervision format.
//   no_cot      input -> answer only
//   cot         input -> flattened step features followed by the answer,
//               for step-emitting baselines
//   latent_cot  input -> answer, plus per-step feature targets for latent
//               supervision
struct TrainingExample {
  std::vector<double> input_features;
  std::string answer;
  std::vector<std::vector<double>> step_targets;  // latent_cot only
  std::vector<double> cot_sequence;               // cot only
};

TrainingExample supervision_view(const TaskInstance& instance, SupervisionFormat format);

enum class Split { train, validation, test };

const char* to_string(Split s);

// Deterministic 80/10/10 split membership from a hash of (corpus seed, id).
Split split_of(uint64_t corpus_seed, const std::string& id);

std::vector<TaskInstance> filter_split(const std::vector<TaskInstance>& all, uint64_t corpus_seed,
                                       Split which);

}  // namespace latref
