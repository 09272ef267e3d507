#include <doctest.h>

#include <cmath>

#include "latref/dynamics.hpp"
#include "support/util.hpp"

using namespace latref;
using namespace latref::testing;

namespace {

MlpModel zero_mlp(int d, int H, int F, int C, std::vector<double> b2 = {}) {
  MlpParams p;
  p.W1 = Matrix::zeros(H, d);
  p.b1.assign(H, 0.0);
  p.W2 = Matrix::zeros(d, H);
  p.b2 = b2.empty() ? std::vector<double>(d, 0.0) : std::move(b2);
  p.decode_W = Matrix::zeros(C, d);
  p.decode_b.assign(C, 0.0);
  p.encoder_W = Matrix::zeros(d, F);
  return MlpModel(std::move(p), default_choice_labels(C));
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("zero-weight MLP steps to its output bias") {
  const MlpModel m = zero_mlp(3, 4, 5, 5, {0.5, -1.0, 2.0});
  const LatentState out = model_step(m, LatentState({9.0, -3.0, 7.0}));
  CHECK(out == LatentState({0.5, -1.0, 2.0}));
}

TEST_CASE("MLP step matches the closed form on a 1x1 model") {
  MlpParams p;
  p.W1 = Matrix(1, 1);
  p.W1.at(0, 0) = 2.0;
  p.b1 = {0.25};
  p.W2 = Matrix(1, 1);
  p.W2.at(0, 0) = -1.5;
  p.b2 = {0.75};
  p.decode_W = Matrix(2, 1);
  p.decode_b = {0.0, 0.0};
  p.encoder_W = Matrix(1, 1);
  const MlpModel m(std::move(p), default_choice_labels(2));
  const double h = 0.3;
  const double want = -1.5 * std::tanh(2.0 * h + 0.25) + 0.75;
  CHECK(model_step(m, LatentState({h}))[0] == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("model_step rejects dimension mismatches") {
  const MlpModel m = zero_mlp(3, 4, 5, 5);
  CHECK_THROWS_AS(model_step(m, LatentState({1.0, 2.0})), DimensionMismatch);
  CHECK_THROWS_AS(decode_answer(m, LatentState({1.0, 2.0})), DimensionMismatch);
}

TEST_CASE("zero decode head gives the uniform distribution") {
  const MlpModel m = zero_mlp(3, 4, 5, 5);
  const auto d = decode_answer(m, LatentState({1.0, 2.0, 3.0}));
  for (double p : d.probabilities) CHECK(p == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("encode applies the fixed featurizer") {
  const MlpModel m = MlpModel::init_random(4, 6, 8, 5, 99);
  std::vector<double> feat(8, 0.0);
  feat[2] = 1.0;
  const LatentState h = m.encode_features(feat);
  for (int i = 0; i < 4; ++i) CHECK(h[i] == m.params().encoder_W.at(i, 2));
  CHECK_THROWS_AS(m.encode_features(std::vector<double>(7, 0.0)), DimensionMismatch);
}

TEST_CASE("models are deterministic call to call") {
  const MlpModel m = MlpModel::init_random(6, 8, 10, 5, 3);
  Rng rng(4);
  const LatentState h = random_state(6, rng);
  CHECK(states_equal_exact(m.step(h), m.step(h)));
  CHECK(decode_answer(m, h).probabilities == decode_answer(m, h).probabilities);
}

TEST_CASE("oracle with full pull jumps to the gold step") {
  // a single gold step: every state is pulled all the way onto it
  const TaskInstance x = tiny_instance(2, 0, 0, 1, 1);
  Matrix w(2, 2);
  w.at(0, 0) = 2.0;
  w.at(1, 1) = 3.0;
  const Featurizer feat(std::move(w));
  OracleModel::Options opt;
  opt.pull = 1.0;
  const OracleModel m(x, feat, opt);
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    const LatentState h = random_state(2, rng, 2.0);
    CHECK(states_equal_exact(m.step(h), LatentState({2.0, 0.0})));
  }
}

TEST_CASE("oracle with pull 0.5 moves halfway") {
  const TaskInstance x = tiny_instance(2, 0, 0, 1, 1);
  Matrix w(2, 2);
  w.at(0, 0) = 2.0;
  w.at(1, 1) = 3.0;
  const Featurizer feat(std::move(w));
  OracleModel::Options opt;
  opt.pull = 0.5;
  const OracleModel m(x, feat, opt);
  const LatentState out = m.step(LatentState({0.0, 0.0}));
  CHECK(out == LatentState({1.0, 0.0}));
}

TEST_CASE("oracle contraction toward its target") {
  ModChainParams p;
  p.count = 5;
  p.chain_len = 3;
  p.modulus = 11;
  p.seed = 17;
  const auto instances = gen_mod_chain(p);
  auto feat = Featurizer(8, instances.front().feature_width(), 7);
  OracleModel::Options opt;
  opt.pull = 0.3;
  Rng rng(18);
  for (const auto& x : instances) {
    const OracleModel m(x, feat, opt);
    for (int trial = 0; trial < 20; ++trial) {
      const LatentState h = random_state(8, rng);
      const LatentState g = m.target_for(h);
      const double lhs = distance(m.step(h), g);
      const double rhs = (1.0 - opt.pull) * distance(h, g);
      CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, rhs));
    }
  }
}

TEST_CASE("oracle decodes the gold label at the gold terminal state") {
  ModChainParams p;
  p.count = 50;
  p.chain_len = 3;
  p.modulus = 11;
  p.seed = 19;
  const auto instances = gen_mod_chain(p);
  auto feat = Featurizer(8, instances.front().feature_width(), 7);
  for (const auto& x : instances) {
    const OracleModel m(x, feat, {});
    const LatentState terminal = m.anchors().back();
    CHECK(decode_answer(m, terminal).predicted_label() == x.gold);
  }
}

TEST_CASE("oracle pseudo-noise is a pure function of the state") {
  const TaskInstance x = tiny_instance(2, 0, 0, 1, 1);
  const Featurizer feat(2, 2, 11);
  OracleModel::Options opt;
  opt.sigma = 0.4;
  opt.noise_seed = 123;
  const OracleModel m(x, feat, opt);
  const LatentState h({0.3, -0.8});
  CHECK(states_equal_exact(m.step(h), m.step(h)));
  // a different state draws different noise
  const LatentState h2({0.3, -0.8000000001});
  CHECK_FALSE(states_equal_exact(m.step(h), m.step(h2)));
  // a different seed draws different noise
  OracleModel::Options opt2 = opt;
  opt2.noise_seed = 124;
  const OracleModel m2(x, feat, opt2);
  CHECK_FALSE(states_equal_exact(m.step(h), m2.step(h)));
}

TEST_CASE("anti-oracle moves away from the target") {
  const TaskInstance x = tiny_instance(2, 0, 0, 1, 1);
  Matrix w(2, 2);
  w.at(0, 0) = 2.0;
  w.at(1, 1) = 3.0;
  const Featurizer feat(std::move(w));
  OracleModel::Options opt;
  opt.pull = 0.5;
  opt.repel = true;
  const OracleModel m(x, feat, opt);
  const LatentState h({1.0, 1.0});
  const LatentState g = m.target_for(h);
  CHECK(distance(m.step(h), g) > distance(h, g));
}

TEST_CASE("checkpoint pair validation") {
  CheckpointPair pair;
  CHECK_THROWS_AS(pair.validate(3), ValidationError);
  pair.good = std::make_shared<MlpModel>(zero_mlp(3, 2, 4, 5));
  pair.bad = std::make_shared<MlpModel>(zero_mlp(3, 2, 4, 5));
  CHECK_NOTHROW(pair.validate(3));
  CHECK_THROWS_AS(pair.validate(4), DimensionMismatch);
}

TEST_CASE("mlp params validation") {
  MlpParams p;
  p.W1 = Matrix::zeros(2, 3);
  p.b1.assign(2, 0.0);
  p.W2 = Matrix::zeros(3, 2);
  p.b2.assign(3, 0.0);
  p.decode_W = Matrix::zeros(5, 3);
  p.decode_b.assign(5, 0.0);
  p.encoder_W = Matrix::zeros(3, 7);
  CHECK_NOTHROW(p.validate());
  p.b1.pop_back();
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.b1.assign(2, 0.0);
  p.W2.at(0, 0) = std::nan("");
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

}  // TEST_SUITE
