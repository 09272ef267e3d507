#include <doctest.h>

#include <cmath>

#include "latref/refine.hpp"
#include "support/finite_diff.hpp"
#include "support/util.hpp"

using namespace latref;
using namespace latref::testing;

namespace {

double objective(const LatentState& h, const LatentState& good, const LatentState& bad) {
  return mse(h, good) - mse(h, bad);
}

// identity dynamics with a uniform decode head, enough to drive
// refinement_round in isolation
class IdentityModel : public DynamicsModel {
 public:
  explicit IdentityModel(int d) : d_(d) {}
  int dim() const override { return d_; }
  int n_choices() const override { return 2; }
  LatentState step(const LatentState& h) const override { return h; }
  AnswerDistribution decode(const LatentState&) const override {
    return AnswerDistribution::from_logits(default_choice_labels(2), {0.0, 0.0});
  }
  LatentState encode(const TaskInstance&) const override { return LatentState::zeros(d_); }

 private:
  int d_;
};

}  // namespace

TEST_SUITE("refine") {

TEST_CASE("residual refinement worked values") {
  const LatentState prev({4, 0}), next({0, 4});
  CHECK(residual_refine(prev, next, 1.0) == prev);
  CHECK(residual_refine(prev, next, 0.0) == next);
  CHECK(residual_refine(prev, next, 0.5) == LatentState({2, 2}));
}

TEST_CASE("contrastive gradient worked values and finite differences") {
  SUBCASE("d = 2") {
    const LatentState h({0, 0}), good({2, 0}), bad({0, 2});
    const auto g = contrastive_gradient(h, good, bad);
    CHECK(g.values == std::vector<double>{-2.0, 2.0});
    const auto fd = fd_gradient([&](const LatentState& s) { return objective(s, good, bad); }, h);
    CHECK(vec_rel_err(g.values, fd) < 1e-6);
  }
  SUBCASE("good == bad cancels") {
    const LatentState h({1, 2, 3}), ref({4, 5, 6});
    const auto g = contrastive_gradient(h, ref, ref);
    CHECK(g.values == std::vector<double>{0.0, 0.0, 0.0});
  }
  SUBCASE("d = 1") {
    const LatentState h({5}), good({1}), bad({0});
    const auto g = contrastive_gradient(h, good, bad);
    CHECK(g.values == std::vector<double>{-2.0});
    const auto fd = fd_gradient([&](const LatentState& s) { return objective(s, good, bad); }, h);
    CHECK(vec_rel_err(g.values, fd) < 1e-6);
  }
}

TEST_CASE("gradient matches finite differences across dimensions") {
  Rng rng(101);
  for (int d : {2, 16, 64}) {
    for (int trial = 0; trial < 100; ++trial) {
      const LatentState h = random_state(d, rng), good = random_state(d, rng),
                        bad = random_state(d, rng);
      const auto g = contrastive_gradient(h, good, bad);
      const auto fd = fd_gradient([&](const LatentState& s) { return objective(s, good, bad); }, h);
      CHECK(vec_rel_err(g.values, fd) < 1e-6);
    }
  }
}

TEST_CASE("gradient does not depend on the current state") {
  Rng rng(102);
  const LatentState good = random_state(8, rng), bad = random_state(8, rng);
  const auto g1 = contrastive_gradient(random_state(8, rng), good, bad);
  const auto g2 = contrastive_gradient(random_state(8, rng), good, bad);
  CHECK(g1.values == g2.values);
}

TEST_CASE("contrastive update worked values") {
  const LatentState h({0, 0});
  ContrastiveGradient g;
  g.values = {-2.0, 2.0};
  const LatentState updated = contrastive_update(h, g, 0.25, false);
  CHECK(updated == LatentState({0.5, -0.5}));
  // a vanishing step size leaves the state untouched (the update rounds away
  // against any nonzero coordinate)
  const LatentState h2({0.5, -0.25});
  CHECK(states_equal_exact(contrastive_update(h2, g, 1e-300, false), h2));
  CHECK_THROWS_AS(contrastive_update(h, g, 0.0, false), ConfigError);
}

TEST_CASE("default update strictly reduces the contrastive objective") {
  const LatentState h({0, 0}), good({2, 0}), bad({0, 2});
  const auto g = contrastive_gradient(h, good, bad);
  const LatentState hp = contrastive_update(h, g, 0.25, false);
  CHECK(objective(hp, good, bad) < objective(h, good, bad));
  // and the literal sign does the opposite here
  const LatentState hl = contrastive_update(h, g, 0.25, true);
  CHECK(objective(hl, good, bad) > objective(h, good, bad));
}

TEST_CASE("descent is exactly linear in eta") {
  Rng rng(103);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 2 + rng.uniform_int(32);
    const LatentState h = random_state(d, rng), good = random_state(d, rng),
                      bad = random_state(d, rng);
    const auto g = contrastive_gradient(h, good, bad);
    double gnorm2 = 0.0;
    for (double v : g.values) gnorm2 += v * v;
    for (double eta : {1e-3, 1.0, 10.0}) {
      const double lhs = objective(contrastive_update(h, g, eta, false), good, bad);
      const double rhs = objective(h, good, bad) - eta * gnorm2;
      CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max({1.0, std::abs(rhs), eta * gnorm2}));
    }
  }
}

TEST_CASE("round with mode none is a plain model step") {
  const MlpModel m = MlpModel::init_random(5, 6, 7, 5, 200);
  Rng rng(104);
  const LatentState h = random_state(5, rng);
  RefinementConfig cfg;
  cfg.mode = RefineMode::none;
  CHECK(states_equal_exact(refinement_round(h, m, nullptr, cfg), model_step(m, h)));
}

TEST_CASE("round with full memory and equal references is a no-op") {
  const MlpModel m = MlpModel::init_random(5, 6, 7, 5, 201);
  const auto ref = std::make_shared<MlpModel>(MlpModel::init_random(5, 6, 7, 5, 202));
  CheckpointPair pair{ref, ref};
  RefinementConfig cfg;
  cfg.mode = RefineMode::both;
  cfg.alpha = 1.0;
  cfg.eta = 0.3;
  Rng rng(105);
  const LatentState h = random_state(5, rng);
  CHECK(states_equal_exact(refinement_round(h, m, &pair, cfg), h));
}

TEST_CASE("zero rounds degrade to a plain step") {
  const MlpModel m = MlpModel::init_random(4, 5, 6, 5, 203);
  const auto ref = std::make_shared<MlpModel>(MlpModel::init_random(4, 5, 6, 5, 204));
  CheckpointPair pair{ref, ref};
  RefinementConfig cfg;
  cfg.mode = RefineMode::both;
  cfg.rounds_R = 0;
  Rng rng(106);
  const LatentState h = random_state(4, rng);
  CHECK(states_equal_exact(refinement_round(h, m, &pair, cfg), model_step(m, h)));
}

TEST_CASE("mode composition limits") {
  const MlpModel m = MlpModel::init_random(6, 8, 9, 5, 205);
  const auto good = std::make_shared<MlpModel>(MlpModel::init_random(6, 8, 9, 5, 206));
  const auto bad = std::make_shared<MlpModel>(MlpModel::init_random(6, 8, 9, 5, 207));
  CheckpointPair pair{good, bad};
  Rng rng(107);
  const LatentState h = random_state(6, rng);

  SUBCASE("vanishing eta converges to the residual output") {
    RefinementConfig both;
    both.mode = RefineMode::both;
    both.alpha = 0.4;
    both.eta = 1e-13;
    RefinementConfig residual = both.with_mode(RefineMode::residual);
    const LatentState hb = refinement_round(h, m, &pair, both);
    const LatentState hr = refinement_round(h, m, &pair, residual);
    CHECK(states_close(hb, hr, 1e-12));
  }
  SUBCASE("alpha zero equals search mode") {
    RefinementConfig both;
    both.mode = RefineMode::both;
    both.alpha = 0.0;
    both.eta = 0.2;
    const LatentState hb = refinement_round(h, m, &pair, both);
    const LatentState hs = refinement_round(h, m, &pair, both.with_mode(RefineMode::search));
    CHECK(states_equal_exact(hb, hs));
  }
}

TEST_CASE("search against a clean/anti oracle pair moves toward the gold step") {
  ModChainParams p;
  p.count = 10;
  p.chain_len = 1;
  p.modulus = 11;
  p.seed = 55;
  const auto instances = gen_mod_chain(p);
  const int d = 8;
  auto feat = std::make_shared<Featurizer>(d, instances.front().feature_width(), 56);

  for (const auto& x : instances) {
    OracleModel::Options noisy;
    noisy.sigma = 0.3;
    noisy.noise_seed = fnv1a64(x.id);
    const OracleModel model(x, *feat, noisy);
    OracleModel::Options clean;
    OracleModel::Options anti;
    anti.repel = true;
    CheckpointPair pair{std::make_shared<OracleModel>(x, *feat, clean),
                        std::make_shared<OracleModel>(x, *feat, anti)};

    RefinementConfig cfg;
    cfg.mode = RefineMode::both;
    cfg.alpha = 0.1;
    cfg.eta = 0.8 * d / 4.0;  // pulls 80% of the way back toward the clean output
    const LatentState h0 = model.encode(x);
    const LatentState gold = pair.good->step(h0);  // the clean next step

    const LatentState refined = refinement_round(h0, model, &pair, cfg);
    RefinementConfig none = cfg.with_mode(RefineMode::none);
    const LatentState plain = refinement_round(h0, model, &pair, none);
    CHECK(distance(refined, gold) < distance(plain, gold));
  }
}

TEST_CASE("refinement mutates no model parameters") {
  const MlpModel m = MlpModel::init_random(5, 6, 7, 5, 208);
  const auto good = std::make_shared<MlpModel>(MlpModel::init_random(5, 6, 7, 5, 209));
  const auto bad = std::make_shared<MlpModel>(MlpModel::init_random(5, 6, 7, 5, 210));
  const MlpParams m_before = m.params();
  const MlpParams good_before = good->params();
  const MlpParams bad_before = bad->params();
  CheckpointPair pair{good, bad};
  RefinementConfig cfg;
  cfg.mode = RefineMode::both;
  cfg.rounds_R = 3;
  Rng rng(108);
  LatentState h = random_state(5, rng);
  for (int i = 0; i < 50; ++i) h = refinement_round(h, m, &pair, cfg);
  CHECK(m.params() == m_before);
  CHECK(good->params() == good_before);
  CHECK(bad->params() == bad_before);
}

TEST_CASE("search without a pair is rejected") {
  const IdentityModel m(3);
  RefinementConfig cfg;
  cfg.mode = RefineMode::search;
  CHECK_THROWS_AS(refinement_round(LatentState({1, 2, 3}), m, nullptr, cfg), ConfigError);
}

TEST_CASE("gradient dimension checks") {
  CHECK_THROWS_AS(contrastive_gradient(LatentState({1}), LatentState({1, 2}), LatentState({1})),
                  DimensionMismatch);
}

}  // TEST_SUITE
