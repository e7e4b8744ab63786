#include "edl/active.hpp"
#include "edl/error.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace edl;
using namespace edl::active;

namespace {

data::Sample constant_sample(std::string id, double value, int size = 16) {
  data::Sample s;
  s.id = std::move(id);
  s.channels.push_back(data::Image::Constant(size, size, value));
  s.mask = data::Mask::Zero(size, size);
  return s;
}

/// Network whose output is e = (0, gain * x) per pixel: every weight is zero
/// except a centre tap identity path down0 -> skip -> up0 -> head.
nn::UNet<float> identity_path_net(nn::Head head, float gain) {
  nn::UNetConfig cfg;
  cfg.image_size = 16;
  cfg.filters = {4, 8};
  cfg.head = head;
  cfg.activation = nn::EvidenceActivation::relu;
  nn::UNet<float> net(cfg);
  for (auto& p : net.params().all()) p.value.setZero();
  auto set = [&](const std::string& name, Eigen::Index r, Eigen::Index c, float v) {
    for (auto& p : net.params().all())
      if (p.name == name) p.value(r, c) = v;
  };
  for (const char* conv : {"down0.conv0.weight", "down0.conv1.weight", "up0.conv0.weight", "up0.conv1.weight"})
    set(conv, 4, 0, 1.0f);  // input channel 0, tap (1,1)
  set("head.weight", 0, 1, gain);
  return net;
}

}  // namespace

TEST(Acquire, TopScoresAndTies) {
  auto pool = PoolState::with_initial(4, 1, 0);
  pool.labeled = {3};
  pool.unlabeled = {0, 1, 2};
  acquire(pool, {0.9, 0.1, 0.5}, 2, 1);
  EXPECT_EQ(pool.labeled, (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_EQ(pool.unlabeled, (std::vector<std::size_t>{1}));
  ASSERT_EQ(pool.history.size(), 1u);
  EXPECT_EQ(pool.history[0].acquired, (std::vector<std::size_t>{0, 2}));
  EXPECT_NEAR(pool.history[0].mean_score, 0.7, 1e-15);
  EXPECT_FALSE(pool.history[0].exhausted);

  PoolState ties;
  ties.unlabeled = {0, 1, 2, 3, 4};
  acquire(ties, std::vector<double>(5, 0.25), 3, 1);
  EXPECT_EQ(ties.labeled, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Acquire, ExhaustionIsFlagged) {
  PoolState p;
  p.labeled = {0};
  p.unlabeled = {1, 2};
  acquire(p, {0.3, 0.4}, 5, 7);
  EXPECT_TRUE(p.unlabeled.empty());
  EXPECT_EQ(p.labeled.size(), 3u);
  EXPECT_TRUE(p.history.back().exhausted);
  EXPECT_EQ(p.history.back().round, 7);
  EXPECT_NO_THROW(p.check());
  EXPECT_THROW(acquire(p, {0.1}, 1, 8), InvalidInput);
}

TEST(Pool, InitialSampleAndInvariant) {
  const auto p = PoolState::with_initial(50, 5, 42);
  EXPECT_EQ(p.labeled.size(), 5u);
  EXPECT_EQ(p.unlabeled.size(), 45u);
  EXPECT_NO_THROW(p.check());
  EXPECT_EQ(PoolState::with_initial(50, 5, 42).labeled, p.labeled);
  EXPECT_NE(PoolState::with_initial(50, 5, 43).labeled, p.labeled);
  auto broken = p;
  broken.unlabeled.push_back(p.labeled.front());
  EXPECT_THROW(broken.check(), StateError);
  EXPECT_THROW(PoolState::with_initial(5, 0, 1), InvalidInput);
}

TEST(Score, VacuousImageScoresHigherThanConfident) {
  const data::Dataset ds{constant_sample("confident", 1.0), constant_sample("vacuous", 0.0)};
  const auto edl_net = identity_path_net(nn::Head::evidential, 999.0f);
  for (auto kind : {QueryKind::dempster, QueryKind::epistemic, QueryKind::aleatoric}) {
    const auto s = score_unlabeled(edl_net, ds, kind, 0);
    EXPECT_GT(s[1], s[0]) << to_string(kind);
  }
  // alpha = (1, 1) everywhere: u_d = K / S = 1 at every pixel.
  EXPECT_NEAR(score_unlabeled(edl_net, ds, QueryKind::dempster, 0)[1], 1.0, 1e-12);
  EXPECT_NEAR(score_unlabeled(edl_net, ds, QueryKind::dempster, 0)[0], 2.0 / 1001.0, 1e-6);

  const auto sm_net = identity_path_net(nn::Head::softmax, 20.0f);
  const auto e = score_unlabeled(sm_net, ds, QueryKind::entropy, 0);
  EXPECT_GT(e[1], e[0]);
  EXPECT_NEAR(e[1], std::log(2.0), 1e-6);

  EXPECT_THROW(score_unlabeled(sm_net, ds, QueryKind::dempster, 0), InvalidInput);
  EXPECT_THROW(score_unlabeled(edl_net, ds, QueryKind::entropy, 0), InvalidInput);
  EXPECT_THROW(score_unlabeled(edl_net, {}, QueryKind::dempster, 0), StateError);
}

TEST(Score, RandomIsSeeded) {
  const data::Dataset ds{constant_sample("a", 0.1), constant_sample("b", 0.2), constant_sample("c", 0.3)};
  const auto net = identity_path_net(nn::Head::softmax, 1.0f);
  const auto a = score_unlabeled(net, ds, QueryKind::random, 5);
  EXPECT_EQ(a, score_unlabeled(net, ds, QueryKind::random, 5));
  EXPECT_NE(a, score_unlabeled(net, ds, QueryKind::random, 6));
}

namespace {

ActiveConfig small_loop(QueryKind kind) {
  ActiveConfig cfg;
  cfg.query_kind = kind;
  cfg.n_acquire = 3;
  cfg.epochs_per_round = 1;
  cfg.rounds = 4;
  cfg.initial_labeled_count = 2;
  cfg.seed = 17;
  cfg.net.image_size = 16;
  cfg.net.filters = {4, 8};
  cfg.net.seed = 3;
  cfg.train.batch_size = 4;
  cfg.train.seed = 9;
  return cfg;
}

data::Dataset synth(int n, std::uint64_t seed) {
  data::SynthConfig sc;
  sc.image_size = 16;
  sc.sample_count = n;
  sc.seed = seed;
  return data::generate(sc);
}

}  // namespace

TEST(Loop, KindsShareStateTransitionsUnderConstantScorer) {
  const auto pool = synth(12, 1), eval = synth(3, 2);
  const Scorer constant = [](const nn::UNet<float>&, const data::Dataset& unl, int) {
    return std::vector<double>(unl.size(), 1.0);
  };
  const auto a = run_active_loop(small_loop(QueryKind::entropy), pool, eval, constant);
  const auto b = run_active_loop(small_loop(QueryKind::dempster), pool, eval, constant);
  ASSERT_EQ(a.pool.history.size(), b.pool.history.size());
  for (std::size_t i = 0; i < a.pool.history.size(); ++i) {
    EXPECT_EQ(a.pool.history[i].acquired, b.pool.history[i].acquired);
    EXPECT_EQ(a.pool.history[i].exhausted, b.pool.history[i].exhausted);
  }
  ASSERT_EQ(a.rounds.size(), 4u);
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    EXPECT_EQ(a.rounds[i].labeled_count, b.rounds[i].labeled_count);
    EXPECT_EQ(a.rounds[i].labeled_count, std::min<std::size_t>(12, 2 + 3 * (i + 1)));
  }
  // Round 4 empties the pool (2 + 3 * 4 > 12) on a short final acquisition.
  EXPECT_TRUE(a.pool.history.back().exhausted);

  // Constant scores acquire in tie-break order: lowest remaining indices first.
  std::vector<std::size_t> before = PoolState::with_initial(12, 2, stream_seed(17, 0)).unlabeled;
  EXPECT_EQ(a.pool.history[0].acquired, std::vector<std::size_t>(before.begin(), before.begin() + 3));
}

TEST(Loop, DeterministicAndReportsExhaustion) {
  const auto pool = synth(10, 3), eval = synth(3, 4);
  auto cfg = small_loop(QueryKind::aleatoric);
  cfg.rounds = 5;
  const auto a = run_active_loop(cfg, pool, eval);
  const auto b = run_active_loop(cfg, pool, eval);
  for (std::size_t i = 0; i < a.rounds.size(); ++i) EXPECT_EQ(a.rounds[i].dice, b.rounds[i].dice);
  for (std::size_t i = 0; i < a.pool.history.size(); ++i) EXPECT_EQ(a.pool.history[i].acquired, b.pool.history[i].acquired);
  // 2 + 3 + 3 + 2 labels the pool in round 3, before the last round.
  ASSERT_TRUE(a.exhaustion_report.has_value());
  EXPECT_EQ(a.final_report.size(), 3u);
  EXPECT_TRUE(a.rounds.back().kinds.count(metrics::UncertaintyKind::aleatoric));
}

TEST(Loop, SingleFullRoundEqualsPlainTraining) {
  const auto pool = synth(9, 5), eval = synth(3, 6);
  auto cfg = small_loop(QueryKind::entropy);
  cfg.rounds = 1;
  cfg.initial_labeled_count = 1;
  cfg.n_acquire = 8;
  cfg.epochs_per_round = 2;
  const auto res = run_active_loop(cfg, pool, eval);
  EXPECT_EQ(res.rounds[0].labeled_count, 9u);

  nn::UNetConfig net = cfg.net;
  net.head = nn::Head::softmax;
  nn::UNet<float> model(net);
  train::Trainer<float> t(model, cfg.train);
  t.fit(pool, nullptr, 2);
  std::vector<metrics::SliceReport> reps;
  for (const auto& p : predict_any(model, eval)) reps.push_back(metrics::slice_report(p));
  ASSERT_EQ(reps.size(), res.final_report.size());
  for (std::size_t i = 0; i < reps.size(); ++i) {
    EXPECT_EQ(reps[i].dice, res.final_report[i].dice);
    EXPECT_EQ(reps[i].brier, res.final_report[i].brier);
  }
}

TEST(Loop, ConfigValidation) {
  auto cfg = small_loop(QueryKind::random);
  cfg.n_acquire = 0;
  EXPECT_THROW(run_active_loop(cfg, synth(4, 1), synth(2, 2)), InvalidInput);
  cfg = small_loop(QueryKind::random);
  cfg.rounds = 0;
  EXPECT_THROW(run_active_loop(cfg, synth(4, 1), synth(2, 2)), InvalidInput);
  EXPECT_EQ(parse_query_kind("epistemic"), QueryKind::epistemic);
  EXPECT_THROW(parse_query_kind("bald"), InvalidInput);
}
