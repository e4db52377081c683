#include <gtest/gtest.h>

#include <cmath>

#include "neural_toy.hpp"
#include "svassess/common.hpp"
#include "svassess/neural.hpp"

using namespace svassess;
using namespace svassess::neural;

TEST(AcGru, ConfigValidation) {
  auto c = toy::config();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.commit_width(), 4 * 3 * 6);
  auto bad = c;
  bad.filter_sizes = {13};
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.tasks.clear();
  EXPECT_THROW(bad.validate(), Error);
  EXPECT_EQ(AcGruConfig::from_json(c.to_json()).to_json(), c.to_json());
}

TEST(AcGru, ForwardShapesAndProbabilities) {
  auto c = toy::config();
  Parameters p(c, 1);
  Rng rng(91);
  auto x = toy::sample(c, rng);
  auto f = forward(p, x, false);
  ASSERT_EQ(f.probs.size(), 2u);
  for (std::size_t t = 0; t < 2; ++t) {
    EXPECT_EQ(f.probs[t].size(), c.tasks[t].classes);
    EXPECT_NEAR(f.probs[t].sum(), 1.0, 1e-12);
  }
  EXPECT_EQ(f.cache.commit.size(), c.commit_width());
  for (const auto& seq : f.cache.seq)
    for (const auto& s : seq) EXPECT_NEAR(s.weights.sum(), 1.0, 1e-12);
  // Eval mode ignores the dropout seed.
  auto again = forward(p, x, false, 99);
  EXPECT_EQ(again.logits[0], f.logits[0]);
}

TEST(AcGru, SoftmaxAndLoss) {
  Eigen::RowVectorXd l(3);
  l << 1000, 1000, 1000;
  auto s = softmax(l);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s(i), 1.0 / 3.0, 1e-15);
  Eigen::RowVectorXd p(2);
  p << 0.25, 0.75;
  EXPECT_NEAR(multitask_loss({p, p}, {0, 1}), -std::log(0.25) - std::log(0.75), 1e-15);
  Eigen::RowVectorXd zero(2);
  zero << 0.0, 1.0;
  EXPECT_NEAR(multitask_loss({zero}, {0}), -std::log(1e-12), 1e-9);
}

TEST(AcGru, BackwardRejectsStaleCache) {
  auto c = toy::config();
  Parameters p(c, 2);
  Rng rng(92);
  auto x = toy::sample(c, rng);
  auto f = forward(p, x, false);
  p.mutable_block(0)(0, 0) += 1.0;
  EXPECT_THROW(backward(p, f, x.labels), Error);
  Parameters other(c, 2);
  EXPECT_THROW(backward(other, f, x.labels), Error);
}

// Property: analytic gradients agree with central differences on random toy
// parameters and inputs, including training-mode dropout turned off.
TEST(AcGru, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto c = toy::config(2 + static_cast<int>(seed));
    Parameters p(c, seed);
    Rng rng(93 + seed);
    auto x = toy::sample(c, rng);
    for (const auto& r : toy::finite_difference(p, x)) EXPECT_LT(r.max_rel, 1e-4);
    for (const auto& b : gradient_check(p, x)) EXPECT_LT(b.max_rel_error, 1e-4) << b.name;
  }
}

TEST(AcGru, AdamDescends) {
  auto c = toy::config();
  Parameters p(c, 3);
  Rng rng(94);
  auto x = toy::sample(c, rng);
  AdamState st;
  const double before = multitask_loss(forward(p, x, false).probs, x.labels);
  for (int i = 0; i < 30; ++i) {
    auto f = forward(p, x, false);
    adam_step(p, backward(p, f, x.labels), st, 0.01);
  }
  EXPECT_LT(multitask_loss(forward(p, x, false).probs, x.labels), before);
  EXPECT_EQ(st.t, 30);
}

TEST(AcGru, ParametersJsonRoundTrip) {
  auto c = toy::config();
  Parameters p(c, 4);
  auto back = Parameters::from_json(p.to_json());
  ASSERT_EQ(back.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(back.name(i), p.name(i));
    EXPECT_EQ(back.block(i), p.block(i));
  }
  Rng rng(95);
  auto x = toy::sample(c, rng);
  EXPECT_EQ(predict_acgru(back, x).classes, predict_acgru(p, x).classes);
}

TEST(AcGru, TrainingIsDeterministic) {
  auto c = toy::config();
  c.epochs = 3;
  c.batch_size = 4;
  c.dropout = 0.2;
  Rng rng(96);
  std::vector<Sample> train;
  for (int i = 0; i < 8; ++i) train.push_back(toy::sample(c, rng));
  auto a = train_acgru(c, train, {});
  auto b = train_acgru(c, train, {});
  EXPECT_EQ(a.history_csv(), b.history_csv());
  EXPECT_EQ(a.history.size(), 3u);
  c.patience = 0;
  EXPECT_LE(train_acgru(c, train, {}).history.size(), 3u);
}

TEST(TokenIndex, ReservedIdsAndOrdering) {
  TokenIndex idx({{"b", "a", "a"}, {"c", "b"}}, 4);
  EXPECT_EQ(idx.id("a"), 2);
  EXPECT_EQ(idx.id("b"), 3);
  EXPECT_EQ(idx.id("c"), 1);
  EXPECT_EQ(idx.encode({"a", "zz"}, 4), (std::vector<int>{2, 1, 0, 0}));
  EXPECT_EQ(idx.encode({"a", "a", "a"}, 2), (std::vector<int>{2, 2}));
  EXPECT_EQ(TokenIndex::from_json(idx.to_json()).id("b"), 3);
  EXPECT_THROW(TokenIndex({}, 1), Error);
}
