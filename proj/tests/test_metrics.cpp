#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "upsilon/diagnostics.hpp"
#include "upsilon/strategies.hpp"

using namespace upsilon;

TEST(Strategies, BaselineAndOpenSet) {
  const LabelSpace ls(6, 1);
  const std::vector<std::size_t> gt{0, 6, 7, 8, 1};
  const std::vector<bool> ood{false, true, true, true, false};
  EXPECT_TRUE(label_ood(gt, ood, {StrategyKind::Baseline, {}}, LabelSpace(6, 0)).empty());
  const auto open = label_ood(gt, ood, {StrategyKind::OpenSet, {}}, ls);
  EXPECT_EQ(open.size(), 3u);
  for (const auto& e : open.entries()) EXPECT_EQ(e.cls, 6u);
}

TEST(Strategies, OraclePartitionsByGroundTruth) {
  const LabelSpace ls(6, 4);
  std::vector<std::size_t> gt;
  std::vector<bool> ood;
  for (std::size_t i = 0; i < 40; ++i) {
    gt.push_back(i % 10);
    ood.push_back(i % 10 >= 6);
  }
  const auto out = label_ood(gt, ood, {StrategyKind::Oracle, {}}, ls);
  EXPECT_EQ(out.size(), 16u);
  std::set<std::size_t> used;
  for (const auto& e : out.entries()) {
    EXPECT_EQ(e.cls, gt[e.sample]);  // ranks of classes 6..9 are 0..3
    used.insert(e.cls);
  }
  EXPECT_EQ(used.size(), 4u);
}

TEST(Strategies, ReAssignedFollowsMap) {
  const LabelSpace ls(3, 0);
  const std::vector<std::size_t> gt{3, 4, 0};
  const std::vector<bool> ood{true, true, false};
  const auto out = label_ood(gt, ood, {StrategyKind::ReAssigned, {{2, 0}}}, ls);
  EXPECT_EQ(out.label_of(0), 2u);
  EXPECT_EQ(out.label_of(1), 0u);
  EXPECT_FALSE(out.contains(2));
}

TEST(Reassignments, Enumeration) {
  EXPECT_EQ(sample_reassignments(1, 1, 5, 0), (std::vector<ReassignMap>{{{0}}}));
  const auto all = sample_reassignments(3, 2, 6, 0);
  ASSERT_EQ(all.size(), 6u);
  std::set<ReassignMap> distinct(all.begin(), all.end());
  EXPECT_EQ(distinct.size(), 6u);
  for (const auto& m : all) EXPECT_NE(m.targets[0], m.targets[1]);
  EXPECT_EQ(sample_reassignments(6, 4, 10, 42), sample_reassignments(6, 4, 10, 42));
}

TEST(Diagnostics, KlToUniform) {
  EXPECT_NEAR(kl_to_uniform(LabelHistogram({5, 5, 5})), 0.0, 1e-15);
  EXPECT_NEAR(kl_to_uniform(LabelHistogram({10, 0})), std::log(2.0), 1e-15);
  double expect = 0;
  for (double c : {1.0, 2.0, 3.0, 4.0}) expect += c / 10 * std::log(c / 10 * 4);
  EXPECT_NEAR(kl_to_uniform(LabelHistogram({1, 2, 3, 4})), expect, 1e-14);
  EXPECT_THROW(kl_to_uniform(LabelHistogram({0, 0})), EmptyHistogramError);
}

TEST(Diagnostics, MajorityMinorityRatio) {
  EXPECT_DOUBLE_EQ(majority_minority_ratio(LabelHistogram({4, 4})).value, 1.0);
  EXPECT_DOUBLE_EQ(majority_minority_ratio(LabelHistogram({3, 1})).value, 3.0);
  EXPECT_TRUE(majority_minority_ratio(LabelHistogram({3, 0})).unbounded);
}

TEST(Diagnostics, ConfusionMatchesTally) {
  const LabelSpace ls(3, 0);
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<std::size_t> t(0, 4), p(0, 2);
  std::vector<std::size_t> truth(200), pred(200);
  std::vector<std::vector<std::size_t>> tally(5, std::vector<std::size_t>(3));
  for (std::size_t i = 0; i < 200; ++i) {
    truth[i] = t(rng);
    pred[i] = p(rng);
    ++tally[truth[i]][pred[i]];
  }
  const auto cm = confusion(truth, pred, ls);
  ASSERT_EQ(cm.rows(), 5u);
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(cm(a, b), tally[a][b]);
}

TEST(Diagnostics, OodAsIdProportion) {
  const LabelSpace ls(2, 1);
  const std::vector<bool> ood{true, true, false, true};
  EXPECT_EQ(ood_as_id_proportion(PseudoLabelSet(3), ood, ls), 0.0);
  PseudoLabelSet all(3);
  for (std::size_t i : {0, 1, 3}) all.add(i, 0);
  EXPECT_EQ(ood_as_id_proportion(all, ood, ls), 1.0);
  PseudoLabelSet mixed(3);
  mixed.add(0, 1);
  mixed.add(1, 2);  // extra class does not count
  mixed.add(2, 0);  // ID sample does not count
  EXPECT_NEAR(ood_as_id_proportion(mixed, ood, ls), 1.0 / 3.0, 1e-15);
}

TEST(Diagnostics, ImbalanceCsvMarksAbsentAndUnbounded) {
  ImbalanceTrial t;
  t.kl_id = 0.5;
  t.r_id = {2.0, false};
  t.r_ood = ImbalanceRatio{1.0, true};
  std::ostringstream os;
  write_imbalance_csv(os, std::vector<ImbalanceTrial>{t});
  EXPECT_EQ(os.str(), "trial,kl_id,kl_ood,r_id,r_ood\n0,0.5,,2,inf\n");
}
