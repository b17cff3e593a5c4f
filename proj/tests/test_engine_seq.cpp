#include "oracle.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace aggrisk;

TEST(SequentialEngine, WorkedExample) {
  // e1: 10 + 5 = 15 -> occ 10; e2: 7 -> occ 2; sum 12 -> agg 9
  const auto inst = fixtures::worked_example();
  const auto res = run_sequential(inst.yet, inst.pf);
  ASSERT_EQ(res.ylt.size(), 1u);
  EXPECT_EQ(res.ylt.loss(1), 9.0);
  ASSERT_EQ(res.llts.size(), 1u);
  EXPECT_EQ(res.llts[0].loss(1), 9.0);
  EXPECT_EQ(res.llts[0].role, LossRole::layer);
  EXPECT_EQ(res.ylt.role, LossRole::portfolio);
}

TEST(SequentialEngine, MatchesOracleOnRandomInstances) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 100; ++i) {
    const auto inst = fixtures::random_instance(rng);
    const auto res = run_sequential(inst.yet, inst.pf);
    const auto want = fixtures::oracle_ylt(inst.yet, inst.pf);
    ASSERT_EQ(res.ylt.losses, want) << "instance " << i;
  }
}

TEST(SequentialEngine, PltsSumLayersAndYltSumsPlts) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const auto inst = fixtures::random_instance(rng);
    const auto res = run_sequential(inst.yet, inst.pf);
    ASSERT_EQ(res.plts.size(), inst.pf.programs.size());
    std::size_t next = 0;
    for (std::size_t p = 0; p < res.plts.size(); ++p) {
      std::vector<double> sum(inst.yet.trial_count(), 0.0);
      for (std::size_t l = 0; l < inst.pf.programs[p].layers.size(); ++l, ++next) {
        for (std::size_t t = 0; t < sum.size(); ++t) sum[t] += res.llts[next].losses[t];
      }
      EXPECT_EQ(res.plts[p].losses, sum);
    }
    for (std::size_t t = 0; t < inst.yet.trial_count(); ++t) {
      double total = 0.0;
      for (const auto& plt : res.plts) total += plt.losses[t];
      EXPECT_NEAR(res.ylt.losses[t], total, 1e-9 * std::max(1.0, total));
    }
  }
}

TEST(SequentialEngine, ZeroLossPoolGivesZeroYlt) {
  auto inst = fixtures::worked_example();
  for (auto& [id, elt] : inst.pf.elt_pool) elt = EventLossTable(id, {});
  inst.pf.programs[0].layers[0].terms = FinancialTerms{};
  const auto res = run_sequential(inst.yet, inst.pf);
  EXPECT_EQ(res.ylt.losses, std::vector<double>{0.0});
}

TEST(SequentialEngine, InvalidPortfolioIsRejected) {
  auto inst = fixtures::worked_example();
  inst.pf.programs[0].layers[0].covered_elts.push_back(42);
  inst.pf.programs[0].layers[0].participations.push_back(1.0);
  EXPECT_THROW(run_sequential(inst.yet, inst.pf), ValidationError);
}
