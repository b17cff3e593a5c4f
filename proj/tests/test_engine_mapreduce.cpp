#include "oracle.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace aggrisk;

namespace {

const ExecutionPlan kPlans[] = {{1, 1, 1, {}}, {2, 2, 4, {}}, {4, 4, 8, {}}, {8, 4, 16, {}},
                                {3, 5, 7, {}}};

}  // namespace

TEST(MapRound1, EmitsOneRecordPerEventInTrialOrder) {
  const auto inst = fixtures::worked_example();
  const Layer& layer = inst.pf.programs[0].layers[0];
  const auto index = combine_layer_elts(inst.pf, layer);
  const auto recs = map_round1(inst.yet, TrialRange{1, 1}, layer, index);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0], (KeyedLoss{1, 0, 15.0}));
  EXPECT_EQ(recs[1], (KeyedLoss{1, 1, 7.0}));
}

TEST(ReduceRound1, AppliesTermsRegardlessOfArrivalOrder) {
  std::vector<KeyedLoss> group{{1, 1, 7.0}, {1, 0, 15.0}};
  EXPECT_EQ(reduce_round1(1, group, FinancialTerms{5.0, 10.0, 3.0, 100.0}), 9.0);
  EXPECT_EQ(group[0].seq, 0u);
}

TEST(ReduceRound1, DuplicateSeqIsAShuffleFault) {
  std::vector<KeyedLoss> group{{1, 0, 7.0}, {1, 0, 15.0}};
  EXPECT_THROW(reduce_round1(1, group, FinancialTerms{}), ShuffleFault);
}

TEST(Round2, MapAndReduce) {
  const TrialLossTable llt{LossRole::layer, 1, {1.0, 2.0, 3.0}};
  const auto recs = map_round2(llt, TrialRange{2, 2}, 4);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0], (KeyedLoss{2, 4, 2.0}));
  EXPECT_EQ(recs[1], (KeyedLoss{3, 4, 3.0}));
  std::vector<KeyedLoss> group{{5, 1, 0.25}, {5, 0, 1.0}};
  EXPECT_EQ(reduce_round2(5, group), 1.25);
}

TEST(MapReduceEngine, WorkedExample) {
  const auto inst = fixtures::worked_example();
  for (const auto& plan : kPlans) {
    const auto res = run_mapreduce(inst.yet, inst.pf, plan);
    EXPECT_EQ(res.ylt.losses, std::vector<double>{9.0});
  }
}

TEST(MapReduceEngine, BitIdenticalToSequentialAcrossPlans) {
  std::mt19937_64 rng(31337);
  for (int i = 0; i < 60; ++i) {
    const auto inst = fixtures::random_instance(rng);
    const auto seq = run_sequential(inst.yet, inst.pf);
    const auto oracle = fixtures::oracle_ylt(inst.yet, inst.pf);
    ASSERT_EQ(seq.ylt.losses, oracle);
    for (const auto& plan : kPlans) {
      const auto res = run_mapreduce(inst.yet, inst.pf, plan);
      ASSERT_TRUE(res.ylt.bit_equal(seq.ylt)) << "instance " << i << " plan " << plan.mapper_count
                                               << "/" << plan.reducer_count << "/" << plan.chunk_count;
      ASSERT_EQ(res.llts.size(), seq.llts.size());
      for (std::size_t l = 0; l < res.llts.size(); ++l) ASSERT_TRUE(res.llts[l].bit_equal(seq.llts[l]));
    }
  }
}

TEST(MapReduceEngine, MoreChunksThanTrials) {
  std::mt19937_64 rng(4);
  fixtures::InstanceLimits lim;
  lim.max_trials = 3;
  const auto inst = fixtures::random_instance(rng, lim);
  const auto seq = run_sequential(inst.yet, inst.pf);
  const auto res = run_mapreduce(inst.yet, inst.pf, ExecutionPlan{4, 6, 32, {}});
  EXPECT_TRUE(res.ylt.bit_equal(seq.ylt));
}

TEST(MapReduceEngine, SpilledShuffleGivesSameYlt) {
  std::mt19937_64 rng(8);
  const auto inst = fixtures::random_instance(rng);
  const auto dir = fixtures::scratch_dir("mr-spill");
  const auto a = run_mapreduce(inst.yet, inst.pf, ExecutionPlan{2, 3, 5, {}});
  const auto b = run_mapreduce(inst.yet, inst.pf, ExecutionPlan{2, 3, 5, dir});
  EXPECT_TRUE(a.ylt.bit_equal(b.ylt));
  std::filesystem::remove_all(dir);
}

TEST(MapReduceEngine, RecordCountsAreConserved) {
  std::mt19937_64 rng(12);
  const auto inst = fixtures::random_instance(rng);
  const auto res = run_mapreduce(inst.yet, inst.pf, ExecutionPlan{3, 2, 6, {}});
  const std::size_t slots = inst.yet.trial_count() * inst.yet.events_per_trial();
  ASSERT_EQ(res.round1_stats.size(), inst.pf.layer_count());
  for (const auto& s : res.round1_stats) {
    EXPECT_EQ(s.records_emitted, slots);
    EXPECT_EQ(s.records_reduced, slots);
    EXPECT_EQ(s.reduce_groups, inst.yet.trial_count());
  }
  EXPECT_EQ(res.round2_stats.records_emitted, inst.yet.trial_count() * inst.pf.layer_count());
  EXPECT_EQ(res.round2_stats.reduce_groups, inst.yet.trial_count());
}

TEST(MapReduceEngine, HooksSeeEveryEmission) {
  std::mt19937_64 rng(13);
  const auto inst = fixtures::random_instance(rng);
  std::atomic<std::size_t> emitted{0}, reduced{0};
  MapReduceHooks hooks;
  hooks.round1.on_emit = [&](std::size_t, std::size_t n) { emitted += n; };
  hooks.round1.on_reduce = [&](std::size_t, std::uint32_t, std::size_t n) { reduced += n; };
  run_mapreduce(inst.yet, inst.pf, ExecutionPlan{2, 2, 4, {}}, &hooks);
  const std::size_t expected =
      inst.yet.trial_count() * inst.yet.events_per_trial() * inst.pf.layer_count();
  EXPECT_EQ(emitted.load(), expected);
  EXPECT_EQ(reduced.load(), expected);
}

TEST(MapReduceEngine, RejectsInvalidInputs) {
  auto inst = fixtures::worked_example();
  EXPECT_THROW(run_mapreduce(inst.yet, inst.pf, ExecutionPlan{0, 1, 1, {}}), PreconditionError);
  inst.pf.programs[0].layers[0].participations.pop_back();
  EXPECT_THROW(run_mapreduce(inst.yet, inst.pf, ExecutionPlan{1, 1, 1, {}}), ValidationError);
}
