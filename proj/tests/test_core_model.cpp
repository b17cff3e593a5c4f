#include "test_support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace aggrisk;

namespace {

Portfolio sixteen_elt_portfolio() {
  Portfolio pf;
  Layer layer;
  layer.layer_id = 1;
  for (std::uint32_t id = 1; id <= 16; ++id) {
    pf.elt_pool.emplace(id, EventLossTable(id, {{EventId(id), 1.0}}));
    layer.covered_elts.push_back(id);
    layer.participations.push_back(1.0);
  }
  pf.programs.push_back(Program{1, {layer}});
  return pf;
}

// Independent oracle for combine_elts: per-ELT lookups, 0 for misses.
std::vector<double> brute_force_losses(const std::vector<EventLossTable>& elts, EventId e) {
  std::vector<double> out;
  for (const auto& elt : elts) out.push_back(elt.find(e).value_or(0.0));
  return out;
}

}  // namespace

TEST(ValidatePortfolio, WellFormedPortfolioHasNoViolations) {
  EXPECT_TRUE(validate_portfolio(sixteen_elt_portfolio()).empty());
}

TEST(ValidatePortfolio, UnknownEltIsReported) {
  Portfolio pf = sixteen_elt_portfolio();
  pf.programs[0].layers[0].covered_elts.back() = 99;
  const auto v = validate_portfolio(pf);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], "layer 1 references unknown ELT 99");
}

TEST(ValidatePortfolio, ParticipationLengthMismatchIsOneViolation) {
  Portfolio pf = sixteen_elt_portfolio();
  pf.programs[0].layers[0].participations.pop_back();
  const auto v = validate_portfolio(pf);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("participations"), std::string::npos);
}

TEST(ValidatePortfolio, ReportsEveryStructuralProblem) {
  Portfolio pf = sixteen_elt_portfolio();
  pf.programs.push_back(Program{1, {}});  // duplicate id, no layers
  Layer bad = pf.programs[0].layers[0];
  bad.participations[0] = 1.5;
  bad.terms.occ_limit = -1.0;
  pf.programs[0].layers.push_back(bad);  // duplicate layer id too
  Layer empty;
  empty.layer_id = 7;
  pf.programs[0].layers.push_back(empty);
  const auto v = validate_portfolio(pf);
  EXPECT_EQ(v.size(), 6u);
}

TEST(ValidatePortfolio, IsPure) {
  std::mt19937_64 rng(5);
  auto inst = fixtures::random_instance(rng);
  inst.pf.programs[0].layers[0].covered_elts.push_back(1234);
  EXPECT_EQ(validate_portfolio(inst.pf), validate_portfolio(inst.pf));
}

TEST(CombineElts, MergesOverlappingTables) {
  const std::vector<EventLossTable> elts{EventLossTable(1, {{EventId(1), 10.0}}),
                                         EventLossTable(2, {{EventId(1), 5.0}, {EventId(2), 7.0}})};
  const CombinedEltIndex index = combine_elts(elts);
  EXPECT_EQ(index.slot_count(), 2u);
  EXPECT_EQ(index.size(), 2u);
  for (std::uint32_t e : {1u, 2u, 3u}) {
    const auto got = lookup_losses(index, EventId(e));
    const auto want = brute_force_losses(elts, EventId(e));
    EXPECT_EQ(std::vector<double>(got.begin(), got.end()), want) << "event " << e;
  }
  EXPECT_EQ(std::vector<double>(index.lookup(EventId(1)).begin(), index.lookup(EventId(1)).end()),
            (std::vector<double>{10.0, 5.0}));
  EXPECT_EQ(std::vector<double>(index.lookup(EventId(2)).begin(), index.lookup(EventId(2)).end()),
            (std::vector<double>{0.0, 7.0}));
}

TEST(CombineElts, SingleTableIsIdentityEmbedding) {
  const std::vector<EventLossTable> elts{EventLossTable(1, {{EventId(1), 10.0}})};
  const CombinedEltIndex index = combine_elts(elts);
  ASSERT_EQ(index.lookup(EventId(1)).size(), 1u);
  EXPECT_EQ(index.lookup(EventId(1))[0], 10.0);
}

TEST(CombineElts, DisjointTables) {
  const std::vector<EventLossTable> elts{EventLossTable(1, {{EventId(1), 3.0}}),
                                         EventLossTable(2, {{EventId(2), 4.0}})};
  const CombinedEltIndex index = combine_elts(elts);
  EXPECT_EQ(index.size(), 2u);
  EXPECT_EQ(index.lookup(EventId(1))[0], 3.0);
  EXPECT_EQ(index.lookup(EventId(1))[1], 0.0);
  EXPECT_EQ(index.lookup(EventId(2))[0], 0.0);
  EXPECT_EQ(index.lookup(EventId(2))[1], 4.0);
}

TEST(CombineElts, EmptyListSignalsUncoveredLayer) {
  EXPECT_THROW(combine_elts(std::span<const EventLossTable>{}), UncoveredLayerError);
}

TEST(LookupLosses, AbsentEventYieldsZeros) {
  std::vector<EventLossTable> elts;
  for (std::uint32_t id = 1; id <= 16; ++id) elts.emplace_back(id, std::vector<EltRecord>{{EventId(1), 1.0}});
  const CombinedEltIndex index = combine_elts(elts);
  const auto v = lookup_losses(index, EventId(777));
  ASSERT_EQ(v.size(), 16u);
  for (double x : v) EXPECT_EQ(x, 0.0);
}

// combine + lookup equals per-ELT lookups on a randomized universe, for both
// the compact-id and the sparse-id index layouts.
TEST(CombineElts, MatchesPerTableLookupsOnRandomTables) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 200; ++round) {
    const bool sparse = round % 2 == 1;
    const std::uint32_t stride = sparse ? 1000003 : 1;
    const std::uint32_t universe = 60;
    std::uniform_int_distribution<std::uint32_t> nelts(1, 5);
    std::vector<EventLossTable> elts;
    std::set<std::uint32_t> keys;
    const std::uint32_t n = nelts(rng);
    for (std::uint32_t id = 1; id <= n; ++id) {
      std::bernoulli_distribution covered(0.4);
      std::vector<EltRecord> recs;
      for (std::uint32_t e = 1; e <= universe; ++e) {
        if (covered(rng)) {
          recs.push_back({EventId(e * stride), static_cast<double>(rng() % 1000) / 7.0});
          keys.insert(e * stride);
        }
      }
      elts.emplace_back(id, std::move(recs));
    }
    const CombinedEltIndex index = combine_elts(elts);
    EXPECT_EQ(index.size(), keys.size());
    for (std::uint32_t e = 1; e <= universe + 5; ++e) {
      const EventId id(e * stride);
      const auto got = index.lookup(id);
      EXPECT_EQ(std::vector<double>(got.begin(), got.end()), brute_force_losses(elts, id));
      EXPECT_EQ(index.contains(id), keys.contains(id.value));
    }
  }
}

TEST(YearEventTable, RejectsRaggedTrials) {
  std::vector<Trial> trials{Trial{1, {{EventId(1), 0.0}, {EventId(2), 1.0}}},
                            Trial{2, {{EventId(1), 0.0}}}};
  EXPECT_THROW(YearEventTable::from_trials(trials), ValidationError);
}

TEST(YearEventTable, RejectsBrokenInvariants) {
  // non-dense ids
  EXPECT_THROW(YearEventTable::from_trials(std::vector<Trial>{Trial{2, {{EventId(1), 0.0}}}}),
               ValidationError);
  // decreasing timestamps
  EXPECT_THROW(YearEventTable::from_trials(std::vector<Trial>{
                   Trial{1, {{EventId(1), 5.0}, {EventId(2), 1.0}}}}),
               ValidationError);
  // reserved event id
  EXPECT_THROW(YearEventTable::from_trials(std::vector<Trial>{Trial{1, {{EventId(0), 5.0}}}}),
               ValidationError);
  // timestamp outside the year
  EXPECT_THROW(YearEventTable::from_trials(std::vector<Trial>{Trial{1, {{EventId(1), 365.0}}}}),
               ValidationError);
}

TEST(YearEventTable, TrialViewsAndConversion) {
  std::mt19937_64 rng(3);
  const YearEventTable yet = fixtures::random_yet(rng, 7, 5, 30);
  const auto trials = yet.to_trials();
  ASSERT_EQ(trials.size(), 7u);
  EXPECT_EQ(YearEventTable::from_trials(trials), yet);
  const TrialView v = yet.trial(3);
  EXPECT_EQ(v.trial_id, 3u);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.events[0], trials[2].events[0].event);
  EXPECT_THROW(yet.trial(0), PreconditionError);
  EXPECT_THROW(yet.trial(8), PreconditionError);
}

TEST(EventLossTable, EnforcesUniqueEventsAndNonNegativeLosses) {
  EXPECT_THROW(EventLossTable(1, {{EventId(1), 1.0}, {EventId(1), 2.0}}), ValidationError);
  EXPECT_THROW(EventLossTable(1, {{EventId(1), -1.0}}), ValidationError);
  const EventLossTable elt(1, {{EventId(5), 1.0}, {EventId(2), 2.0}});
  EXPECT_EQ(elt.records()[0].event, EventId(2));
  EXPECT_EQ(elt.find(EventId(5)), 1.0);
  EXPECT_FALSE(elt.find(EventId(3)).has_value());
}
