#include "test_support.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>

using namespace aggrisk;
namespace fs = std::filesystem;

namespace {

class StorageTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = fixtures::scratch_dir("io"); }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

double random_double(std::mt19937_64& rng) {
  // Mix of awkward values: subnormals, huge, many significant digits.
  switch (rng() % 5) {
    case 0: return std::ldexp(static_cast<double>(rng() % 1000 + 1), -1060);
    case 1: return static_cast<double>(rng() % 1000000);
    case 2: return std::bit_cast<double>(rng() & 0x7fefffffffffffffULL);
    default: return std::uniform_real_distribution<double>(0.0, 1e7)(rng);
  }
}

}  // namespace

TEST_F(StorageTest, YetRoundTripAndFileSize) {
  std::mt19937_64 rng(1);
  const YearEventTable yet = fixtures::random_yet(rng, 37, 11, 500);
  const fs::path p = dir_ / "yet.bin";
  io::write_yet(p, yet, 424242);
  EXPECT_EQ(fs::file_size(p), 24u + 37u * 11u * 12u);
  EXPECT_EQ(fs::file_size(p), io::yet_file_size(37, 11));
  io::YetFileHeader h;
  const YearEventTable back = io::read_yet(p, &h);
  EXPECT_EQ(back, yet);
  EXPECT_EQ(h.seed, 424242u);
  EXPECT_EQ(h.trial_count, 37u);
  EXPECT_EQ(h.events_per_trial, 11u);
}

TEST_F(StorageTest, YetHeaderIsLittleEndian) {
  const YearEventTable yet = YearEventTable::from_trials(std::vector<Trial>{
      Trial{1, {{EventId(0x01020304), 1.5}}}});
  const fs::path p = dir_ / "yet.bin";
  io::write_yet(p, yet, 7);
  const std::string bytes = fixtures::slurp(p);
  ASSERT_EQ(bytes.size(), 36u);
  EXPECT_EQ(bytes.substr(0, 4), "YET1");
  EXPECT_EQ(bytes[4], 1);   // trial_count low byte
  EXPECT_EQ(bytes[12], 1);  // events_per_trial low byte
  EXPECT_EQ(bytes[16], 7);  // seed low byte
  EXPECT_EQ(bytes[24], 4);  // event id, least significant byte first
  EXPECT_EQ(bytes[27], 1);
}

TEST_F(StorageTest, YetErrorsAreClassified) {
  std::mt19937_64 rng(2);
  const YearEventTable yet = fixtures::random_yet(rng, 5, 4, 50);
  const fs::path good = dir_ / "good.bin";
  io::write_yet(good, yet);
  const std::string bytes = fixtures::slurp(good);

  auto kind_of = [&](const std::string& content) {
    const fs::path p = dir_ / "bad.bin";
    write_bytes(p, content);
    try {
      io::read_yet(p);
    } catch (const FormatError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no FormatError";
    return FormatError::Kind::invalid_content;
  };
  EXPECT_EQ(kind_of("NOPE" + bytes.substr(4)), FormatError::Kind::bad_magic);
  EXPECT_EQ(kind_of(bytes.substr(0, 10)), FormatError::Kind::truncated);
  EXPECT_EQ(kind_of(bytes.substr(0, bytes.size() - 5)), FormatError::Kind::truncated);
  EXPECT_EQ(kind_of(bytes + std::string(12, '\0')), FormatError::Kind::count_mismatch);
  std::string zero_id = bytes;
  zero_id.replace(24, 4, std::string(4, '\0'));
  EXPECT_EQ(kind_of(zero_id), FormatError::Kind::invalid_content);
  EXPECT_THROW(io::read_yet(dir_ / "missing.bin"), IoError);
}

TEST_F(StorageTest, EltRoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    std::vector<EltRecord> recs;
    for (std::uint32_t e = 1; e < 200; e += 1 + rng() % 5) recs.push_back({EventId(e), random_double(rng)});
    const EventLossTable elt(9, recs);
    const fs::path p = dir_ / io::elt_file_name(9);
    io::write_elt(p, elt);
    const EventLossTable back = io::read_elt(p, 9);
    ASSERT_EQ(back.size(), elt.size());
    for (std::size_t k = 0; k < elt.size(); ++k) {
      ASSERT_EQ(back.records()[k].event, elt.records()[k].event);
      ASSERT_EQ(std::bit_cast<std::uint64_t>(back.records()[k].loss),
                std::bit_cast<std::uint64_t>(elt.records()[k].loss));
    }
  }
}

TEST(EltParse, ErrorsCarryLineNumbers) {
  auto line_of = [](std::string_view text) -> std::size_t {
    try {
      io::parse_elt(text, 1);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("event_id,loss\n1,2\n1,3\n"), 3u);
  EXPECT_EQ(line_of("event_id,loss\n1,2\n2,abc\n"), 3u);
  EXPECT_EQ(line_of("event_id,loss\n1,-2\n"), 2u);
  EXPECT_EQ(line_of("id,loss\n"), 1u);
  EXPECT_EQ(line_of("event_id,loss\n1,2\n"), 0u);
}

TEST_F(StorageTest, LossTableRoundTripIsBitExact) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    TrialLossTable t{LossRole::portfolio, std::nullopt, {}};
    const std::size_t n = 1 + rng() % 300;
    for (std::size_t k = 0; k < n; ++k) t.losses.push_back(rng() % 4 == 0 ? 0.0 : random_double(rng));
    io::write_ylt(dir_ / "ylt.csv", t);
    ASSERT_TRUE(io::read_ylt(dir_ / "ylt.csv").bit_equal(t));
    io::write_llt(dir_ / "llt.csv", t);
    const auto llt = io::read_llt(dir_ / "llt.csv", 3);
    ASSERT_TRUE(llt.bit_equal(t));
    EXPECT_EQ(llt.role, LossRole::layer);
  }
}

TEST(LossTableParse, RejectsDuplicateAndMissingTrials) {
  EXPECT_THROW(io::parse_loss_table("trial_id,loss\n1,1\n1,2\n", LossRole::portfolio), ParseError);
  EXPECT_THROW(io::parse_loss_table("trial_id,loss\n1,1\n3,2\n", LossRole::portfolio), ParseError);
  EXPECT_THROW(io::parse_loss_table("trial_id,loss\n2,1\n1,2\n", LossRole::portfolio), ParseError);
  EXPECT_THROW(io::parse_loss_table("trial_id,loss\n1,-1\n", LossRole::portfolio), ParseError);
  EXPECT_EQ(io::parse_loss_table("trial_id,loss\n1,10\n2,0.5\n", LossRole::portfolio).losses,
            (std::vector<double>{10.0, 0.5}));
}

TEST_F(StorageTest, PortfolioRoundTripKeepsUnlimitedTerms) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 30; ++i) {
    const auto inst = fixtures::random_instance(rng);
    const fs::path p = dir_ / "portfolio.json";
    io::write_portfolio(p, inst.pf);
    const Portfolio back = io::read_portfolio(p, inst.pf.elt_pool);
    ASSERT_EQ(back, inst.pf);
  }
  Portfolio pf = fixtures::worked_example().pf;
  pf.programs[0].layers[0].terms = FinancialTerms{};
  const auto doc = io::portfolio_to_json(pf);
  EXPECT_EQ(doc["programs"][0]["layers"][0]["terms"]["occ_limit"], "inf");
  EXPECT_TRUE(std::isinf(io::portfolio_from_json(doc, pf.elt_pool).programs[0].layers[0].terms.agg_limit));
}

TEST(PortfolioParse, MissingFieldNamesItsPath) {
  auto doc = io::portfolio_to_json(fixtures::worked_example().pf);
  doc["programs"][0]["layers"][0]["terms"].erase("occ_limit");
  try {
    io::portfolio_from_json(doc, fixtures::worked_example().pf.elt_pool);
    FAIL() << "expected MissingFieldError";
  } catch (const MissingFieldError& e) {
    EXPECT_EQ(e.field(), "programs[0].layers[0].terms.occ_limit");
  }
}

TEST(PortfolioParse, UnknownEltIsReferentialError) {
  const auto inst = fixtures::worked_example();
  auto doc = io::portfolio_to_json(inst.pf);
  doc["programs"][0]["layers"][0]["covered_elts"][1] = 99;
  EXPECT_THROW(io::portfolio_from_json(doc, inst.pf.elt_pool), ReferentialError);
}

TEST_F(StorageTest, DatasetRoundTrip) {
  std::mt19937_64 rng(6);
  const auto inst = fixtures::random_instance(rng);
  const io::DataDir d{dir_ / "data"};
  io::save_dataset(d, inst.yet, inst.pf, 99);
  const io::Dataset ds = io::load_dataset(d);
  EXPECT_EQ(ds.yet, inst.yet);
  EXPECT_EQ(ds.portfolio, inst.pf);
  EXPECT_EQ(ds.seed, 99u);
}
