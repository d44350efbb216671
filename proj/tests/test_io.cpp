#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "latred/factorization.hpp"
#include "latred/io.hpp"

using namespace latred;
using namespace latred::io;

namespace {

std::size_t parse_error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    read_dataset(in);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(Io, RealMatrixRoundTripIsExact) {
  const RealMatrix m = generate_basis(4, 3).matrix();
  const RealMatrix back = real_matrix_from_json(json::parse(to_json(m).dump()));
  EXPECT_TRUE(back == m);
}

TEST(Io, IntegerEntriesKeepFullPrecision) {
  IntMatrix m = IntMatrix::identity(2);
  m(0, 1) = BigInt("123456789012345678901234567890");
  m(1, 0) = -7;
  const json j = to_json(m);
  EXPECT_TRUE(j["rows"][0][1].is_string());
  EXPECT_TRUE(int_matrix_from_json(json::parse(j.dump())) == m);
  // Plain JSON integers are accepted too.
  EXPECT_TRUE(int_matrix_from_json(json::parse(R"({"n":2,"rows":[[1,0],[0,1]]})")) ==
              IntMatrix::identity(2));
  EXPECT_THROW(int_matrix_from_json(json::parse(R"({"n":1,"rows":[["1.5"]]})")), ParseError);
}

TEST(Io, DatasetRoundTrip) {
  const DatasetHeader h{3, 5, 42, kGenerator};
  std::vector<RealMatrix> mats;
  for (std::uint64_t s = 0; s < 5; ++s) mats.push_back(generate_basis(3, s).matrix());
  std::ostringstream out;
  write_dataset(out, h, mats);
  std::istringstream in(out.str());
  const Dataset d = read_dataset(in);
  EXPECT_EQ(d.header.n, 3u);
  EXPECT_EQ(d.header.count, 5u);
  EXPECT_EQ(d.header.seed, 42u);
  EXPECT_EQ(d.header.generator, kGenerator);
  ASSERT_EQ(d.matrices.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_TRUE(d.matrices[k] == mats[k]);
  EXPECT_EQ(to_bases(d).size(), 5u);
}

TEST(Io, HeaderlessDatasetAndBlankLines) {
  std::istringstream in("{\"n\":2,\"rows\":[[1,0],[0,1]]}\n\n{\"n\":2,\"rows\":[[2,1],[0,1]]}\n");
  const Dataset d = read_dataset(in);
  EXPECT_EQ(d.matrices.size(), 2u);
  EXPECT_EQ(d.header.n, 2u);
}

TEST(Io, ErrorsCarryLineNumbers) {
  const std::string header = "{\"n\":2,\"count\":2,\"seed\":0,\"generator\":\"expm-uniform01\"}\n";
  const std::string ok = "{\"n\":2,\"rows\":[[1,0],[0,1]]}\n";
  EXPECT_EQ(parse_error_line(header + ok + "{not json\n"), 3u);
  EXPECT_EQ(parse_error_line(header + "{\"n\":2,\"rows\":[[1,0]]}\n" + ok), 2u);
  EXPECT_EQ(parse_error_line(header + ok + "{\"n\":3,\"rows\":[[1,0,0],[0,1,0],[0,0,1]]}\n"), 3u);
  EXPECT_EQ(parse_error_line(header + ok + "{\"n\":2,\"rows\":[[1,\"x\"],[0,1]]}\n"), 3u);
  EXPECT_EQ(parse_error_line(ok + header), 2u);
  EXPECT_GT(parse_error_line(header + ok), 0u);  // count mismatch
  std::istringstream in(header + ok + "{bad\n");
  try {
    read_dataset(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Io, SingularMatricesAreRejected) {
  std::istringstream in("{\"n\":2,\"rows\":[[1,2],[2,4]]}\n");
  const Dataset d = read_dataset(in);
  EXPECT_THROW(to_bases(d), ParseError);
}

TEST(Io, FactorizationRoundTrip) {
  IntMatrix m = IntMatrix::identity(4);
  m(0, 3) = 5;
  m(3, 1) = -2;
  m(2, 0) = 3;
  const MoveFactorization f = factor(UnimodularMatrix(m));
  const MoveFactorization back = factorization_from_json(json::parse(to_json(f).dump()));
  EXPECT_TRUE(back.target == f.target);
  ASSERT_EQ(back.moves.size(), f.moves.size());
  EXPECT_TRUE(product(back.moves, 4) == m);
  EXPECT_TRUE(verify_factorization(back));
  EXPECT_THROW(factorization_from_json(json::parse("{\"n\":2}")), ParseError);
}

TEST(Io, CheckpointRoundTrip) {
  PolicyConfig cfg;
  cfg.layers = 2;
  cfg.width = 6;
  cfg.move_fill = MoveFill::single_entry;
  const PolicyParams p = PolicyParams::initialize(cfg, 9);
  TrainConfig tc;
  const json j = checkpoint_to_json(p, 5, 9, &tc);
  EXPECT_EQ(j["L"], 2);
  EXPECT_EQ(j["d"], 6);
  EXPECT_EQ(j["normalization"], "trace");
  EXPECT_EQ(j["optimizer"]["name"], "adam");
  const Checkpoint c = checkpoint_from_json(json::parse(j.dump()));
  EXPECT_TRUE(c.params == p);
  EXPECT_EQ(c.n, 5u);
  EXPECT_EQ(c.seed, 9u);
  json broken = j;
  broken["tensors"].erase("head.bias");
  EXPECT_THROW(checkpoint_from_json(broken), ParseError);
  broken = j;
  broken["tensors"]["head.bias"]["data"] = {1.0};
  EXPECT_THROW(checkpoint_from_json(broken), Error);
}

TEST(Io, CurveCsvLeavesNonEvaluationEpochsEmpty) {
  CurvePoint a{1, 2.5, std::nullopt, {0.25, 0.125, 10}};
  CurvePoint b{2, 2.0, Summary{1.5, 0.5, 10}, {0.25, 0.125, 10}};
  std::ostringstream out;
  write_curve_csv(out, {a, b});
  EXPECT_EQ(out.str(),
            "epoch,train_loss,test_mean_logdefect,test_std_logdefect,lll_mean_logdefect,"
            "lll_std_logdefect\n"
            "1,2.5,,,0.25,0.125\n"
            "2,2.0,1.5,0.5,0.25,0.125\n");
  EXPECT_EQ(format_double(0.1), "0.1");
}

TEST(Io, ReportJsonHasNoTimings) {
  EvalReport r;
  r.n = 2;
  r.k = 2;
  r.policy = {1.0, 2.0};
  r.lll = {0.5, 0.25};
  r.identity = {3.0, 3.0};
  r.policy_seconds = 1.23;
  resummarize(r);
  const json j = report_to_json(r, {worst_p_analysis(r, 0.5)});
  EXPECT_EQ(j["count"], 2);
  EXPECT_EQ(j["worst_p"][0]["size"], 1);
  EXPECT_EQ(j["worst_p"][0]["by_policy"]["indices"][0], 1);
  EXPECT_EQ(j.dump().find("seconds"), std::string::npos);
}
