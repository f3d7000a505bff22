#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "qtomo/error.hpp"
#include "qtomo/io.hpp"
#include "test_util.hpp"

using namespace qtomo;

TEST(Io, FormatDoubleRoundTrips) {
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = std::pow(10.0, u(g)) * (i % 2 ? -1.0 : 1.0);
    EXPECT_EQ(std::stod(io::format_double(x)), x) << io::format_double(x);
  }
  EXPECT_EQ(io::format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(io::format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(io::format_double(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(io::format_double(std::nan("")), "nan");
  EXPECT_TRUE(io::number(std::numeric_limits<double>::infinity()).is_null());
  EXPECT_TRUE(io::number(std::nan("")).is_null());
  EXPECT_EQ(io::number(2.5).get<double>(), 2.5);
}

TEST(Io, StatesRoundTrip) {
  std::mt19937_64 g(2);
  const DensityMatrix rho = test::random_state(4, 3, g);
  const DensityMatrix back = io::density_from_json(io::Json::parse(io::to_json(rho).dump()));
  EXPECT_EQ(test::max_abs(rho.matrix() - back.matrix()), 0.0);

  const PurifiedState s(test::random_amplitudes(4, 2, g));
  const PurifiedState t = io::purified_from_json(io::Json::parse(io::to_json(s).dump()));
  EXPECT_EQ(t.rank(), 2);
  EXPECT_EQ(test::max_abs(s.amplitudes() - t.amplitudes()), 0.0);

  io::Json bad = io::to_json(rho);
  bad["re"].erase(1);
  EXPECT_THROW(io::density_from_json(bad), InvalidArgument);
}

TEST(Io, ProtocolRoundTrip) {
  for (const Protocol& p : {named_protocol("J4").scaled(3.0), b9_protocol(1.1),
                            polyhedron_protocol(Solid::cube, 2)}) {
    const Protocol q = io::protocol_from_json(io::Json::parse(io::to_json(p).dump()));
    ASSERT_EQ(q.size(), p.size());
    EXPECT_EQ(q.label(), p.label());
    EXPECT_EQ(test::max_abs(q.exposures() - p.exposures()), 0.0);
    // Intensities are the observable content of a row.
    std::mt19937_64 g(3);
    const DensityMatrix rho = test::random_state(p.dim(), p.dim(), g);
    EXPECT_LT(test::max_abs(intensities(p, rho) - intensities(q, rho)), 1e-15);
  }
}

TEST(Io, ProtocolErrorsNameTheRow) {
  io::Json j = io::to_json(named_protocol("R4"));
  j["rows"][2]["t"] = -1.0;
  try {
    io::protocol_from_json(j);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("row 2:"), std::string::npos) << e.what();
  }
  j = io::to_json(named_protocol("R4"));
  j["rows"][1]["re"] = io::Json::array({1.0});
  EXPECT_THROW(io::protocol_from_json(j), InvalidArgument);
  j["rows"] = io::Json::array();
  EXPECT_THROW(io::protocol_from_json(j), InvalidArgument);
}

TEST(Io, CountsRoundTrip) {
  const Protocol p = named_protocol("R4").scaled(0.3);
  const std::vector<double> k{0, 17, 123456789, 3};
  const io::CountsTable t = io::parse_counts_csv(io::counts_csv(p, k));
  EXPECT_EQ(t.counts, k);
  for (int j = 0; j < p.size(); ++j) EXPECT_EQ(t.exposures[static_cast<std::size_t>(j)], 0.3);
  // CRLF and blank lines are tolerated.
  EXPECT_EQ(io::parse_counts_csv("row_id,t,k\r\n0,1,5\r\n\r\n1,1,6\r\n").counts,
            (std::vector<double>{5, 6}));
  EXPECT_THROW(io::counts_csv(p, {1, 2}), DimensionMismatch);
}

TEST(Io, CountsErrorsNameTheLine) {
  const std::pair<const char*, const char*> cases[] = {
      {"row_id,t,k\n0,1,5\n1,1,x\n", "counts line 3:"},
      {"row_id,t,k\n0,1,5\n2,1,6\n", "counts line 3:"},
      {"row_id,t,k\n0,0,5\n", "counts line 2:"},
      {"row_id,t,k\n0,1,-1\n", "counts line 2:"},
      {"row_id,t,k\n0,1\n", "counts line 2:"},
      {"id,t,k\n0,1,1\n", "counts line 1:"},
  };
  for (const auto& [text, needle] : cases) {
    try {
      io::parse_counts_csv(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const InvalidArgument& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  }
  EXPECT_THROW(io::parse_counts_csv(""), InvalidArgument);
  EXPECT_THROW(io::parse_counts_csv("row_id,t,k\n"), InvalidArgument);
}

TEST(Io, ScanCsvAndSummary) {
  ScanField f;
  f.coordinate_names = {"x"};
  f.value_names = {"L"};
  f.coordinates.resize(3, 1);
  f.coordinates << 0.0, 0.5, 1.0;
  f.values.resize(3, 1);
  f.values << 2.0, std::numeric_limits<double>::infinity(), 1.5;
  f.singular = {false, true, false};
  const std::string csv = io::scan_csv(f);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,L,singular");
  EXPECT_NE(csv.find("0.5,inf,1"), std::string::npos) << csv;
  const io::Json s = io::scan_summary(f);
  EXPECT_EQ(s.at("min").get<double>(), 1.5);
  EXPECT_EQ(s.at("max").get<double>(), 2.0);
  EXPECT_EQ(s.at("argmin").get<int>(), 2);
  EXPECT_EQ(s.at("argmax_point").at("x").get<double>(), 0.0);
  EXPECT_EQ(s.at("singular_points"), io::Json::array({1}));
}

TEST(Io, BatchCsv) {
  TrialBatch b;
  b.losses = {0.5, 0.25};
  b.z = {4.0, -std::log10(0.25)};
  b.converged = {true, false};
  EXPECT_EQ(io::batch_csv(b),
            "trial,loss,z,converged\n0,0.5,4,1\n1,0.25," + io::format_double(b.z[1]) + ",0\n");
}

TEST(Io, WriteTextCreatesDirectories) {
  const auto dir = std::filesystem::temp_directory_path() / "qtomo_io_test" / "a" / "b";
  std::filesystem::remove_all(dir.parent_path().parent_path());
  io::write_text(dir / "f.txt", "hello\n");
  EXPECT_EQ(io::read_text(dir / "f.txt"), "hello\n");
  EXPECT_THROW(io::read_text(dir / "missing.txt"), IoError);
  std::filesystem::remove_all(dir.parent_path().parent_path());
}
