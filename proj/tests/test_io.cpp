#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lcsmto/io.hpp"

using namespace lcsmto;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("lcsmto_test_" +
            std::to_string(
                std::chrono::steady_clock::now().time_since_epoch().count()) +
            "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("density export/import round trip preserves values and layout") {
  TempDir tmp;
  DensityRaster r;
  r.nx = 6;
  r.ny = 4;
  r.width = 3.0;
  r.height = 1.0;
  r.rho.resize(24);
  for (int i = 0; i < 24; ++i) r.rho[i] = (i % 7) / 7.0;

  export_density(r, DensityMode::Train, tmp.path);
  CHECK(fs::exists(tmp.path / "density.csv"));
  CHECK(fs::exists(tmp.path / "density.pgm"));

  const DensityRaster back = import_density_csv(tmp.path / "density.csv");
  CHECK(back.nx == r.nx);
  CHECK(back.ny == r.ny);
  CHECK(back.width == doctest::Approx(r.width));
  CHECK(back.height == doctest::Approx(r.height));
  CHECK((back.rho - r.rho).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("pgm is binary-valued in hard mode and row-flipped") {
  TempDir tmp;
  DensityRaster r;
  r.nx = 2;
  r.ny = 2;
  r.rho.resize(4);
  r.rho << 0.0, 1.0, 1.0, 0.0;  // row 0 (bottom): 0 1; row 1 (top): 1 0
  export_density(r, DensityMode::Hard, tmp.path);
  const std::string pgm = slurp(tmp.path / "density.pgm");
  const std::string header = "P5\n2 2\n255\n";
  REQUIRE(pgm.size() == header.size() + 4);
  CHECK(pgm.substr(0, header.size()) == header);
  // Image rows run top-down, so the top lattice row "1 0" must come first.
  const auto* px = reinterpret_cast<const unsigned char*>(pgm.data() + header.size());
  CHECK(px[0] == 255);
  CHECK(px[1] == 0);
  CHECK(px[2] == 0);
  CHECK(px[3] == 255);
}

TEST_CASE("missing density file raises IoError") {
  CHECK_THROWS_AS(import_density_csv("/nonexistent/density.csv"), IoError);
}

TEST_CASE("history writer emits the documented header and appends rows") {
  TempDir tmp;
  const fs::path hist = tmp.path / "history.csv";
  {
    HistoryWriter w(hist, /*append=*/false);
    LossBreakdown b;
    b.objective = 1.5;
    b.total = 12.0;
    b.mu_p = 10.0;
    b.v_scheduled = 0.95;
    w.write_row(0, b, 1e-3, 0.25);
    w.write_row(1, b, 1e-3, 0.5);
  }
  std::ifstream in(hist);
  std::string header, row0, row1, extra;
  std::getline(in, header);
  CHECK(header ==
        "epoch,total,L_o,R_mx,R_my,R_c,C1sq,V_scheduled,mu_p,alpha_1,alpha_2,alpha_3,alpha_4,"
        "lr,wall_time_s");
  std::getline(in, row0);
  std::getline(in, row1);
  CHECK(row0.substr(0, 2) == "0,");
  CHECK(row1.substr(0, 2) == "1,");
  CHECK(!std::getline(in, extra));

  // Append mode keeps existing rows and does not duplicate the header.
  {
    HistoryWriter w(hist, /*append=*/true);
    LossBreakdown b;
    w.write_row(2, b, 1e-3, 0.75);
  }
  std::ifstream in2(hist);
  int lines = 0;
  std::string line;
  while (std::getline(in2, line)) ++lines;
  CHECK(lines == 4);
}

TEST_CASE("repeat statistics") {
  const RepeatStats s = compute_stats({13.7, 13.53, 13.63, 13.72, 13.6});
  CHECK(s.count == 5);
  CHECK(s.median == doctest::Approx(13.63));
  CHECK(s.min == doctest::Approx(13.53));
  CHECK(s.max == doctest::Approx(13.72));
  CHECK(s.mean == doctest::Approx((13.7 + 13.53 + 13.63 + 13.72 + 13.6) / 5.0));

  const RepeatStats even = compute_stats({1.0, 2.0, 3.0, 4.0});
  CHECK(even.median == doctest::Approx(2.5));

  const RepeatStats same = compute_stats({2.0, 2.0, 2.0});
  CHECK(same.stddev == doctest::Approx(0.0));
}

TEST_CASE("summarize_repeats reads run summaries and rejects mixed problems") {
  TempDir tmp;
  auto write_summary = [&](const std::string& dir, const std::string& problem, double j,
                           const char* jc) {
    fs::create_directories(tmp.path / dir);
    std::ofstream out(tmp.path / dir / "summary.json");
    out << "{\"schema_version\":1,\"problem\":\"" << problem << "\",\"objective\":" << j
        << ",\"oracle_power\":" << jc << "}";
  };
  write_summary("a", "rugby", 14.0, "13.6");
  write_summary("b", "rugby", 14.4, "13.8");

  const RepeatSummary s = summarize_repeats({tmp.path / "a", tmp.path / "b"});
  CHECK(s.problem == "rugby");
  CHECK(s.j.count == 2);
  CHECK(s.j.median == doctest::Approx(14.2));
  CHECK(s.has_j_c);
  CHECK(s.j_c.median == doctest::Approx(13.7));

  write_summary("c", "obstacle", 6.0, "null");
  CHECK_THROWS_AS(summarize_repeats({tmp.path / "a", tmp.path / "c"}), IoError);
  CHECK_THROWS_AS(summarize_repeats({tmp.path / "missing"}), IoError);

  const std::string table = format_summary_table(s);
  CHECK(table.find("rugby") != std::string::npos);
  const std::string csv = format_summary_csv(s);
  CHECK(csv.find(',') != std::string::npos);
}

TEST_SUITE_END();
