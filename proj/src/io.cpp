#include "lcsmto/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace lcsmto {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path, std::ios_base::openmode mode = std::ios_base::out) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void export_density(const DensityRaster& raster, DensityMode mode, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  if (!raster.rho.allFinite()) throw IoError("density raster contains non-finite values");

  const double hx = raster.width / raster.nx;
  const double hy = raster.height / raster.ny;
  {
    auto out = open_out(out_dir / "density.csv");
    out << "x,y,rho\n";
    out.precision(17);
    for (int iy = 0; iy < raster.ny; ++iy)
      for (int ix = 0; ix < raster.nx; ++ix)
        out << (ix + 0.5) * hx << ',' << (iy + 0.5) * hy << ','
            << raster.rho[static_cast<long>(iy) * raster.nx + ix] << '\n';
  }
  {
    // PGM origin is top-left, lattice origin bottom-left; flip rows.
    auto out = open_out(out_dir / "density.pgm", std::ios_base::binary);
    out << "P5\n" << raster.nx << ' ' << raster.ny << "\n255\n";
    for (int iy = raster.ny - 1; iy >= 0; --iy) {
      for (int ix = 0; ix < raster.nx; ++ix) {
        double r = raster.rho[static_cast<long>(iy) * raster.nx + ix];
        if (mode == DensityMode::Hard) r = r >= 0.5 ? 1.0 : 0.0;
        out.put(static_cast<char>(std::lround(std::clamp(r, 0.0, 1.0) * 255.0)));
      }
    }
  }
}

DensityRaster import_density_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read density file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("x,y,rho", 0) != 0)
    throw IoError("malformed density file (missing x,y,rho header): " + path.string());

  std::vector<double> xs, ys, rs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    double x, y, r;
    char c1, c2;
    if (!(ss >> x >> c1 >> y >> c2 >> r) || c1 != ',' || c2 != ',')
      throw IoError("malformed density row: " + line);
    if (r < -1e-9 || r > 1.0 + 1e-9)
      throw IoError("density value outside [0, 1]: " + std::to_string(r));
    xs.push_back(x);
    ys.push_back(y);
    rs.push_back(std::clamp(r, 0.0, 1.0));
  }
  if (rs.empty()) throw IoError("empty density file: " + path.string());

  // Row-major with y as the slow index: nx = run length of the first y value.
  size_t nx = 1;
  while (nx < ys.size() && ys[nx] == ys[0]) ++nx;
  if (rs.size() % nx != 0)
    throw IoError("density file is not a full raster: " + path.string());
  DensityRaster raster;
  raster.nx = static_cast<int>(nx);
  raster.ny = static_cast<int>(rs.size() / nx);
  const double hx = xs[1] - xs[0];
  const double hy = raster.ny > 1 ? ys[nx] - ys[0] : hx;
  raster.width = raster.nx * hx;
  raster.height = raster.ny * hy;
  raster.rho = Eigen::Map<Eigen::VectorXd>(rs.data(), rs.size());
  return raster;
}

void export_residuals(const FieldBatch& batch, const CollocationGrid& grid,
                      const fs::path& path) {
  auto out = open_out(path);
  out << "x,y,r_mx,r_my,r_c\n";
  out.precision(17);
  for (int j = 0; j < grid.count(); ++j)
    out << grid.points(j, 0) << ',' << grid.points(j, 1) << ',' << batch.r_mx[j] << ','
        << batch.r_my[j] << ',' << batch.r_c[j] << '\n';
}

HistoryWriter::HistoryWriter(const fs::path& path, bool append) : path_(path) {
  if (!append || !fs::exists(path)) {
    auto out = open_out(path);
    out << "epoch,total,L_o,R_mx,R_my,R_c,C1sq,V_scheduled,mu_p,alpha_1,alpha_2,alpha_3,"
           "alpha_4,lr,wall_time_s\n";
  }
}

void HistoryWriter::write_row(int epoch, const LossBreakdown& b, double lr, double wall_time_s) {
  auto out = open_out(path_, std::ios_base::app);
  out.precision(17);
  out << epoch << ',' << b.total << ',' << b.objective << ',' << b.r_mx << ',' << b.r_my << ','
      << b.r_c << ',' << b.c1_sq << ',' << b.v_scheduled << ',' << b.mu_p << ',' << b.alpha[0]
      << ',' << b.alpha[1] << ',' << b.alpha[2] << ',' << b.alpha[3] << ',' << lr << ','
      << wall_time_s << '\n';
}

RepeatStats compute_stats(std::vector<double> values) {
  RepeatStats s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  const size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = values.size() > 1 ? std::sqrt(var / (values.size() - 1)) : 0.0;
  return s;
}

RepeatSummary summarize_repeats(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.empty()) throw IoError("no run directories given");
  RepeatSummary out;
  std::vector<double> js, jcs;
  for (const auto& dir : run_dirs) {
    std::ifstream in(dir / "summary.json");
    if (!in) throw IoError("missing summary.json in " + dir.string());
    json j = json::parse(in);
    const std::string problem = j.at("problem").get<std::string>();
    if (out.problem.empty())
      out.problem = problem;
    else if (out.problem != problem)
      throw IoError("mixed problems in one summary: " + out.problem + " vs " + problem);
    js.push_back(j.at("objective").get<double>());
    if (j.contains("oracle_power") && !j.at("oracle_power").is_null())
      jcs.push_back(j.at("oracle_power").get<double>());
  }
  out.j = compute_stats(js);
  if (!jcs.empty()) {
    out.j_c = compute_stats(jcs);
    out.has_j_c = true;
  }
  return out;
}

namespace {

std::string stats_row(const std::string& label, const RepeatStats& s) {
  std::ostringstream ss;
  ss.precision(6);
  ss << label << "  mean=" << s.mean << "  median=" << s.median << "  std=" << s.stddev
     << "  min=" << s.min << "  max=" << s.max << "  (n=" << s.count << ")";
  return ss.str();
}

}  // namespace

std::string format_summary_table(const RepeatSummary& s) {
  std::ostringstream ss;
  ss << "problem: " << s.problem << '\n' << stats_row("J  ", s.j) << '\n';
  if (s.has_j_c) ss << stats_row("J_c", s.j_c) << '\n';
  return ss.str();
}

std::string format_summary_csv(const RepeatSummary& s) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "problem,metric,count,mean,median,std,min,max\n";
  ss << s.problem << ",J," << s.j.count << ',' << s.j.mean << ',' << s.j.median << ','
     << s.j.stddev << ',' << s.j.min << ',' << s.j.max << '\n';
  if (s.has_j_c)
    ss << s.problem << ",J_c," << s.j_c.count << ',' << s.j_c.mean << ',' << s.j_c.median << ','
       << s.j_c.stddev << ',' << s.j_c.min << ',' << s.j_c.max << '\n';
  return ss.str();
}

}  // namespace lcsmto
