#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "lcsmto/grid.hpp"
#include "lcsmto/physics.hpp"
#include "lcsmto/schedule.hpp"

namespace lcsmto {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class DensityMode { Train, Hard };

/// A density raster on the collocation lattice (row-major, cell-centered).
struct DensityRaster {
  int nx = 0, ny = 0;
  double width = 1.0, height = 1.0;
  Eigen::VectorXd rho;
};

/// Writes density.csv (x, y, rho) and density.pgm (white = fluid). Hard mode
/// thresholds at psi >= 0 upstream, so values are already in {0, 1}.
void export_density(const DensityRaster& raster, DensityMode mode,
                    const std::filesystem::path& out_dir);

DensityRaster import_density_csv(const std::filesystem::path& path);

/// Per-point residual maps (x, y, r_mx, r_my, r_c).
void export_residuals(const FieldBatch& batch, const CollocationGrid& grid,
                      const std::filesystem::path& path);

/// Appends per-epoch rows to history.csv; writes the header on creation.
class HistoryWriter {
 public:
  HistoryWriter(const std::filesystem::path& path, bool append);
  void write_row(int epoch, const LossBreakdown& b, double lr, double wall_time_s);

 private:
  std::filesystem::path path_;
};

struct RepeatStats {
  int count = 0;
  double mean = 0, median = 0, stddev = 0, min = 0, max = 0;
};

RepeatStats compute_stats(std::vector<double> values);

struct RepeatSummary {
  std::string problem;
  RepeatStats j;    // final training objective
  RepeatStats j_c;  // oracle-recomputed power, if present
  bool has_j_c = false;
};

/// Reads summary.json from each run directory; errors on mixed problems.
RepeatSummary summarize_repeats(const std::vector<std::filesystem::path>& run_dirs);

std::string format_summary_table(const RepeatSummary& s);
std::string format_summary_csv(const RepeatSummary& s);

}  // namespace lcsmto
