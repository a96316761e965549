#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eegstack/trialset.hpp"

namespace eegstack {

enum class ErpSummary { rms, mean, mean_abs };

ErpSummary parse_erp_summary(std::string_view s);

// Averages the selected trials per channel over the interval, then reduces
// each averaged waveform to one number.
std::vector<double> compute_erp(const TrialSet& ts, std::optional<int> class_index, std::string_view interval_name,
                                ErpSummary summary = ErpSummary::rms);

// Grid cell (i, j) covers x = -1 + (2j + 1) / G, y = 1 - (2i + 1) / G; cells
// outside the unit circle hold NaN.
struct ScalpField {
  std::size_t size = 0;
  std::vector<double> grid;  // row-major G x G
  double min_value = 0.0;    // range over in-head cells
  double max_value = 0.0;

  double at(std::size_t row, std::size_t col) const { return grid[row * size + col]; }
  bool inside(std::size_t row, std::size_t col) const;
};

double grid_coord(std::size_t index, std::size_t size);  // -1 + (2 index + 1) / size

// Inverse-distance weighting with power 2 and a 1e-6 distance floor.
ScalpField render_topomap(std::span<const double> values, std::span<const Position> positions, std::size_t grid = 64);

// Binary P5 graymap; in-head values map linearly to 0..255, outside is 0.
std::vector<std::uint8_t> encode_pgm(const ScalpField& field);
void write_pgm(const ScalpField& field, const std::filesystem::path& path);
// Raw field, one grid row per line, "nan" outside the head.
void write_field_csv(const ScalpField& field, const std::filesystem::path& path);

// channel_name,x,y
std::vector<std::pair<std::string, Position>> read_positions_csv(const std::filesystem::path& path);
void write_positions_csv(std::span<const std::string> names, std::span<const Position> positions,
                         const std::filesystem::path& path);

}  // namespace eegstack
