#include "eegstack/topomap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "eegstack/binary_io.hpp"
#include "eegstack/common.hpp"

namespace eegstack {

ErpSummary parse_erp_summary(std::string_view s) {
  if (s == "rms") return ErpSummary::rms;
  if (s == "mean") return ErpSummary::mean;
  if (s == "mean_abs") return ErpSummary::mean_abs;
  throw std::invalid_argument("unknown ERP summary '" + std::string(s) + "'");
}

std::vector<double> compute_erp(const TrialSet& ts, std::optional<int> class_index, std::string_view interval_name,
                                ErpSummary summary) {
  const Interval* iv = ts.find_interval(interval_name);
  if (!iv) throw DataError("unknown interval '" + std::string(interval_name) + "'");
  if (class_index && (*class_index < 0 || static_cast<std::size_t>(*class_index) >= ts.n_classes()))
    throw DataError("class index out of range");
  std::vector<std::size_t> trials;
  for (std::size_t t = 0; t < ts.n_trials; ++t)
    if (!class_index || ts.labels[t] == *class_index) trials.push_back(t);
  if (trials.empty()) throw DataError("no trials selected for ERP");
  const std::size_t len = iv->length();
  if (len == 0) throw DataError("interval '" + std::string(interval_name) + "' is empty");

  std::vector<double> out(ts.n_channels());
  std::vector<double> avg(len);
  for (std::size_t c = 0; c < ts.n_channels(); ++c) {
    std::fill(avg.begin(), avg.end(), 0.0);
    for (auto t : trials) {
      const auto x = ts.signal(t, c);
      for (std::size_t s = 0; s < len; ++s) avg[s] += x[iv->start + s];
    }
    double acc = 0.0;
    for (double& v : avg) {
      v /= static_cast<double>(trials.size());
      switch (summary) {
        case ErpSummary::rms: acc += v * v; break;
        case ErpSummary::mean: acc += v; break;
        case ErpSummary::mean_abs: acc += std::abs(v); break;
      }
    }
    acc /= static_cast<double>(len);
    out[c] = summary == ErpSummary::rms ? std::sqrt(acc) : acc;
  }
  return out;
}

double grid_coord(std::size_t index, std::size_t size) {
  return -1.0 + static_cast<double>(2 * index + 1) / static_cast<double>(size);
}

bool ScalpField::inside(std::size_t row, std::size_t col) const {
  const double x = grid_coord(col, size), y = -grid_coord(row, size);
  return x * x + y * y <= 1.0;
}

ScalpField render_topomap(std::span<const double> values, std::span<const Position> positions, std::size_t grid) {
  if (positions.empty()) throw DataError("topomap: channel positions are missing");
  if (values.size() != positions.size()) throw DataError("topomap: value count does not match position count");
  if (values.size() < 3) throw DataError("topomap: need at least 3 channels");
  if (grid < 16) throw std::invalid_argument("topomap: grid size must be at least 16");
  for (double v : values)
    if (!std::isfinite(v)) throw DataError("topomap: non-finite channel value");

  ScalpField f;
  f.size = grid;
  f.grid.assign(grid * grid, std::numeric_limits<double>::quiet_NaN());
  f.min_value = std::numeric_limits<double>::infinity();
  f.max_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid; ++i) {
    const double y = -grid_coord(i, grid);
    for (std::size_t j = 0; j < grid; ++j) {
      const double x = grid_coord(j, grid);
      if (x * x + y * y > 1.0) continue;
      double num = 0.0, den = 0.0;
      for (std::size_t c = 0; c < values.size(); ++c) {
        const double dx = x - positions[c].x, dy = y - positions[c].y;
        const double d2 = std::max(dx * dx + dy * dy, 1e-12);
        const double w = 1.0 / d2;
        num += w * values[c];
        den += w;
      }
      const double v = num / den;
      f.grid[i * grid + j] = v;
      f.min_value = std::min(f.min_value, v);
      f.max_value = std::max(f.max_value, v);
    }
  }
  return f;
}

std::vector<std::uint8_t> encode_pgm(const ScalpField& field) {
  const std::string header = "P5\n" + std::to_string(field.size) + " " + std::to_string(field.size) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const double range = field.max_value - field.min_value;
  for (double v : field.grid) {
    std::uint8_t px = 0;
    if (!std::isnan(v))
      px = range > 0.0 ? static_cast<std::uint8_t>(std::lround(255.0 * (v - field.min_value) / range)) : 128;
    out.push_back(px);
  }
  return out;
}

void write_pgm(const ScalpField& field, const std::filesystem::path& path) { io::write_file(path, encode_pgm(field)); }

void write_field_csv(const ScalpField& field, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  for (std::size_t i = 0; i < field.size; ++i) {
    for (std::size_t j = 0; j < field.size; ++j) {
      if (j) out << ',';
      const double v = field.at(i, j);
      if (std::isnan(v))
        out << "nan";
      else
        out << v;
    }
    out << '\n';
  }
}

std::vector<std::pair<std::string, Position>> read_positions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<std::pair<std::string, Position>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> parts;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) parts.push_back(cell);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (parts.size() != 3) throw DataError(where + ": expected channel_name,x,y");
    if (line_no == 1 && parts[0] == "channel_name") continue;
    Position p;
    try {
      p.x = std::stod(parts[1]);
      p.y = std::stod(parts[2]);
    } catch (const std::exception&) {
      throw DataError(where + ": bad coordinate");
    }
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x * p.x + p.y * p.y > 1.0 + 1e-12)
      throw DataError(where + ": position outside the unit disc");
    out.emplace_back(parts[0], p);
  }
  return out;
}

void write_positions_csv(std::span<const std::string> names, std::span<const Position> positions,
                         const std::filesystem::path& path) {
  if (names.size() != positions.size()) throw DataError("write_positions_csv: length mismatch");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "channel_name,x,y\n";
  for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << ',' << positions[i].x << ',' << positions[i].y << '\n';
}

}  // namespace eegstack
