#include "qphase/plotdata.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace qphase {

void sort_rows(CsvTable& t, std::size_t key_columns) {
  std::stable_sort(t.rows.begin(), t.rows.end(), [&](const auto& a, const auto& b) {
    for (std::size_t k = 0; k < key_columns; ++k)
      if (a[k] != b[k]) return a[k] < b[k];
    return false;
  });
}

std::string to_csv(const CsvTable& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += "\n";
  char buf[64];
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw Error(ErrorCode::ShapeMismatch, "csv row width differs from header");
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ",";
      auto res = std::to_chars(buf, buf + sizeof buf, r[i]);
      out.append(buf, res.ptr);
    }
    out += "\n";
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty csv");
  std::stringstream hs(line);
  for (std::string h; std::getline(hs, h, ',');) t.header.push_back(h);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t end = std::min(line.find(',', pos), line.size());
      double v = 0;
      const auto res = std::from_chars(line.data() + pos, line.data() + end, v);
      if (res.ec != std::errc() || res.ptr != line.data() + end)
        throw Error(ErrorCode::ParseError, "bad csv number '" + line.substr(pos, end - pos) + "'");
      row.push_back(v);
      pos = end + 1;
    }
    if (row.size() != t.header.size()) throw Error(ErrorCode::ParseError, "csv row width differs from header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_csv(const CsvTable& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << to_csv(t);
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

CsvTable loss_map_table(const ParameterGrid& grid, const LossMap& map, const std::vector<std::size_t>& training) {
  CsvTable t;
  for (const auto& a : grid.axes) t.header.push_back(a.name);
  t.header.push_back("loss");
  t.header.push_back("training");
  for (std::size_t i = 0; i < map.loss.size(); ++i) {
    auto row = grid.point(i);
    row.push_back(map.loss[i]);
    row.push_back(std::count(training.begin(), training.end(), i) ? 1.0 : 0.0);
    t.rows.push_back(std::move(row));
  }
  sort_rows(t, grid.axes.size());
  return t;
}

std::vector<double> loss_from_table(const CsvTable& t, const ParameterGrid& grid) {
  const std::size_t na = grid.axes.size();
  std::vector<double> loss(grid.size(), 0.0);
  if (t.rows.size() != grid.size()) throw Error(ErrorCode::ShapeMismatch, "loss table does not cover the grid");
  for (const auto& r : t.rows) {
    std::vector<std::size_t> idx(na);
    for (std::size_t a = 0; a < na; ++a) {
      const auto& ax = grid.axes[a];
      const double step = ax.steps > 1 ? (ax.max - ax.min) / double(ax.steps - 1) : 1.0;
      idx[a] = static_cast<std::size_t>(std::llround((r[a] - ax.min) / step));
    }
    loss[grid.ravel(idx)] = r[na];
  }
  return loss;
}

CsvTable boundary_table(const std::vector<std::string>& axes, const std::vector<BoundaryPoint>& b) {
  CsvTable t;
  t.header = axes;
  t.header.push_back("axis");
  for (const auto& p : b) {
    auto row = p.params;
    row.push_back(double(p.axis));
    t.rows.push_back(std::move(row));
  }
  sort_rows(t, axes.size() + 1);
  return t;
}

}  // namespace qphase
