#include "locfuse/csv_io.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string_view>

#include "locfuse/exchange.h"

namespace locfuse {
namespace {

struct CsvTable {
  std::vector<std::vector<double>> rows;
  std::vector<size_t> lines;  // 1-based source line of each row
};

std::string Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return std::string(s);
}

std::vector<std::string> Split(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    out.push_back(Trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void Fail(const std::filesystem::path& path, size_t line,
                       const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

CsvTable ReadTable(const std::filesystem::path& path,
                   const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (Trim(line).empty()) continue;
    const std::vector<std::string> cells = Split(line);
    if (!have_header) {
      if (cells != header) {
        std::string want;
        for (size_t i = 0; i < header.size(); ++i) want += (i ? "," : "") + header[i];
        Fail(path, lineno, "expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (cells.size() != header.size()) {
      Fail(path, lineno, "expected " + std::to_string(header.size()) + " columns");
    }
    std::vector<double> row(cells.size());
    for (size_t i = 0; i < cells.size(); ++i) {
      const std::string& c = cells[i];
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), row[i]);
      if (ec != std::errc() || ptr != c.data() + c.size() || !std::isfinite(row[i])) {
        Fail(path, lineno, "bad number '" + c + "' in column " + header[i]);
      }
    }
    table.rows.push_back(std::move(row));
    table.lines.push_back(lineno);
  }
  if (!have_header) Fail(path, lineno, "missing header");
  return table;
}

void CheckMonotonic(const std::filesystem::path& path, const CsvTable& t) {
  for (size_t i = 1; i < t.rows.size(); ++i) {
    if (!(t.rows[i][0] > t.rows[i - 1][0])) {
      Fail(path, t.lines[i], "timestamp not strictly increasing");
    }
  }
}

void AppendNumber(std::string* out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out->append(buf, ptr);
}

}  // namespace

InertialTrajectory ReadTrajectoryCsv(const std::filesystem::path& path) {
  const CsvTable t = ReadTable(path, {"t", "speed", "heading"});
  CheckMonotonic(path, t);
  InertialTrajectory traj;
  for (size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i][1] < 0.0) Fail(path, t.lines[i], "negative speed");
    traj.timestamps.push_back(t.rows[i][0]);
    traj.speeds.push_back(t.rows[i][1]);
    traj.headings.push_back(t.rows[i][2]);
  }
  if (traj.empty()) Fail(path, 1, "no frames");
  return traj;
}

PositionSeries ReadPositionsCsv(const std::filesystem::path& path) {
  const CsvTable t = ReadTable(path, {"t", "x", "y"});
  CheckMonotonic(path, t);
  PositionSeries s;
  for (const auto& row : t.rows) {
    s.timestamps.push_back(row[0]);
    s.positions.emplace_back(row[1], row[2]);
  }
  return s;
}

std::vector<FlpFix> ReadFixesCsv(const std::filesystem::path& path) {
  const CsvTable t = ReadTable(path, {"t", "x", "y", "accuracy"});
  CheckMonotonic(path, t);
  std::vector<FlpFix> fixes;
  for (size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i][3] < 0.0) Fail(path, t.lines[i], "negative accuracy");
    fixes.push_back({t.rows[i][0], Vec2(t.rows[i][1], t.rows[i][2]), t.rows[i][3]});
  }
  return fixes;
}

std::string TrajectoryCsv(const InertialTrajectory& traj) {
  std::string out = "t,speed,heading\n";
  for (size_t i = 0; i < traj.size(); ++i) {
    AppendNumber(&out, traj.timestamps[i]);
    out += ',';
    AppendNumber(&out, traj.speeds[i]);
    out += ',';
    AppendNumber(&out, traj.headings[i]);
    out += '\n';
  }
  return out;
}

std::string PositionsCsv(const PositionSeries& series) {
  std::string out = "t,x,y\n";
  for (size_t i = 0; i < series.size(); ++i) {
    AppendNumber(&out, series.timestamps[i]);
    out += ',';
    AppendNumber(&out, series.positions[i].x());
    out += ',';
    AppendNumber(&out, series.positions[i].y());
    out += '\n';
  }
  return out;
}

std::string FixesCsv(std::span<const FlpFix> fixes) {
  std::string out = "t,x,y,accuracy\n";
  for (const FlpFix& f : fixes) {
    AppendNumber(&out, f.t);
    out += ',';
    AppendNumber(&out, f.position.x());
    out += ',';
    AppendNumber(&out, f.position.y());
    out += ',';
    AppendNumber(&out, f.accuracy);
    out += '\n';
  }
  return out;
}

void WriteTrajectoryCsv(const std::filesystem::path& path, const InertialTrajectory& traj) {
  WriteFileAtomic(path, TrajectoryCsv(traj));
}
void WritePositionsCsv(const std::filesystem::path& path, const PositionSeries& series) {
  WriteFileAtomic(path, PositionsCsv(series));
}
void WriteFixesCsv(const std::filesystem::path& path, std::span<const FlpFix> fixes) {
  WriteFileAtomic(path, FixesCsv(fixes));
}

std::vector<GtPoint> ToGtPoints(const PositionSeries& series) {
  std::vector<GtPoint> out;
  out.reserve(series.size());
  for (size_t i = 0; i < series.size(); ++i) {
    out.push_back({series.timestamps[i], series.positions[i]});
  }
  return out;
}

}  // namespace locfuse
