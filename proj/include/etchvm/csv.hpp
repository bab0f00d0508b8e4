#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "data_model.hpp"
#include "errors.hpp"
#include "format.hpp"

namespace etchvm {

inline constexpr const char* kProcessCsvHeader =
    "pressure_mtorr,cf4_sccm,rf_top_w,t1_nm,t2_nm,t3_nm,t4_nm,t5_nm,t6_nm,t7_nm,t8_nm,t9_nm";
inline constexpr const char* kRgbCsvHeader = "r,g,b,depth_nm";
inline constexpr const char* kDepthTargetCsvHeader =
    "pressure_mtorr,cf4_sccm,rf_top_w,depth_nm";
inline constexpr const char* kPredictionReportHeader =
    "index,mean_nm,std_nm,true_nm,abs_error_nm,band";

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& f : out) f = std::string(trim(f));
  return out;
}

// Reads all lines, checks the header, returns the split data rows paired with
// 1-based file line numbers (header is line 1).
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> read_csv(
    const std::filesystem::path& path, const std::string& expected_header) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line))
    throw DataError(path.string() + ": empty file, expected header '" +
                    expected_header + "'");
  if (std::string(trim(line)) != expected_header)
    throw DataError(path.string() + ": line 1: bad header, expected '" +
                    expected_header + "'");
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::string(trim(line)).empty()) continue;
    rows.emplace_back(lineno, split_fields(line));
  }
  return rows;
}

inline std::string cell_context(const std::filesystem::path& path, std::size_t lineno) {
  return path.string() + ": line " + std::to_string(lineno);
}

}  // namespace detail

inline std::vector<WaferRecord> load_process_csv(const std::filesystem::path& path) {
  auto rows = detail::read_csv(path, kProcessCsvHeader);
  std::vector<WaferRecord> recs;
  recs.reserve(rows.size());
  for (const auto& [lineno, fields] : rows) {
    const std::string where = detail::cell_context(path, lineno);
    if (fields.size() != 3 + kThicknessPoints)
      throw DataError(where + ": expected " + std::to_string(3 + kThicknessPoints) +
                      " columns, got " + std::to_string(fields.size()));
    WaferRecord rec;
    rec.condition.pressure = parse_double(fields[0], where);
    rec.condition.cf4_flow = parse_double(fields[1], where);
    rec.condition.rf_top_power = parse_double(fields[2], where);
    for (std::size_t i = 0; i < kThicknessPoints; ++i)
      rec.thickness_nm[i] = parse_double(fields[3 + i], where);
    validate(rec, where);
    recs.push_back(rec);
  }
  return recs;
}

inline void save_process_csv(const std::filesystem::path& path,
                             const std::vector<WaferRecord>& recs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot write");
  out << kProcessCsvHeader << '\n';
  for (const auto& rec : recs) {
    out << format_double(rec.condition.pressure) << ','
        << format_double(rec.condition.cf4_flow) << ','
        << format_double(rec.condition.rf_top_power);
    for (double t : rec.thickness_nm) out << ',' << format_double(t);
    out << '\n';
  }
}

// With allow_missing_depth, an empty depth cell loads as NaN (prediction
// inputs produced by extract-rgb have no truth yet).
inline std::vector<RgbSample> load_rgb_csv(const std::filesystem::path& path,
                                           bool allow_missing_depth = false) {
  auto rows = detail::read_csv(path, kRgbCsvHeader);
  std::vector<RgbSample> samples;
  samples.reserve(rows.size());
  for (const auto& [lineno, fields] : rows) {
    const std::string where = detail::cell_context(path, lineno);
    if (fields.size() != 4)
      throw DataError(where + ": expected 4 columns, got " +
                      std::to_string(fields.size()));
    RgbSample s;
    s.r = parse_double(fields[0], where);
    s.g = parse_double(fields[1], where);
    s.b = parse_double(fields[2], where);
    if (fields[3].empty()) {
      if (!allow_missing_depth) throw DataError(where + ": missing depth_nm");
      s.depth_nm = std::numeric_limits<double>::quiet_NaN();
    } else {
      s.depth_nm = parse_double(fields[3], where);
    }
    validate(s, where);
    samples.push_back(s);
  }
  return samples;
}

inline void save_rgb_csv(const std::filesystem::path& path,
                         const std::vector<RgbSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot write");
  out << kRgbCsvHeader << '\n';
  for (const auto& s : samples) {
    out << format_double(s.r) << ',' << format_double(s.g) << ','
        << format_double(s.b) << ',';
    if (!std::isnan(s.depth_nm)) out << format_double(s.depth_nm);
    out << '\n';
  }
}

struct DepthTargetRow {
  ProcessCondition condition;
  double depth_nm = 0.0;  // NaN when unknown
};

inline std::vector<DepthTargetRow> load_depth_target_csv(
    const std::filesystem::path& path, bool allow_missing_depth = false) {
  auto rows = detail::read_csv(path, kDepthTargetCsvHeader);
  std::vector<DepthTargetRow> out;
  out.reserve(rows.size());
  for (const auto& [lineno, fields] : rows) {
    const std::string where = detail::cell_context(path, lineno);
    if (fields.size() != 4)
      throw DataError(where + ": expected 4 columns, got " +
                      std::to_string(fields.size()));
    DepthTargetRow row;
    row.condition.pressure = parse_double(fields[0], where);
    row.condition.cf4_flow = parse_double(fields[1], where);
    row.condition.rf_top_power = parse_double(fields[2], where);
    if (fields[3].empty()) {
      if (!allow_missing_depth) throw DataError(where + ": missing depth_nm");
      row.depth_nm = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.depth_nm = parse_double(fields[3], where);
    }
    validate(row.condition, where);
    out.push_back(row);
  }
  return out;
}

inline void save_depth_target_csv(const std::filesystem::path& path,
                                  const std::vector<DepthTargetRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot write");
  out << kDepthTargetCsvHeader << '\n';
  for (const auto& row : rows) {
    out << format_double(row.condition.pressure) << ','
        << format_double(row.condition.cf4_flow) << ','
        << format_double(row.condition.rf_top_power) << ',';
    if (!std::isnan(row.depth_nm)) out << format_double(row.depth_nm);
    out << '\n';
  }
}

struct PredictionReportRow {
  std::size_t index = 0;
  double mean_nm = 0.0;
  double std_nm = 0.0;
  std::optional<double> true_nm;
  std::optional<double> abs_error_nm;
  std::string band;  // "1sigma", "2sigma", "outside", or empty without truth
};

inline std::vector<PredictionReportRow> load_prediction_report(
    const std::filesystem::path& path) {
  auto rows = detail::read_csv(path, kPredictionReportHeader);
  std::vector<PredictionReportRow> out;
  out.reserve(rows.size());
  for (const auto& [lineno, fields] : rows) {
    const std::string where = detail::cell_context(path, lineno);
    if (fields.size() != 6)
      throw DataError(where + ": expected 6 columns, got " +
                      std::to_string(fields.size()));
    PredictionReportRow row;
    row.index = static_cast<std::size_t>(parse_uint(fields[0], where));
    row.mean_nm = parse_double(fields[1], where);
    row.std_nm = parse_double(fields[2], where);
    if (!fields[3].empty()) row.true_nm = parse_double(fields[3], where);
    if (!fields[4].empty()) row.abs_error_nm = parse_double(fields[4], where);
    row.band = fields[5];
    out.push_back(row);
  }
  return out;
}

inline void save_prediction_report(const std::filesystem::path& path,
                                   const std::vector<PredictionReportRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot write");
  out << kPredictionReportHeader << '\n';
  for (const auto& row : rows) {
    out << row.index << ',' << format_double(row.mean_nm) << ','
        << format_double(row.std_nm) << ',';
    if (row.true_nm) out << format_double(*row.true_nm);
    out << ',';
    if (row.abs_error_nm) out << format_double(*row.abs_error_nm);
    out << ',' << row.band << '\n';
  }
}

}  // namespace etchvm
