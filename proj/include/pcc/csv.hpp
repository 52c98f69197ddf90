#pragma once

#include <charconv>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "pcc/errors.hpp"
#include "pcc/fitting.hpp"
#include "pcc/measurement.hpp"

// CSV schemas. Raw series:
//
//   power_w,sample_rates_hz            (or  mu,sample_rates_hz)
//   3.6e-09,14013.2;14105.7;...
//
// sample_rates_hz is ';'-separated. The dark run uses the same schema with a
// single row. Corrected output:
//
//   power_w,mu,r_hz,sigma_r_hz,r0_sig_hz,sigma_r0_sig_hz,p_det,sigma_p_det
//
// power_w stays empty for mu-based input. All numbers are shortest
// round-trip decimal, '.' separator, LF line endings.

namespace pcc {

/// Shortest decimal form that parses back to the same double. Locale free.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Fixed significant digits, general format. Used for printed tables.
inline std::string format_sig(double v, int digits) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view field, const std::string& file, int line) {
  field = trim(field);
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw ParseError(file, line, "bad number '" + std::string(field) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

inline constexpr const char* kRawHeaderPower = "power_w,sample_rates_hz";
inline constexpr const char* kRawHeaderMu = "mu,sample_rates_hz";
inline constexpr const char* kCorrectedHeader =
    "power_w,mu,r_hz,sigma_r_hz,r0_sig_hz,sigma_r0_sig_hz,p_det,sigma_p_det";

struct RawSeriesFile {
  bool power_based = false;
  std::vector<MeasurementPoint> points;
};

/// Reads the raw series schema. Throws ParseError with line numbers,
/// EmptyInput when the data section is empty.
inline RawSeriesFile read_raw_series(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw EmptyInput(name + ": empty file");
  const std::string_view header = detail::trim(line);
  RawSeriesFile out;
  if (header == kRawHeaderPower)
    out.power_based = true;
  else if (header == kRawHeaderMu)
    out.power_based = false;
  else
    throw ParseError(name, 1, "unknown header '" + std::string(header) + "'");

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = detail::trim(line);
    if (row.empty()) continue;
    const auto fields = detail::split(row, ',');
    if (fields.size() != 2)
      throw ParseError(name, line_no, "expected 2 comma-separated fields");
    MeasurementPoint p;
    const double value = detail::parse_double(fields[0], name, line_no);
    if (out.power_based)
      p.power_w = value;
    else
      p.mu = value;
    for (const auto sample : detail::split(fields[1], ';')) {
      if (detail::trim(sample).empty())
        throw ParseError(name, line_no, "empty sample entry");
      p.samples_hz.push_back(detail::parse_double(sample, name, line_no));
    }
    out.points.push_back(std::move(p));
  }
  if (out.points.empty()) throw EmptyInput(name + ": no data rows");
  return out;
}

/// Reads the dark run: same schema, exactly one data row.
inline MeasurementPoint read_dark_point(std::istream& in, const std::string& name) {
  RawSeriesFile file = read_raw_series(in, name);
  if (file.points.size() != 1)
    throw ParseError(name, 1, "dark file must contain exactly one data row");
  return file.points.front();
}

inline void write_raw_series(std::ostream& out, const std::vector<MeasurementPoint>& points,
                             bool power_based) {
  out << (power_based ? kRawHeaderPower : kRawHeaderMu) << '\n';
  for (const auto& p : points) {
    out << format_double(power_based ? p.power_w.value() : p.mu.value()) << ',';
    for (std::size_t j = 0; j < p.samples_hz.size(); ++j) {
      if (j) out << ';';
      out << format_double(p.samples_hz[j]);
    }
    out << '\n';
  }
}

inline void write_corrected(std::ostream& out, const std::vector<CorrectedPoint>& points,
                            double nu_l_hz) {
  out << kCorrectedHeader << '\n';
  for (const auto& c : points) {
    if (c.power_w) out << format_double(*c.power_w);
    out << ',' << format_double(c.mu) << ',' << format_double(c.r_hz) << ','
        << format_double(c.sigma_r_hz) << ',' << format_double(c.r0_sig_hz) << ','
        << format_double(c.sigma_r0_sig_hz) << ',' << format_double(c.breakdown.p0_sig) << ','
        << format_double(c.sigma_r0_sig_hz / nu_l_hz) << '\n';
  }
}

/// Reads corrected CSV back. The breakdown only carries p0_sig (the file does
/// not store the intermediate probabilities).
inline std::vector<CorrectedPoint> read_corrected(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw EmptyInput(name + ": empty file");
  if (detail::trim(line) != kCorrectedHeader)
    throw ParseError(name, 1, "not a corrected-series file");
  std::vector<CorrectedPoint> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = detail::trim(line);
    if (row.empty()) continue;
    const auto f = detail::split(row, ',');
    if (f.size() != 8) throw ParseError(name, line_no, "expected 8 fields");
    CorrectedPoint c;
    if (!detail::trim(f[0]).empty()) c.power_w = detail::parse_double(f[0], name, line_no);
    c.mu = detail::parse_double(f[1], name, line_no);
    c.r_hz = detail::parse_double(f[2], name, line_no);
    c.sigma_r_hz = detail::parse_double(f[3], name, line_no);
    c.r0_sig_hz = detail::parse_double(f[4], name, line_no);
    c.sigma_r0_sig_hz = detail::parse_double(f[5], name, line_no);
    c.breakdown.p0_sig = detail::parse_double(f[6], name, line_no);
    out.push_back(c);
  }
  if (out.empty()) throw EmptyInput(name + ": no data rows");
  return out;
}

/// Detects which schema a file carries from its header line.
enum class CsvKind { Raw, Corrected };

inline CsvKind peek_csv_kind(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw EmptyInput(name + ": empty file");
  const std::string_view header = detail::trim(line);
  in.seekg(0);
  if (header == kRawHeaderPower || header == kRawHeaderMu) return CsvKind::Raw;
  if (header == kCorrectedHeader) return CsvKind::Corrected;
  throw ParseError(name, 1, "unknown header '" + std::string(header) + "'");
}

}  // namespace pcc
