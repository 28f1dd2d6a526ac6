#pragma once

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mvarpdc/errors.hpp"
#include "mvarpdc/mvar_model.hpp"
#include "mvarpdc/pdc.hpp"
#include "mvarpdc/significance.hpp"
#include "mvarpdc/trial_set.hpp"

namespace mvarpdc {

// All writers print floating-point values with 17 significant digits, which
// round-trips IEEE doubles exactly.  Index conventions: timeseries files use
// 0-based trial/channel/t; direction columns and coefficient rows use
// 1-based channel numbers (matching the "2 -> 3" language of the analysis).

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : path_(path), out_(path) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
  }
  void line(const std::string& s) { out_ << s << '\n'; }
  void close() {
    out_.flush();
    if (!out_) throw IoError("failed while writing '" + path_ + "'");
    out_.close();
  }

 private:
  std::string path_;
  std::ofstream out_;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_double(const std::string& s, const std::string& path,
                           int line_no) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  // ERANGE with a finite result is gradual underflow (subnormals), which is
  // a faithful round trip; only overflow to +/-HUGE_VAL is a real error.
  const bool overflow =
      errno == ERANGE && (v == HUGE_VAL || v == -HUGE_VAL);
  if (end == s.c_str() || *end != '\0' || overflow)
    throw FileFormatError(path + ":" + std::to_string(line_no) +
                          ": bad numeric field '" + s + "'");
  return v;
}

inline long parse_int(const std::string& s, const std::string& path,
                      int line_no) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE || v < 0)
    throw FileFormatError(path + ":" + std::to_string(line_no) +
                          ": bad index field '" + s + "'");
  return v;
}

class CsvReader {
 public:
  explicit CsvReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw IoError("cannot open '" + path + "' for reading");
  }
  // false at end of file; skips nothing, every line counts
  bool next(std::vector<std::string>& fields) {
    std::string line;
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    fields = split_csv_line(line);
    return true;
  }
  int line_no() const { return line_no_; }
  const std::string& path() const { return path_; }

  void expect_header(const std::string& expected) {
    std::vector<std::string> fields;
    if (!next(fields))
      throw FileFormatError(path_ + ": empty file, expected header '" +
                            expected + "'");
    std::string got;
    for (std::size_t i = 0; i < fields.size(); ++i)
      got += (i ? "," : "") + fields[i];
    if (got != expected)
      throw FileFormatError(path_ + ": bad header '" + got + "', expected '" +
                            expected + "'");
  }

 private:
  std::string path_;
  std::ifstream in_;
  int line_no_ = 0;
};

}  // namespace detail

// ---- timeseries (trial sets) ----------------------------------------------
// header: trial,channel,t,value   (all indices 0-based)

inline void save_timeseries_csv(const std::string& path,
                                const TrialSet& data) {
  detail::CsvWriter w(path);
  w.line("trial,channel,t,value");
  for (int m = 0; m < data.n_trials(); ++m)
    for (int c = 0; c < data.n_channels(); ++c)
      for (int t = 0; t < data.n_samples(); ++t)
        w.line(std::to_string(m) + "," + std::to_string(c) + "," +
               std::to_string(t) + "," +
               detail::format_double(data.trials[m](c, t)));
  w.close();
}

inline TrialSet load_timeseries_csv(const std::string& path) {
  detail::CsvReader r(path);
  r.expect_header("trial,channel,t,value");

  struct Cell {
    long trial, channel, t;
    double value;
  };
  std::vector<Cell> cells;
  long max_trial = -1, max_channel = -1, max_t = -1;
  std::vector<std::string> f;
  while (r.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;  // trailing newline
    if (f.size() != 4)
      throw FileFormatError(path + ":" + std::to_string(r.line_no()) +
                            ": expected 4 fields, got " +
                            std::to_string(f.size()));
    Cell c;
    c.trial = detail::parse_int(f[0], path, r.line_no());
    c.channel = detail::parse_int(f[1], path, r.line_no());
    c.t = detail::parse_int(f[2], path, r.line_no());
    c.value = detail::parse_double(f[3], path, r.line_no());
    max_trial = std::max(max_trial, c.trial);
    max_channel = std::max(max_channel, c.channel);
    max_t = std::max(max_t, c.t);
    cells.push_back(c);
  }
  if (cells.empty()) throw FileFormatError(path + ": no data rows");

  const long nm = max_trial + 1, nc = max_channel + 1, nt = max_t + 1;
  TrialSet data;
  data.trials.assign(nm, Eigen::MatrixXd::Zero(nc, nt));
  std::vector<char> seen(static_cast<std::size_t>(nm * nc * nt), 0);
  for (const Cell& c : cells) {
    const std::size_t idx =
        static_cast<std::size_t>((c.trial * nc + c.channel) * nt + c.t);
    if (seen[idx])
      throw FileFormatError(path + ": duplicate entry for (trial " +
                            std::to_string(c.trial) + ", channel " +
                            std::to_string(c.channel) + ", t " +
                            std::to_string(c.t) + ")");
    seen[idx] = 1;
    data.trials[c.trial](c.channel, c.t) = c.value;
  }
  for (long m = 0; m < nm; ++m)
    for (long c = 0; c < nc; ++c)
      for (long t = 0; t < nt; ++t)
        if (!seen[static_cast<std::size_t>((m * nc + c) * nt + t)])
          throw FileFormatError(path + ": missing entry for (trial " +
                                std::to_string(m) + ", channel " +
                                std::to_string(c) + ", t " +
                                std::to_string(t) + ")");
  return data;
}

// ---- per-direction spectra (PDC, thresholds, masks) ------------------------
// header: freq,from1_to2,...  one column per ordered off-diagonal pair,
// sources outer, targets inner, 1-based labels.

namespace detail {

inline std::vector<std::pair<int, int>> direction_order(int kc) {
  std::vector<std::pair<int, int>> dirs;  // (source, target), 0-based
  for (int k = 0; k < kc; ++k)
    for (int j = 0; j < kc; ++j)
      if (j != k) dirs.emplace_back(k, j);
  return dirs;
}

inline std::string direction_label(int source, int target) {  // 0-based in
  return "from" + std::to_string(source + 1) + "_to" +
         std::to_string(target + 1);
}

inline std::string direction_header(int kc) {
  std::string h = "freq";
  for (const auto& [k, j] : direction_order(kc))
    h += "," + direction_label(k, j);
  return h;
}

template <typename ValueAt>
void save_direction_csv(const std::string& path, int kc,
                        const std::vector<double>& freqs, ValueAt&& value_at) {
  CsvWriter w(path);
  w.line(direction_header(kc));
  const auto dirs = direction_order(kc);
  for (std::size_t b = 0; b < freqs.size(); ++b) {
    std::string line = format_double(freqs[b]);
    for (const auto& [k, j] : dirs) line += "," + value_at(k, j, b);
    w.line(line);
  }
  w.close();
}

struct DirectionTable {
  std::vector<double> freqs;
  std::vector<std::pair<int, int>> dirs;     // (source, target), 0-based
  std::vector<std::vector<double>> values;  // values[bin][dir]
  int n_channels = 0;
};

inline DirectionTable load_direction_csv(const std::string& path) {
  CsvReader r(path);
  std::vector<std::string> f;
  if (!r.next(f)) throw FileFormatError(path + ": empty file");
  if (f.empty() || f[0] != "freq")
    throw FileFormatError(path + ": first header column must be 'freq'");

  DirectionTable t;
  int max_ch = 0;
  for (std::size_t i = 1; i < f.size(); ++i) {
    const std::string& h = f[i];
    if (h.rfind("from", 0) != 0)
      throw FileFormatError(path + ": bad direction column '" + h + "'");
    const std::string rest = h.substr(4);
    const auto to_pos = rest.find("_to");
    if (to_pos == std::string::npos)
      throw FileFormatError(path + ": bad direction column '" + h + "'");
    const long src = parse_int(rest.substr(0, to_pos), path, 1);
    const long dst = parse_int(rest.substr(to_pos + 3), path, 1);
    if (src < 1 || dst < 1 || src == dst)
      throw FileFormatError(path + ": bad direction column '" + h + "'");
    t.dirs.emplace_back(static_cast<int>(src - 1), static_cast<int>(dst - 1));
    max_ch = std::max({max_ch, static_cast<int>(src), static_cast<int>(dst)});
  }
  t.n_channels = max_ch;

  while (r.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != t.dirs.size() + 1)
      throw FileFormatError(path + ":" + std::to_string(r.line_no()) +
                            ": wrong field count");
    t.freqs.push_back(parse_double(f[0], path, r.line_no()));
    std::vector<double> row;
    row.reserve(t.dirs.size());
    for (std::size_t i = 1; i < f.size(); ++i)
      row.push_back(parse_double(f[i], path, r.line_no()));
    t.values.push_back(std::move(row));
  }
  if (t.freqs.empty()) throw FileFormatError(path + ": no data rows");
  return t;
}

}  // namespace detail

inline void save_pdc_csv(const std::string& path, const PdcSpectrum& pdc) {
  detail::save_direction_csv(
      path, pdc.n_channels(), pdc.freqs, [&](int k, int j, std::size_t b) {
        return detail::format_double(pdc.psi[b](j, k));
      });
}

// Rebuilds a PdcSpectrum from a file written by save_pdc_csv.  Diagonal
// entries (not stored) come back as zero and the `averaged` flag is not
// persisted.
inline PdcSpectrum load_pdc_csv(const std::string& path) {
  const auto t = detail::load_direction_csv(path);
  PdcSpectrum pdc;
  pdc.freqs = t.freqs;
  pdc.psi.assign(t.freqs.size(),
                 Eigen::MatrixXd::Zero(t.n_channels, t.n_channels));
  for (std::size_t b = 0; b < t.freqs.size(); ++b)
    for (std::size_t d = 0; d < t.dirs.size(); ++d)
      pdc.psi[b](t.dirs[d].second, t.dirs[d].first) = t.values[b][d];
  return pdc;
}

inline void save_threshold_csv(const std::string& path,
                               const ThresholdCurve& thr) {
  detail::save_direction_csv(
      path, thr.n_channels(), thr.freqs, [&](int k, int j, std::size_t b) {
        return detail::format_double(thr.threshold[b](j, k));
      });
}

inline void save_mask_csv(const std::string& path,
                          const SignificanceMask& mask) {
  detail::save_direction_csv(
      path, mask.n_channels(), mask.freqs, [&](int k, int j, std::size_t b) {
        return std::to_string(mask.significant[b](j, k));
      });
}

// ---- coefficient matrices --------------------------------------------------
// header: lag,target,source,value   (lag 1..P, channels 1-based)

inline void save_coeffs_csv(const std::string& path, const MvarModel& model) {
  detail::CsvWriter w(path);
  w.line("lag,target,source,value");
  for (int p = 1; p <= model.order(); ++p)
    for (int j = 0; j < model.n_channels(); ++j)
      for (int k = 0; k < model.n_channels(); ++k)
        w.line(std::to_string(p) + "," + std::to_string(j + 1) + "," +
               std::to_string(k + 1) + "," +
               detail::format_double(model.coeffs[p - 1](j, k)));
  w.close();
}

// The estimator tag is not persisted; the loaded model reports LeastSquares.
inline MvarModel load_coeffs_csv(const std::string& path) {
  detail::CsvReader r(path);
  r.expect_header("lag,target,source,value");

  struct Row {
    long lag, target, source;
    double value;
  };
  std::vector<Row> rows;
  long max_lag = 0, max_ch = 0;
  std::vector<std::string> f;
  while (r.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 4)
      throw FileFormatError(path + ":" + std::to_string(r.line_no()) +
                            ": expected 4 fields, got " +
                            std::to_string(f.size()));
    Row row;
    row.lag = detail::parse_int(f[0], path, r.line_no());
    row.target = detail::parse_int(f[1], path, r.line_no());
    row.source = detail::parse_int(f[2], path, r.line_no());
    row.value = detail::parse_double(f[3], path, r.line_no());
    if (row.lag < 1 || row.target < 1 || row.source < 1)
      throw FileFormatError(path + ":" + std::to_string(r.line_no()) +
                            ": lag/channel indices are 1-based");
    max_lag = std::max(max_lag, row.lag);
    max_ch = std::max({max_ch, row.target, row.source});
    rows.push_back(row);
  }
  if (rows.empty()) throw FileFormatError(path + ": no data rows");

  MvarModel model = MvarModel::zeros(static_cast<int>(max_ch),
                                     static_cast<int>(max_lag),
                                     EstimationMethod::LeastSquares);
  std::vector<char> seen(static_cast<std::size_t>(max_lag * max_ch * max_ch),
                         0);
  for (const Row& row : rows) {
    const std::size_t idx = static_cast<std::size_t>(
        ((row.lag - 1) * max_ch + (row.target - 1)) * max_ch +
        (row.source - 1));
    if (seen[idx])
      throw FileFormatError(path + ": duplicate coefficient (lag " +
                            std::to_string(row.lag) + ", target " +
                            std::to_string(row.target) + ", source " +
                            std::to_string(row.source) + ")");
    seen[idx] = 1;
    model.coeffs[row.lag - 1](row.target - 1, row.source - 1) = row.value;
  }
  for (long p = 1; p <= max_lag; ++p)
    for (long j = 1; j <= max_ch; ++j)
      for (long k = 1; k <= max_ch; ++k)
        if (!seen[static_cast<std::size_t>(((p - 1) * max_ch + (j - 1)) *
                                               max_ch +
                                           (k - 1))])
          throw FileFormatError(path + ": missing coefficient (lag " +
                                std::to_string(p) + ", target " +
                                std::to_string(j) + ", source " +
                                std::to_string(k) + ")");
  return model;
}

}  // namespace mvarpdc
