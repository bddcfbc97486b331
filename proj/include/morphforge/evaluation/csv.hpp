#pragma once

// Score file readers and plot-table writers.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "morphforge/evaluation/metrics.hpp"

namespace morphforge::eval {

class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_real(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) throw CsvError(line, "bad number '" + s + "'");
  return v;
}

inline int parse_int(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw CsvError(line, "bad integer '" + s + "'");
  return static_cast<int>(v);
}

/// Reads rows of exactly `width` fields, skipping blank lines, '#' comments
/// and a header row whose first field equals `header0`.
template <class F>
void for_each_row(std::istream& in, std::size_t width, const std::string& header0, F&& fn) {
  std::string line;
  std::size_t n = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (first && !fields.empty() && fields[0] == header0) {
      first = false;
      continue;
    }
    first = false;
    if (fields.size() != width) {
      throw CsvError(n, "expected " + std::to_string(width) + " fields, got " + std::to_string(fields.size()));
    }
    fn(fields, n);
  }
}

inline std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

/// `morph_id,slot,attempt,frs_id,score`
inline std::vector<AttemptScore> read_attempt_scores(std::istream& in) {
  std::vector<AttemptScore> out;
  detail::for_each_row(in, 5, "morph_id", [&](const std::vector<std::string>& f, std::size_t n) {
    out.push_back({f[0], detail::parse_int(f[1], n), detail::parse_int(f[2], n), f[3], detail::parse_real(f[4], n)});
  });
  return out;
}

struct DetectionScores {
  std::vector<double> bona_fide;
  std::vector<double> attack;
};

/// `id,label,score` with label `bonafide` or `morph`.
inline DetectionScores read_detection_scores(std::istream& in) {
  DetectionScores out;
  detail::for_each_row(in, 3, "id", [&](const std::vector<std::string>& f, std::size_t n) {
    const double v = detail::parse_real(f[2], n);
    if (f[1] == "bonafide") {
      out.bona_fide.push_back(v);
    } else if (f[1] == "morph") {
      out.attack.push_back(v);
    } else {
      throw CsvError(n, "unknown label '" + f[1] + "'");
    }
  });
  return out;
}

/// `id,subset,score`
inline std::vector<ScoreSample> read_quality_scores(std::istream& in) {
  std::vector<ScoreSample> out;
  detail::for_each_row(in, 3, "id", [&](const std::vector<std::string>& f, std::size_t n) {
    out.push_back({f[1], detail::parse_real(f[2], n)});
  });
  return out;
}

/// `frs_id,threshold`
inline std::map<std::string, double> read_thresholds(std::istream& in) {
  std::map<std::string, double> out;
  detail::for_each_row(in, 2, "frs_id", [&](const std::vector<std::string>& f, std::size_t n) {
    if (!out.emplace(f[0], detail::parse_real(f[1], n)).second) throw CsvError(n, "duplicate frs '" + f[0] + "'");
  });
  return out;
}

inline void write_map_csv(std::ostream& out, const MapMatrix& m) {
  out << "attempts";
  for (std::size_t c = 1; c <= m.systems(); ++c) out << ',' << c;
  out << '\n';
  for (std::size_t r = 1; r <= m.attempts(); ++r) {
    out << r;
    for (std::size_t c = 1; c <= m.systems(); ++c) out << ',' << detail::fmt(m.at(r, c));
    out << '\n';
  }
}

inline void write_det_csv(std::ostream& out, const std::vector<DetPoint>& curve) {
  out << "threshold,macer,bpcer\n";
  for (const auto& p : curve) out << detail::fmt(p.threshold) << ',' << detail::fmt(p.macer) << ',' << detail::fmt(p.bpcer) << '\n';
}

struct KldRow {
  std::string p;
  std::string q;
  double kld;
};

inline void write_kld_csv(std::ostream& out, const std::vector<KldRow>& rows) {
  out << "p,q,kld\n";
  for (const auto& r : rows) out << r.p << ',' << r.q << ',' << detail::fmt(r.kld) << '\n';
}

inline void write_kde_csv(std::ostream& out, const std::string& subset, const std::vector<KdePoint>& table,
                          bool header = true) {
  if (header) out << "subset,x,density\n";
  for (const auto& p : table) out << subset << ',' << detail::fmt(p.x) << ',' << detail::fmt(p.density) << '\n';
}

}  // namespace morphforge::eval
