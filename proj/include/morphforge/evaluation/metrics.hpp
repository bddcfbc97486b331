#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace morphforge::eval {

// ---------------------------------------------------------------------------
// Morphing Attack Potential

struct AttemptScore {
  std::string morph_id;
  int slot{1};     // contributing subject, 1 or 2
  int attempt{1};  // 1-based
  std::string frs_id;
  double score{0.0};
};

enum class MapPolicy { both, either };

inline MapPolicy parse_map_policy(const std::string& s) {
  if (s == "both") return MapPolicy::both;
  if (s == "either") return MapPolicy::either;
  throw std::invalid_argument("unknown MAP policy '" + s + "'");
}

/// cells[r-1][c-1] is the fraction of morphs accepted by at least c systems
/// with at least r successful attempts.
struct MapMatrix {
  std::vector<std::string> frs;  // sorted ids present in the scores
  std::vector<std::vector<double>> cells;

  std::size_t attempts() const { return cells.size(); }
  std::size_t systems() const { return frs.size(); }
  double at(std::size_t r, std::size_t c) const { return cells.at(r - 1).at(c - 1); }
};

inline MapMatrix compute_map(const std::vector<AttemptScore>& scores, const std::map<std::string, double>& thresholds,
                             MapPolicy policy = MapPolicy::both) {
  if (scores.empty()) throw std::invalid_argument("compute_map: no scores");
  std::set<std::tuple<std::string, int, int, std::string>> seen;
  std::set<std::string> frs_set;
  int max_attempt = 0;
  for (const auto& s : scores) {
    if (s.slot != 1 && s.slot != 2) throw std::invalid_argument("compute_map: slot must be 1 or 2");
    if (s.attempt < 1) throw std::invalid_argument("compute_map: attempt index must be >= 1");
    if (!std::isfinite(s.score)) throw std::invalid_argument("compute_map: non-finite score for " + s.morph_id);
    if (!thresholds.count(s.frs_id)) throw std::invalid_argument("compute_map: unknown frs '" + s.frs_id + "'");
    if (!seen.insert({s.morph_id, s.slot, s.attempt, s.frs_id}).second) {
      throw std::invalid_argument("compute_map: duplicate score for morph " + s.morph_id + " slot " +
                                  std::to_string(s.slot) + " attempt " + std::to_string(s.attempt) + " frs " +
                                  s.frs_id);
    }
    frs_set.insert(s.frs_id);
    max_attempt = std::max(max_attempt, s.attempt);
  }

  MapMatrix m;
  m.frs.assign(frs_set.begin(), frs_set.end());
  const std::size_t C = m.frs.size();
  std::map<std::string, std::size_t> frs_index;
  for (std::size_t i = 0; i < C; ++i) frs_index[m.frs[i]] = i;

  // successes[morph][frs][slot]; -1 marks a slot with no attempts.
  std::map<std::string, std::vector<std::array<int, 2>>> successes;
  for (const auto& s : scores) {
    auto& row = successes.try_emplace(s.morph_id, C, std::array<int, 2>{-1, -1}).first->second;
    int& n = row[frs_index[s.frs_id]][s.slot - 1];
    if (n < 0) n = 0;
    if (s.score >= thresholds.at(s.frs_id)) ++n;
  }
  for (const auto& [morph, row] : successes) {
    for (std::size_t f = 0; f < C; ++f) {
      for (int slot = 0; slot < 2; ++slot) {
        if ((row[f][slot] < 0) != (row[0][slot] < 0)) {
          throw std::invalid_argument("compute_map: morph " + morph + " lacks attempts for some frs/slot");
        }
      }
    }
  }

  const double n_morphs = static_cast<double>(successes.size());
  m.cells.assign(static_cast<std::size_t>(max_attempt), std::vector<double>(C, 0.0));
  for (int r = 1; r <= max_attempt; ++r) {
    std::vector<std::size_t> count(C + 1, 0);  // morphs passing exactly k systems
    for (const auto& [morph, row] : successes) {
      std::size_t passing = 0;
      for (std::size_t f = 0; f < C; ++f) {
        bool all = true, any = false;
        for (int slot = 0; slot < 2; ++slot) {
          if (row[f][slot] < 0) continue;
          const bool ok = row[f][slot] >= r;
          all = all && ok;
          any = any || ok;
        }
        if (policy == MapPolicy::both ? all : any) ++passing;
      }
      ++count[passing];
    }
    std::size_t at_least = 0;
    for (std::size_t c = C; c >= 1; --c) {
      at_least += count[c];
      m.cells[static_cast<std::size_t>(r - 1)][c - 1] = static_cast<double>(at_least) / n_morphs;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// DET curve

struct DetPoint {
  double threshold;
  double macer;
  double bpcer;
};

/// Sweeps every distinct score as a threshold, bracketed by -inf and +inf.
/// With `higher_is_bona_fide` false the scores are treated as attack
/// likelihoods and the comparisons flip.
inline std::vector<DetPoint> det_curve(const std::vector<double>& bona_fide, const std::vector<double>& attack,
                                       bool higher_is_bona_fide = true) {
  if (bona_fide.empty() || attack.empty()) throw std::invalid_argument("det_curve: empty score list");
  const double sign = higher_is_bona_fide ? 1.0 : -1.0;
  std::vector<double> bf, at;
  for (double v : bona_fide) {
    if (!std::isfinite(v)) throw std::invalid_argument("det_curve: non-finite score");
    bf.push_back(sign * v);
  }
  for (double v : attack) {
    if (!std::isfinite(v)) throw std::invalid_argument("det_curve: non-finite score");
    at.push_back(sign * v);
  }
  std::sort(bf.begin(), bf.end());
  std::sort(at.begin(), at.end());
  std::vector<double> ts(bf);
  ts.insert(ts.end(), at.begin(), at.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<DetPoint> out;
  out.push_back({-sign * inf, 1.0, 0.0});
  for (double t : ts) {
    const auto attack_ge = at.end() - std::lower_bound(at.begin(), at.end(), t);
    const auto bf_lt = std::lower_bound(bf.begin(), bf.end(), t) - bf.begin();
    out.push_back({sign * t, static_cast<double>(attack_ge) / at.size(), static_cast<double>(bf_lt) / bf.size()});
  }
  out.push_back({sign * inf, 0.0, 1.0});
  return out;
}

// ---------------------------------------------------------------------------
// Quality score distributions

struct ScoreSample {
  std::string source_label;
  double value{0.0};
};

/// KL(P || Q) in nats between histograms over the shared range.
inline double kl_divergence(const std::vector<ScoreSample>& p, const std::vector<ScoreSample>& q, int bins = 100,
                            double epsilon = 1e-10) {
  if (p.empty() || q.empty()) throw std::invalid_argument("kl_divergence: empty sample set");
  if (bins < 2) throw std::invalid_argument("kl_divergence: bins must be >= 2");
  if (!(epsilon > 0.0)) throw std::invalid_argument("kl_divergence: epsilon must be positive");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* set : {&p, &q}) {
    for (const auto& s : *set) {
      if (!std::isfinite(s.value)) throw std::invalid_argument("kl_divergence: non-finite sample");
      lo = std::min(lo, s.value);
      hi = std::max(hi, s.value);
    }
  }
  if (lo == hi) return 0.0;

  auto histogram = [&](const std::vector<ScoreSample>& set) {
    std::vector<double> h(static_cast<std::size_t>(bins), epsilon);
    for (const auto& s : set) {
      const auto b = static_cast<std::size_t>(std::floor((s.value - lo) / (hi - lo) * bins));
      h[std::min(b, h.size() - 1)] += 1.0;
    }
    double total = 0.0;
    for (double v : h) total += v;
    for (double& v : h) v /= total;
    return h;
  };
  const auto hp = histogram(p), hq = histogram(q);
  double kl = 0.0;
  for (std::size_t i = 0; i < hp.size(); ++i) kl += hp[i] * std::log(hp[i] / hq[i]);
  return std::max(kl, 0.0);
}

struct KdePoint {
  double x;
  double density;
};

/// Gaussian kernel density on `grid` evenly spaced points over
/// [min - 3h, max + 3h].
inline std::vector<KdePoint> kde_table(const std::vector<ScoreSample>& samples, double bandwidth, int grid = 200) {
  if (samples.empty()) throw std::invalid_argument("kde_table: no samples");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw std::invalid_argument("kde_table: bandwidth must be positive");
  if (grid < 2) throw std::invalid_argument("kde_table: grid must be >= 2");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : samples) {
    if (!std::isfinite(s.value)) throw std::invalid_argument("kde_table: non-finite sample");
    lo = std::min(lo, s.value);
    hi = std::max(hi, s.value);
  }
  lo -= 3.0 * bandwidth;
  hi += 3.0 * bandwidth;
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  std::vector<KdePoint> out;
  out.reserve(static_cast<std::size_t>(grid));
  for (int i = 0; i < grid; ++i) {
    const double x = lo + (hi - lo) * i / (grid - 1);
    double acc = 0.0;
    for (const auto& s : samples) {
      const double u = (x - s.value) / bandwidth;
      acc += std::exp(-0.5 * u * u);
    }
    out.push_back({x, acc * norm});
  }
  return out;
}

/// Silverman's rule of thumb, 1.06 * sd * n^(-1/5). Falls back to 1e-3 for a
/// set without spread.
inline double silverman_bandwidth(const std::vector<ScoreSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("silverman_bandwidth: no samples");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (const auto& s : samples) mean += s.value;
  mean /= n;
  double var = 0.0;
  for (const auto& s : samples) var += (s.value - mean) * (s.value - mean);
  const double sd = samples.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return sd > 0.0 ? 1.06 * sd * std::pow(n, -0.2) : 1e-3;
}

}  // namespace morphforge::eval
