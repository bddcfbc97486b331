#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphforge {

/// Face-recognition feature vector.
struct Embedding {
  std::vector<double> values;
  bool normalized{false};

  Embedding() = default;
  explicit Embedding(std::vector<double> v, bool is_normalized = false)
      : values(std::move(v)), normalized(is_normalized) {
    if (normalized) {
      double n2 = 0.0;
      for (double x : values) n2 += x * x;
      if (std::abs(std::sqrt(n2) - 1.0) > 1e-6) {
        throw std::invalid_argument("embedding flagged normalized but has norm " +
                                    std::to_string(std::sqrt(n2)));
      }
    }
  }

  std::size_t size() const { return values.size(); }

  double norm() const {
    double n2 = 0.0;
    for (double x : values) n2 += x * x;
    return std::sqrt(n2);
  }

  /// Unit-length copy. Throws on the zero vector.
  Embedding unit() const {
    const double n = norm();
    if (n == 0.0) throw std::invalid_argument("cannot normalize a zero embedding");
    std::vector<double> v(values);
    for (double& x : v) x /= n;
    Embedding e;
    e.values = std::move(v);
    e.normalized = true;
    return e;
  }
};

/// 1 - cos(a, b), in [0, 2].
inline double cosine_distance(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("embedding dimensions differ: " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine distance of a zero embedding");
  if (a.values == b.values) return 0.0;
  const double cos = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
  return 1.0 - cos;
}

inline double cosine_similarity(const Embedding& a, const Embedding& b) {
  return 1.0 - cosine_distance(a, b);
}

}  // namespace morphforge
