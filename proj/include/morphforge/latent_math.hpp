#pragma once

// Latent-space editing: attribute boundary fitting, neutralizing projections,
// linear semantic edits, PCA directions and identity-controlled random edits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "morphforge/embedding.hpp"

namespace morphforge {

/// A point in the generator's intermediate latent space.
class LatentVector {
 public:
  LatentVector() = default;
  explicit LatentVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw std::invalid_argument("latent vector must have positive dimension");
    for (double v : values_) {
      if (!std::isfinite(v)) throw std::invalid_argument("latent vector entries must be finite");
    }
  }
  static LatentVector zeros(std::size_t dim) { return LatentVector(std::vector<double>(dim, 0.0)); }
  static LatentVector axis(std::size_t dim, std::size_t i, double scale = 1.0) {
    std::vector<double> v(dim, 0.0);
    v.at(i) = scale;
    return LatentVector(std::move(v));
  }

  std::size_t dim() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }

  double dot(const LatentVector& o) const {
    double s = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) s += values_[i] * o.values_[i];
    return s;
  }
  double norm() const { return std::sqrt(dot(*this)); }

  /// this + scale * direction
  LatentVector plus_scaled(const LatentVector& direction, double scale) const {
    std::vector<double> out(values_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * direction.values_[i];
    return LatentVector(std::move(out));
  }

  friend bool operator==(const LatentVector&, const LatentVector&) = default;

 private:
  std::vector<double> values_;
};

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  }
}

/// Unit normal of an attribute decision boundary, with the mean distance of
/// each class to it. mean_distance_neg is reported as a magnitude, so a
/// well-separated negative class has a positive value.
class SemanticDirection {
 public:
  SemanticDirection() = default;
  SemanticDirection(std::string attribute, LatentVector normal, double mean_distance_neg = 0.0,
                    double mean_distance_pos = 0.0)
      : attribute_(std::move(attribute)),
        normal_(std::move(normal)),
        mean_distance_neg_(mean_distance_neg),
        mean_distance_pos_(mean_distance_pos) {
    if (std::abs(normal_.norm() - 1.0) > 1e-6) {
      throw std::invalid_argument("direction '" + attribute_ + "' normal is not unit length (norm " +
                                  std::to_string(normal_.norm()) + ")");
    }
  }

  /// Normalizes `v` before construction.
  static SemanticDirection from_vector(std::string attribute, const std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n == 0.0) throw std::invalid_argument("direction '" + attribute + "' has zero normal");
    std::vector<double> u(v);
    for (double& x : u) x /= n;
    return SemanticDirection(std::move(attribute), LatentVector(std::move(u)));
  }

  const std::string& attribute() const { return attribute_; }
  const LatentVector& normal() const { return normal_; }
  std::size_t dim() const { return normal_.dim(); }
  double mean_distance_neg() const { return mean_distance_neg_; }
  double mean_distance_pos() const { return mean_distance_pos_; }

 private:
  std::string attribute_;
  LatentVector normal_;
  double mean_distance_neg_{0.0};
  double mean_distance_pos_{0.0};
};

enum class EditMode { ifgs, ifgd, frpca };

inline const char* to_string(EditMode m) {
  switch (m) {
    case EditMode::ifgs: return "ifgs";
    case EditMode::ifgd: return "ifgd";
    case EditMode::frpca: return "frpca";
  }
  return "?";
}

struct EditTerm {
  SemanticDirection direction;
  double scale{0.0};
};

struct EditRecipe {
  EditMode mode{EditMode::ifgd};
  std::vector<EditTerm> terms;
};

// ---------------------------------------------------------------------------
// Boundary fitting

struct HingeSolverOptions {
  int iterations = 500;
  double step = 0.1;
  double l2 = 1e-3;
};

/// Fits a linear max-margin separator (hinge loss, L2 penalty, full-batch
/// subgradient descent from zero) and returns its unit normal, oriented
/// toward the positive class.
inline SemanticDirection fit_direction(std::string attribute, std::span<const LatentVector> latents,
                                       const std::vector<bool>& labels, HingeSolverOptions opt = {}) {
  if (latents.size() != labels.size()) {
    throw std::invalid_argument("fit_direction: latents and labels differ in length");
  }
  if (latents.empty()) throw std::invalid_argument("fit_direction: no samples");
  const std::size_t dim = latents.front().dim();
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < latents.size(); ++i) {
    require_same_dim(latents[i].dim(), dim, "fit_direction");
    n_pos += labels[i] ? 1 : 0;
  }
  const std::size_t n_neg = latents.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("fit_direction: degenerate labels");
  if (n_pos < 2 || n_neg < 2) {
    throw std::invalid_argument("fit_direction: need at least 2 samples per class");
  }

  const double inv_n = 1.0 / static_cast<double>(latents.size());
  std::vector<double> w(dim, 0.0), grad(dim);
  double b = 0.0;
  for (int it = 0; it < opt.iterations; ++it) {
    for (std::size_t j = 0; j < dim; ++j) grad[j] = opt.l2 * w[j];
    double grad_b = 0.0;
    for (std::size_t i = 0; i < latents.size(); ++i) {
      const double y = labels[i] ? 1.0 : -1.0;
      const auto& x = latents[i].values();
      double margin = b;
      for (std::size_t j = 0; j < dim; ++j) margin += w[j] * x[j];
      if (y * margin < 1.0) {
        for (std::size_t j = 0; j < dim; ++j) grad[j] -= inv_n * y * x[j];
        grad_b -= inv_n * y;
      }
    }
    for (std::size_t j = 0; j < dim; ++j) w[j] -= opt.step * grad[j];
    b -= opt.step * grad_b;
  }

  double wn = 0.0;
  for (double v : w) wn += v * v;
  wn = std::sqrt(wn);
  if (wn == 0.0) throw std::runtime_error("fit_direction: solver produced a zero normal");

  double sum_pos = 0.0, sum_neg = 0.0;
  for (std::size_t i = 0; i < latents.size(); ++i) {
    double s = b;
    const auto& x = latents[i].values();
    for (std::size_t j = 0; j < dim; ++j) s += w[j] * x[j];
    s /= wn;
    if (labels[i]) sum_pos += s; else sum_neg -= s;
  }
  std::vector<double> unit(w);
  for (double& v : unit) v /= wn;
  return SemanticDirection(std::move(attribute), LatentVector(std::move(unit)),
                           sum_neg / static_cast<double>(n_neg), sum_pos / static_cast<double>(n_pos));
}

// ---------------------------------------------------------------------------
// Projections and linear edits

/// w - (w . n) n
inline LatentVector project_to_boundary(const LatentVector& w, const SemanticDirection& d) {
  require_same_dim(w.dim(), d.dim(), "project_to_boundary");
  return w.plus_scaled(d.normal(), -w.dot(d.normal()));
}

/// w + scale * n
inline LatentVector shift_along(const LatentVector& w, const SemanticDirection& d, double scale) {
  require_same_dim(w.dim(), d.dim(), "shift_along");
  if (!std::isfinite(scale)) throw std::invalid_argument("shift_along: scale must be finite");
  return w.plus_scaled(d.normal(), scale);
}

/// Frontalizes pose, evens out illumination, then moves the expression
/// component to `neutral_offset` on the neutral side of its boundary.
inline LatentVector neutralize(const LatentVector& w, const SemanticDirection& pose,
                               const SemanticDirection& illumination,
                               const SemanticDirection& expression, double neutral_offset) {
  require_same_dim(w.dim(), pose.dim(), "neutralize(pose)");
  require_same_dim(w.dim(), illumination.dim(), "neutralize(illumination)");
  require_same_dim(w.dim(), expression.dim(), "neutralize(expression)");
  if (!std::isfinite(neutral_offset)) throw std::invalid_argument("neutralize: offset must be finite");
  const LatentVector w1 = project_to_boundary(w, pose);
  const LatentVector w2 = project_to_boundary(w1, illumination);
  return w2.plus_scaled(expression.normal(), -(w2.dot(expression.normal()) + neutral_offset));
}

/// Illumination + ageing edit used for enrolment-quality mated samples.
inline LatentVector edit_ifgs(const LatentVector& base, const SemanticDirection& illumination,
                              const SemanticDirection& age, double alpha_illumination,
                              double alpha_age) {
  require_same_dim(base.dim(), illumination.dim(), "edit_ifgs(illumination)");
  require_same_dim(base.dim(), age.dim(), "edit_ifgs(age)");
  if (!std::isfinite(alpha_illumination) || !std::isfinite(alpha_age)) {
    throw std::invalid_argument("edit_ifgs: scales must be finite");
  }
  return base.plus_scaled(illumination.normal(), alpha_illumination)
      .plus_scaled(age.normal(), alpha_age);
}

/// base + sum(scale_i * n_i). Terms are summed in a canonical order so the
/// result does not depend on how the recipe lists them.
inline LatentVector edit_ifgd(const LatentVector& base, const EditRecipe& recipe) {
  if (recipe.terms.empty()) throw std::invalid_argument("edit_ifgd: empty recipe");
  std::vector<const EditTerm*> order;
  order.reserve(recipe.terms.size());
  for (const auto& t : recipe.terms) {
    require_same_dim(base.dim(), t.direction.dim(), "edit_ifgd");
    if (!std::isfinite(t.scale)) throw std::invalid_argument("edit_ifgd: scales must be finite");
    order.push_back(&t);
  }
  std::sort(order.begin(), order.end(), [](const EditTerm* a, const EditTerm* b) {
    return std::tie(a->direction.attribute(), a->scale, a->direction.normal().values()) <
           std::tie(b->direction.attribute(), b->scale, b->direction.normal().values());
  });
  LatentVector out = base;
  for (const EditTerm* t : order) out = out.plus_scaled(t->direction.normal(), t->scale);
  return out;
}

// ---------------------------------------------------------------------------
// PCA

struct PrincipalComponents {
  LatentVector mean;
  std::vector<SemanticDirection> directions;  // descending variance
  std::vector<double> variances;
};

/// Covariance eigendecomposition. Each direction's sign is fixed so that its
/// first non-negligible entry is positive.
inline PrincipalComponents fit_pca(std::span<const LatentVector> latents, std::size_t k) {
  if (latents.size() < 2) throw std::invalid_argument("fit_pca: need at least 2 samples");
  if (k == 0) throw std::invalid_argument("fit_pca: k must be positive");
  const std::size_t dim = latents.front().dim();
  const auto n = static_cast<Eigen::Index>(latents.size());
  const auto d = static_cast<Eigen::Index>(dim);

  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& l = latents[static_cast<std::size_t>(i)];
    require_same_dim(l.dim(), dim, "fit_pca");
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = l[static_cast<std::size_t>(j)];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigendecomposition failed");
  const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
  const double top = evals(d - 1);
  if (!(top > 0.0)) throw std::invalid_argument("fit_pca: zero variance");

  const double tol = top * 1e-10 * static_cast<double>(std::max(dim, latents.size()));
  std::size_t rank = 0;
  for (Eigen::Index j = 0; j < d; ++j) rank += evals(j) > tol ? 1 : 0;
  rank = std::min(rank, latents.size() - 1);
  if (k > rank) {
    throw std::invalid_argument("fit_pca: k=" + std::to_string(k) + " exceeds data rank " +
                                std::to_string(rank));
  }

  PrincipalComponents out;
  out.mean = LatentVector(std::vector<double>(mean.data(), mean.data() + d));
  for (std::size_t c = 0; c < k; ++c) {
    const Eigen::Index col = d - 1 - static_cast<Eigen::Index>(c);
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    v.normalize();
    for (Eigen::Index j = 0; j < d; ++j) {
      if (std::abs(v(j)) > 1e-12) {
        if (v(j) < 0.0) v = -v;
        break;
      }
    }
    out.directions.emplace_back("pca" + std::to_string(c),
                                LatentVector(std::vector<double>(v.data(), v.data() + d)));
    out.variances.push_back(evals(col));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Identity-controlled random PCA edit

using EmbeddingOracle = std::function<Embedding(const LatentVector&)>;

struct FrpcaOptions {
  double max_scale = 10.0;
  int iterations = 32;
};

struct FrpcaResult {
  LatentVector latent;
  double scale{0.0};
  double distance{0.0};
};

/// Uniform coefficients in [-1, 1) drawn from a seeded mt19937_64. The
/// integer-to-real mapping is explicit so the stream is portable.
inline std::vector<double> frpca_coefficients(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> c(count);
  for (double& v : c) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = 2.0 * u - 1.0;
  }
  return c;
}

/// Walks from `base` along the unit combination of `components` weighted by
/// `coefficients`, binary-searching the largest scale in [0, max_scale]
/// whose embedding distance to the base stays within `tau_id`.
inline FrpcaResult edit_frpca_with_coefficients(const LatentVector& base,
                                                std::span<const SemanticDirection> components,
                                                std::span<const double> coefficients,
                                                const EmbeddingOracle& embed, double tau_id,
                                                FrpcaOptions opt = {}) {
  if (components.empty()) throw std::invalid_argument("edit_frpca: no components");
  if (coefficients.size() != components.size()) {
    throw std::invalid_argument("edit_frpca: coefficient count does not match components");
  }
  if (!(tau_id > 0.0 && tau_id < 1.0)) throw std::invalid_argument("edit_frpca: tau_id must be in (0, 1)");

  std::vector<double> dir(base.dim(), 0.0);
  for (std::size_t c = 0; c < components.size(); ++c) {
    require_same_dim(base.dim(), components[c].dim(), "edit_frpca");
    const auto& n = components[c].normal().values();
    for (std::size_t j = 0; j < dir.size(); ++j) dir[j] += coefficients[c] * n[j];
  }
  double dn = 0.0;
  for (double v : dir) dn += v * v;
  dn = std::sqrt(dn);
  if (dn > 0.0) {
    for (double& v : dir) v /= dn;
  }
  const LatentVector direction(std::move(dir));

  const Embedding reference = embed(base);
  auto distance_at = [&](double s) { return cosine_distance(reference, embed(base.plus_scaled(direction, s))); };

  const double far = distance_at(opt.max_scale);
  if (!(far > 0.0)) throw std::runtime_error("edit_frpca: ineffective directions");
  if (far <= tau_id) return {base.plus_scaled(direction, opt.max_scale), opt.max_scale, far};

  double lo = 0.0, hi = opt.max_scale, lo_distance = 0.0;
  for (int it = 0; it < opt.iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double dm = distance_at(mid);
    if (dm <= tau_id) {
      lo = mid;
      lo_distance = dm;
    } else {
      hi = mid;
    }
  }
  if (!(lo_distance > 0.0)) throw std::runtime_error("edit_frpca: ineffective directions");
  return {base.plus_scaled(direction, lo), lo, lo_distance};
}

inline FrpcaResult edit_frpca(const LatentVector& base, std::span<const SemanticDirection> components,
                              std::uint64_t seed, const EmbeddingOracle& embed, double tau_id,
                              FrpcaOptions opt = {}) {
  if (components.empty()) throw std::invalid_argument("edit_frpca: no components");
  const auto coeffs = frpca_coefficients(components.size(), seed);
  return edit_frpca_with_coefficients(base, components, coeffs, embed, tau_id, opt);
}

}  // namespace morphforge
