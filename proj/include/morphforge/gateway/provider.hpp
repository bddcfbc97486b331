#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "morphforge/embedding.hpp"
#include "morphforge/gates.hpp"
#include "morphforge/geometry.hpp"
#include "morphforge/latent_math.hpp"
#include "morphforge/raster.hpp"

namespace morphforge {

enum class Capability { sample_latent, decode_latent, embed_face, estimate_pose, detect_landmarks };

inline const char* to_string(Capability c) {
  switch (c) {
    case Capability::sample_latent: return "sample_latent";
    case Capability::decode_latent: return "decode_latent";
    case Capability::embed_face: return "embed_face";
    case Capability::estimate_pose: return "estimate_pose";
    case Capability::detect_landmarks: return "detect_landmarks";
  }
  return "?";
}

inline Capability parse_capability(const std::string& s) {
  for (auto c : {Capability::sample_latent, Capability::decode_latent, Capability::embed_face,
                 Capability::estimate_pose, Capability::detect_landmarks}) {
    if (s == to_string(c)) return c;
  }
  throw std::invalid_argument("unknown capability '" + s + "'");
}

inline const std::set<Capability>& all_capabilities() {
  static const std::set<Capability> all{Capability::sample_latent, Capability::decode_latent, Capability::embed_face,
                                        Capability::estimate_pose, Capability::detect_landmarks};
  return all;
}

/// Base of all provider failures.
class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedCapability : public ProviderError {
 public:
  explicit UnsupportedCapability(Capability c)
      : ProviderError(std::string("provider does not support ") + to_string(c)), capability_(c) {}
  Capability capability() const { return capability_; }

 private:
  Capability capability_;
};

/// Connection failures and server-side errors that survived all retries.
class TransportError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class MalformedResponse : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class NoFaceError : public ProviderError {
 public:
  NoFaceError() : ProviderError("no face") {}
};

class ArtifactNotFound : public ProviderError {
 public:
  explicit ArtifactNotFound(std::string key) : ProviderError("artifact not found: " + key), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Model-backed capabilities behind one interface. The public calls check
/// the declared capability set and validate results; implementations
/// override the do_* hooks. Implementations must be safe for concurrent use.
class InferenceProvider {
 public:
  virtual ~InferenceProvider() = default;

  virtual std::set<Capability> capabilities() const = 0;
  virtual std::size_t latent_dim() const = 0;
  virtual std::size_t embedding_dim() const = 0;

  bool supports(Capability c) const { return capabilities().count(c) > 0; }

  std::vector<LatentVector> sample_latent(std::size_t count, std::uint64_t seed) {
    require(Capability::sample_latent);
    auto out = do_sample_latent(count, seed);
    if (out.size() != count) throw MalformedResponse("provider returned " + std::to_string(out.size()) + " latents, asked for " + std::to_string(count));
    for (const auto& l : out) {
      if (l.dim() != latent_dim()) throw MalformedResponse("provider returned latent of dimension " + std::to_string(l.dim()));
    }
    return out;
  }

  Raster decode_latent(const LatentVector& w) {
    require(Capability::decode_latent);
    if (w.dim() != latent_dim()) {
      throw std::invalid_argument("latent dimension " + std::to_string(w.dim()) + " does not match provider's " +
                                  std::to_string(latent_dim()));
    }
    return do_decode_latent(w);
  }

  Embedding embed_face(const Raster& image) {
    require(Capability::embed_face);
    Embedding e = do_embed_face(image);
    if (e.size() != embedding_dim()) {
      throw MalformedResponse("embedding has dimension " + std::to_string(e.size()) + ", provider declares " +
                              std::to_string(embedding_dim()));
    }
    if (e.norm() == 0.0) throw MalformedResponse("provider returned a zero embedding");
    return e;
  }

  PoseEstimate estimate_pose(const Raster& image) {
    require(Capability::estimate_pose);
    PoseEstimate p = do_estimate_pose(image);
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw MalformedResponse(e.what());
    }
    return p;
  }

  LandmarkSet detect_landmarks(const Raster& image) {
    require(Capability::detect_landmarks);
    return do_detect_landmarks(image);
  }

 protected:
  virtual std::vector<LatentVector> do_sample_latent(std::size_t, std::uint64_t) {
    throw UnsupportedCapability(Capability::sample_latent);
  }
  virtual Raster do_decode_latent(const LatentVector&) { throw UnsupportedCapability(Capability::decode_latent); }
  virtual Embedding do_embed_face(const Raster&) { throw UnsupportedCapability(Capability::embed_face); }
  virtual PoseEstimate do_estimate_pose(const Raster&) { throw UnsupportedCapability(Capability::estimate_pose); }
  virtual LandmarkSet do_detect_landmarks(const Raster&) { throw UnsupportedCapability(Capability::detect_landmarks); }

 private:
  void require(Capability c) const {
    if (!supports(c)) throw UnsupportedCapability(c);
  }
};

}  // namespace morphforge
