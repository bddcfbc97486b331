#pragma once

// Precomputed model outputs addressed by content hash:
//   <root>/provider.json                 capabilities and dimensions
//   <root>/sample/<seed>-<count>.synv
//   <root>/decode/<sha256 of latent SYNV>.png
//   <root>/{embed,pose,landmarks}/<sha256 of raw image>.{synv,json,json}

#include <filesystem>
#include <mutex>
#include <string>

#include "morphforge/gateway/codec.hpp"
#include "morphforge/gateway/provider.hpp"
#include "morphforge/json_io.hpp"

namespace morphforge {

inline std::string latent_key(const LatentVector& w) {
  const auto bytes = codec::encode_synv(codec::latents_to_synv({w}));
  return codec::sha256_hex(bytes.data(), bytes.size());
}

inline std::string image_key(const Raster& r) {
  std::string buf = std::to_string(r.width()) + "x" + std::to_string(r.height()) + "x" + std::to_string(r.channels()) + "\n";
  buf.append(r.data().begin(), r.data().end());
  return codec::sha256_hex(buf);
}

namespace detail {

inline std::string sample_key(std::size_t count, std::uint64_t seed) {
  return "sample/" + std::to_string(seed) + "-" + std::to_string(count) + ".synv";
}

}  // namespace detail

class FileProvider : public InferenceProvider {
 public:
  explicit FileProvider(std::filesystem::path root) : root_(std::move(root)) {
    const auto meta_path = root_ / "provider.json";
    if (!std::filesystem::exists(meta_path)) throw ArtifactNotFound("provider.json");
    const auto bytes = codec::read_file(meta_path);
    const json meta = json::parse(bytes.begin(), bytes.end());
    for (const auto& c : meta.at("capabilities")) caps_.insert(parse_capability(c.get<std::string>()));
    latent_dim_ = meta.at("latent_dim").get<std::size_t>();
    embedding_dim_ = meta.at("embedding_dim").get<std::size_t>();
  }

  std::set<Capability> capabilities() const override { return caps_; }
  std::size_t latent_dim() const override { return latent_dim_; }
  std::size_t embedding_dim() const override { return embedding_dim_; }

 protected:
  std::vector<LatentVector> do_sample_latent(std::size_t count, std::uint64_t seed) override {
    return codec::synv_to_latents(codec::decode_synv(load(detail::sample_key(count, seed))));
  }
  Raster do_decode_latent(const LatentVector& w) override {
    return codec::decode_png(load("decode/" + latent_key(w) + ".png"));
  }
  Embedding do_embed_face(const Raster& img) override {
    const auto block = codec::decode_synv(load("embed/" + image_key(img) + ".synv"));
    if (block.count != 1) throw MalformedResponse("embedding file must hold one vector");
    return Embedding(block.row(0));
  }
  PoseEstimate do_estimate_pose(const Raster& img) override {
    const auto b = load("pose/" + image_key(img) + ".json");
    return pose_from_json(json::parse(b.begin(), b.end()));
  }
  LandmarkSet do_detect_landmarks(const Raster& img) override {
    const auto b = load("landmarks/" + image_key(img) + ".json");
    return landmarks_from_json(json::parse(b.begin(), b.end()));
  }

 private:
  codec::Bytes load(const std::string& key) const {
    const auto p = root_ / key;
    if (!std::filesystem::exists(p)) throw ArtifactNotFound(key);
    return codec::read_file(p);
  }

  std::filesystem::path root_;
  std::set<Capability> caps_;
  std::size_t latent_dim_{0};
  std::size_t embedding_dim_{0};
};

/// Forwards to another provider and stores every answer in the FileProvider
/// layout, so a later FileProvider over the same root replays them.
class RecordingProvider : public InferenceProvider {
 public:
  RecordingProvider(InferenceProvider& inner, std::filesystem::path root) : inner_(inner), root_(std::move(root)) {
    json meta{{"latent_dim", inner_.latent_dim()}, {"embedding_dim", inner_.embedding_dim()}};
    meta["capabilities"] = json::array();
    for (auto c : inner_.capabilities()) meta["capabilities"].push_back(to_string(c));
    codec::write_file_atomic(root_ / "provider.json", meta.dump(2) + "\n");
  }

  std::set<Capability> capabilities() const override { return inner_.capabilities(); }
  std::size_t latent_dim() const override { return inner_.latent_dim(); }
  std::size_t embedding_dim() const override { return inner_.embedding_dim(); }

 protected:
  std::vector<LatentVector> do_sample_latent(std::size_t count, std::uint64_t seed) override {
    auto out = inner_.sample_latent(count, seed);
    store(detail::sample_key(count, seed), codec::encode_synv(codec::latents_to_synv(out)));
    return out;
  }
  Raster do_decode_latent(const LatentVector& w) override {
    Raster r = inner_.decode_latent(w);
    store("decode/" + latent_key(w) + ".png", codec::encode_png(r));
    return r;
  }
  Embedding do_embed_face(const Raster& img) override {
    Embedding e = inner_.embed_face(img);
    std::vector<float> v(e.values.begin(), e.values.end());
    store("embed/" + image_key(img) + ".synv", codec::encode_synv({1, static_cast<std::uint32_t>(v.size()), v}));
    return e;
  }
  PoseEstimate do_estimate_pose(const Raster& img) override {
    PoseEstimate p = inner_.estimate_pose(img);
    store("pose/" + image_key(img) + ".json", pose_to_json(p).dump());
    return p;
  }
  LandmarkSet do_detect_landmarks(const Raster& img) override {
    LandmarkSet l = inner_.detect_landmarks(img);
    store("landmarks/" + image_key(img) + ".json", landmarks_to_json(l).dump());
    return l;
  }

 private:
  template <class Payload>
  void store(const std::string& key, const Payload& payload) {
    std::lock_guard lock(mu_);
    codec::write_file_atomic(root_ / key, payload);
  }

  InferenceProvider& inner_;
  std::filesystem::path root_;
  std::mutex mu_;
};

}  // namespace morphforge
