#pragma once

// JSON-over-HTTP provider protocol: client and a server adapter that exposes
// any InferenceProvider with the same endpoints.
//
//   GET  /v1/health     -> {"status":"ok","capabilities":[...],"latent_dim":D,"embedding_dim":E}
//   POST /v1/sample     {count, seed}      -> {latents: b64 SYNV}
//   POST /v1/decode     {latents: b64 SYNV} -> {images: [b64 PNG, ...]}
//   POST /v1/embed      {images: [...]}     -> {embeddings: b64 SYNV}
//   POST /v1/pose       {images: [...]}     -> {poses: [{yaw, pitch, roll}, ...]}
//   POST /v1/landmarks  {images: [...]}     -> {landmarks: [[[x, y] x 68], ...]}
// Failures answer 4xx/5xx with {"error": "..."}; 422 "no face" is reported
// as NoFaceError by the client.

#include <httplib.h>

#include <chrono>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>

#include "morphforge/gateway/codec.hpp"
#include "morphforge/gateway/provider.hpp"
#include "morphforge/json_io.hpp"

namespace morphforge {

struct HttpProviderOptions {
  std::string host = "127.0.0.1";
  int port = 8321;
  int retries = 3;
  int backoff_ms = 100;  // doubled after every failed attempt
  int timeout_s = 30;
  std::size_t latent_dim = 512;
  std::size_t embedding_dim = 512;
};

class HttpProvider : public InferenceProvider {
 public:
  static constexpr std::ptrdiff_t kMaxInFlight = 8;

  explicit HttpProvider(HttpProviderOptions opt) : opt_(std::move(opt)) {}

  std::set<Capability> capabilities() const override {
    std::lock_guard lock(caps_mu_);
    if (!caps_) {
      const json h = call("GET", "/v1/health", json());
      std::set<Capability> caps;
      try {
        if (h.at("status") != "ok") throw MalformedResponse("health status is not ok");
        for (const auto& c : h.at("capabilities")) caps.insert(parse_capability(c.get<std::string>()));
      } catch (const json::exception& e) {
        throw MalformedResponse(std::string("bad health response: ") + e.what());
      } catch (const std::invalid_argument& e) {
        throw MalformedResponse(e.what());
      }
      caps_ = std::move(caps);
    }
    return *caps_;
  }
  std::size_t latent_dim() const override { return opt_.latent_dim; }
  std::size_t embedding_dim() const override { return opt_.embedding_dim; }

 protected:
  std::vector<LatentVector> do_sample_latent(std::size_t count, std::uint64_t seed) override {
    const json r = call("POST", "/v1/sample", {{"count", count}, {"seed", seed}});
    return parse([&] { return codec::synv_to_latents(synv_field(r, "latents")); });
  }

  Raster do_decode_latent(const LatentVector& w) override {
    const json body{{"latents", codec::base64_encode(codec::encode_synv(codec::latents_to_synv({w})))}};
    const json r = call("POST", "/v1/decode", body);
    return parse([&] {
      const auto& imgs = r.at("images");
      if (imgs.size() != 1) throw MalformedResponse("expected one image");
      return codec::decode_png(codec::base64_decode(imgs[0].get<std::string>()));
    });
  }

  Embedding do_embed_face(const Raster& img) override {
    const json r = call("POST", "/v1/embed", images_body(img));
    return parse([&] {
      const auto b = synv_field(r, "embeddings");
      if (b.count != 1) throw MalformedResponse("expected one embedding");
      return Embedding(b.row(0));
    });
  }

  PoseEstimate do_estimate_pose(const Raster& img) override {
    const json r = call("POST", "/v1/pose", images_body(img));
    return parse([&] {
      const auto& poses = r.at("poses");
      if (poses.size() != 1) throw MalformedResponse("expected one pose");
      return pose_from_json(poses[0]);
    });
  }

  LandmarkSet do_detect_landmarks(const Raster& img) override {
    const json r = call("POST", "/v1/landmarks", images_body(img));
    return parse([&] {
      const auto& l = r.at("landmarks");
      if (l.size() != 1) throw MalformedResponse("expected one landmark set");
      return landmarks_from_json(l[0]);
    });
  }

 private:
  static json images_body(const Raster& img) {
    return {{"images", json::array({codec::base64_encode(codec::encode_png(img))})}};
  }

  static codec::SynvBlock synv_field(const json& r, const char* key) {
    return codec::decode_synv(codec::base64_decode(r.at(key).get<std::string>()));
  }

  template <class F>
  static auto parse(F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const ProviderError&) {
      throw;
    } catch (const std::exception& e) {
      throw MalformedResponse(e.what());
    }
  }

  json call(const std::string& method, const std::string& path, const json& body) const {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<kMaxInFlight>& s;
      ~Release() { s.release(); }
    } release{slots_};

    std::string last_error;
    int delay = opt_.backoff_ms;
    for (int attempt = 0; attempt <= opt_.retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        delay *= 2;
      }
      httplib::Client cli(opt_.host, opt_.port);
      cli.set_connection_timeout(opt_.timeout_s, 0);
      cli.set_read_timeout(opt_.timeout_s, 0);
      cli.set_write_timeout(opt_.timeout_s, 0);
      auto res = method == "GET" ? cli.Get(path) : cli.Post(path, body.dump(), "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status) + " " + error_message(res->body);
        continue;
      }
      if (res->status == 422 && error_message(res->body) == "no face") throw NoFaceError();
      if (res->status >= 400) {
        throw ProviderError(path + ": HTTP " + std::to_string(res->status) + " " + error_message(res->body));
      }
      try {
        return json::parse(res->body);
      } catch (const json::exception& e) {
        throw MalformedResponse(path + ": response is not JSON");
      }
    }
    throw TransportError(path + ": " + last_error + " after " + std::to_string(opt_.retries + 1) + " attempts");
  }

  static std::string error_message(const std::string& body) {
    try {
      const json j = json::parse(body);
      if (j.is_object() && j.contains("error") && j["error"].is_string()) return j["error"].get<std::string>();
    } catch (const json::exception&) {
    }
    return body;
  }

  HttpProviderOptions opt_;
  mutable std::counting_semaphore<kMaxInFlight> slots_{kMaxInFlight};
  mutable std::mutex caps_mu_;
  mutable std::optional<std::set<Capability>> caps_;
};

/// Registers the protocol endpoints on `server`, answering from `provider`.
inline void serve_provider(httplib::Server& server, InferenceProvider& provider) {
  auto reply = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  InferenceProvider* p = &provider;
  auto guarded = [p, reply](auto handler) {
    return [p, reply, handler](const httplib::Request& req, httplib::Response& res) {
      try {
        const json body = req.body.empty() ? json::object() : json::parse(req.body);
        reply(res, 200, handler(*p, body));
      } catch (const NoFaceError&) {
        reply(res, 422, {{"error", "no face"}});
      } catch (const UnsupportedCapability& e) {
        reply(res, 404, {{"error", e.what()}});
      } catch (const ProviderError& e) {
        reply(res, 500, {{"error", e.what()}});
      } catch (const std::exception& e) {
        reply(res, 400, {{"error", e.what()}});
      }
    };
  };
  auto images = [](const json& body) {
    std::vector<Raster> out;
    for (const auto& s : body.at("images")) out.push_back(codec::decode_png(codec::base64_decode(s.get<std::string>())));
    return out;
  };

  server.Get("/v1/health", [p, reply](const httplib::Request&, httplib::Response& res) {
    json caps = json::array();
    for (auto c : p->capabilities()) caps.push_back(to_string(c));
    reply(res, 200,
          {{"status", "ok"}, {"capabilities", caps}, {"latent_dim", p->latent_dim()}, {"embedding_dim", p->embedding_dim()}});
  });
  server.Post("/v1/sample", guarded([](InferenceProvider& prov, const json& b) {
                const auto l = prov.sample_latent(b.at("count").get<std::size_t>(), b.at("seed").get<std::uint64_t>());
                return json{{"latents", codec::base64_encode(codec::encode_synv(codec::latents_to_synv(l)))}};
              }));
  server.Post("/v1/decode", guarded([](InferenceProvider& prov, const json& b) {
                json out = json::array();
                const auto block = codec::decode_synv(codec::base64_decode(b.at("latents").get<std::string>()));
                for (const auto& w : codec::synv_to_latents(block))
                  out.push_back(codec::base64_encode(codec::encode_png(prov.decode_latent(w))));
                return json{{"images", out}};
              }));
  server.Post("/v1/embed", guarded([images](InferenceProvider& prov, const json& b) {
                codec::SynvBlock block;
                const auto imgs = images(b);
                block.count = static_cast<std::uint32_t>(imgs.size());
                block.dim = static_cast<std::uint32_t>(prov.embedding_dim());
                for (const auto& img : imgs)
                  for (double v : prov.embed_face(img).values) block.values.push_back(static_cast<float>(v));
                return json{{"embeddings", codec::base64_encode(codec::encode_synv(block))}};
              }));
  server.Post("/v1/pose", guarded([images](InferenceProvider& prov, const json& b) {
                json out = json::array();
                for (const auto& img : images(b)) out.push_back(pose_to_json(prov.estimate_pose(img)));
                return json{{"poses", out}};
              }));
  server.Post("/v1/landmarks", guarded([images](InferenceProvider& prov, const json& b) {
                json out = json::array();
                for (const auto& img : images(b)) out.push_back(landmarks_to_json(prov.detect_landmarks(img)));
                return json{{"landmarks", out}};
              }));
}

}  // namespace morphforge
