#include <gtest/gtest.h>

#include <atomic>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>
#include <thread>

#include "morphforge/gates.hpp"
#include "morphforge/gateway/codec.hpp"
#include "morphforge/gateway/file_provider.hpp"
#include "morphforge/gateway/http_provider.hpp"
#include "morphforge/gateway/toy_provider.hpp"

using namespace morphforge;
namespace fs = std::filesystem;

namespace {

std::vector<double> toy_latent(std::initializer_list<std::pair<std::size_t, double>> set, std::size_t dim = 64) {
  std::vector<double> v(dim, 0.0);
  v[toy_axis::kGender] = 0.5;
  v[0 + 13] = 1.0;  // keep the embedding non-zero
  for (auto [i, x] : set) v[i] = x;
  return v;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("morphforge_gw_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

// Runs an httplib server on an ephemeral port for the lifetime of the object.
struct TestServer {
  httplib::Server svr;
  std::thread thread;
  int port{0};

  void start() {
    port = svr.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }
  ~TestServer() {
    svr.stop();
    if (thread.joinable()) thread.join();
  }
};

HttpProviderOptions client_for(int port, int retries = 3) {
  HttpProviderOptions o;
  o.port = port;
  o.retries = retries;
  o.backoff_ms = 1;
  o.timeout_s = 5;
  o.latent_dim = 64;
  o.embedding_dim = 16;
  return o;
}

}  // namespace

// ---------------------------------------------------------------------------
// Codecs

TEST(Synv, HeaderLayout) {
  const auto bytes = codec::encode_synv({2, 1, {1.0f, -2.0f}});
  const codec::Bytes expect{'S', 'Y', 'N', 'V', 1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0,
                            0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  EXPECT_EQ(bytes, expect);
}

TEST(Synv, RoundTripIsBitExact) {
  std::mt19937 rng(1);
  for (int t = 0; t < 200; ++t) {
    codec::SynvBlock b;
    b.count = rng() % 5;
    b.dim = rng() % 7;
    for (std::size_t i = 0; i < std::size_t(b.count) * b.dim; ++i) {
      float f;
      do {
        const std::uint32_t bits = static_cast<std::uint32_t>(rng());
        std::memcpy(&f, &bits, 4);
      } while (!std::isfinite(f));
      b.values.push_back(f);
    }
    const auto back = codec::decode_synv(codec::encode_synv(b));
    ASSERT_EQ(back.count, b.count);
    ASSERT_EQ(back.dim, b.dim);
    ASSERT_EQ(std::memcmp(back.values.data(), b.values.data(), 4 * b.values.size()), 0);
  }
  const codec::SynvBlock edge{1, 4, {-0.0f, std::numeric_limits<float>::denorm_min(), std::numeric_limits<float>::max(), 1e-30f}};
  const auto back = codec::decode_synv(codec::encode_synv(edge));
  EXPECT_TRUE(std::signbit(back.values[0]));
  EXPECT_EQ(back.values[1], edge.values[1]);
}

TEST(Synv, Errors) {
  auto good = codec::encode_synv({1, 2, {1.0f, 2.0f}});
  auto bad = good;
  bad[0] = 'X';
  EXPECT_THROW(codec::decode_synv(bad), codec::FormatError);
  bad = good;
  bad[4] = 2;
  EXPECT_THROW(codec::decode_synv(bad), codec::FormatError);
  bad = good;
  bad.pop_back();
  EXPECT_THROW(codec::decode_synv(bad), codec::FormatError);
  EXPECT_THROW(codec::decode_synv({'S', 'Y'}), codec::FormatError);
  bad = good;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(&bad[16], &nan, 4);
  EXPECT_THROW(codec::decode_synv(bad), codec::FormatError);
  EXPECT_THROW(codec::encode_synv({1, 2, {1.0f}}), codec::FormatError);
  EXPECT_THROW(codec::encode_synv({1, 1, {nan}}), codec::FormatError);
}

TEST(Base64, StandardVectors) {
  const std::vector<std::pair<std::string, std::string>> v{
      {"", ""}, {"f", "Zg=="}, {"fo", "Zm8="}, {"foo", "Zm9v"}, {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"}};
  for (const auto& [plain, enc] : v) {
    const codec::Bytes b(plain.begin(), plain.end());
    EXPECT_EQ(codec::base64_encode(b), enc);
    EXPECT_EQ(codec::base64_decode(enc), b);
  }
  EXPECT_THROW(codec::base64_decode("Zm9"), codec::FormatError);
  EXPECT_THROW(codec::base64_decode("Zm!v"), codec::FormatError);
}

TEST(Png, RoundTrip) {
  Raster g(7, 5, 1), c(4, 3, 3);
  for (std::size_t i = 0; i < g.data().size(); ++i) g.data()[i] = static_cast<std::uint8_t>(i * 37);
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] = static_cast<std::uint8_t>(i * 11 + 3);
  EXPECT_EQ(codec::decode_png(codec::encode_png(g)), g);
  EXPECT_EQ(codec::decode_png(codec::encode_png(c)), c);
  EXPECT_EQ(codec::encode_png(g), codec::encode_png(g));
  EXPECT_THROW(codec::decode_png({1, 2, 3}), codec::FormatError);
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(codec::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

// ---------------------------------------------------------------------------
// Toy provider

TEST(Toy, DecodeIsDeterministic) {
  ToyProvider toy;
  const auto w = toy.sample_latent(1, 42)[0];
  EXPECT_EQ(codec::encode_png(toy.decode_latent(w)), codec::encode_png(toy.decode_latent(w)));
  EXPECT_EQ(toy.sample_latent(3, 42)[0], w);
  EXPECT_NE(toy.sample_latent(1, 43)[0], w);
}

TEST(Toy, RenderedEyesMatchLandmarks) {
  ToyProvider toy;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto v = toy.sample_latent(1, seed)[0].values();
    v[toy_axis::kGlasses] = 0.0;
    v[toy_axis::kEyeOpen] = std::abs(v[toy_axis::kEyeOpen]) + 2.0;  // wide open eyes
    const Raster img = toy.decode_latent(LatentVector(v));
    const LandmarkSet l = toy.detect_landmarks(img);
    for (auto [b, e] : {std::pair{landmarks::kLeftEyeBegin, landmarks::kLeftEyeEnd},
                        std::pair{landmarks::kRightEyeBegin, landmarks::kRightEyeEnd}}) {
      const Point2 c = l.centroid(b, e);
      double sx = 0, sy = 0, n = 0;
      for (int y = static_cast<int>(c.y) - 15; y <= static_cast<int>(c.y) + 15; ++y)
        for (int x = static_cast<int>(c.x) - 20; x <= static_cast<int>(c.x) + 20; ++x)
          if (img.at(x, y) == 45) {
            sx += x;
            sy += y;
            n += 1;
          }
      ASSERT_GT(n, 0);
      EXPECT_NEAR(sx / n, c.x, 0.5) << "seed " << seed;
      EXPECT_NEAR(sy / n, c.y, 0.5) << "seed " << seed;
    }
  }
}

TEST(Toy, Embeddings) {
  ToyProvider toy;
  const auto w = LatentVector(toy_latent({{1, 0.3}}));
  EXPECT_EQ(cosine_distance(toy.embed_face(toy.decode_latent(w)), toy.embed_face(toy.decode_latent(w))), 0.0);
  std::vector<double> a(64, 0.0), b(64, 0.0);
  a[0] = 1.0;
  b[1] = 2.0;
  EXPECT_NEAR(cosine_distance(toy.embed_face(toy.decode_latent(LatentVector(a))),
                              toy.embed_face(toy.decode_latent(LatentVector(b)))),
              1.0, 1e-6);
  EXPECT_EQ(toy.embed_face(toy.decode_latent(w)).size(), 16u);
}

TEST(Toy, Pose) {
  ToyProvider toy;
  const auto frontal = toy.estimate_pose(toy.decode_latent(LatentVector(toy_latent({}))));
  EXPECT_EQ(frontal.yaw, 0.0);
  EXPECT_EQ(frontal.pitch, 0.0);
  const auto turned = toy.estimate_pose(toy.decode_latent(LatentVector(toy_latent({{toy_axis::kYaw, 7.0 / 3.0}}))));
  EXPECT_NEAR(turned.yaw, 7.0, 0.1);
}

TEST(Toy, BlankImageHasNoFace) {
  ToyProvider toy;
  EXPECT_THROW(toy.embed_face(Raster(256, 256, 1, 0)), NoFaceError);
  EXPECT_THROW(toy.detect_landmarks(Raster(256, 256, 1, 128)), NoFaceError);
  EXPECT_THROW(toy.estimate_pose(Raster(64, 64, 3, 0)), NoFaceError);
}

TEST(Toy, GatesSeeToyAttributes) {
  ToyProvider toy;
  const GateConfig gc;
  auto check = [&](std::vector<double> v) {
    const Raster img = toy.decode_latent(LatentVector(std::move(v)));
    const LandmarkSet l = toy.detect_landmarks(img);
    return std::pair{closed_eye_check(l, gc.min_eye_aspect_ratio).open,
                     glasses_check(img, l, gc.max_bridge_edge_density).flagged};
  };
  EXPECT_EQ(check(toy_latent({})), std::pair(true, false));
  EXPECT_EQ(check(toy_latent({{toy_axis::kGlasses, 2.0}})), std::pair(true, true));
  EXPECT_EQ(check(toy_latent({{toy_axis::kEyeOpen, -3.0}})), std::pair(false, false));
  // Sampled faces without glasses keep a clean bridge.
  for (std::uint64_t s = 0; s < 30; ++s) {
    auto v = toy.sample_latent(1, s)[0].values();
    v[toy_axis::kGlasses] = 0.0;
    EXPECT_FALSE(check(v).second) << "seed " << s;
  }
}

namespace {
class WrongDimProvider : public ToyProvider {
 public:
  std::size_t embedding_dim() const override { return 8; }
};
class DecodeOnly : public ToyProvider {
 public:
  std::set<Capability> capabilities() const override { return {Capability::decode_latent}; }
};
}  // namespace

TEST(Provider, ContractChecks) {
  WrongDimProvider wrong;
  const Raster img = wrong.decode_latent(LatentVector(toy_latent({})));
  EXPECT_THROW(wrong.embed_face(img), MalformedResponse);
  EXPECT_THROW(wrong.decode_latent(LatentVector::zeros(10)), std::invalid_argument);
  DecodeOnly dec;
  try {
    dec.embed_face(img);
    FAIL();
  } catch (const UnsupportedCapability& e) {
    EXPECT_EQ(e.capability(), Capability::embed_face);
  }
  EXPECT_THROW(ToyProvider({64, 63}), std::invalid_argument);
  EXPECT_THROW(ToyProvider({8, 4}), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// File provider

TEST(FileProvider, ReplaysRecordedAnswers) {
  const auto root = scratch("replay");
  ToyProvider toy;
  RecordingProvider rec(toy, root);
  const auto w = rec.sample_latent(2, 5);
  const Raster img = rec.decode_latent(w[1]);
  const Embedding e = rec.embed_face(img);
  const PoseEstimate p = rec.estimate_pose(img);
  const LandmarkSet l = rec.detect_landmarks(img);

  FileProvider files(root);
  EXPECT_EQ(files.capabilities(), toy.capabilities());
  const auto w2 = files.sample_latent(2, 5);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(w2[1][i], static_cast<float>(w[1][i]));
  EXPECT_EQ(files.decode_latent(w[1]), img);
  const Embedding e2 = files.embed_face(img);
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(e2.values[i], e.values[i], 1e-7);
  EXPECT_EQ(files.estimate_pose(img).yaw, p.yaw);
  EXPECT_EQ(files.detect_landmarks(img), l);
  fs::remove_all(root);
}

TEST(FileProvider, MissingKeyNamesTheArtifact) {
  const auto root = scratch("missing");
  ToyProvider toy;
  { RecordingProvider rec(toy, root); }
  FileProvider files(root);
  const LatentVector w(toy_latent({}));
  try {
    files.decode_latent(w);
    FAIL();
  } catch (const ArtifactNotFound& e) {
    EXPECT_EQ(e.key(), "decode/" + latent_key(w) + ".png");
    EXPECT_NE(std::string(e.what()).find("artifact not found: decode/"), std::string::npos);
  }
  EXPECT_THROW(FileProvider(root / "nope"), ArtifactNotFound);
  fs::remove_all(root);
}

// ---------------------------------------------------------------------------
// HTTP provider

TEST(Http, MatchesToyProviderOverTheWire) {
  ToyProvider toy;
  TestServer server;
  serve_provider(server.svr, toy);
  server.start();
  HttpProvider http(client_for(server.port));
  EXPECT_EQ(http.capabilities(), toy.capabilities());
  const auto w = http.sample_latent(2, 9);
  const auto wt = toy.sample_latent(2, 9);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(w[0][i], static_cast<float>(wt[0][i]));
  const Raster img = http.decode_latent(w[0]);
  EXPECT_EQ(img, toy.decode_latent(w[0]));
  EXPECT_NEAR(cosine_distance(http.embed_face(img), toy.embed_face(img)), 0.0, 1e-7);
  EXPECT_EQ(http.estimate_pose(img).pitch, toy.estimate_pose(img).pitch);
  EXPECT_EQ(http.detect_landmarks(img), toy.detect_landmarks(img));
  EXPECT_THROW(http.embed_face(Raster(256, 256, 1, 0)), NoFaceError);

  // Concurrent callers share the client.
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int t = 0; t < 12; ++t)
    threads.emplace_back([&] {
      if (http.detect_landmarks(img) == toy.detect_landmarks(img)) ++ok;
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 12);
}

TEST(Http, RetriesServerErrorsButNotClientErrors) {
  ToyProvider toy;
  TestServer server;
  std::atomic<int> hits{0};
  server.svr.Post("/v1/pose", [&](const httplib::Request&, httplib::Response& res) {
    if (++hits < 3) {
      res.status = 503;
      res.set_content(R"({"error":"busy"})", "application/json");
      return;
    }
    res.set_content(R"({"poses":[{"yaw":1.5,"pitch":-2,"roll":0}]})", "application/json");
  });
  std::atomic<int> bad_hits{0};
  server.svr.Post("/v1/landmarks", [&](const httplib::Request&, httplib::Response& res) {
    ++bad_hits;
    res.status = 400;
    res.set_content(R"({"error":"bad image"})", "application/json");
  });
  server.svr.Post("/v1/embed", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  server.svr.Post("/v1/decode", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"images":["%%%%"]})", "application/json");
  });
  server.svr.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok","capabilities":["decode_latent","embed_face","estimate_pose","detect_landmarks"]})",
                    "application/json");
  });
  server.start();
  HttpProvider http(client_for(server.port));
  const Raster img = toy.decode_latent(LatentVector(toy_latent({})));

  EXPECT_EQ(http.estimate_pose(img).yaw, 1.5);
  EXPECT_EQ(hits.load(), 3);
  try {
    http.detect_landmarks(img);
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_NE(std::string(e.what()).find("bad image"), std::string::npos);
  }
  EXPECT_EQ(bad_hits.load(), 1);
  EXPECT_THROW(http.embed_face(img), MalformedResponse);
  EXPECT_THROW(http.decode_latent(LatentVector(toy_latent({}))), MalformedResponse);
  EXPECT_THROW(http.sample_latent(1, 1), UnsupportedCapability);
}

TEST(Http, GivesUpAfterRetries) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto opt = client_for(port, 2);
  opt.timeout_s = 1;
  HttpProvider http(opt);
  EXPECT_THROW(http.capabilities(), TransportError);
}
