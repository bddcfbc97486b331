#pragma once

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "morphforge/gates.hpp"
#include "morphforge/gateway/codec.hpp"
#include "morphforge/gateway/file_provider.hpp"
#include "morphforge/gateway/http_provider.hpp"
#include "morphforge/gateway/toy_provider.hpp"
#include "morphforge/json_io.hpp"
#include "morphforge/latent_math.hpp"

namespace morphforge {

struct SplitCounts {
  std::size_t train = 1000;
  std::size_t dev = 75;
  std::size_t test = 100;

  std::size_t total() const { return train + dev + test; }
};

struct MatedCounts {
  std::size_t ifgs = 63;
  std::size_t ifgd = 90;
  std::size_t frpca = 55;
};

struct IfgsGrid {
  std::vector<double> illumination{-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5};
  std::vector<double> age{-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0, 2.5};

  std::size_t size() const { return illumination.size() * age.size(); }
};

struct IfgdGrid {
  std::vector<double> pose{-1.5, 1.5};
  std::vector<double> expression{-2.0, 0.0, 2.0};
  std::vector<double> illumination{-3.0, -1.5, 0.0, 1.5, 3.0};
  std::vector<double> age{-2.0, 0.0, 2.0};

  std::size_t size() const { return pose.size() * expression.size() * illumination.size() * age.size(); }
};

struct FrpcaConfig {
  std::size_t components = 55;
  double tau_id = 0.3;
  double max_scale = 10.0;
  int iterations = 32;
  std::size_t pca_samples = 1000;
};

struct ProviderConfig {
  std::string mode = "toy";  // toy | file | http
  std::size_t latent_dim = 64;
  std::size_t embedding_dim = 16;
  std::string root;  // file mode
  std::string host = "127.0.0.1";
  int port = 8321;
  int retries = 3;
};

struct EvaluationConfig {
  std::map<std::string, double> frs_thresholds;
  std::string map_policy = "both";
  int kld_bins = 100;
  double kld_epsilon = 1e-10;
  int kde_grid = 200;
};

struct PipelineConfig {
  std::uint64_t seed = 1234;
  SplitCounts counts;  // per gender
  MatedCounts mated;
  GateConfig gates;
  IfgsGrid ifgs_grid;
  IfgdGrid ifgd_grid;
  FrpcaConfig frpca;
  std::size_t pairing_k = 50;
  double morph_alpha = 0.5;
  int splice_feather = 8;
  double demorph_factor = 0.5;
  std::size_t candidate_budget = 100000;
  ProviderConfig provider;
  std::string gender_source = "toy";  // toy | labels
  std::string gender_labels;          // JSON {"<candidate index>": "F" | "M"}
  std::string directions = "toy";     // toy | path to a JSON direction file
  EvaluationConfig evaluation;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
    if (mated.ifgs != 0 && mated.ifgs != ifgs_grid.size()) {
      fail("mated.ifgs = " + std::to_string(mated.ifgs) + " but the IFGS grid has " + std::to_string(ifgs_grid.size()) + " recipes");
    }
    if (mated.ifgd != 0 && mated.ifgd != ifgd_grid.size()) {
      fail("mated.ifgd = " + std::to_string(mated.ifgd) + " but the IFGD grid has " + std::to_string(ifgd_grid.size()) + " recipes");
    }
    if (!(gates.diversity_threshold > 0.0 && gates.diversity_threshold <= 2.0)) fail("gates.diversity_threshold must be in (0, 2]");
    if (!(gates.preservation_threshold > 0.0 && gates.preservation_threshold < 2.0)) fail("gates.preservation_threshold must be in (0, 2)");
    if (!(gates.pose_limit_deg >= 0.0)) fail("gates.pose_limit_deg must be non-negative");
    if (!(gates.min_eye_aspect_ratio >= 0.0)) fail("gates.min_eye_aspect_ratio must be non-negative");
    if (!(gates.max_bridge_edge_density >= 0.0)) fail("gates.max_bridge_edge_density must be non-negative");
    if (!(gates.canny_low < gates.canny_high) || !(gates.canny_sigma > 0.0)) fail("gates: canny parameters invalid");
    if (!(frpca.tau_id > 0.0 && frpca.tau_id < 1.0)) fail("frpca.tau_id must be in (0, 1)");
    if (!(frpca.max_scale > 0.0) || frpca.iterations < 1) fail("frpca.max_scale and frpca.iterations must be positive");
    if (mated.frpca > 0 && (frpca.components == 0 || frpca.pca_samples <= frpca.components)) {
      fail("frpca needs components > 0 and pca_samples > components");
    }
    if (pairing_k == 0) fail("pairing.k must be positive");
    if (!(morph_alpha >= 0.0 && morph_alpha <= 1.0)) fail("morph.alpha must be in [0, 1]");
    if (splice_feather < 0) fail("morph.feather must be non-negative");
    if (!(demorph_factor >= 0.0 && demorph_factor < 1.0)) fail("demorph.factor must be in [0, 1)");
    if (provider.mode != "toy" && provider.mode != "file" && provider.mode != "http") fail("provider.mode must be toy, file or http");
    if (gender_source != "toy" && gender_source != "labels") fail("gender.source must be toy or labels");
    if (gender_source == "labels" && gender_labels.empty()) fail("gender.labels is required when gender.source is labels");
    if (gender_source == "toy" && provider.mode != "toy") fail("gender.source toy needs the toy provider");
    if (evaluation.map_policy != "both" && evaluation.map_policy != "either") fail("evaluation.map_policy must be both or either");
    if (evaluation.kld_bins < 2 || !(evaluation.kld_epsilon > 0.0) || evaluation.kde_grid < 2) fail("evaluation: bad bins, epsilon or grid");
  }
};

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw std::invalid_argument("config: unknown key '" + (where.empty() ? k : where + "." + k) + "'");
  }
}

template <class T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: bad value for '" + (where.empty() ? std::string(key) : where + "." + key) + "'");
  }
}

}  // namespace detail

inline json to_json(const PipelineConfig& c) {
  return {
      {"seed", c.seed},
      {"counts", {{"train", c.counts.train}, {"dev", c.counts.dev}, {"test", c.counts.test}}},
      {"mated", {{"ifgs", c.mated.ifgs}, {"ifgd", c.mated.ifgd}, {"frpca", c.mated.frpca}}},
      {"gates",
       {{"diversity_threshold", c.gates.diversity_threshold},
        {"preservation_threshold", c.gates.preservation_threshold},
        {"pose_limit_deg", c.gates.pose_limit_deg},
        {"min_eye_aspect_ratio", c.gates.min_eye_aspect_ratio},
        {"max_bridge_edge_density", c.gates.max_bridge_edge_density},
        {"canny_sigma", c.gates.canny_sigma},
        {"canny_low", c.gates.canny_low},
        {"canny_high", c.gates.canny_high}}},
      {"ifgs_grid", {{"illumination", c.ifgs_grid.illumination}, {"age", c.ifgs_grid.age}}},
      {"ifgd_grid",
       {{"pose", c.ifgd_grid.pose},
        {"expression", c.ifgd_grid.expression},
        {"illumination", c.ifgd_grid.illumination},
        {"age", c.ifgd_grid.age}}},
      {"frpca",
       {{"components", c.frpca.components},
        {"tau_id", c.frpca.tau_id},
        {"max_scale", c.frpca.max_scale},
        {"iterations", c.frpca.iterations},
        {"pca_samples", c.frpca.pca_samples}}},
      {"pairing", {{"k", c.pairing_k}}},
      {"morph", {{"alpha", c.morph_alpha}, {"feather", c.splice_feather}}},
      {"demorph", {{"factor", c.demorph_factor}}},
      {"candidate_budget", c.candidate_budget},
      {"provider",
       {{"mode", c.provider.mode},
        {"latent_dim", c.provider.latent_dim},
        {"embedding_dim", c.provider.embedding_dim},
        {"root", c.provider.root},
        {"host", c.provider.host},
        {"port", c.provider.port},
        {"retries", c.provider.retries}}},
      {"gender", {{"source", c.gender_source}, {"labels", c.gender_labels}}},
      {"directions", c.directions},
      {"evaluation",
       {{"frs_thresholds", c.evaluation.frs_thresholds},
        {"map_policy", c.evaluation.map_policy},
        {"kld_bins", c.evaluation.kld_bins},
        {"kld_epsilon", c.evaluation.kld_epsilon},
        {"kde_grid", c.evaluation.kde_grid}}},
  };
}

/// Missing keys keep their defaults; unknown keys are errors.
inline PipelineConfig config_from_json(const json& j) {
  using detail::read_opt;
  using detail::reject_unknown;
  PipelineConfig c;
  reject_unknown(j,
                 {"seed", "counts", "mated", "gates", "ifgs_grid", "ifgd_grid", "frpca", "pairing", "morph", "demorph",
                  "candidate_budget", "provider", "gender", "directions", "evaluation"},
                 "");
  read_opt(j, "seed", c.seed, "");
  read_opt(j, "candidate_budget", c.candidate_budget, "");
  read_opt(j, "directions", c.directions, "");
  auto section = [&](const char* name, const std::set<std::string>& keys, auto&& fn) {
    if (!j.contains(name)) return;
    reject_unknown(j.at(name), keys, name);
    fn(j.at(name), std::string(name));
  };
  section("counts", {"train", "dev", "test"}, [&](const json& s, const std::string& w) {
    read_opt(s, "train", c.counts.train, w);
    read_opt(s, "dev", c.counts.dev, w);
    read_opt(s, "test", c.counts.test, w);
  });
  section("mated", {"ifgs", "ifgd", "frpca"}, [&](const json& s, const std::string& w) {
    read_opt(s, "ifgs", c.mated.ifgs, w);
    read_opt(s, "ifgd", c.mated.ifgd, w);
    read_opt(s, "frpca", c.mated.frpca, w);
  });
  section("gates",
          {"diversity_threshold", "preservation_threshold", "pose_limit_deg", "min_eye_aspect_ratio",
           "max_bridge_edge_density", "canny_sigma", "canny_low", "canny_high"},
          [&](const json& s, const std::string& w) {
            read_opt(s, "diversity_threshold", c.gates.diversity_threshold, w);
            read_opt(s, "preservation_threshold", c.gates.preservation_threshold, w);
            read_opt(s, "pose_limit_deg", c.gates.pose_limit_deg, w);
            read_opt(s, "min_eye_aspect_ratio", c.gates.min_eye_aspect_ratio, w);
            read_opt(s, "max_bridge_edge_density", c.gates.max_bridge_edge_density, w);
            read_opt(s, "canny_sigma", c.gates.canny_sigma, w);
            read_opt(s, "canny_low", c.gates.canny_low, w);
            read_opt(s, "canny_high", c.gates.canny_high, w);
          });
  section("ifgs_grid", {"illumination", "age"}, [&](const json& s, const std::string& w) {
    read_opt(s, "illumination", c.ifgs_grid.illumination, w);
    read_opt(s, "age", c.ifgs_grid.age, w);
  });
  section("ifgd_grid", {"pose", "expression", "illumination", "age"}, [&](const json& s, const std::string& w) {
    read_opt(s, "pose", c.ifgd_grid.pose, w);
    read_opt(s, "expression", c.ifgd_grid.expression, w);
    read_opt(s, "illumination", c.ifgd_grid.illumination, w);
    read_opt(s, "age", c.ifgd_grid.age, w);
  });
  section("frpca", {"components", "tau_id", "max_scale", "iterations", "pca_samples"}, [&](const json& s, const std::string& w) {
    read_opt(s, "components", c.frpca.components, w);
    read_opt(s, "tau_id", c.frpca.tau_id, w);
    read_opt(s, "max_scale", c.frpca.max_scale, w);
    read_opt(s, "iterations", c.frpca.iterations, w);
    read_opt(s, "pca_samples", c.frpca.pca_samples, w);
  });
  section("pairing", {"k"}, [&](const json& s, const std::string& w) { read_opt(s, "k", c.pairing_k, w); });
  section("morph", {"alpha", "feather"}, [&](const json& s, const std::string& w) {
    read_opt(s, "alpha", c.morph_alpha, w);
    read_opt(s, "feather", c.splice_feather, w);
  });
  section("demorph", {"factor"}, [&](const json& s, const std::string& w) { read_opt(s, "factor", c.demorph_factor, w); });
  section("provider", {"mode", "latent_dim", "embedding_dim", "root", "host", "port", "retries"},
          [&](const json& s, const std::string& w) {
            read_opt(s, "mode", c.provider.mode, w);
            read_opt(s, "latent_dim", c.provider.latent_dim, w);
            read_opt(s, "embedding_dim", c.provider.embedding_dim, w);
            read_opt(s, "root", c.provider.root, w);
            read_opt(s, "host", c.provider.host, w);
            read_opt(s, "port", c.provider.port, w);
            read_opt(s, "retries", c.provider.retries, w);
          });
  section("gender", {"source", "labels"}, [&](const json& s, const std::string& w) {
    read_opt(s, "source", c.gender_source, w);
    read_opt(s, "labels", c.gender_labels, w);
  });
  section("evaluation", {"frs_thresholds", "map_policy", "kld_bins", "kld_epsilon", "kde_grid"},
          [&](const json& s, const std::string& w) {
            read_opt(s, "frs_thresholds", c.evaluation.frs_thresholds, w);
            read_opt(s, "map_policy", c.evaluation.map_policy, w);
            read_opt(s, "kld_bins", c.evaluation.kld_bins, w);
            read_opt(s, "kld_epsilon", c.evaluation.kld_epsilon, w);
            read_opt(s, "kde_grid", c.evaluation.kde_grid, w);
          });
  c.validate();
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& p) {
  const auto bytes = codec::read_file(p);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + p.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline std::string config_hash(const PipelineConfig& c) { return codec::sha256_hex(to_json(c).dump()); }

inline std::unique_ptr<InferenceProvider> make_provider(const PipelineConfig& c) {
  if (c.provider.mode == "toy") return std::make_unique<ToyProvider>(ToyProviderOptions{c.provider.latent_dim, c.provider.embedding_dim});
  if (c.provider.mode == "file") return std::make_unique<FileProvider>(c.provider.root);
  HttpProviderOptions o;
  o.host = c.provider.host;
  o.port = c.provider.port;
  o.retries = c.provider.retries;
  o.latent_dim = c.provider.latent_dim;
  o.embedding_dim = c.provider.embedding_dim;
  return std::make_unique<HttpProvider>(o);
}

/// Semantic directions by attribute: pose, illumination, expression, age.
/// A direction file maps each name to {normal, mean_distance_neg, mean_distance_pos}.
inline std::map<std::string, SemanticDirection> load_directions(const PipelineConfig& c) {
  if (c.directions == "toy") return toy_directions(c.provider.latent_dim);
  const auto bytes = codec::read_file(c.directions);
  const json j = json::parse(bytes.begin(), bytes.end());
  std::map<std::string, SemanticDirection> out;
  for (const char* name : {"pose", "illumination", "expression", "age"}) {
    if (!j.contains(name)) throw std::invalid_argument("direction file lacks '" + std::string(name) + "'");
    const auto& d = j.at(name);
    const auto n = d.at("normal").get<std::vector<double>>();
    if (n.size() != c.provider.latent_dim) throw std::invalid_argument(std::string("direction '") + name + "' has wrong dimension");
    auto unit = SemanticDirection::from_vector(name, n);
    out.emplace(name, SemanticDirection(name, unit.normal(), d.value("mean_distance_neg", 0.0), d.value("mean_distance_pos", 0.0)));
  }
  return out;
}

}  // namespace morphforge
