#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "morphforge/morph/morph.hpp"
#include "morphforge/pairing.hpp"
#include "morphforge/pipeline/config.hpp"

namespace morphforge {

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kToolVersion = "morphforge 0.1.0";

struct GateRecord {
  double yaw{0.0};
  double pitch{0.0};
  double ear_left{0.0};
  double ear_right{0.0};
  double bridge_edge_density{0.0};
  std::optional<double> nearest_distance;  // empty for the first accepted subject
};

struct SubjectRecord {
  std::string subject_id;
  Gender gender{Gender::F};
  Split split{Split::train};
  std::size_t candidate{0};
  std::string image;  // paths relative to the dataset root
  std::string landmarks;
  std::string latent;
  std::string embedding;
  GateRecord gates;
};

struct MatedRecord {
  std::size_t index{0};  // position in the mode's recipe grid or seed list
  std::string image;
  json params;
  double distance{0.0};
};

struct MatedDrop {
  std::string subject_id;
  std::string mode;
  std::size_t index{0};
  std::string reason;
  double distance{0.0};
};

struct PairRecord {
  Split split{Split::train};
  Gender gender{Gender::F};
  std::string subject_a;
  std::string subject_b;
  double similarity{0.0};
};

struct MorphFailure {
  std::string subject_a;
  std::string subject_b;
  std::string error;
};

struct BaseStats {
  std::size_t candidates{0};
  std::size_t accepted{0};
  std::map<std::string, std::size_t> rejected;
};

struct Manifest {
  int version{kManifestVersion};
  PipelineConfig config;
  std::string config_hash;
  std::set<std::string> stages;
  std::vector<SubjectRecord> subjects;
  BaseStats base_stats;
  std::map<std::string, std::map<std::string, std::vector<MatedRecord>>> mated;  // subject -> mode -> records
  std::vector<MatedDrop> mated_dropped;
  std::vector<PairRecord> pairs;
  std::vector<std::string> pair_warnings;
  std::vector<MorphRecord> morphs;
  std::vector<MorphFailure> morph_failures;
  json provenance = json::object();

  const SubjectRecord* find_subject(const std::string& id) const {
    for (const auto& s : subjects)
      if (s.subject_id == id) return &s;
    return nullptr;
  }
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json to_json(const Manifest& m) {
  json subjects = json::array();
  for (const auto& s : m.subjects) {
    json gates{{"yaw", s.gates.yaw},
               {"pitch", s.gates.pitch},
               {"ear_left", s.gates.ear_left},
               {"ear_right", s.gates.ear_right},
               {"bridge_edge_density", s.gates.bridge_edge_density},
               {"nearest_distance", s.gates.nearest_distance ? json(*s.gates.nearest_distance) : json(nullptr)}};
    subjects.push_back({{"subject_id", s.subject_id},
                        {"gender", to_string(s.gender)},
                        {"split", to_string(s.split)},
                        {"candidate", s.candidate},
                        {"image", s.image},
                        {"landmarks", s.landmarks},
                        {"latent", s.latent},
                        {"embedding", s.embedding},
                        {"gates", gates}});
  }
  json mated = json::object();
  for (const auto& [sid, modes] : m.mated) {
    json per = json::object();
    for (const auto& [mode, recs] : modes) {
      json arr = json::array();
      for (const auto& r : recs)
        arr.push_back({{"index", r.index}, {"image", r.image}, {"params", r.params}, {"distance", r.distance}});
      per[mode] = arr;
    }
    mated[sid] = per;
  }
  json dropped = json::array();
  for (const auto& d : m.mated_dropped)
    dropped.push_back({{"subject_id", d.subject_id}, {"mode", d.mode}, {"index", d.index}, {"reason", d.reason}, {"distance", d.distance}});
  json pairs = json::array();
  for (const auto& p : m.pairs)
    pairs.push_back({{"split", to_string(p.split)},
                     {"gender", to_string(p.gender)},
                     {"subject_a", p.subject_a},
                     {"subject_b", p.subject_b},
                     {"similarity", p.similarity}});
  json morphs = json::array();
  for (const auto& r : m.morphs)
    morphs.push_back({{"subject_a", r.subject_a},
                      {"subject_b", r.subject_b},
                      {"algorithm", to_string(r.algorithm)},
                      {"alpha", r.alpha},
                      {"output", r.output}});
  json failures = json::array();
  for (const auto& f : m.morph_failures)
    failures.push_back({{"subject_a", f.subject_a}, {"subject_b", f.subject_b}, {"error", f.error}});
  return {{"version", m.version},
          {"config", to_json(m.config)},
          {"config_hash", m.config_hash},
          {"stages", m.stages},
          {"subjects", subjects},
          {"base_stats", {{"candidates", m.base_stats.candidates}, {"accepted", m.base_stats.accepted}, {"rejected", m.base_stats.rejected}}},
          {"mated", mated},
          {"mated_dropped", dropped},
          {"pairs", pairs},
          {"pair_warnings", m.pair_warnings},
          {"morphs", morphs},
          {"morph_failures", failures},
          {"provenance", m.provenance}};
}

inline Manifest manifest_from_json(const json& j) {
  Manifest m;
  m.version = j.at("version").get<int>();
  if (m.version != kManifestVersion) throw std::invalid_argument("unsupported manifest version " + std::to_string(m.version));
  m.config = config_from_json(j.at("config"));
  m.config_hash = j.at("config_hash").get<std::string>();
  m.stages = j.at("stages").get<std::set<std::string>>();
  for (const auto& s : j.at("subjects")) {
    SubjectRecord r;
    r.subject_id = s.at("subject_id").get<std::string>();
    r.gender = parse_gender(s.at("gender").get<std::string>());
    r.split = parse_split(s.at("split").get<std::string>());
    r.candidate = s.at("candidate").get<std::size_t>();
    r.image = s.at("image").get<std::string>();
    r.landmarks = s.at("landmarks").get<std::string>();
    r.latent = s.at("latent").get<std::string>();
    r.embedding = s.at("embedding").get<std::string>();
    const auto& g = s.at("gates");
    r.gates.yaw = g.at("yaw").get<double>();
    r.gates.pitch = g.at("pitch").get<double>();
    r.gates.ear_left = g.at("ear_left").get<double>();
    r.gates.ear_right = g.at("ear_right").get<double>();
    r.gates.bridge_edge_density = g.at("bridge_edge_density").get<double>();
    if (!g.at("nearest_distance").is_null()) r.gates.nearest_distance = g.at("nearest_distance").get<double>();
    m.subjects.push_back(std::move(r));
  }
  const auto& bs = j.at("base_stats");
  m.base_stats.candidates = bs.at("candidates").get<std::size_t>();
  m.base_stats.accepted = bs.at("accepted").get<std::size_t>();
  m.base_stats.rejected = bs.at("rejected").get<std::map<std::string, std::size_t>>();
  for (const auto& [sid, modes] : j.at("mated").items()) {
    for (const auto& [mode, recs] : modes.items()) {
      auto& out = m.mated[sid][mode];
      for (const auto& r : recs)
        out.push_back({r.at("index").get<std::size_t>(), r.at("image").get<std::string>(), r.at("params"), r.at("distance").get<double>()});
    }
  }
  for (const auto& d : j.at("mated_dropped"))
    m.mated_dropped.push_back({d.at("subject_id").get<std::string>(), d.at("mode").get<std::string>(),
                               d.at("index").get<std::size_t>(), d.at("reason").get<std::string>(), d.at("distance").get<double>()});
  for (const auto& p : j.at("pairs"))
    m.pairs.push_back({parse_split(p.at("split").get<std::string>()), parse_gender(p.at("gender").get<std::string>()),
                       p.at("subject_a").get<std::string>(), p.at("subject_b").get<std::string>(), p.at("similarity").get<double>()});
  m.pair_warnings = j.at("pair_warnings").get<std::vector<std::string>>();
  for (const auto& r : j.at("morphs"))
    m.morphs.push_back({r.at("subject_a").get<std::string>(), r.at("subject_b").get<std::string>(),
                        parse_morph_algorithm(r.at("algorithm").get<std::string>()), r.at("alpha").get<double>(),
                        r.at("output").get<std::string>()});
  for (const auto& f : j.at("morph_failures"))
    m.morph_failures.push_back({f.at("subject_a").get<std::string>(), f.at("subject_b").get<std::string>(), f.at("error").get<std::string>()});
  m.provenance = j.value("provenance", json::object());
  return m;
}

inline std::filesystem::path manifest_path(const std::filesystem::path& root) { return root / "manifest.json"; }

inline Manifest load_manifest(const std::filesystem::path& root) {
  const auto p = manifest_path(root);
  if (!std::filesystem::exists(p)) throw std::runtime_error("no manifest at " + p.string());
  const auto bytes = codec::read_file(p);
  try {
    return manifest_from_json(json::parse(bytes.begin(), bytes.end()));
  } catch (const json::exception& e) {
    throw std::runtime_error("unreadable manifest " + p.string() + ": " + e.what());
  }
}

/// Stamps provenance and replaces the manifest file atomically.
inline void save_manifest(const std::filesystem::path& root, Manifest& m) {
  const std::string now = utc_timestamp();
  m.provenance["tool"] = kToolVersion;
  if (!m.provenance.contains("created")) m.provenance["created"] = now;
  m.provenance["updated"] = now;
  codec::write_file_atomic(manifest_path(root), to_json(m).dump(2) + "\n");
}

/// Manifest JSON without the provenance block, for reproducibility checks.
inline std::string manifest_content(const Manifest& m) {
  json j = to_json(m);
  j.erase("provenance");
  return j.dump(2);
}

}  // namespace morphforge
