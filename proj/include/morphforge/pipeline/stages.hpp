#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <functional>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "morphforge/gates.hpp"
#include "morphforge/gateway/codec.hpp"
#include "morphforge/gateway/provider.hpp"
#include "morphforge/json_io.hpp"
#include "morphforge/latent_math.hpp"
#include "morphforge/morph/morph.hpp"
#include "morphforge/pairing.hpp"
#include "morphforge/pipeline/config.hpp"
#include "morphforge/pipeline/manifest.hpp"

namespace morphforge {

namespace fs = std::filesystem;

class BudgetExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::size_t workers = 1;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t p : path) s = splitmix64(s ^ p);
  return s;
}

namespace stream {
inline constexpr std::uint64_t kCandidate = 1, kPca = 2, kFrpca = 3;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Every index runs;
/// the exception of the lowest failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t t = std::min(std::max<std::size_t>(workers, 1), n);
  if (t <= 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < t; ++k) pool.emplace_back(body);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Dataset layout

inline std::string subject_id(std::size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%05zu", n);
  return buf;
}

inline std::string mated_path(const std::string& mode, const std::string& subject, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu.png", index);
  return "mated/" + mode + "/" + subject + "/" + buf;
}

inline std::string morph_path(const std::string& a, const std::string& b) { return "morphs/lma/" + a + "__" + b + ".png"; }

inline fs::path checkpoint_path(const fs::path& root) { return root / "checkpoint.json"; }

inline void write_embedding_file(const fs::path& p, const Embedding& e) {
  codec::SynvBlock b{1, static_cast<std::uint32_t>(e.size()), std::vector<float>(e.values.begin(), e.values.end())};
  codec::write_file_atomic(p, codec::encode_synv(b));
}

inline Embedding read_embedding_file(const fs::path& p) {
  const auto b = codec::decode_synv(codec::read_file(p));
  if (b.count != 1) throw codec::FormatError("embedding file holds " + std::to_string(b.count) + " vectors");
  return Embedding(std::vector<double>(b.values.begin(), b.values.end()));
}

inline LatentVector read_latent_file(const fs::path& p) {
  const auto v = codec::synv_to_latents(codec::decode_synv(codec::read_file(p)));
  if (v.size() != 1) throw codec::FormatError("latent file holds " + std::to_string(v.size()) + " vectors");
  return v.front();
}

inline LandmarkSet read_landmarks_file(const fs::path& p) {
  const auto bytes = codec::read_file(p);
  try {
    return landmarks_from_json(json::parse(bytes.begin(), bytes.end()));
  } catch (const json::exception& e) {
    throw codec::FormatError("bad landmark file " + p.string() + ": " + e.what());
  }
}

/// Stage preconditions shared by every command after gen-base.
inline void require_config_match(const Manifest& m, const PipelineConfig& c) {
  if (m.config_hash != config_hash(c)) throw std::invalid_argument("config does not match the one the dataset was built with");
}

// ---------------------------------------------------------------------------
// Base acceptance

namespace detail {

struct Candidate {
  std::size_t index{0};
  std::string rejection;  // empty when every per-candidate gate passed
  LatentVector latent;
  Raster image;
  LandmarkSet landmarks;
  Embedding embedding;
  PoseEstimate pose;
  EyeCheck eyes;
  GlassesCheck glasses;
  Gender gender{Gender::F};
};

inline std::map<std::size_t, Gender> load_gender_labels(const PipelineConfig& c) {
  std::map<std::size_t, Gender> out;
  if (c.gender_source != "labels") return out;
  const auto bytes = codec::read_file(c.gender_labels);
  const json j = json::parse(bytes.begin(), bytes.end());
  for (const auto& [k, v] : j.items()) out[std::stoul(k)] = parse_gender(v.get<std::string>());
  return out;
}

inline Candidate prepare_candidate(std::size_t index, const PipelineConfig& c, InferenceProvider& provider,
                                   const std::map<std::string, SemanticDirection>& dirs,
                                   const std::map<std::size_t, Gender>& labels) {
  Candidate k;
  k.index = index;
  const auto raw = provider.sample_latent(1, derive_seed(c.seed, {stream::kCandidate, index})).front();
  const auto& expr = dirs.at("expression");
  const auto neutral = neutralize(raw, dirs.at("pose"), dirs.at("illumination"), expr, expr.mean_distance_neg());
  // The manifest stores latents as float32; every later stage starts from that value.
  k.latent = codec::synv_to_latents(codec::latents_to_synv({neutral})).front();

  if (c.gender_source == "labels") {
    const auto it = labels.find(index);
    if (it == labels.end()) {
      k.rejection = "unlabeled";
      return k;
    }
    k.gender = it->second;
  } else {
    k.gender = toy_is_female(raw) ? Gender::F : Gender::M;
  }

  try {
    k.image = provider.decode_latent(k.latent);
    k.pose = provider.estimate_pose(k.image);
    if (!pose_gate(k.pose, c.gates.pose_limit_deg)) {
      k.rejection = "pose";
      return k;
    }
    k.landmarks = provider.detect_landmarks(k.image);
    k.eyes = closed_eye_check(k.landmarks, c.gates.min_eye_aspect_ratio);
    if (!k.eyes.open) {
      k.rejection = "closed_eyes";
      return k;
    }
    k.glasses = glasses_check(k.image, k.landmarks, c.gates.max_bridge_edge_density, c.gates.canny_low, c.gates.canny_high,
                              c.gates.canny_sigma);
    if (k.glasses.flagged) {
      k.rejection = "glasses";
      return k;
    }
    k.embedding = provider.embed_face(k.image);
    for (double& v : k.embedding.values) v = static_cast<float>(v);  // same precision as the stored file
    k.embedding.normalized = false;
  } catch (const NoFaceError&) {
    k.rejection = "no_face";
  } catch (const std::out_of_range&) {
    k.rejection = "landmarks_out_of_frame";
  }
  return k;
}

inline void write_checkpoint(const fs::path& root, const std::string& hash, std::size_t next) {
  codec::write_file_atomic(checkpoint_path(root), json{{"config_hash", hash}, {"next_candidate", next}}.dump(2) + "\n");
}

}  // namespace detail

/// Draws, neutralizes and gates candidates until every split of both genders
/// is full. Resumes from checkpoint.json when the dataset already holds a
/// partial run of the same config.
inline Manifest run_base_acceptance(const fs::path& root, const PipelineConfig& c, InferenceProvider& provider,
                                    RunOptions opt = {}) {
  c.validate();
  const std::string hash = config_hash(c);
  Manifest m;
  std::size_t next = 0;
  if (fs::exists(manifest_path(root))) {
    m = load_manifest(root);
    if (m.config_hash != hash) throw std::invalid_argument("dataset at " + root.string() + " was built with a different config");
    if (m.stages.count("base")) return m;
    if (fs::exists(checkpoint_path(root))) {
      const auto bytes = codec::read_file(checkpoint_path(root));
      const json cp = json::parse(bytes.begin(), bytes.end());
      if (cp.at("config_hash").get<std::string>() != hash) throw std::invalid_argument("checkpoint belongs to a different config");
      next = cp.at("next_candidate").get<std::size_t>();
    }
  } else {
    m.config = c;
    m.config_hash = hash;
  }
  for (const char* d : {"base", "mated", "morphs", "scores"}) fs::create_directories(root / d);

  const std::size_t per_gender = c.counts.total();
  const auto dirs = load_directions(c);
  const auto labels = detail::load_gender_labels(c);
  std::map<Gender, std::size_t> have;
  std::vector<Embedding> gallery;
  for (const auto& s : m.subjects) {
    ++have[s.gender];
    gallery.push_back(read_embedding_file(root / s.embedding));
  }
  auto done = [&] { return have[Gender::F] >= per_gender && have[Gender::M] >= per_gender; };
  auto split_for = [&](std::size_t rank) {
    if (rank < c.counts.train) return Split::train;
    if (rank < c.counts.train + c.counts.dev) return Split::dev;
    return Split::test;
  };

  const std::size_t batch = std::max<std::size_t>(opt.workers, 1);
  while (!done() && next < c.candidate_budget) {
    const std::size_t n = std::min(batch, c.candidate_budget - next);
    std::vector<std::optional<detail::Candidate>> ready(n);
    std::exception_ptr failure;
    try {
      parallel_for(n, opt.workers, [&](std::size_t i) { ready[i] = detail::prepare_candidate(next + i, c, provider, dirs, labels); });
    } catch (...) {
      failure = std::current_exception();
    }
    for (std::size_t i = 0; i < n && !done(); ++i) {
      if (!ready[i]) break;  // commit only the prefix before a provider failure
      auto& k = *ready[i];
      ++next;
      ++m.base_stats.candidates;
      std::string reason = k.rejection;
      std::optional<DiversityResult> div;
      if (reason.empty() && have[k.gender] >= per_gender) reason = "gender_full";
      if (reason.empty()) {
        div = diversity_check(k.embedding, gallery, c.gates.diversity_threshold);
        if (!div->accepted) reason = "diversity";
      }
      if (!reason.empty()) {
        ++m.base_stats.rejected[reason];
        continue;
      }
      SubjectRecord s;
      s.subject_id = subject_id(m.subjects.size());
      s.gender = k.gender;
      s.split = split_for(have[k.gender]++);
      s.candidate = k.index;
      s.image = "base/" + s.subject_id + ".png";
      s.landmarks = "base/" + s.subject_id + ".landmarks.json";
      s.latent = "base/" + s.subject_id + ".latent.synv";
      s.embedding = "base/" + s.subject_id + ".embedding.synv";
      s.gates = {k.pose.yaw, k.pose.pitch, k.eyes.left, k.eyes.right, k.glasses.density,
                 div->nearest ? std::optional<double>(div->distance) : std::nullopt};
      codec::write_png_file(root / s.image, k.image);
      codec::write_file_atomic(root / s.landmarks, landmarks_to_json(k.landmarks).dump() + "\n");
      codec::write_file_atomic(root / s.latent, codec::encode_synv(codec::latents_to_synv({k.latent})));
      write_embedding_file(root / s.embedding, k.embedding);
      gallery.push_back(k.embedding);
      m.subjects.push_back(std::move(s));
      ++m.base_stats.accepted;
    }
    if (failure) {
      save_manifest(root, m);
      detail::write_checkpoint(root, hash, next);
      std::rethrow_exception(failure);
    }
  }

  if (!done()) {
    save_manifest(root, m);
    detail::write_checkpoint(root, hash, next);
    std::string msg = "candidate budget of " + std::to_string(c.candidate_budget) + " exhausted; short by";
    for (Gender g : {Gender::F, Gender::M}) msg += std::string(" ") + to_string(g) + "=" + std::to_string(per_gender - std::min(per_gender, have[g]));
    throw BudgetExhausted(msg);
  }
  m.stages.insert("base");
  save_manifest(root, m);
  fs::remove(checkpoint_path(root));
  return m;
}

// ---------------------------------------------------------------------------
// Mated samples

struct MatedRecipe {
  json params;
  std::function<LatentVector(const LatentVector&)> apply;
};

inline std::vector<MatedRecipe> ifgs_recipes(const PipelineConfig& c, const std::map<std::string, SemanticDirection>& dirs) {
  std::vector<MatedRecipe> out;
  const auto& il = dirs.at("illumination");
  const auto& ag = dirs.at("age");
  for (double a : c.ifgs_grid.illumination)
    for (double b : c.ifgs_grid.age)
      out.push_back({{{"illumination", a}, {"age", b}}, [&il, &ag, a, b](const LatentVector& w) { return edit_ifgs(w, il, ag, a, b); }});
  return out;
}

inline std::vector<MatedRecipe> ifgd_recipes(const PipelineConfig& c, const std::map<std::string, SemanticDirection>& dirs) {
  std::vector<MatedRecipe> out;
  const auto& g = c.ifgd_grid;
  for (double p : g.pose)
    for (double e : g.expression)
      for (double i : g.illumination)
        for (double a : g.age) {
          EditRecipe r{EditMode::ifgd,
                       {{dirs.at("pose"), p}, {dirs.at("expression"), e}, {dirs.at("illumination"), i}, {dirs.at("age"), a}}};
          out.push_back({{{"pose", p}, {"expression", e}, {"illumination", i}, {"age", a}},
                         [r = std::move(r)](const LatentVector& w) { return edit_ifgd(w, r); }});
        }
  return out;
}

/// Principal directions of the provider's latent distribution, from a
/// sample drawn with a seed derived from the config seed.
inline std::vector<SemanticDirection> frpca_components(const PipelineConfig& c, InferenceProvider& provider) {
  const auto sample = provider.sample_latent(c.frpca.pca_samples, derive_seed(c.seed, {stream::kPca}));
  return fit_pca(sample, c.frpca.components).directions;
}

namespace detail {

struct SubjectMated {
  std::vector<MatedRecord> records;
  std::vector<MatedDrop> drops;
};

inline void write_mated(const fs::path& root, const std::string& mode, const SubjectRecord& s, std::size_t idx, const Raster& img,
                        json params, double distance, SubjectMated& out) {
  MatedRecord r{idx, mated_path(mode, s.subject_id, idx), std::move(params), distance};
  codec::write_png_file(root / r.image, img);
  out.records.push_back(std::move(r));
}

}  // namespace detail

/// Generates one mode's mated samples for every subject, replacing whatever
/// that mode held before.
inline void run_mated_generation(const fs::path& root, Manifest& m, const PipelineConfig& c, InferenceProvider& provider,
                                 EditMode mode, RunOptions opt = {}) {
  require_config_match(m, c);
  if (!m.stages.count("base")) throw std::invalid_argument("mated generation needs the base stage");
  const std::string name = to_string(mode);
  const auto dirs = load_directions(c);
  std::vector<MatedRecipe> recipes;
  std::vector<SemanticDirection> components;
  std::size_t count = 0;
  switch (mode) {
    case EditMode::ifgs:
      count = c.mated.ifgs;
      if (count) recipes = ifgs_recipes(c, dirs);
      break;
    case EditMode::ifgd:
      count = c.mated.ifgd;
      if (count) recipes = ifgd_recipes(c, dirs);
      break;
    case EditMode::frpca:
      count = c.mated.frpca;
      if (count) components = frpca_components(c, provider);
      break;
  }

  std::vector<detail::SubjectMated> results(m.subjects.size());
  std::exception_ptr failure;
  try {
    parallel_for(m.subjects.size(), opt.workers, [&](std::size_t si) {
      const auto& s = m.subjects[si];
      auto& out = results[si];
      fs::remove_all(root / "mated" / name / s.subject_id);
      if (count == 0) return;
      const LatentVector base = read_latent_file(root / s.latent);
      const Embedding reference = provider.embed_face(provider.decode_latent(base));
      if (mode == EditMode::frpca) {
        auto oracle = [&](const LatentVector& w) { return provider.embed_face(provider.decode_latent(w)); };
        for (std::size_t k = 0; k < count; ++k) {
          const std::uint64_t seed = derive_seed(c.seed, {stream::kFrpca, s.candidate, k});
          try {
            const auto r = edit_frpca(base, components, seed, oracle, c.frpca.tau_id, {c.frpca.max_scale, c.frpca.iterations});
            detail::write_mated(root, name, s, k, provider.decode_latent(r.latent), {{"seed", seed}, {"scale", r.scale}}, r.distance, out);
          } catch (const NoFaceError&) {
            out.drops.push_back({s.subject_id, name, k, "no_face", 0.0});
          } catch (const std::runtime_error& e) {
            if (dynamic_cast<const ProviderError*>(&e)) throw;
            out.drops.push_back({s.subject_id, name, k, "ineffective", 0.0});
          }
        }
        return;
      }
      for (std::size_t k = 0; k < recipes.size(); ++k) {
        try {
          const Raster img = provider.decode_latent(recipes[k].apply(base));
          const auto keep = preservation_check(reference, provider.embed_face(img), c.gates.preservation_threshold);
          if (keep.accepted) {
            detail::write_mated(root, name, s, k, img, recipes[k].params, keep.distance, out);
          } else {
            out.drops.push_back({s.subject_id, name, k, "preservation", keep.distance});
          }
        } catch (const NoFaceError&) {
          out.drops.push_back({s.subject_id, name, k, "no_face", 0.0});
        }
      }
    });
  } catch (...) {
    failure = std::current_exception();
  }

  std::erase_if(m.mated_dropped, [&](const MatedDrop& d) { return d.mode == name; });
  for (std::size_t si = 0; si < m.subjects.size(); ++si) {
    const auto& id = m.subjects[si].subject_id;
    m.mated[id][name] = std::move(results[si].records);
    for (auto& d : results[si].drops) m.mated_dropped.push_back(std::move(d));
  }
  if (failure) {
    m.stages.erase("mate:" + name);
    save_manifest(root, m);
    std::rethrow_exception(failure);
  }
  m.stages.insert("mate:" + name);
  save_manifest(root, m);
}

// ---------------------------------------------------------------------------
// Pairing

/// Train pairs use k nearest neighbours (or every pair when `train_k` is
/// empty); dev and test always use every same-gender pair.
inline void run_pairing(const fs::path& root, Manifest& m, PairingK train_k) {
  if (!m.stages.count("base")) throw std::invalid_argument("pairing needs the base stage");
  m.pairs.clear();
  m.pair_warnings.clear();
  std::vector<SubjectEntry> entries;
  for (const auto& s : m.subjects) entries.push_back({s.subject_id, s.gender, s.split, read_embedding_file(root / s.embedding)});
  json listing = json::array();
  for (Split split : {Split::train, Split::dev, Split::test}) {
    std::vector<SubjectEntry> part;
    for (const auto& e : entries)
      if (e.split == split) part.push_back(e);
    if (part.empty()) continue;
    const auto r = select_pairs(part, split, split == Split::train ? train_k : kFullPairing);
    for (const auto& w : r.warnings) m.pair_warnings.push_back(std::string(to_string(split)) + ": " + w);
    for (const auto& p : r.pairs) {
      const Gender g = m.find_subject(p.subject_a)->gender;
      m.pairs.push_back({split, g, p.subject_a, p.subject_b, p.similarity});
      listing.push_back({{"subject_a", p.subject_a}, {"subject_b", p.subject_b}, {"similarity", p.similarity}});
    }
  }
  codec::write_file_atomic(root / "pairs.json", listing.dump(2) + "\n");
  m.stages.insert("pair");
  save_manifest(root, m);
}

// ---------------------------------------------------------------------------
// Morphing

/// One landmark morph per pair, spliced onto contributor A. A pair whose
/// inputs cannot be read is recorded as a failure and skipped.
inline void run_morph_generation(const fs::path& root, Manifest& m, double alpha, int feather, RunOptions opt = {}) {
  if (!m.stages.count("pair")) throw std::invalid_argument("morph generation needs the pair stage");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("morph alpha must be in [0, 1]");
  if (feather < 0) throw std::invalid_argument("feather must be non-negative");
  fs::remove_all(root / "morphs" / "lma");
  fs::create_directories(root / "morphs" / "lma");
  std::vector<std::optional<MorphRecord>> done(m.pairs.size());
  std::vector<std::string> errors(m.pairs.size());
  parallel_for(m.pairs.size(), opt.workers, [&](std::size_t i) {
    const auto& p = m.pairs[i];
    try {
      const auto* a = m.find_subject(p.subject_a);
      const auto* b = m.find_subject(p.subject_b);
      if (!a || !b) throw std::invalid_argument("pair names an unknown subject");
      const Raster ia = codec::read_png_file(root / a->image), ib = codec::read_png_file(root / b->image);
      const LandmarkSet la = read_landmarks_file(root / a->landmarks), lb = read_landmarks_file(root / b->landmarks);
      const Raster blended = morph_pair(ia, la, ib, lb, alpha);
      const Raster spliced = splice_postprocess(blended, ia, morph_geometry(la, lb, alpha), feather);
      MorphRecord r{p.subject_a, p.subject_b, MorphAlgorithm::lma, alpha, morph_path(p.subject_a, p.subject_b)};
      codec::write_png_file(root / r.output, spliced);
      done[i] = std::move(r);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  m.morphs.clear();
  m.morph_failures.clear();
  for (std::size_t i = 0; i < m.pairs.size(); ++i) {
    if (done[i]) {
      m.morphs.push_back(std::move(*done[i]));
    } else {
      m.morph_failures.push_back({m.pairs[i].subject_a, m.pairs[i].subject_b, errors[i]});
    }
  }
  m.stages.insert("morph");
  save_manifest(root, m);
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string code;
  std::string message;
  std::string ref;
};

inline json to_json(const Violation& v) { return {{"code", v.code}, {"message", v.message}, {"ref", v.ref}}; }

/// Checks manifest invariants and every referenced artifact. An empty list
/// means the dataset is valid.
inline std::vector<Violation> validate_manifest(const fs::path& root, const Manifest& m) {
  std::vector<Violation> out;
  auto add = [&](std::string code, std::string msg, std::string ref) { out.push_back({std::move(code), std::move(msg), std::move(ref)}); };
  const auto& c = m.config;
  if (m.config_hash != config_hash(c)) add("config_hash", "config_hash does not match the embedded config", "config_hash");

  auto check_file = [&](const std::string& rel, auto&& parse) {
    const fs::path p = root / rel;
    if (!fs::is_regular_file(p)) {
      add("missing_file", "referenced file does not exist", rel);
      return;
    }
    try {
      parse(p);
    } catch (const std::exception& e) {
      add("unreadable_file", e.what(), rel);
    }
  };
  auto png = [](const fs::path& p) { codec::read_png_file(p); };

  std::map<std::string, const SubjectRecord*> by_id;
  std::map<std::pair<Gender, Split>, std::size_t> split_sizes;
  for (const auto& s : m.subjects) {
    if (!by_id.emplace(s.subject_id, &s).second) add("duplicate_subject", "subject id appears more than once", s.subject_id);
    ++split_sizes[{s.gender, s.split}];
    check_file(s.image, png);
    check_file(s.landmarks, read_landmarks_file);
    check_file(s.latent, [&](const fs::path& p) {
      if (read_latent_file(p).dim() != c.provider.latent_dim) throw codec::FormatError("latent dimension differs from config");
    });
    check_file(s.embedding, read_embedding_file);
  }
  if (m.stages.count("base")) {
    const std::map<Split, std::size_t> want{{Split::train, c.counts.train}, {Split::dev, c.counts.dev}, {Split::test, c.counts.test}};
    for (Gender g : {Gender::F, Gender::M})
      for (const auto& [split, n] : want) {
        const std::size_t got = split_sizes[{g, split}];
        if (got != n) {
          add("split_size", std::string(to_string(g)) + "/" + to_string(split) + " has " + std::to_string(got) + " subjects, config asks for " + std::to_string(n),
              std::string(to_string(g)) + "/" + to_string(split));
        }
      }
  }

  const std::map<std::string, std::size_t> mode_limit{{"ifgs", c.mated.ifgs}, {"ifgd", c.mated.ifgd}, {"frpca", c.mated.frpca}};
  for (const auto& [sid, modes] : m.mated) {
    if (!by_id.count(sid)) add("unknown_subject", "mated samples for an unknown subject", sid);
    for (const auto& [mode, recs] : modes) {
      const auto lim = mode_limit.find(mode);
      if (lim == mode_limit.end()) {
        add("unknown_mode", "unknown mated mode '" + mode + "'", sid);
        continue;
      }
      if (recs.size() > lim->second) add("mated_count", mode + " holds " + std::to_string(recs.size()) + " samples, limit " + std::to_string(lim->second), sid + "/" + mode);
      for (const auto& r : recs) check_file(r.image, png);
    }
  }

  auto pair_checks = [&](const std::string& a, const std::string& b, const std::string& ref, const char* what) {
    const auto ia = by_id.find(a), ib = by_id.find(b);
    if (ia == by_id.end() || ib == by_id.end()) {
      add("unknown_subject", std::string(what) + " names an unknown subject", ref);
      return;
    }
    if (a == b) add("self_pair", std::string(what) + " pairs a subject with itself", ref);
    if (ia->second->gender != ib->second->gender) add("cross_gender", std::string(what) + " crosses genders", ref);
    if (ia->second->split != ib->second->split) add("cross_split", std::string(what) + " crosses splits", ref);
  };

  std::map<std::pair<Gender, Split>, std::size_t> pair_counts;
  std::set<std::pair<std::string, std::string>> seen_pairs;
  for (const auto& p : m.pairs) {
    const std::string ref = p.subject_a + "__" + p.subject_b;
    pair_checks(p.subject_a, p.subject_b, ref, "pair");
    if (!seen_pairs.insert(std::minmax(p.subject_a, p.subject_b)).second) add("duplicate_pair", "pair listed twice", ref);
    ++pair_counts[{p.gender, p.split}];
  }
  if (m.stages.count("pair")) {
    for (Gender g : {Gender::F, Gender::M}) {
      for (Split split : {Split::dev, Split::test}) {
        const std::size_t n = split_sizes[{g, split}], want = n * (n - (n > 0 ? 1 : 0)) / 2;
        if (pair_counts[{g, split}] != want) {
          add("pair_count", std::string(to_string(split)) + " " + to_string(g) + " has " + std::to_string(pair_counts[{g, split}]) + " pairs, expected " + std::to_string(want),
              std::string(to_string(g)) + "/" + to_string(split));
        }
      }
      const std::size_t n = split_sizes[{g, Split::train}];
      if (pair_counts[{g, Split::train}] > n * c.pairing_k && pair_counts[{g, Split::train}] > n * (n - (n > 0 ? 1 : 0)) / 2) {
        add("pair_count", std::string("train ") + to_string(g) + " has more pairs than k nearest neighbours allow", std::string(to_string(g)) + "/train");
      }
    }
  }

  for (const auto& r : m.morphs) {
    const std::string ref = r.output.empty() ? r.subject_a + "__" + r.subject_b : r.output;
    pair_checks(r.subject_a, r.subject_b, ref, "morph");
    if (!(r.alpha >= 0.0 && r.alpha <= 1.0)) add("morph_alpha", "morph alpha outside [0, 1]", ref);
    check_file(r.output, png);
  }
  return out;
}

}  // namespace morphforge
