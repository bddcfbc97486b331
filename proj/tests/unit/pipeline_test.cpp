#include <gtest/gtest.h>

#include <cmath>

#include "morphforge/pipeline/stages.hpp"
#include "pipeline_fixtures.hpp"

using namespace morphforge;
using morphforge::testing::scaled_config;
using morphforge::testing::TempDir;

namespace {

std::string slurp(const fs::path& p) {
  const auto b = codec::read_file(p);
  return {b.begin(), b.end()};
}

ToyProvider toy(const PipelineConfig& c) { return ToyProvider({c.provider.latent_dim, c.provider.embedding_dim}); }

/// Toy embedding computed without the renderer: the normalized float32
/// prefix of the latent.
Embedding toy_embedding_oracle(const LatentVector& w, std::size_t dim) {
  std::vector<double> v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = static_cast<float>(w[i]);
  return Embedding(v).unit();
}

/// Throws a transport error once `budget` decode calls have been served.
class FlakyProvider : public ToyProvider {
 public:
  FlakyProvider(ToyProviderOptions o, int budget) : ToyProvider(o), budget_(budget) {}

 protected:
  Raster do_decode_latent(const LatentVector& w) override {
    if (budget_-- <= 0) throw TransportError("connection refused");
    return ToyProvider::do_decode_latent(w);
  }

 private:
  std::atomic<int> budget_;
};

std::size_t count_morphs(const Manifest& m, Gender g) {
  std::size_t n = 0;
  for (const auto& r : m.morphs) n += m.find_subject(r.subject_a)->gender == g ? 1 : 0;
  return n;
}

}  // namespace

TEST(Config, JsonRoundTripAndHash) {
  const auto c = scaled_config(3);
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  auto other = c;
  other.seed += 1;
  EXPECT_NE(config_hash(other), config_hash(c));
}

TEST(Config, DefaultsMatchPublishedCounts) {
  PipelineConfig c;
  EXPECT_EQ(c.counts.train, 1000u);
  EXPECT_EQ(c.counts.dev, 75u);
  EXPECT_EQ(c.counts.test, 100u);
  EXPECT_EQ(c.mated.ifgs, 63u);
  EXPECT_EQ(c.mated.ifgd, 90u);
  EXPECT_EQ(c.mated.frpca, 55u);
  EXPECT_EQ(c.ifgs_grid.size(), 63u);
  EXPECT_EQ(c.ifgd_grid.size(), 90u);
  EXPECT_EQ(c.pairing_k, 50u);
  EXPECT_DOUBLE_EQ(c.gates.diversity_threshold, 0.45);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, Rejections) {
  EXPECT_THROW(config_from_json(json{{"sed", 1}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"gates", {{"diversity", 0.3}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"gates", {{"diversity_threshold", 0.0}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"mated", {{"ifgs", 5}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"seed", "abc"}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"provider", {{"mode", "file"}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"morph", {{"alpha", 1.5}}}}), std::invalid_argument);
}

TEST(DeriveSeed, DistinctStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(7, {stream::kCandidate, i}));
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(7, {stream::kFrpca, 0, i}));
  EXPECT_EQ(seen.size(), 2000u);
  EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
}

TEST(ParallelFor, RunsEveryIndexAndRethrowsLowest) {
  std::vector<int> hit(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hit[i] += 1; });
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 100);
  try {
    parallel_for(10, 3, [](std::size_t i) {
      if (i == 3 || i == 7) throw std::runtime_error("fail " + std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "fail 3");
  }
}

TEST(BaseAcceptance, FourSubjectsWithGateMetadata) {
  const auto c = scaled_config(2);
  TempDir d("base4");
  auto p = toy(c);
  const auto m = run_base_acceptance(d.path(), c, p);
  ASSERT_EQ(m.subjects.size(), 4u);
  EXPECT_EQ(m.base_stats.accepted, 4u);
  std::size_t rejected = 0;
  for (const auto& [reason, n] : m.base_stats.rejected) rejected += n;
  EXPECT_EQ(m.base_stats.candidates, 4u + rejected);
  std::map<Gender, int> genders;
  for (std::size_t i = 0; i < m.subjects.size(); ++i) {
    const auto& s = m.subjects[i];
    ++genders[s.gender];
    EXPECT_EQ(s.split, Split::train);
    EXPECT_LE(std::abs(s.gates.yaw), 5.0);
    EXPECT_LE(std::abs(s.gates.pitch), 5.0);
    EXPECT_GE(s.gates.ear_left, c.gates.min_eye_aspect_ratio);
    EXPECT_GE(s.gates.ear_right, c.gates.min_eye_aspect_ratio);
    EXPECT_LE(s.gates.bridge_edge_density, c.gates.max_bridge_edge_density);
    EXPECT_EQ(s.gates.nearest_distance.has_value(), i > 0);
    if (s.gates.nearest_distance) {
      EXPECT_GE(*s.gates.nearest_distance, c.gates.diversity_threshold);
    }
    for (const auto& f : {s.image, s.landmarks, s.latent, s.embedding}) EXPECT_TRUE(fs::exists(d.path() / f)) << f;
    // Stored embeddings agree with the renderer-free oracle on the stored latent.
    const auto w = read_latent_file(d.path() / s.latent);
    EXPECT_NEAR(cosine_distance(read_embedding_file(d.path() / s.embedding), toy_embedding_oracle(w, 16)), 0.0, 1e-6);
    // Neutralized: frontal yaw, illumination on its boundary, expression at the neutral offset.
    EXPECT_NEAR(w[toy_axis::kYaw], 0.0, 1e-6);
    EXPECT_NEAR(w[toy_axis::kIllumination], 0.0, 1e-6);
    EXPECT_NEAR(w[toy_axis::kExpression], -1.0, 1e-6);
  }
  EXPECT_EQ(genders[Gender::F], 2);
  EXPECT_EQ(genders[Gender::M], 2);
  EXPECT_FALSE(fs::exists(checkpoint_path(d.path())));
  EXPECT_TRUE(fs::is_directory(d.path() / "scores"));
}

TEST(BaseAcceptance, DeterministicAcrossRunsAndWorkerCounts) {
  const auto c = scaled_config(2, 1);
  TempDir a("det-a"), b("det-b");
  auto pa = toy(c), pb = toy(c);
  const auto ma = run_base_acceptance(a.path(), c, pa, {1});
  const auto mb = run_base_acceptance(b.path(), c, pb, {4});
  EXPECT_EQ(manifest_content(ma), manifest_content(mb));
  for (const auto& s : ma.subjects) EXPECT_EQ(slurp(a.path() / s.image), slurp(b.path() / s.image));
}

TEST(BaseAcceptance, SplitsFilledInAcceptanceOrder) {
  const auto c = scaled_config(2, 1, 1);
  TempDir d("splits");
  auto p = toy(c);
  const auto m = run_base_acceptance(d.path(), c, p);
  ASSERT_EQ(m.subjects.size(), 8u);
  std::map<Gender, std::vector<Split>> order;
  for (const auto& s : m.subjects) order[s.gender].push_back(s.split);
  for (Gender g : {Gender::F, Gender::M}) {
    EXPECT_EQ(order[g], (std::vector<Split>{Split::train, Split::train, Split::dev, Split::test}));
  }
}

TEST(BaseAcceptance, TargetZeroIsEmptySuccess) {
  const auto c = scaled_config(0);
  TempDir d("zero");
  auto p = toy(c);
  const auto m = run_base_acceptance(d.path(), c, p);
  EXPECT_TRUE(m.subjects.empty());
  EXPECT_EQ(m.base_stats.candidates, 0u);
  EXPECT_TRUE(m.stages.count("base"));
  EXPECT_TRUE(validate_manifest(d.path(), load_manifest(d.path())).empty());
}

TEST(BaseAcceptance, DiversityTwoAcceptsOnlyTheFirst) {
  auto c = scaled_config(2);
  c.gates.diversity_threshold = 2.0;
  c.candidate_budget = 40;
  TempDir d("div2");
  auto p = toy(c);
  try {
    run_base_acceptance(d.path(), c, p);
    FAIL() << "expected budget exhaustion";
  } catch (const BudgetExhausted& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("budget of 40"), std::string::npos) << msg;
    EXPECT_TRUE(msg.find("F=1") != std::string::npos || msg.find("M=1") != std::string::npos) << msg;
    EXPECT_NE(msg.find("=2"), std::string::npos) << msg;
  }
  const auto m = load_manifest(d.path());
  EXPECT_EQ(m.subjects.size(), 1u);
  EXPECT_EQ(m.base_stats.candidates, 40u);
  EXPECT_GT(m.base_stats.rejected.at("diversity"), 0u);
  EXPECT_FALSE(m.stages.count("base"));
  EXPECT_TRUE(fs::exists(checkpoint_path(d.path())));
}

TEST(BaseAcceptance, ResumesAfterProviderFailure) {
  const auto c = scaled_config(3);
  TempDir whole("whole"), part("part");
  auto p = toy(c);
  const auto reference = run_base_acceptance(whole.path(), c, p);

  FlakyProvider flaky({c.provider.latent_dim, c.provider.embedding_dim}, 5);
  EXPECT_THROW(run_base_acceptance(part.path(), c, flaky), TransportError);
  const auto partial = load_manifest(part.path());
  EXPECT_EQ(partial.base_stats.candidates, 5u);
  EXPECT_TRUE(fs::exists(checkpoint_path(part.path())));

  auto healthy = toy(c);
  const auto resumed = run_base_acceptance(part.path(), c, healthy);
  EXPECT_EQ(manifest_content(resumed), manifest_content(reference));
  EXPECT_FALSE(fs::exists(checkpoint_path(part.path())));
}

TEST(BaseAcceptance, RefusesDifferentConfig) {
  const auto c = scaled_config(1);
  TempDir d("mismatch");
  auto p = toy(c);
  run_base_acceptance(d.path(), c, p);
  auto other = c;
  other.seed = 99;
  EXPECT_THROW(run_base_acceptance(d.path(), other, p), std::invalid_argument);
}

TEST(BaseAcceptance, GenderLabelsFile) {
  auto c = scaled_config(1);
  TempDir d("labels");
  json labels = json::object();
  for (int i = 0; i < 40; i += 2) labels[std::to_string(i)] = (i % 4 == 0) ? "F" : "M";
  codec::write_file_atomic(d.path() / "labels.json", labels.dump());
  c.gender_source = "labels";
  c.gender_labels = (d.path() / "labels.json").string();
  auto p = toy(c);
  const auto m = run_base_acceptance(d.path() / "ds", c, p);
  ASSERT_EQ(m.subjects.size(), 2u);
  for (const auto& s : m.subjects) {
    EXPECT_EQ(s.candidate % 2, 0u);
    EXPECT_EQ(s.gender, s.candidate % 4 == 0 ? Gender::F : Gender::M);
  }
  EXPECT_GT(m.base_stats.rejected.at("unlabeled"), 0u);
}

TEST(MatedGeneration, ScaledCountsMatchOracle) {
  const auto c = scaled_config(1);
  TempDir d("mated");
  auto p = toy(c);
  auto m = run_base_acceptance(d.path(), c, p);
  for (EditMode mode : {EditMode::ifgs, EditMode::ifgd, EditMode::frpca}) run_mated_generation(d.path(), m, c, p, mode);
  const auto dirs = toy_directions(c.provider.latent_dim);
  ASSERT_EQ(m.subjects.size(), 2u);
  for (const auto& s : m.subjects) {
    const auto w = read_latent_file(d.path() / s.latent);
    const auto ref = toy_embedding_oracle(w, 16);
    std::size_t want_ifgs = 0, want_ifgd = 0;
    for (double a : c.ifgs_grid.illumination)
      for (double b : c.ifgs_grid.age) {
        auto e = w.plus_scaled(dirs.at("illumination").normal(), a).plus_scaled(dirs.at("age").normal(), b);
        want_ifgs += cosine_distance(ref, toy_embedding_oracle(e, 16)) <= c.gates.preservation_threshold;
      }
    for (double po : c.ifgd_grid.pose)
      for (double ex : c.ifgd_grid.expression) {
        auto e = w.plus_scaled(dirs.at("pose").normal(), po)
                     .plus_scaled(dirs.at("expression").normal(), ex)
                     .plus_scaled(dirs.at("illumination").normal(), c.ifgd_grid.illumination[0])
                     .plus_scaled(dirs.at("age").normal(), c.ifgd_grid.age[0]);
        want_ifgd += cosine_distance(ref, toy_embedding_oracle(e, 16)) <= c.gates.preservation_threshold;
      }
    const auto& modes = m.mated.at(s.subject_id);
    EXPECT_EQ(modes.at("ifgs").size(), want_ifgs);
    EXPECT_EQ(modes.at("ifgd").size(), want_ifgd);
    EXPECT_LE(modes.at("ifgs").size(), 4u);
    EXPECT_LE(modes.at("ifgd").size(), 4u);
    ASSERT_EQ(modes.at("frpca").size(), 2u);
    for (const auto& r : modes.at("frpca")) {
      EXPECT_GT(r.distance, 0.0);
      EXPECT_LE(r.distance, c.frpca.tau_id);
    }
    for (const auto& [mode, recs] : modes)
      for (const auto& r : recs) {
        EXPECT_TRUE(fs::exists(d.path() / r.image)) << r.image;
        EXPECT_LE(r.distance, mode == "frpca" ? c.frpca.tau_id : c.gates.preservation_threshold);
      }
  }
  EXPECT_TRUE(validate_manifest(d.path(), m).empty());
}

TEST(MatedGeneration, EpsilonPreservationDropsEveryIfgs) {
  auto c = scaled_config(1);
  c.gates.preservation_threshold = 1e-12;
  TempDir d("eps");
  auto p = toy(c);
  auto m = run_base_acceptance(d.path(), c, p);
  run_mated_generation(d.path(), m, c, p, EditMode::ifgs);
  for (const auto& s : m.subjects) EXPECT_TRUE(m.mated.at(s.subject_id).at("ifgs").empty());
  EXPECT_EQ(m.mated_dropped.size(), 4u * m.subjects.size());
  for (const auto& drop : m.mated_dropped) {
    EXPECT_EQ(drop.mode, "ifgs");
    EXPECT_EQ(drop.reason, "preservation");
    EXPECT_GT(drop.distance, 0.0);
  }
}

TEST(MatedGeneration, FrpcaRerunIsIdentical) {
  const auto c = scaled_config(1);
  TempDir a("frpca-a"), b("frpca-b");
  auto pa = toy(c), pb = toy(c);
  auto ma = run_base_acceptance(a.path(), c, pa);
  auto mb = run_base_acceptance(b.path(), c, pb);
  run_mated_generation(a.path(), ma, c, pa, EditMode::frpca);
  run_mated_generation(b.path(), mb, c, pb, EditMode::frpca, {3});
  EXPECT_EQ(manifest_content(ma), manifest_content(mb));
  for (const auto& [sid, modes] : ma.mated)
    for (const auto& r : modes.at("frpca")) EXPECT_EQ(slurp(a.path() / r.image), slurp(b.path() / r.image));
}

TEST(MatedGeneration, ModeRerunReplacesOnlyThatMode) {
  const auto c = scaled_config(1);
  TempDir d("replace");
  auto p = toy(c);
  auto m = run_base_acceptance(d.path(), c, p);
  run_mated_generation(d.path(), m, c, p, EditMode::ifgs);
  run_mated_generation(d.path(), m, c, p, EditMode::ifgd);
  const std::string before = manifest_content(m);
  run_mated_generation(d.path(), m, c, p, EditMode::ifgs);
  EXPECT_EQ(manifest_content(m), before);
  EXPECT_TRUE(m.stages.count("mate:ifgs") && m.stages.count("mate:ifgd"));
}

TEST(MatedGeneration, NeedsBaseStage) {
  const auto c = scaled_config(1);
  Manifest m;
  m.config = c;
  m.config_hash = config_hash(c);
  auto p = toy(c);
  TempDir d("nobase");
  EXPECT_THROW(run_mated_generation(d.path(), m, c, p, EditMode::ifgs), std::invalid_argument);
}

TEST(MorphGeneration, ThreeSubjectsFullGivesThreeMorphsPerGender) {
  const auto c = scaled_config(3);
  TempDir d("morph3");
  auto p = toy(c);
  auto m = run_base_acceptance(d.path(), c, p);
  run_pairing(d.path(), m, kFullPairing);
  run_morph_generation(d.path(), m, c.morph_alpha, c.splice_feather);
  EXPECT_EQ(count_morphs(m, Gender::F), 3u);
  EXPECT_EQ(count_morphs(m, Gender::M), 3u);
  EXPECT_TRUE(m.morph_failures.empty());
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(d.path() / "morphs" / "lma")) files += e.path().extension() == ".png";
  EXPECT_EQ(files, 6u);
  const auto& r = m.morphs.front();
  const Raster morph = codec::read_png_file(d.path() / r.output);
  const Raster a = codec::read_png_file(d.path() / m.find_subject(r.subject_a)->image);
  EXPECT_EQ(morph.at(0, 100), a.at(0, 100));  // outside the face hull the background is contributor A
  EXPECT_TRUE(validate_manifest(d.path(), m).empty());
}

TEST(MorphGeneration, MissingLandmarksFlagsOnlyAffectedPairs) {
  const auto c = scaled_config(3);
  TempDir d("nolm");
  auto p = toy(c);
  auto m = run_base_acceptance(d.path(), c, p);
  run_pairing(d.path(), m, kFullPairing);
  const auto& victim = m.subjects.front();
  fs::remove(d.path() / victim.landmarks);
  run_morph_generation(d.path(), m, 0.5, 8);
  ASSERT_EQ(m.morph_failures.size(), 2u);
  for (const auto& f : m.morph_failures) {
    EXPECT_TRUE(f.subject_a == victim.subject_id || f.subject_b == victim.subject_id);
    EXPECT_FALSE(f.error.empty());
  }
  EXPECT_EQ(m.morphs.size(), 4u);
}

TEST(MorphGeneration, DevFixtureOfFivePerGender) {
  const auto c = scaled_config(0, 5);
  TempDir d("dev5");
  auto p = toy(c);
  auto m = run_base_acceptance(d.path(), c, p);
  run_pairing(d.path(), m, 1);  // k applies to train only
  EXPECT_EQ(m.pairs.size(), 20u);
  run_morph_generation(d.path(), m, 0.5, 8, {2});
  EXPECT_EQ(m.morphs.size(), 20u);
  EXPECT_TRUE(validate_manifest(d.path(), m).empty());
}

TEST(Pairing, TrainKBoundsAndPairsFile) {
  const auto c = scaled_config(5);
  TempDir d("pairk");
  auto p = toy(c);
  auto m = run_base_acceptance(d.path(), c, p);
  run_pairing(d.path(), m, 1);
  for (Gender g : {Gender::F, Gender::M}) {
    std::size_t n = 0;
    for (const auto& pr : m.pairs) n += pr.gender == g;
    EXPECT_GE(n, 3u);  // ceil(5 * 1 / 2)
    EXPECT_LE(n, 5u);
  }
  const auto listing = json::parse(slurp(d.path() / "pairs.json"));
  EXPECT_EQ(listing.size(), m.pairs.size());
  run_pairing(d.path(), m, kFullPairing);
  EXPECT_EQ(m.pairs.size(), 20u);
}

TEST(Validate, CleanCrossGenderAndMissingFile) {
  const auto c = scaled_config(3);
  TempDir d("validate");
  auto p = toy(c);
  auto m = run_base_acceptance(d.path(), c, p);
  run_pairing(d.path(), m, kFullPairing);
  run_morph_generation(d.path(), m, 0.5, 8);
  ASSERT_TRUE(validate_manifest(d.path(), load_manifest(d.path())).empty());

  auto crossed = m;
  const SubjectRecord* other = nullptr;
  const Gender ga = crossed.find_subject(crossed.morphs[0].subject_a)->gender;
  for (const auto& s : crossed.subjects)
    if (s.gender != ga) other = &s;
  ASSERT_NE(other, nullptr);
  crossed.morphs[0].subject_b = other->subject_id;
  const auto v = validate_manifest(d.path(), crossed);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].code, "cross_gender");
  EXPECT_EQ(v[0].ref, crossed.morphs[0].output);

  fs::remove(d.path() / m.subjects[1].image);
  const auto missing = validate_manifest(d.path(), m);
  ASSERT_EQ(missing.size(), 1u);
  EXPECT_EQ(missing[0].code, "missing_file");
  EXPECT_EQ(missing[0].ref, m.subjects[1].image);
}

TEST(Validate, CountsHashAndUnreadableFiles) {
  const auto c = scaled_config(0, 3);
  TempDir d("counts");
  auto p = toy(c);
  auto m = run_base_acceptance(d.path(), c, p);
  run_pairing(d.path(), m, kFullPairing);
  auto fewer = m;
  fewer.pairs.pop_back();
  std::set<std::string> codes;
  for (const auto& v : validate_manifest(d.path(), fewer)) codes.insert(v.code);
  EXPECT_EQ(codes, (std::set<std::string>{"pair_count"}));

  auto dropped = m;
  dropped.subjects.pop_back();
  codes.clear();
  for (const auto& v : validate_manifest(d.path(), dropped)) codes.insert(v.code);
  EXPECT_TRUE(codes.count("split_size"));

  auto rehashed = m;
  rehashed.config.seed += 1;
  EXPECT_EQ(validate_manifest(d.path(), rehashed).front().code, "config_hash");

  codec::write_file_atomic(d.path() / m.subjects[0].landmarks, std::string("[[1,2]]"));
  const auto bad = validate_manifest(d.path(), m);
  ASSERT_EQ(bad.size(), 1u);
  EXPECT_EQ(bad[0].code, "unreadable_file");
}

TEST(Manifest, JsonRoundTripAndProvenanceExcluded) {
  const auto c = scaled_config(1);
  TempDir d("roundtrip");
  auto p = toy(c);
  auto m = run_base_acceptance(d.path(), c, p);
  run_mated_generation(d.path(), m, c, p, EditMode::ifgs);
  run_pairing(d.path(), m, kFullPairing);
  run_morph_generation(d.path(), m, 0.5, 8);
  const auto back = load_manifest(d.path());
  EXPECT_EQ(to_json(back), to_json(m));
  EXPECT_TRUE(back.provenance.contains("created"));
  auto stamped = back;
  stamped.provenance["updated"] = "1970-01-01T00:00:00Z";
  EXPECT_EQ(manifest_content(stamped), manifest_content(back));
  EXPECT_THROW(load_manifest(d.path() / "nowhere"), std::runtime_error);
  codec::write_file_atomic(d.path() / "broken" / "manifest.json", std::string("{"));
  EXPECT_THROW(load_manifest(d.path() / "broken"), std::runtime_error);
}
