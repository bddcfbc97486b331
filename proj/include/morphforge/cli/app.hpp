#pragma once

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "morphforge/evaluation/csv.hpp"
#include "morphforge/evaluation/metrics.hpp"
#include "morphforge/pipeline/stages.hpp"

namespace morphforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitViolations = 2;

namespace detail {

struct Common {
  std::string config;
  std::string dataset = ".";
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

/// Subsets named on the command line, or every subset sorted by name.
inline std::vector<std::string> pick_subsets(const std::string& arg, const std::map<std::string, std::vector<eval::ScoreSample>>& by) {
  std::vector<std::string> names;
  if (arg.empty()) {
    for (const auto& [name, v] : by) names.push_back(name);
    return names;
  }
  for (auto& n : split_list(arg)) {
    if (!by.count(n)) throw std::invalid_argument("no scores for subset '" + n + "'");
    names.push_back(std::move(n));
  }
  return names;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

/// Writes to `path`, or to `out` when the path is empty.
inline void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    codec::write_file_atomic(path, text);
  }
}

inline PipelineConfig config_or_default(const Common& o) { return o.config.empty() ? PipelineConfig{} : load_config(o.config); }

/// Loads the dataset manifest; an explicit --config must match it.
inline Manifest open_dataset(const Common& o) {
  Manifest m = load_manifest(o.dataset);
  if (!o.config.empty()) require_config_match(m, load_config(o.config));
  return m;
}

}  // namespace detail

/// Entry point of the `morphforge` tool. Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Synthetic face morphing dataset builder and evaluation toolkit", "morphforge"};
  app.require_subcommand(1);
  detail::Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Pipeline config (JSON)");
    sub->add_option("--dataset", common.dataset, "Dataset root directory")->capture_default_str();
    sub->add_option("--workers", common.workers, "Parallel workers")->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("gen-base", "Accept base subjects into the dataset");
  add_common(gen);

  std::string mode;
  auto* mate = app.add_subcommand("mate", "Generate mated samples for one edit mode");
  add_common(mate);
  mate->add_option("--mode", mode, "Edit mode")->required()->check(CLI::IsMember({"ifgs", "ifgd", "frpca"}));

  std::size_t k = 0;
  bool full = false;
  auto* pair = app.add_subcommand("pair", "Select morph pairs");
  add_common(pair);
  auto* k_opt = pair->add_option("--k", k, "Nearest neighbours per train subject")->check(CLI::PositiveNumber);
  pair->add_flag("--full", full, "Pair every same-gender train subject")->excludes(k_opt);

  std::optional<double> alpha;
  std::optional<int> feather;
  auto* morph = app.add_subcommand("morph", "Create landmark morphs for every pair");
  add_common(morph);
  morph->add_option("--alpha", alpha, "Blend weight of the second subject")->check(CLI::Range(0.0, 1.0));
  morph->add_option("--feather", feather, "Splice mask feather in pixels")->check(CLI::NonNegativeNumber);

  std::optional<double> factor, threshold;
  std::string suspect, probe, suspect_lm, probe_lm, out_path;
  auto* demorph_cmd = app.add_subcommand("demorph", "Reverse a morph with a trusted probe image");
  add_common(demorph_cmd);
  demorph_cmd->add_option("--factor", factor, "De-morph factor")->check(CLI::Range(0.0, 0.999999));
  demorph_cmd->add_option("--suspect", suspect, "Suspect document image (PNG)")->required()->check(CLI::ExistingFile);
  demorph_cmd->add_option("--probe", probe, "Trusted probe image (PNG)")->required()->check(CLI::ExistingFile);
  demorph_cmd->add_option("--suspect-landmarks", suspect_lm, "Suspect landmarks (JSON)")->check(CLI::ExistingFile);
  demorph_cmd->add_option("--probe-landmarks", probe_lm, "Probe landmarks (JSON)")->check(CLI::ExistingFile);
  demorph_cmd->add_option("--out", out_path, "Output image (PNG)")->required();
  demorph_cmd->add_option("--threshold", threshold, "Compare the result with the probe at this distance threshold")
      ->check(CLI::Range(0.0, 2.0));

  auto* validate = app.add_subcommand("validate", "Check the dataset manifest and artifacts");
  add_common(validate);

  auto* eval = app.add_subcommand("eval", "Evaluation metrics over score files");
  eval->require_subcommand(1);
  std::string scores, thresholds_path, subsets;
  std::optional<std::string> policy;
  std::optional<int> bins, grid;
  std::optional<double> epsilon, bandwidth;
  bool lower_is_bona_fide = false;
  auto add_eval = [&](const char* name, const char* help) {
    auto* s = eval->add_subcommand(name, help);
    s->add_option("--scores", scores, "Score CSV")->required()->check(CLI::ExistingFile);
    s->add_option("--out", out_path, "Output CSV (stdout when omitted)");
    s->add_option("--config", common.config, "Pipeline config supplying defaults");
    return s;
  };
  auto* map_cmd = add_eval("map", "Morphing attack potential matrix");
  map_cmd->add_option("--thresholds", thresholds_path, "frs_id,threshold CSV")->check(CLI::ExistingFile);
  map_cmd->add_option("--policy", policy, "Slot policy")->check(CLI::IsMember({"both", "either"}));
  auto* det_cmd = add_eval("det", "Detection error trade-off curve");
  det_cmd->add_flag("--lower-is-bona-fide", lower_is_bona_fide, "Low scores indicate bona fide samples");
  auto* kld_cmd = add_eval("kld", "KL divergence between score subsets");
  kld_cmd->add_option("--subsets", subsets, "Comma-separated subsets (default: all)");
  kld_cmd->add_option("--bins", bins, "Histogram bins")->check(CLI::Range(2, 1000000));
  kld_cmd->add_option("--epsilon", epsilon, "Additive smoothing")->check(CLI::PositiveNumber);
  auto* kde_cmd = add_eval("kde", "Gaussian kernel density table per subset");
  kde_cmd->add_option("--subsets", subsets, "Comma-separated subsets (default: all)");
  kde_cmd->add_option("--bandwidth", bandwidth, "Kernel bandwidth (default: Silverman)")->check(CLI::PositiveNumber);
  kde_cmd->add_option("--grid", grid, "Grid points")->check(CLI::Range(2, 1000000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  const RunOptions run{common.workers};
  try {
    if (gen->parsed()) {
      const auto c = detail::config_or_default(common);
      auto provider = make_provider(c);
      const auto m = run_base_acceptance(common.dataset, c, *provider, run);
      out << json{{"subjects", m.subjects.size()}, {"candidates", m.base_stats.candidates}, {"rejected", m.base_stats.rejected}}.dump()
          << '\n';
    } else if (mate->parsed()) {
      auto m = detail::open_dataset(common);
      auto provider = make_provider(m.config);
      const EditMode em = mode == "ifgs" ? EditMode::ifgs : mode == "ifgd" ? EditMode::ifgd : EditMode::frpca;
      run_mated_generation(common.dataset, m, m.config, *provider, em, run);
      std::size_t kept = 0, dropped = 0;
      for (const auto& [sid, modes] : m.mated) kept += modes.count(mode) ? modes.at(mode).size() : 0;
      for (const auto& d : m.mated_dropped) dropped += d.mode == mode;
      out << json{{"mode", mode}, {"kept", kept}, {"dropped", dropped}}.dump() << '\n';
    } else if (pair->parsed()) {
      auto m = detail::open_dataset(common);
      const PairingK train_k = full ? kFullPairing : PairingK(k ? k : m.config.pairing_k);
      run_pairing(common.dataset, m, train_k);
      for (const auto& w : m.pair_warnings) err << "warning: " << w << '\n';
      out << json{{"pairs", m.pairs.size()}}.dump() << '\n';
    } else if (morph->parsed()) {
      auto m = detail::open_dataset(common);
      run_morph_generation(common.dataset, m, alpha.value_or(m.config.morph_alpha), feather.value_or(m.config.splice_feather), run);
      for (const auto& f : m.morph_failures) err << "morph failed: " << f.subject_a << ' ' << f.subject_b << ": " << f.error << '\n';
      out << json{{"morphs", m.morphs.size()}, {"failures", m.morph_failures.size()}}.dump() << '\n';
    } else if (demorph_cmd->parsed()) {
      const auto c = detail::config_or_default(common);
      std::unique_ptr<InferenceProvider> provider;
      auto need_provider = [&]() -> InferenceProvider& {
        if (!provider) provider = make_provider(c);
        return *provider;
      };
      const Raster s = codec::read_png_file(suspect), p = codec::read_png_file(probe);
      const LandmarkSet ls = suspect_lm.empty() ? need_provider().detect_landmarks(s) : read_landmarks_file(suspect_lm);
      const LandmarkSet lp = probe_lm.empty() ? need_provider().detect_landmarks(p) : read_landmarks_file(probe_lm);
      const auto r = demorph(s, ls, p, lp, factor.value_or(c.demorph_factor));
      codec::write_png_file(out_path, r.image);
      json report{{"output", out_path}};
      if (threshold) {
        const auto v = lmfd_verify(need_provider().embed_face(r.image), need_provider().embed_face(p), *threshold);
        report["distance"] = v.distance;
        report["decision"] = v.decision == LmfdDecision::bona_fide ? "bona_fide" : "morph_attack";
      }
      out << report.dump() << '\n';
    } else if (validate->parsed()) {
      const Manifest m = load_manifest(common.dataset);
      const auto v = validate_manifest(common.dataset, m);
      json list = json::array();
      for (const auto& x : v) list.push_back(to_json(x));
      out << json{{"violations", list}}.dump(2) << '\n';
      return v.empty() ? kExitOk : kExitViolations;
    } else {
      const auto c = detail::config_or_default(common);
      std::ostringstream text;
      auto in = detail::open_input(scores);
      if (map_cmd->parsed()) {
        auto th = c.evaluation.frs_thresholds;
        if (!thresholds_path.empty()) {
          auto tin = detail::open_input(thresholds_path);
          th = eval::read_thresholds(tin);
        }
        if (th.empty()) throw std::invalid_argument("eval map needs --thresholds or evaluation.frs_thresholds in the config");
        const auto scores_v = eval::read_attempt_scores(in);
        eval::write_map_csv(text, eval::compute_map(scores_v, th, eval::parse_map_policy(policy.value_or(c.evaluation.map_policy))));
      } else if (det_cmd->parsed()) {
        const auto d = eval::read_detection_scores(in);
        eval::write_det_csv(text, eval::det_curve(d.bona_fide, d.attack, !lower_is_bona_fide));
      } else {
        std::map<std::string, std::vector<eval::ScoreSample>> by;
        for (auto& s : eval::read_quality_scores(in)) by[s.source_label].push_back(s);
        const auto names = detail::pick_subsets(subsets, by);
        if (kld_cmd->parsed()) {
          std::vector<eval::KldRow> rows;
          for (const auto& p : names)
            for (const auto& q : names)
              if (p != q) rows.push_back({p, q, eval::kl_divergence(by[p], by[q], bins.value_or(c.evaluation.kld_bins), epsilon.value_or(c.evaluation.kld_epsilon))});
          eval::write_kld_csv(text, rows);
        } else {
          bool header = true;
          for (const auto& name : names) {
            const double h = bandwidth.value_or(eval::silverman_bandwidth(by[name]));
            eval::write_kde_csv(text, name, eval::kde_table(by[name], h, grid.value_or(c.evaluation.kde_grid)), header);
            header = false;
          }
        }
      }
      detail::emit(out_path, text.str(), out);
    }
  } catch (const BudgetExhausted& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const eval::CsvError& e) {
    err << "error: " << scores << ": " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}

}  // namespace morphforge::cli
