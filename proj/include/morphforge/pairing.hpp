#pragma once

// Contributor pair selection by embedding similarity.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "morphforge/embedding.hpp"

namespace morphforge {

enum class Gender { F, M };
enum class Split { train, dev, test };

inline const char* to_string(Gender g) { return g == Gender::F ? "F" : "M"; }

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

inline Gender parse_gender(const std::string& s) {
  if (s == "F") return Gender::F;
  if (s == "M") return Gender::M;
  throw std::invalid_argument("unknown gender '" + s + "'");
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + s + "'");
}

struct SubjectEntry {
  std::string subject_id;
  Gender gender{Gender::F};
  Split split{Split::train};
  Embedding embedding;
};

struct SubjectPair {
  std::string subject_a;  // lexicographically smaller id
  std::string subject_b;
  double similarity{0.0};

  bool operator==(const SubjectPair&) const = default;
};

struct PairingResult {
  std::vector<SubjectPair> pairs;
  std::vector<std::string> warnings;
};

/// Neighbour count per subject; nullopt selects every same-gender pair.
using PairingK = std::optional<std::size_t>;
inline constexpr PairingK kFullPairing = std::nullopt;

/// Pairs subjects of one split within each gender. In k mode each subject
/// contributes its k most similar same-gender partners (ties by subject id)
/// and the union is deduplicated. Output is sorted by (gender, a, b).
inline PairingResult select_pairs(const std::vector<SubjectEntry>& subjects, Split split, PairingK k) {
  if (k && *k == 0) throw std::invalid_argument("select_pairs: k must be positive");
  std::set<std::string> ids;
  for (const auto& s : subjects) {
    if (s.split != split) {
      throw std::invalid_argument("select_pairs: subject " + s.subject_id + " is not in split " + to_string(split));
    }
    if (!ids.insert(s.subject_id).second) throw std::invalid_argument("select_pairs: duplicate subject " + s.subject_id);
    if (s.embedding.norm() == 0.0) throw std::invalid_argument("select_pairs: zero embedding for " + s.subject_id);
  }

  PairingResult result;
  for (Gender g : {Gender::F, Gender::M}) {
    std::vector<const SubjectEntry*> group;
    for (const auto& s : subjects)
      if (s.gender == g) group.push_back(&s);
    std::sort(group.begin(), group.end(), [](auto* a, auto* b) { return a->subject_id < b->subject_id; });
    const std::size_t n = group.size();
    if (n < 2) {
      result.warnings.push_back(std::string("gender ") + to_string(g) + " in split " + to_string(split) + " has " +
                                std::to_string(n) + " subject(s); no pairs");
      continue;
    }
    std::vector<double> sim(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        sim[i * n + j] = sim[j * n + i] = cosine_similarity(group[i]->embedding, group[j]->embedding);

    std::set<std::pair<std::size_t, std::size_t>> chosen;
    const bool full = !k || *k >= n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> others;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) others.push_back(j);
      const std::size_t take = full ? others.size() : *k;
      // group is sorted by id, so index order breaks ties by id.
      std::stable_sort(others.begin(), others.end(),
                       [&](std::size_t a, std::size_t b) { return sim[i * n + a] > sim[i * n + b]; });
      for (std::size_t t = 0; t < take; ++t) chosen.insert(std::minmax(i, others[t]));
    }
    for (auto [i, j] : chosen) result.pairs.push_back({group[i]->subject_id, group[j]->subject_id, sim[i * n + j]});
  }
  return result;
}

}  // namespace morphforge
