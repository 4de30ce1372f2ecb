#include "aif/expansion.hpp"

#include <algorithm>

#include "aif/errors.hpp"

namespace aif {

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) throw SchemaError("cosine: dimension mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw NumericError("degenerate embedding");
  // Rounding can push the quotient a hair outside [-1, 1].
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

SimilarityRanking rank_candidates(const std::string& secondary,
                                  const std::vector<Eigen::VectorXd>& seed_vectors,
                                  const std::map<std::string, Eigen::VectorXd>& candidate_vectors) {
  if (seed_vectors.empty()) {
    throw SchemaError("no seed vectors for secondary indicator '" + secondary + "'");
  }
  SimilarityRanking ranking;
  ranking.secondary = secondary;
  for (const auto& [word, vec] : candidate_vectors) {
    double best = -1.0;
    for (const auto& seed : seed_vectors) {
      best = std::max(best, cosine(seed, vec));
    }
    ranking.entries.push_back({word, best});
  }
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const ScoredWord& a, const ScoredWord& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.word < b.word;
                   });
  return ranking;
}

std::vector<ScoredWord> select_top(const SimilarityRanking& ranking, int k) {
  if (k < 1) throw SchemaError("select_top needs k >= 1");
  const std::size_t n = std::min(ranking.entries.size(), static_cast<std::size_t>(k));
  return {ranking.entries.begin(), ranking.entries.begin() + n};
}

std::vector<ScoredWord> filter_expansion(const std::vector<ScoredWord>& selected,
                                         const std::set<std::string>& availability,
                                         const std::set<std::string>& exclusions) {
  std::vector<ScoredWord> kept;
  for (const auto& sw : selected) {
    if (availability.count(sw.word) && !exclusions.count(sw.word)) kept.push_back(sw);
  }
  return kept;
}

ExpansionResult expand_hierarchy(const IndicatorHierarchy& hierarchy,
                                 const std::vector<SimilarityRanking>& rankings,
                                 const std::set<std::string>& availability,
                                 const std::set<std::string>& exclusions, int top_k) {
  // Hierarchy-order list of secondaries, each with its ranking.
  std::vector<const SimilarityRanking*> by_secondary;
  for (const auto& primary : hierarchy.primaries) {
    for (const auto& secondary : primary.secondaries) {
      const SimilarityRanking* found = nullptr;
      for (const auto& ranking : rankings) {
        if (ranking.secondary == secondary.name) {
          found = &ranking;
          break;
        }
      }
      if (!found) {
        throw SchemaError("no ranking for secondary indicator '" + secondary.name + "'");
      }
      by_secondary.push_back(found);
    }
  }

  // Survivors per secondary, before cross-secondary deduplication.
  std::vector<std::vector<ScoredWord>> surviving;
  for (const auto* ranking : by_secondary) {
    surviving.push_back(filter_expansion(select_top(*ranking, top_k), availability,
                                         exclusions));
  }

  // A word surviving under several secondaries keeps only its best
  // placement, so entry names stay unique across the hierarchy. Ties go
  // to the earliest secondary in hierarchy order.
  std::map<std::string, std::size_t> best_slot;
  std::map<std::string, double> best_score;
  for (std::size_t s = 0; s < surviving.size(); ++s) {
    for (const auto& sw : surviving[s]) {
      const auto it = best_score.find(sw.word);
      if (it == best_score.end() || sw.score > it->second) {
        best_score[sw.word] = sw.score;
        best_slot[sw.word] = s;
      }
    }
  }

  ExpansionResult result;
  result.expanded = hierarchy;
  std::size_t slot = 0;
  for (auto& primary : result.expanded.primaries) {
    for (auto& secondary : primary.secondaries) {
      for (const auto& sw : surviving[slot]) {
        if (best_slot[sw.word] != slot) continue;
        IndicatorEntry entry;
        entry.name = sw.word;
        entry.polarity = Polarity::kPositive;
        entry.provenance = Provenance::kExpanded;
        entry.score = sw.score;
        secondary.entries.push_back(std::move(entry));
      }
      ++slot;
    }
  }
  for (const auto* ranking : by_secondary) result.rankings.push_back(*ranking);
  result.expanded.validate();
  return result;
}

}  // namespace aif
