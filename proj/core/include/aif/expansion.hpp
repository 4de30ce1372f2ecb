#pragma once

#include <Eigen/Dense>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "aif/hierarchy.hpp"

namespace aif {

// Throws NumericError on a zero vector.
double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

struct ScoredWord {
  std::string word;
  double score = 0.0;
};

// Scores non-increasing; ties in lexicographic word order.
struct SimilarityRanking {
  std::string secondary;
  std::vector<ScoredWord> entries;
};

// Candidate score = max cosine against the secondary's seed vectors.
SimilarityRanking rank_candidates(const std::string& secondary,
                                  const std::vector<Eigen::VectorXd>& seed_vectors,
                                  const std::map<std::string, Eigen::VectorXd>& candidate_vectors);

std::vector<ScoredWord> select_top(const SimilarityRanking& ranking, int k);

// Keeps words present in availability and absent from exclusions,
// preserving order.
std::vector<ScoredWord> filter_expansion(const std::vector<ScoredWord>& selected,
                                         const std::set<std::string>& availability,
                                         const std::set<std::string>& exclusions);

struct ExpansionResult {
  IndicatorHierarchy expanded;
  std::vector<SimilarityRanking> rankings;  // secondaries in hierarchy order
};

// Per secondary: seeds plus its filtered top-k candidates. A candidate
// surviving under several secondaries lands only where its score is
// highest (ties: first secondary in hierarchy order), keeping entry
// names unique across the hierarchy. Expanded entries get positive
// polarity; polarity of data-bearing words is an input concern.
ExpansionResult expand_hierarchy(const IndicatorHierarchy& hierarchy,
                                 const std::vector<SimilarityRanking>& rankings,
                                 const std::set<std::string>& availability,
                                 const std::set<std::string>& exclusions, int top_k);

}  // namespace aif
