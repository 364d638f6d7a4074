#pragma once

#include <set>
#include <string>
#include <vector>

#include "docaug/providers.hpp"

namespace docaug::depth {

struct RoleSet {
    enum class Origin { source, target };
    std::vector<std::string> roles;
    Origin origin = Origin::source;

    void validate() const;  // non-empty, unique names
};

struct DepthScore {
    std::string role;
    double score = 0.0;  // in [0, 2]
};

struct OutlierConfig {
    double fraction = 0.25;  // must lie in (0, 1)
};

struct EmptyReferenceSet : Error {
    using Error::Error;
};

struct EmptyRanking : Error {
    using Error::Error;
};

// Depth of t within S: 2 minus the mean cosine distance from t to the
// members of S, accumulated with Kahan compensation in input order.
double tte_depth(const providers::EmbeddingVector& t,
                 const std::vector<providers::EmbeddingVector>& S);

// Scores every target role name against the source role embeddings;
// ascending by score, ties by role name. Each role name embedded once.
std::vector<DepthScore> rank_roles(const RoleSet& targets, const RoleSet& sources,
                                   providers::Embedder& embedder);

// The floor(fraction * N) lowest-depth roles, a prefix of the ranking.
std::set<std::string> select_outliers(const std::vector<DepthScore>& ranked,
                                      const OutlierConfig& cfg);

}  // namespace docaug::depth
