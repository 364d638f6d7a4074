#include "docaug/depth.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "docaug/strings.hpp"

namespace docaug::depth {

void RoleSet::validate() const {
    if (roles.empty()) throw Error("empty role set");
    std::set<std::string> seen;
    for (const auto& r : roles) {
        if (r.empty()) throw Error("empty role name in role set");
        if (!seen.insert(r).second) throw Error("duplicate role in role set: " + r);
    }
}

double tte_depth(const providers::EmbeddingVector& t,
                 const std::vector<providers::EmbeddingVector>& S) {
    if (S.empty()) throw EmptyReferenceSet("reference set S is empty");
    double sum = 0.0;
    double comp = 0.0;
    for (const auto& s : S) {
        double d = providers::cosine_distance(t, s);
        double y = d - comp;
        double acc = sum + y;
        comp = (acc - sum) - y;
        sum = acc;
    }
    return 2.0 - sum / static_cast<double>(S.size());
}

std::vector<DepthScore> rank_roles(const RoleSet& targets, const RoleSet& sources,
                                   providers::Embedder& embedder) {
    targets.validate();
    sources.validate();

    std::vector<std::string> names;
    std::unordered_map<std::string, std::size_t> index;
    auto intern = [&](const std::string& name) {
        auto [it, inserted] = index.emplace(name, names.size());
        if (inserted) names.push_back(name);
        return it->second;
    };
    std::vector<std::size_t> target_idx, source_idx;
    for (const auto& r : targets.roles) target_idx.push_back(intern(r));
    for (const auto& r : sources.roles) source_idx.push_back(intern(r));

    auto vectors = embedder.embed(names);

    std::vector<providers::EmbeddingVector> S;
    S.reserve(source_idx.size());
    for (std::size_t i : source_idx) S.push_back(vectors[i]);

    std::vector<DepthScore> out;
    out.reserve(targets.roles.size());
    for (std::size_t i = 0; i < targets.roles.size(); ++i) {
        out.push_back({targets.roles[i], tte_depth(vectors[target_idx[i]], S)});
    }
    std::stable_sort(out.begin(), out.end(), [](const DepthScore& a, const DepthScore& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.role < b.role;
    });
    return out;
}

std::set<std::string> select_outliers(const std::vector<DepthScore>& ranked,
                                      const OutlierConfig& cfg) {
    if (ranked.empty()) throw EmptyRanking("empty depth ranking");
    if (!(cfg.fraction > 0.0 && cfg.fraction < 1.0)) {
        throw Error("outlier fraction must lie in (0, 1)");
    }
    auto count = static_cast<std::size_t>(
        std::floor(cfg.fraction * static_cast<double>(ranked.size())));
    std::set<std::string> out;
    for (std::size_t i = 0; i < count; ++i) out.insert(ranked[i].role);
    return out;
}

}  // namespace docaug::depth
