#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "docaug/error.hpp"

namespace docaug::metrics {

struct PredictionTuple {
    std::string doc_id;
    std::string role;
    std::string argument;
};

struct ScoreTriple {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Whether roles absent from both prediction and gold contribute a zero
// to the macro mean or are excluded from it.
enum class AbsentRolePolicy { score_zero, exclude };

struct MetricReport {
    ScoreTriple overall;
    std::map<std::string, ScoreTriple> per_role;
    double role_f1 = 0.0;
    std::optional<double> zero_shot_f1;
    std::optional<double> rdf1;
};

struct LengthMismatch : Error {
    using Error::Error;
};

struct EmptyRoleUniverse : Error {
    using Error::Error;
};

// Lowercase, strip punctuation, drop article tokens (a, an, the),
// collapse whitespace. Idempotent.
std::string normalize(const std::string& argument);

// Exact-match set F1 over (doc_id, role, normalized argument) tuples.
// Zero denominators score zero.
ScoreTriple exact_match(const std::vector<PredictionTuple>& pred,
                        const std::vector<PredictionTuple>& gold);

// Per-role exact match plus the macro mean over the role universe.
std::pair<double, std::map<std::string, ScoreTriple>> role_f1(
    const std::vector<PredictionTuple>& pred, const std::vector<PredictionTuple>& gold,
    const std::set<std::string>& role_universe,
    AbsentRolePolicy policy = AbsentRolePolicy::score_zero);

// Macro F1 restricted to zero-shot roles; nullopt when the set is empty.
std::optional<double> zero_shot_f1(const std::vector<PredictionTuple>& pred,
                                   const std::vector<PredictionTuple>& gold,
                                   const std::set<std::string>& zero_roles,
                                   AbsentRolePolicy policy = AbsentRolePolicy::score_zero);

// Macro F1 restricted to depth outlier roles; nullopt when the set is empty.
std::optional<double> rdf1(const std::vector<PredictionTuple>& pred,
                           const std::vector<PredictionTuple>& gold,
                           const std::set<std::string>& outlier_roles,
                           AbsentRolePolicy policy = AbsentRolePolicy::score_zero);

struct WilcoxonResult {
    double statistic = 0.0;  // W = min(W+, W-)
    double p_value = 1.0;    // two-sided
    std::size_t n = 0;       // pairs remaining after dropping zero differences
};

// Signed-rank test over paired samples. Zero differences are dropped,
// tied absolute differences receive average ranks. Exact enumeration for
// n <= 12, otherwise normal approximation with tie correction.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y);

MetricReport evaluate(const std::vector<PredictionTuple>& pred,
                      const std::vector<PredictionTuple>& gold,
                      const std::set<std::string>& role_universe,
                      const std::optional<std::set<std::string>>& zero_roles = std::nullopt,
                      const std::optional<std::set<std::string>>& outlier_roles = std::nullopt,
                      AbsentRolePolicy policy = AbsentRolePolicy::score_zero);

std::vector<PredictionTuple> load_tuples(const std::string& path);
std::string report_to_json(const MetricReport& report);
std::string report_to_table(const MetricReport& report);

}  // namespace docaug::metrics
