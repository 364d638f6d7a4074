#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "docaug/corpus.hpp"
#include "docaug/providers.hpp"

namespace docaug::madlib {

struct LiteralText {
    std::string text;
};

// A bracketed category slot. `raw_inner` preserves the exact inner text
// so that render() reproduces the source byte-for-byte; `category` is the
// trimmed name used for matching.
struct Slot {
    std::string category;
    std::string raw_inner;
};

using Segment = std::variant<LiteralText, Slot>;

struct MadLibTemplate {
    std::vector<Segment> segments;
    std::string source_event;
    std::size_t bracket_errors = 0;

    std::vector<std::string> slot_categories() const;
};

struct MadLibSolution {
    // category -> argument; duplicates keep the first occurrence.
    std::vector<std::pair<std::string, std::string>> assignments;
    std::vector<std::string> warnings;

    const std::string* find(const std::string& category) const;  // case-insensitive
};

struct ValidationReport {
    std::set<std::string> missing_roles;
    std::set<std::string> hallucinated_categories;
    std::set<std::string> unsolved_slots;
    std::size_t bracket_errors = 0;
    bool ok = false;
    std::vector<std::string> actions;

    std::string summary() const;
};

enum class HallucinationStrategy {
    remap_or_remove,   // (i): embed and remap to nearest role, fall back to removal
    remove_sentence,   // (ii): delete the sentence containing the slot (default)
};

struct MadLibConfig {
    HallucinationStrategy strategy = HallucinationStrategy::remove_sentence;
    double remap_threshold = 0.5;
    // An attempt passes when at least this fraction of schema roles
    // appears as slots.
    double coverage_tolerance = 0.8;
};

struct EmptyTemplate : Error {
    using Error::Error;
};

struct NoAssignmentsFound : Error {
    using Error::Error;
};

struct UnresolvedSlot : Error {
    explicit UnresolvedSlot(std::string category_)
        : Error("no assignment for slot category: " + category_),
          category(std::move(category_)) {}
    std::string category;
};

// "[...]" spans become slots; everything else is literal text. Unclosed,
// nested, and empty brackets are counted as bracket errors and kept as
// literal text.
MadLibTemplate parse_template(const std::string& raw, const corpus::EventSchema& schema);

// Inverse of parse_template: slots rendered as "[" + raw_inner + "]".
std::string render(const MadLibTemplate& t);

using Exemplar = std::pair<MadLibTemplate, MadLibSolution>;

std::string build_generation_prompt(const corpus::EventSchema& schema,
                                    const std::vector<Exemplar>& exemplars);

std::string build_solution_prompt(const MadLibTemplate& t, const corpus::EventSchema& schema);

// Accepts "### CATEGORY: ANSWER" lines, plus "-", "*" or bare bullets.
MadLibSolution parse_solution(const std::string& raw);

ValidationReport validate(const MadLibTemplate& t, const MadLibSolution& sol,
                          const corpus::EventSchema& schema, const MadLibConfig& cfg = {});

// Resolves hallucinated slot categories per the configured strategy and
// canonicalizes slot categories to schema casing. `embedder` is only
// needed for the remap strategy.
std::tuple<MadLibTemplate, MadLibSolution, ValidationReport> postprocess(
    const MadLibTemplate& t, const MadLibSolution& sol, const corpus::EventSchema& schema,
    const MadLibConfig& cfg = {}, providers::Embedder* embedder = nullptr);

corpus::AnnotatedDocument fill(const MadLibTemplate& t, const MadLibSolution& sol,
                               const std::string& doc_id);

// Convert an annotated document into a (template, solution) exemplar by
// replacing each spanned annotation with its bracketed role.
Exemplar doc_to_exemplar(const corpus::AnnotatedDocument& doc);

// Full MLA loop: draw exemplars, generate, solve, validate; redraw and
// retry up to cfg.max_retries attempts (at most 2 provider calls each).
corpus::AnnotatedDocument generate_sample(const corpus::EventSchema& schema,
                                          const std::vector<corpus::AnnotatedDocument>& exemplar_pool,
                                          providers::ChatProvider& provider,
                                          const providers::GenerationConfig& cfg,
                                          std::uint64_t rng_seed, const std::string& doc_id,
                                          const MadLibConfig& mcfg = {},
                                          providers::Embedder* embedder = nullptr);

}  // namespace docaug::madlib
