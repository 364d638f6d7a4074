#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "docaug/corpus.hpp"
#include "docaug/providers.hpp"

namespace docaug::struct2text {

struct EventRecord {
    std::string event_type;
    std::map<std::string, std::string> arguments;  // role -> argument
};

struct AlignmentConfig {
    std::size_t max_n = 20;
    double sim_threshold = 0.5;
    std::size_t embed_batch = 64;
};

struct Ngram {
    std::size_t start = 0;  // character span, half-open
    std::size_t end = 0;
    std::size_t n_tokens = 0;
    std::string surface;
};

struct AlignmentResult {
    std::string role;
    std::string argument;
    std::optional<std::pair<std::size_t, std::size_t>> matched_span;
    std::string matched_text;
    double similarity = 0.0;
    bool retained = false;
};

// Newspaper-style, ~10-sentence document prompt realizing the record.
std::string build_doc_prompt(const EventRecord& record);

// Whitespace tokens; all contiguous windows of 1..max_n tokens, ordered
// by start position then length.
std::vector<Ngram> enumerate_ngrams(const std::string& text, std::size_t max_n);

// For each argument, the n-gram with the highest cosine similarity; ties
// broken by fewer tokens, then earlier start. Retained iff the best
// similarity reaches cfg.sim_threshold.
std::vector<AlignmentResult> align(const EventRecord& record, const std::string& text,
                                   providers::Embedder& embedder, const AlignmentConfig& cfg = {});

// Full S2T pipeline: structured record -> document -> alignment.
corpus::AnnotatedDocument generate_sample(const corpus::EventSchema& schema,
                                          providers::ChatProvider& provider,
                                          providers::Embedder& embedder,
                                          const providers::GenerationConfig& gen_cfg,
                                          const AlignmentConfig& align_cfg,
                                          const std::string& doc_id,
                                          std::vector<AlignmentResult>* audit = nullptr);

std::string alignment_audit_jsonl(const std::vector<AlignmentResult>& results);

}  // namespace docaug::struct2text
