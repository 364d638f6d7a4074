#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "docaug/error.hpp"

namespace docaug::corpus {

enum class Provenance { human, mla, s2t };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

// An event type plus its ordered role list. This is the only in-domain
// knowledge the generation pipelines consume.
struct EventSchema {
    std::string event_type;
    std::vector<std::string> roles;

    // Throws Error on empty event type, empty role list, or duplicate
    // role names (case-insensitive).
    void validate() const;

    bool has_role(const std::string& name) const;

    // Schema-cased spelling of `name`, matched case-insensitively.
    std::optional<std::string> canonical_role(const std::string& name) const;
};

struct ArgumentAnnotation {
    std::string role;
    std::string argument;
    // 0-based half-open character span into the document text.
    std::optional<std::pair<std::size_t, std::size_t>> span;
};

struct AnnotatedDocument {
    std::string doc_id;
    std::string event_type;
    std::string text;
    std::vector<ArgumentAnnotation> annotations;
    Provenance provenance = Provenance::human;
};

struct CorpusStats {
    std::size_t n_samples = 0;
    std::size_t n_event_types = 0;
    std::size_t n_argument_instances = 0;
    double mean_sentences_per_doc = 0.0;
};

struct MalformedLine : Error {
    MalformedLine(std::size_t line_no_, const std::string& reason)
        : Error("line " + std::to_string(line_no_) + ": " + reason),
          line_no(line_no_) {}
    std::size_t line_no;
};

struct SpanMismatch : Error {
    SpanMismatch(std::string doc_id_, std::string role_)
        : Error("span does not slice to argument (doc " + doc_id_ + ", role " + role_ + ")"),
          doc_id(std::move(doc_id_)),
          role(std::move(role_)) {}
    std::string doc_id;
    std::string role;
};

struct InsufficientDocs : Error {
    using Error::Error;
};

// Sentences end at '.', '!' or '?' followed by whitespace or end-of-text.
// Spans cover the sentence content including the terminator run.
std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(const std::string& text);
std::size_t count_sentences(const std::string& text);

std::vector<AnnotatedDocument> parse_corpus(std::istream& in,
                                            const std::vector<EventSchema>* schemas = nullptr);
std::vector<AnnotatedDocument> load_corpus(const std::string& path,
                                           const std::vector<EventSchema>* schemas = nullptr);

// Canonical JSONL: one document per line, sorted object keys.
std::string to_jsonl(const std::vector<AnnotatedDocument>& docs);
void save_corpus(const std::vector<AnnotatedDocument>& docs, const std::string& path);
void append_corpus(const std::vector<AnnotatedDocument>& docs, const std::string& path);

CorpusStats corpus_stats(const std::vector<AnnotatedDocument>& docs);

// Top-k exemplars for few-shot prompting. Ranking: docs whose sentence
// count lies in [5, 40] first, then by annotation density
// (annotations / sentences) descending, ties by doc_id.
std::vector<AnnotatedDocument> select_exemplars(const std::vector<AnnotatedDocument>& docs,
                                                std::size_t k);

// Schema roles that never occur as a training annotation.
std::set<std::string> zero_shot_roles(const std::vector<AnnotatedDocument>& train,
                                      const std::vector<EventSchema>& schemas);

std::vector<EventSchema> load_schemas(const std::string& path);
std::vector<EventSchema> parse_schemas(const std::string& json_text);

}  // namespace docaug::corpus
