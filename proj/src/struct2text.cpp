#include "docaug/struct2text.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

#include <json.hpp>

#include "docaug/strings.hpp"

using nlohmann::json;

namespace docaug::struct2text {

std::string build_doc_prompt(const EventRecord& record) {
    if (record.arguments.empty()) throw Error("empty event record");
    std::string out;
    out += "Write a document in the style of a newspaper article about the following \"" +
           record.event_type + "\" event. The article should be about 10 sentences long.\n";
    out += "Include each piece of event information below verbatim in the article.\n\n";
    out += "Event information:\n";
    for (const auto& [role, arg] : record.arguments) {
        out += "- " + role + ": " + arg + "\n";
    }
    out += "\nArticle:\n";
    return out;
}

std::vector<Ngram> enumerate_ngrams(const std::string& text, std::size_t max_n) {
    std::vector<std::pair<std::size_t, std::size_t>> tokens;
    const std::size_t n = text.size();
    std::size_t i = 0;
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= n) break;
        std::size_t start = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        tokens.emplace_back(start, i);
    }
    std::vector<Ngram> out;
    const std::size_t t = tokens.size();
    for (std::size_t first = 0; first < t; ++first) {
        for (std::size_t len = 1; len <= max_n && first + len <= t; ++len) {
            std::size_t s = tokens[first].first;
            std::size_t e = tokens[first + len - 1].second;
            out.push_back(Ngram{s, e, len, text.substr(s, e - s)});
        }
    }
    return out;
}

std::vector<AlignmentResult> align(const EventRecord& record, const std::string& text,
                                   providers::Embedder& embedder, const AlignmentConfig& cfg) {
    const auto ngrams = enumerate_ngrams(text, cfg.max_n);

    // one embedding per distinct surface string, batched
    std::vector<std::string> surfaces;
    std::unordered_map<std::string, std::size_t> surface_idx;
    for (const auto& ng : ngrams) {
        if (surface_idx.emplace(ng.surface, surfaces.size()).second) {
            surfaces.push_back(ng.surface);
        }
    }
    std::vector<std::string> args;
    for (const auto& [role, arg] : record.arguments) args.push_back(arg);

    std::vector<std::string> batch_input = surfaces;
    batch_input.insert(batch_input.end(), args.begin(), args.end());
    std::vector<providers::EmbeddingVector> vectors;
    vectors.reserve(batch_input.size());
    for (std::size_t off = 0; off < batch_input.size(); off += cfg.embed_batch) {
        std::size_t end = std::min(off + cfg.embed_batch, batch_input.size());
        std::vector<std::string> chunk(batch_input.begin() + static_cast<std::ptrdiff_t>(off),
                                       batch_input.begin() + static_cast<std::ptrdiff_t>(end));
        auto embedded = embedder.embed(chunk);
        vectors.insert(vectors.end(), embedded.begin(), embedded.end());
    }

    std::vector<AlignmentResult> out;
    std::size_t arg_pos = 0;
    for (const auto& [role, arg] : record.arguments) {
        const auto& arg_vec = vectors[surfaces.size() + arg_pos];
        ++arg_pos;
        AlignmentResult res;
        res.role = role;
        res.argument = arg;
        const Ngram* best = nullptr;
        double best_sim = 0.0;
        for (const auto& ng : ngrams) {
            double sim = providers::cosine_similarity(arg_vec, vectors[surface_idx.at(ng.surface)]);
            bool better = false;
            if (!best || sim > best_sim) {
                better = true;
            } else if (sim == best_sim) {
                if (ng.n_tokens < best->n_tokens ||
                    (ng.n_tokens == best->n_tokens && ng.start < best->start)) {
                    better = true;
                }
            }
            if (better) {
                best = &ng;
                best_sim = sim;
            }
        }
        if (best) {
            res.matched_span = {best->start, best->end};
            res.matched_text = best->surface;
            res.similarity = best_sim;
        }
        res.retained = res.matched_span.has_value() && res.similarity >= cfg.sim_threshold;
        out.push_back(std::move(res));
    }
    return out;
}

corpus::AnnotatedDocument generate_sample(const corpus::EventSchema& schema,
                                          providers::ChatProvider& provider,
                                          providers::Embedder& embedder,
                                          const providers::GenerationConfig& gen_cfg,
                                          const AlignmentConfig& align_cfg,
                                          const std::string& doc_id,
                                          std::vector<AlignmentResult>* audit) {
    schema.validate();
    providers::StructuredGeneration generation;
    try {
        generation = providers::generate_structured(provider, schema, gen_cfg);
    } catch (const providers::StructuredParseError& e) {
        throw GenerationExhausted(e.what());
    }

    EventRecord record;
    record.event_type = schema.event_type;
    record.arguments = generation.assignments;
    if (record.arguments.empty()) {
        throw GenerationExhausted("structured generation produced no arguments");
    }

    providers::ChatRequest doc_req{"", build_doc_prompt(record)};
    providers::ChatResponse doc_resp = chat(provider, doc_req, gen_cfg);

    auto results = align(record, doc_resp.text, embedder, align_cfg);
    if (audit) *audit = results;

    corpus::AnnotatedDocument doc;
    doc.doc_id = doc_id;
    doc.event_type = schema.event_type;
    doc.text = doc_resp.text;
    doc.provenance = corpus::Provenance::s2t;
    for (const auto& res : results) {
        if (!res.retained) continue;
        corpus::ArgumentAnnotation ann;
        ann.role = res.role;
        ann.argument = res.matched_text;  // the matched surface keeps spans exact
        ann.span = res.matched_span;
        doc.annotations.push_back(std::move(ann));
    }
    return doc;
}

std::string alignment_audit_jsonl(const std::vector<AlignmentResult>& results) {
    std::string out;
    for (const auto& res : results) {
        json obj;
        obj["role"] = res.role;
        obj["argument"] = res.argument;
        if (res.matched_span) {
            obj["matched_span"] = json::array({res.matched_span->first, res.matched_span->second});
            obj["matched_text"] = res.matched_text;
        } else {
            obj["matched_span"] = nullptr;
        }
        obj["similarity"] = res.similarity;
        obj["retained"] = res.retained;
        out += obj.dump();
        out += '\n';
    }
    return out;
}

}  // namespace docaug::struct2text
