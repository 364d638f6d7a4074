#include "docaug/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "docaug/strings.hpp"

using nlohmann::json;

namespace docaug::corpus {

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::human: return "human";
        case Provenance::mla: return "mla";
        case Provenance::s2t: return "s2t";
    }
    return "human";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "mla") return Provenance::mla;
    if (s == "s2t") return Provenance::s2t;
    if (s == "human") return Provenance::human;
    throw Error("unknown provenance: " + s);
}

void EventSchema::validate() const {
    if (event_type.empty()) throw Error("schema: empty event type");
    if (roles.empty()) throw Error("schema " + event_type + ": empty role list");
    std::set<std::string> seen;
    for (const auto& r : roles) {
        if (r.empty()) throw Error("schema " + event_type + ": empty role name");
        if (!seen.insert(strings::ascii_lower(r)).second) {
            throw Error("schema " + event_type + ": duplicate role " + r);
        }
    }
}

bool EventSchema::has_role(const std::string& name) const {
    return canonical_role(name).has_value();
}

std::optional<std::string> EventSchema::canonical_role(const std::string& name) const {
    for (const auto& r : roles) {
        if (strings::iequals(r, name)) return r;
    }
    return std::nullopt;
}

std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(const std::string& text) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    const std::size_t n = text.size();
    std::size_t i = 0;
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= n) break;
        std::size_t start = i;
        std::size_t end = n;
        for (std::size_t j = i; j < n; ++j) {
            char c = text[j];
            if (c == '.' || c == '!' || c == '?') {
                bool at_boundary = (j + 1 == n) ||
                                   std::isspace(static_cast<unsigned char>(text[j + 1]));
                if (at_boundary) {
                    end = j + 1;
                    break;
                }
            }
        }
        spans.emplace_back(start, end);
        i = end;
    }
    return spans;
}

std::size_t count_sentences(const std::string& text) {
    return sentence_spans(text).size();
}

namespace {

AnnotatedDocument doc_from_json(const json& obj, std::size_t line_no) {
    if (!obj.is_object()) throw MalformedLine(line_no, "not a JSON object");
    AnnotatedDocument doc;
    try {
        doc.doc_id = obj.at("doc_id").get<std::string>();
        doc.event_type = obj.at("event_type").get<std::string>();
        doc.text = obj.at("text").get<std::string>();
        if (obj.contains("provenance")) {
            doc.provenance = provenance_from_string(obj.at("provenance").get<std::string>());
        }
        for (const auto& a : obj.at("annotations")) {
            ArgumentAnnotation ann;
            ann.role = a.at("role").get<std::string>();
            ann.argument = a.at("argument").get<std::string>();
            if (a.contains("span") && !a.at("span").is_null()) {
                const auto& sp = a.at("span");
                if (!sp.is_array() || sp.size() != 2) {
                    throw MalformedLine(line_no, "span must be [start, end]");
                }
                long long s = sp[0].get<long long>();
                long long e = sp[1].get<long long>();
                if (s < 0 || e < 0 || s >= e) {
                    throw MalformedLine(line_no, "invalid span bounds");
                }
                ann.span = {static_cast<std::size_t>(s), static_cast<std::size_t>(e)};
            }
            if (ann.argument.empty()) throw MalformedLine(line_no, "empty argument");
            doc.annotations.push_back(std::move(ann));
        }
    } catch (const json::exception& e) {
        throw MalformedLine(line_no, e.what());
    }
    return doc;
}

void check_doc(const AnnotatedDocument& doc, const std::vector<EventSchema>* schemas) {
    for (const auto& ann : doc.annotations) {
        if (ann.span) {
            auto [s, e] = *ann.span;
            if (e > doc.text.size() || doc.text.substr(s, e - s) != ann.argument) {
                throw SpanMismatch(doc.doc_id, ann.role);
            }
        }
    }
    if (schemas) {
        const EventSchema* schema = nullptr;
        for (const auto& sc : *schemas) {
            if (sc.event_type == doc.event_type) { schema = &sc; break; }
        }
        if (!schema) throw Error("doc " + doc.doc_id + ": unknown event type " + doc.event_type);
        for (const auto& ann : doc.annotations) {
            if (!schema->has_role(ann.role)) {
                throw Error("doc " + doc.doc_id + ": role " + ann.role +
                            " not in schema for " + doc.event_type);
            }
        }
    }
}

json doc_to_json(const AnnotatedDocument& doc) {
    json anns = json::array();
    for (const auto& a : doc.annotations) {
        json ann;
        ann["role"] = a.role;
        ann["argument"] = a.argument;
        if (a.span) {
            ann["span"] = json::array({a.span->first, a.span->second});
        } else {
            ann["span"] = nullptr;
        }
        anns.push_back(std::move(ann));
    }
    json obj;
    obj["doc_id"] = doc.doc_id;
    obj["event_type"] = doc.event_type;
    obj["text"] = doc.text;
    obj["annotations"] = std::move(anns);
    obj["provenance"] = to_string(doc.provenance);
    return obj;
}

}  // namespace

std::vector<AnnotatedDocument> parse_corpus(std::istream& in,
                                            const std::vector<EventSchema>* schemas) {
    std::vector<AnnotatedDocument> docs;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (strings::trim(line).empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw MalformedLine(line_no, e.what());
        }
        AnnotatedDocument doc = doc_from_json(obj, line_no);
        if (!ids.insert(doc.doc_id).second) {
            throw MalformedLine(line_no, "duplicate doc_id " + doc.doc_id);
        }
        check_doc(doc, schemas);
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<AnnotatedDocument> load_corpus(const std::string& path,
                                           const std::vector<EventSchema>* schemas) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus file: " + path);
    return parse_corpus(in, schemas);
}

std::string to_jsonl(const std::vector<AnnotatedDocument>& docs) {
    std::string out;
    for (const auto& doc : docs) {
        out += doc_to_json(doc).dump();
        out += '\n';
    }
    return out;
}

void save_corpus(const std::vector<AnnotatedDocument>& docs, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write corpus file: " + path);
    out << to_jsonl(docs);
}

void append_corpus(const std::vector<AnnotatedDocument>& docs, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot write corpus file: " + path);
    out << to_jsonl(docs);
}

CorpusStats corpus_stats(const std::vector<AnnotatedDocument>& docs) {
    CorpusStats st;
    st.n_samples = docs.size();
    std::set<std::string> types;
    std::size_t total_sentences = 0;
    for (const auto& doc : docs) {
        types.insert(doc.event_type);
        st.n_argument_instances += doc.annotations.size();
        total_sentences += count_sentences(doc.text);
    }
    st.n_event_types = types.size();
    st.mean_sentences_per_doc =
        docs.empty() ? 0.0 : static_cast<double>(total_sentences) / static_cast<double>(docs.size());
    return st;
}

std::vector<AnnotatedDocument> select_exemplars(const std::vector<AnnotatedDocument>& docs,
                                                std::size_t k) {
    if (k > docs.size()) {
        throw InsufficientDocs("requested " + std::to_string(k) + " exemplars from " +
                               std::to_string(docs.size()) + " documents");
    }
    struct Scored {
        const AnnotatedDocument* doc;
        bool in_range;
        double density;
    };
    std::vector<Scored> scored;
    scored.reserve(docs.size());
    for (const auto& doc : docs) {
        std::size_t sents = count_sentences(doc.text);
        double density = sents == 0 ? 0.0
                                    : static_cast<double>(doc.annotations.size()) /
                                          static_cast<double>(sents);
        scored.push_back({&doc, sents >= 5 && sents <= 40, density});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.in_range != b.in_range) return a.in_range;
        if (a.density != b.density) return a.density > b.density;
        return a.doc->doc_id < b.doc->doc_id;
    });
    std::vector<AnnotatedDocument> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(*scored[i].doc);
    return out;
}

std::set<std::string> zero_shot_roles(const std::vector<AnnotatedDocument>& train,
                                      const std::vector<EventSchema>& schemas) {
    std::set<std::string> seen;
    for (const auto& doc : train) {
        for (const auto& ann : doc.annotations) {
            seen.insert(strings::ascii_lower(ann.role));
        }
    }
    std::set<std::string> out;
    for (const auto& schema : schemas) {
        for (const auto& role : schema.roles) {
            if (!seen.count(strings::ascii_lower(role))) out.insert(role);
        }
    }
    return out;
}

std::vector<EventSchema> parse_schemas(const std::string& json_text) {
    json obj;
    try {
        obj = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(std::string("malformed schema file: ") + e.what());
    }
    std::vector<EventSchema> out;
    for (const auto& s : obj.at("schemas")) {
        EventSchema schema;
        schema.event_type = s.at("event_type").get<std::string>();
        for (const auto& r : s.at("roles")) schema.roles.push_back(r.get<std::string>());
        schema.validate();
        out.push_back(std::move(schema));
    }
    return out;
}

std::vector<EventSchema> load_schemas(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open schema file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_schemas(ss.str());
}

}  // namespace docaug::corpus
