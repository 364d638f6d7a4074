#include "docaug/madlib.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "docaug/strings.hpp"

namespace docaug::madlib {

std::vector<std::string> MadLibTemplate::slot_categories() const {
    std::vector<std::string> out;
    for (const auto& seg : segments) {
        if (const Slot* slot = std::get_if<Slot>(&seg)) {
            bool seen = false;
            for (const auto& c : out) {
                if (strings::iequals(c, slot->category)) { seen = true; break; }
            }
            if (!seen) out.push_back(slot->category);
        }
    }
    return out;
}

const std::string* MadLibSolution::find(const std::string& category) const {
    for (const auto& [cat, arg] : assignments) {
        if (strings::iequals(cat, category)) return &arg;
    }
    return nullptr;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    os << "ok=" << (ok ? "true" : "false");
    os << " missing=" << missing_roles.size();
    os << " hallucinated=" << hallucinated_categories.size();
    os << " unsolved=" << unsolved_slots.size();
    os << " bracket_errors=" << bracket_errors;
    return os.str();
}

MadLibTemplate parse_template(const std::string& raw, const corpus::EventSchema& schema) {
    if (strings::trim(raw).empty()) throw EmptyTemplate("template has no content");
    MadLibTemplate t;
    t.source_event = schema.event_type;
    std::string lit;
    auto flush = [&] {
        if (!lit.empty()) {
            t.segments.push_back(LiteralText{std::move(lit)});
            lit.clear();
        }
    };
    const std::size_t n = raw.size();
    std::size_t pos = 0;
    while (pos < n) {
        if (raw[pos] != '[') {
            lit.push_back(raw[pos++]);
            continue;
        }
        std::size_t close = raw.find(']', pos + 1);
        if (close == std::string::npos) {
            ++t.bracket_errors;
            lit += raw.substr(pos);
            break;
        }
        std::size_t next_open = raw.find('[', pos + 1);
        if (next_open != std::string::npos && next_open < close) {
            // nested open bracket: treat this '[' as literal
            ++t.bracket_errors;
            lit.push_back(raw[pos++]);
            continue;
        }
        std::string inner = raw.substr(pos + 1, close - pos - 1);
        std::string category = strings::trim(inner);
        if (category.empty()) {
            ++t.bracket_errors;
            lit += raw.substr(pos, close - pos + 1);
            pos = close + 1;
            continue;
        }
        flush();
        t.segments.push_back(Slot{std::move(category), std::move(inner)});
        pos = close + 1;
    }
    flush();
    return t;
}

std::string render(const MadLibTemplate& t) {
    std::string out;
    for (const auto& seg : t.segments) {
        if (const LiteralText* lit = std::get_if<LiteralText>(&seg)) {
            out += lit->text;
        } else {
            out += '[' + std::get<Slot>(seg).raw_inner + ']';
        }
    }
    return out;
}

namespace {

std::string solution_lines(const MadLibSolution& sol) {
    std::string out;
    for (const auto& [cat, arg] : sol.assignments) {
        out += "### " + cat + ": " + arg + "\n";
    }
    return out;
}

}  // namespace

std::string build_generation_prompt(const corpus::EventSchema& schema,
                                    const std::vector<Exemplar>& exemplars) {
    schema.validate();
    std::string out;
    for (std::size_t i = 0; i < exemplars.size(); ++i) {
        out += "Example " + std::to_string(i + 1) + ":\n";
        out += "Madlib: " + render(exemplars[i].first) + "\n";
        out += "Solution:\n";
        out += solution_lines(exemplars[i].second);
        out += "\n";
    }
    out += "Write a madlib for a \"" + schema.event_type +
           "\" event. Use the following categories for Mad Lib blanks. "
           "Make sure all categories appear in the MadLib. "
           "Do not generate any other categories.:\n\n";
    out += "Categories: " + strings::join(schema.roles, ", ") + "\n\n";
    out += "Madlib:\n";
    return out;
}

std::string build_solution_prompt(const MadLibTemplate& t, const corpus::EventSchema& schema) {
    schema.validate();
    std::string doc = render(t);
    if (strings::trim(doc).empty()) throw EmptyTemplate("template has no content");
    std::string out;
    out += "Solve the MadLib. Fill-in missing information in the document.\n";
    out += "Return your answer as a bulleted list of the format \"### CATEGORY: ANSWER\".\n\n";
    out += "Make sure the following categories are in your solution: " +
           strings::join(schema.roles, ", ") + "\n\n";
    out += "Madlib: " + doc + "\n\n";
    out += "MadLib Solution:\n";
    return out;
}

MadLibSolution parse_solution(const std::string& raw) {
    MadLibSolution sol;
    std::istringstream in(raw);
    std::string line;
    while (std::getline(in, line)) {
        std::size_t i = 0;
        while (i < line.size() &&
               (line[i] == '#' || line[i] == '-' || line[i] == '*' ||
                std::isspace(static_cast<unsigned char>(line[i])))) {
            ++i;
        }
        std::string body = line.substr(i);
        std::size_t colon = body.find(':');
        if (colon == std::string::npos) continue;
        std::string category = strings::trim(body.substr(0, colon));
        std::string answer = strings::trim(body.substr(colon + 1));
        if (category.empty() || answer.empty()) continue;
        if (sol.find(category)) {
            sol.warnings.push_back("duplicate category kept first: " + category);
            continue;
        }
        sol.assignments.emplace_back(std::move(category), std::move(answer));
    }
    if (sol.assignments.empty()) throw NoAssignmentsFound("no CATEGORY: ANSWER lines found");
    return sol;
}

ValidationReport validate(const MadLibTemplate& t, const MadLibSolution& sol,
                          const corpus::EventSchema& schema, const MadLibConfig& cfg) {
    ValidationReport rpt;
    rpt.bracket_errors = t.bracket_errors;
    const auto cats = t.slot_categories();
    for (const auto& role : schema.roles) {
        bool present = std::any_of(cats.begin(), cats.end(), [&](const std::string& c) {
            return strings::iequals(c, role);
        });
        if (!present) rpt.missing_roles.insert(role);
    }
    for (const auto& cat : cats) {
        if (!schema.has_role(cat)) {
            rpt.hallucinated_categories.insert(cat);
        } else if (!sol.find(cat)) {
            rpt.unsolved_slots.insert(cat);
        }
    }
    double covered = static_cast<double>(schema.roles.size() - rpt.missing_roles.size());
    double needed = cfg.coverage_tolerance * static_cast<double>(schema.roles.size());
    rpt.ok = rpt.bracket_errors == 0 && rpt.unsolved_slots.empty() && covered + 1e-9 >= needed;
    return rpt;
}

namespace {

// Delete every sentence of the rendered template that contains a slot
// whose category is in `doomed`, then re-parse.
MadLibTemplate remove_slot_sentences(const MadLibTemplate& t,
                                     const std::set<std::string>& doomed,
                                     const corpus::EventSchema& schema,
                                     std::vector<std::string>& actions) {
    std::string rendered;
    std::vector<std::pair<std::size_t, std::size_t>> bad_ranges;
    for (const auto& seg : t.segments) {
        if (const LiteralText* lit = std::get_if<LiteralText>(&seg)) {
            rendered += lit->text;
        } else {
            const Slot& slot = std::get<Slot>(seg);
            std::size_t start = rendered.size();
            rendered += '[' + slot.raw_inner + ']';
            bool bad = std::any_of(doomed.begin(), doomed.end(), [&](const std::string& d) {
                return strings::iequals(d, slot.category);
            });
            if (bad) bad_ranges.emplace_back(start, rendered.size());
        }
    }
    auto sentences = corpus::sentence_spans(rendered);
    std::vector<bool> keep(rendered.size(), true);
    for (std::size_t si = 0; si < sentences.size(); ++si) {
        auto [s, e] = sentences[si];
        bool hit = std::any_of(bad_ranges.begin(), bad_ranges.end(), [&](const auto& r) {
            return r.first < e && r.second > s;
        });
        if (!hit) continue;
        // extend the cut up to the start of the next sentence
        std::size_t cut_end = si + 1 < sentences.size() ? sentences[si + 1].first : rendered.size();
        for (std::size_t i = s; i < cut_end; ++i) keep[i] = false;
        actions.push_back("removed sentence: " + rendered.substr(s, e - s));
    }
    std::string pruned;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        if (keep[i]) pruned.push_back(rendered[i]);
    }
    MadLibTemplate out;
    if (strings::trim(pruned).empty()) {
        out.source_event = t.source_event;
        return out;
    }
    out = parse_template(pruned, schema);
    out.source_event = t.source_event;
    return out;
}

}  // namespace

std::tuple<MadLibTemplate, MadLibSolution, ValidationReport> postprocess(
    const MadLibTemplate& t, const MadLibSolution& sol, const corpus::EventSchema& schema,
    const MadLibConfig& cfg, providers::Embedder* embedder) {
    MadLibTemplate work = t;
    MadLibSolution out_sol = sol;
    std::vector<std::string> actions;
    std::set<std::string> handled;
    std::set<std::string> to_remove;

    for (const auto& cat : work.slot_categories()) {
        if (schema.has_role(cat)) continue;
        handled.insert(cat);
        bool remapped = false;
        if (cfg.strategy == HallucinationStrategy::remap_or_remove && embedder) {
            std::vector<std::string> batch;
            batch.push_back(cat);
            batch.insert(batch.end(), schema.roles.begin(), schema.roles.end());
            auto vecs = embedder->embed(batch);
            double best_sim = -2.0;
            std::size_t best = 0;
            for (std::size_t i = 0; i < schema.roles.size(); ++i) {
                double sim = providers::cosine_similarity(vecs[0], vecs[i + 1]);
                if (sim > best_sim) { best_sim = sim; best = i; }
            }
            if (best_sim >= cfg.remap_threshold) {
                const std::string& role = schema.roles[best];
                for (auto& seg : work.segments) {
                    if (Slot* slot = std::get_if<Slot>(&seg)) {
                        if (strings::iequals(slot->category, cat)) {
                            slot->category = role;
                            slot->raw_inner = role;
                        }
                    }
                }
                for (auto& [k, v] : out_sol.assignments) {
                    if (strings::iequals(k, cat) && !out_sol.find(role)) k = role;
                }
                actions.push_back("remapped category '" + cat + "' -> '" + role + "'");
                remapped = true;
            }
        }
        if (!remapped) to_remove.insert(cat);
    }

    if (!to_remove.empty()) {
        work = remove_slot_sentences(work, to_remove, schema, actions);
    }

    // canonicalize surviving categories to schema casing
    for (auto& seg : work.segments) {
        if (Slot* slot = std::get_if<Slot>(&seg)) {
            if (auto canonical = schema.canonical_role(slot->category)) {
                slot->category = *canonical;
            }
        }
    }
    for (auto& [k, v] : out_sol.assignments) {
        if (auto canonical = schema.canonical_role(k)) k = *canonical;
    }

    // drop assignments whose category no longer appears in the template
    const auto remaining = work.slot_categories();
    std::erase_if(out_sol.assignments, [&](const auto& kv) {
        return std::none_of(remaining.begin(), remaining.end(), [&](const std::string& c) {
            return strings::iequals(c, kv.first);
        });
    });

    ValidationReport rpt = validate(work, out_sol, schema, cfg);
    rpt.hallucinated_categories = handled;
    rpt.actions = std::move(actions);
    return {std::move(work), std::move(out_sol), std::move(rpt)};
}

corpus::AnnotatedDocument fill(const MadLibTemplate& t, const MadLibSolution& sol,
                               const std::string& doc_id) {
    corpus::AnnotatedDocument doc;
    doc.doc_id = doc_id;
    doc.event_type = t.source_event;
    doc.provenance = corpus::Provenance::mla;
    for (const auto& seg : t.segments) {
        if (const LiteralText* lit = std::get_if<LiteralText>(&seg)) {
            doc.text += lit->text;
            continue;
        }
        const Slot& slot = std::get<Slot>(seg);
        const std::string* arg = sol.find(slot.category);
        if (!arg) throw UnresolvedSlot(slot.category);
        std::size_t start = doc.text.size();
        doc.text += *arg;
        corpus::ArgumentAnnotation ann;
        ann.role = slot.category;
        ann.argument = *arg;
        ann.span = {start, doc.text.size()};
        doc.annotations.push_back(std::move(ann));
    }
    return doc;
}

Exemplar doc_to_exemplar(const corpus::AnnotatedDocument& doc) {
    std::vector<const corpus::ArgumentAnnotation*> spanned;
    for (const auto& ann : doc.annotations) {
        if (ann.span) spanned.push_back(&ann);
    }
    std::sort(spanned.begin(), spanned.end(),
              [](const auto* a, const auto* b) { return a->span->first < b->span->first; });

    MadLibTemplate t;
    t.source_event = doc.event_type;
    MadLibSolution sol;
    std::size_t pos = 0;
    for (const auto* ann : spanned) {
        auto [s, e] = *ann->span;
        if (s < pos) continue;  // overlapping spans: keep the earlier one
        if (s > pos) t.segments.push_back(LiteralText{doc.text.substr(pos, s - pos)});
        t.segments.push_back(Slot{ann->role, ann->role});
        if (!sol.find(ann->role)) sol.assignments.emplace_back(ann->role, ann->argument);
        pos = e;
    }
    if (pos < doc.text.size()) t.segments.push_back(LiteralText{doc.text.substr(pos)});
    return {std::move(t), std::move(sol)};
}

corpus::AnnotatedDocument generate_sample(const corpus::EventSchema& schema,
                                          const std::vector<corpus::AnnotatedDocument>& exemplar_pool,
                                          providers::ChatProvider& provider,
                                          const providers::GenerationConfig& cfg,
                                          std::uint64_t rng_seed, const std::string& doc_id,
                                          const MadLibConfig& mcfg,
                                          providers::Embedder* embedder) {
    schema.validate();
    const std::size_t k = cfg.k_exemplars;
    if (exemplar_pool.size() < k) {
        throw corpus::InsufficientDocs("exemplar pool smaller than k_exemplars");
    }
    std::vector<corpus::AnnotatedDocument> ranked;
    if (k > 0) ranked = corpus::select_exemplars(exemplar_pool, exemplar_pool.size());

    std::size_t max_attempts = cfg.max_retries >= 1 ? cfg.max_retries : 1;
    std::string last = "no attempts made";
    for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
        std::vector<Exemplar> exemplars;
        if (k > 0) {
            std::mt19937_64 rng(rng_seed ^ strings::fnv1a64("attempt-" + std::to_string(attempt)));
            std::size_t window = std::min(ranked.size(), std::max<std::size_t>(3 * k, k));
            std::vector<std::size_t> idx(window);
            std::iota(idx.begin(), idx.end(), 0);
            std::shuffle(idx.begin(), idx.end(), rng);
            for (std::size_t i = 0; i < k; ++i) {
                exemplars.push_back(doc_to_exemplar(ranked[idx[i]]));
            }
        }

        providers::ChatRequest gen_req{"", build_generation_prompt(schema, exemplars)};
        providers::ChatResponse gen_resp = chat(provider, gen_req, cfg);

        MadLibTemplate t;
        try {
            t = parse_template(gen_resp.text, schema);
        } catch (const EmptyTemplate&) {
            last = "empty template";
            continue;
        }
        if (t.bracket_errors > 0) {
            last = "bracket errors: " + std::to_string(t.bracket_errors);
            continue;
        }
        {
            ValidationReport pre = validate(t, MadLibSolution{}, schema, mcfg);
            double covered =
                static_cast<double>(schema.roles.size() - pre.missing_roles.size());
            if (covered + 1e-9 < mcfg.coverage_tolerance * static_cast<double>(schema.roles.size())) {
                last = "insufficient role coverage: " + pre.summary();
                continue;
            }
        }

        providers::ChatRequest sol_req{"", build_solution_prompt(t, schema)};
        providers::ChatResponse sol_resp = chat(provider, sol_req, cfg);

        MadLibSolution sol;
        try {
            sol = parse_solution(sol_resp.text);
        } catch (const NoAssignmentsFound&) {
            last = "unparseable solution";
            continue;
        }

        ValidationReport rpt = validate(t, sol, schema, mcfg);
        if (!rpt.ok) {
            last = rpt.summary();
            continue;
        }

        auto [t2, sol2, rpt2] = postprocess(t, sol, schema, mcfg, embedder);
        bool solvable = true;
        for (const auto& cat : t2.slot_categories()) {
            if (!sol2.find(cat)) { solvable = false; break; }
        }
        if (!solvable || t2.segments.empty()) {
            last = "postprocess left unsolvable template: " + rpt2.summary();
            continue;
        }
        return fill(t2, sol2, doc_id);
    }
    throw GenerationExhausted(last);
}

}  // namespace docaug::madlib
