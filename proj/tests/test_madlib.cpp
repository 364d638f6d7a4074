#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "docaug/madlib.hpp"
#include "test_util.hpp"

using namespace docaug;
using madlib::LiteralText;
using madlib::MadLibSolution;
using madlib::MadLibTemplate;
using madlib::Slot;

namespace {

const corpus::EventSchema kQuake{"Earthquake", {"Date", "Location"}};

providers::GenerationConfig fast_cfg() {
    providers::GenerationConfig cfg;
    cfg.backoff_base_ms = 0;
    return cfg;
}

MadLibSolution solution(std::vector<std::pair<std::string, std::string>> kv) {
    MadLibSolution sol;
    sol.assignments = std::move(kv);
    return sol;
}

}  // namespace

TEST_CASE("parse_template basic grammar") {
    auto t = madlib::parse_template("On [Date], a quake hit [Location].", kQuake);
    REQUIRE(t.segments.size() == 5);
    CHECK(std::get<LiteralText>(t.segments[0]).text == "On ");
    CHECK(std::get<Slot>(t.segments[1]).category == "Date");
    CHECK(std::get<LiteralText>(t.segments[2]).text == ", a quake hit ");
    CHECK(std::get<Slot>(t.segments[3]).category == "Location");
    CHECK(std::get<LiteralText>(t.segments[4]).text == ".");
    CHECK(t.bracket_errors == 0);
    CHECK(t.source_event == "Earthquake");
}

TEST_CASE("parse_template: no brackets means a single literal") {
    auto t = madlib::parse_template("just prose here", kQuake);
    REQUIRE(t.segments.size() == 1);
    CHECK(std::holds_alternative<LiteralText>(t.segments[0]));
    CHECK(t.slot_categories().empty());
}

TEST_CASE("parse_template: unclosed bracket counted, surfaced by validate") {
    auto t = madlib::parse_template("bad [unclosed", kQuake);
    CHECK(t.slot_categories().empty());
    CHECK(t.bracket_errors == 1);
    auto rpt = madlib::validate(t, MadLibSolution{}, kQuake);
    CHECK(rpt.bracket_errors == 1);
    CHECK_FALSE(rpt.ok);
}

TEST_CASE("parse_template: nested and empty brackets count as errors") {
    auto nested = madlib::parse_template("[a [b] c]", kQuake);
    CHECK(nested.bracket_errors == 1);
    CHECK(nested.slot_categories() == std::vector<std::string>{"b"});
    CHECK(madlib::render(nested) == "[a [b] c]");

    auto empty = madlib::parse_template("x [] y", kQuake);
    CHECK(empty.bracket_errors == 1);
    CHECK(empty.slot_categories().empty());
}

TEST_CASE("parse_template: empty input throws") {
    CHECK_THROWS_AS(madlib::parse_template("   \n ", kQuake), madlib::EmptyTemplate);
}

TEST_CASE("render inverts parse on random bracketed strings") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> n_parts(1, 12);
    std::uniform_int_distribution<int> kind(0, 5);
    for (int trial = 0; trial < 10000; ++trial) {
        std::string raw;
        for (int i = 0, n = n_parts(rng); i < n; ++i) {
            switch (kind(rng)) {
                case 0: raw += test_util::random_word(rng); break;
                case 1: raw += "[" + test_util::random_word(rng) + "]"; break;
                case 2: raw += "[ " + test_util::random_word(rng) + " ]"; break;  // padded inner
                case 3: raw += "["; break;   // stray open
                case 4: raw += "]"; break;   // stray close
                default: raw += " . "; break;
            }
        }
        if (raw.find_first_not_of(" \n\t") == std::string::npos) continue;
        auto t = madlib::parse_template(raw, kQuake);
        CHECK(madlib::render(t) == raw);
    }
}

TEST_CASE("generation prompt golden file") {
    corpus::EventSchema schema{"Earthquake", {"Date", "Magnitude"}};
    CHECK(madlib::build_generation_prompt(schema, {}) ==
          test_util::read_fixture("prompt_generation_g1.txt"));
}

TEST_CASE("generation prompt lists categories comma-separated in schema order") {
    corpus::EventSchema schema{"Flood", {"B role", "A role", "C role"}};
    auto prompt = madlib::build_generation_prompt(schema, {});
    CHECK(prompt.find("Categories: B role, A role, C role") != std::string::npos);
    CHECK(prompt.find("Write a madlib for a") != std::string::npos);
}

TEST_CASE("generation prompt prepends exemplars in a fixed format") {
    auto t = madlib::parse_template("On [Date] it happened.", kQuake);
    auto prompt = madlib::build_generation_prompt(
        kQuake, {{t, solution({{"Date", "Monday"}})}});
    CHECK(prompt.find("Example 1:\nMadlib: On [Date] it happened.\nSolution:\n### Date: Monday\n") !=
          std::string::npos);
}

TEST_CASE("solution prompt golden file") {
    corpus::EventSchema schema{"Earthquake", {"Date", "Location"}};
    auto t = madlib::parse_template("On [Date], a powerful earthquake struck [Location].", schema);
    auto prompt = madlib::build_solution_prompt(t, schema);
    CHECK(prompt == test_util::read_fixture("prompt_solution_g2.txt"));
    CHECK(prompt.find("### CATEGORY: ANSWER") != std::string::npos);
    CHECK(prompt.find("Solve the MadLib") != std::string::npos);
}

TEST_CASE("parse_solution") {
    SUBCASE("hash-bulleted lines") {
        auto sol = madlib::parse_solution("### Date: May 14, 2021\n### Location: Peru");
        REQUIRE(sol.assignments.size() == 2);
        CHECK(*sol.find("Date") == "May 14, 2021");
        CHECK(*sol.find("Location") == "Peru");
    }
    SUBCASE("dash bullets accepted") {
        auto sol = madlib::parse_solution("- Date: X");
        CHECK(*sol.find("Date") == "X");
    }
    SUBCASE("unstructured text throws") {
        CHECK_THROWS_AS(madlib::parse_solution("no structure here"),
                        madlib::NoAssignmentsFound);
    }
    SUBCASE("duplicate categories keep the first and record a warning") {
        auto sol = madlib::parse_solution("### Date: first\n### Date: second");
        CHECK(*sol.find("Date") == "first");
        CHECK(sol.warnings.size() == 1);
    }
    SUBCASE("category matching is case-insensitive on lookup") {
        auto sol = madlib::parse_solution("### DATE: x");
        CHECK(sol.find("Date") != nullptr);
    }
}

TEST_CASE("fill") {
    SUBCASE("single slot with exact span") {
        auto t = madlib::parse_template("On [Date].", kQuake);
        auto doc = madlib::fill(t, solution({{"Date", "Monday"}}), "d1");
        CHECK(doc.text == "On Monday.");
        REQUIRE(doc.annotations.size() == 1);
        CHECK(doc.annotations[0].role == "Date");
        CHECK(doc.annotations[0].argument == "Monday");
        CHECK(doc.annotations[0].span == std::pair<std::size_t, std::size_t>{3, 9});
        CHECK(doc.provenance == corpus::Provenance::mla);
    }
    SUBCASE("zero-slot template gives empty annotations") {
        auto t = madlib::parse_template("plain text.", kQuake);
        auto doc = madlib::fill(t, MadLibSolution{}, "d1");
        CHECK(doc.annotations.empty());
        CHECK(doc.text == "plain text.");
    }
    SUBCASE("repeated category yields two annotations at distinct spans") {
        corpus::EventSchema schema{"E", {"A"}};
        auto t = madlib::parse_template("[A] and [A]", schema);
        auto doc = madlib::fill(t, solution({{"A", "x"}}), "d1");
        CHECK(doc.text == "x and x");
        REQUIRE(doc.annotations.size() == 2);
        CHECK(doc.annotations[0].span == std::pair<std::size_t, std::size_t>{0, 1});
        CHECK(doc.annotations[1].span == std::pair<std::size_t, std::size_t>{6, 7});
    }
    SUBCASE("missing assignment throws UnresolvedSlot") {
        auto t = madlib::parse_template("On [Date].", kQuake);
        CHECK_THROWS_AS(madlib::fill(t, MadLibSolution{}, "d1"), madlib::UnresolvedSlot);
    }
    SUBCASE("every span slices to its argument on random templates") {
        std::mt19937_64 rng(9);
        corpus::EventSchema schema{"E", {"A", "B", "C"}};
        for (int trial = 0; trial < 500; ++trial) {
            std::string raw;
            for (int i = 0; i < 8; ++i) {
                raw += test_util::random_word(rng) + " ";
                if (rng() % 2) raw += std::string("[") + static_cast<char>('A' + rng() % 3) + "] ";
            }
            auto t = madlib::parse_template(raw, schema);
            auto doc = madlib::fill(
                t, solution({{"A", "xx"}, {"B", "y"}, {"C", "zzz"}}), "d");
            for (const auto& ann : doc.annotations) {
                auto [s, e] = *ann.span;
                CHECK(doc.text.substr(s, e - s) == ann.argument);
            }
        }
    }
}

TEST_CASE("validate") {
    corpus::EventSchema schema{"E", {"A", "B", "C", "D", "F"}};
    SUBCASE("clean template with full coverage is ok") {
        auto t = madlib::parse_template("[A] [B] [C] [D] [F]", schema);
        auto rpt = madlib::validate(
            t, solution({{"A", "1"}, {"B", "2"}, {"C", "3"}, {"D", "4"}, {"F", "5"}}), schema);
        CHECK(rpt.ok);
        CHECK(rpt.missing_roles.empty());
    }
    SUBCASE("80% coverage passes, less fails") {
        auto four = madlib::parse_template("[A] [B] [C] [D]", schema);
        auto sol4 = solution({{"A", "1"}, {"B", "2"}, {"C", "3"}, {"D", "4"}});
        CHECK(madlib::validate(four, sol4, schema).ok);

        auto three = madlib::parse_template("[A] [B] [C]", schema);
        auto sol3 = solution({{"A", "1"}, {"B", "2"}, {"C", "3"}});
        CHECK_FALSE(madlib::validate(three, sol3, schema).ok);
    }
    SUBCASE("slot without an assignment fails") {
        auto t = madlib::parse_template("[A] [B] [C] [D] [F]", schema);
        auto rpt = madlib::validate(t, solution({{"A", "1"}}), schema);
        CHECK_FALSE(rpt.ok);
        CHECK(rpt.unsolved_slots.count("B") == 1);
    }
    SUBCASE("hallucinated categories are reported") {
        corpus::EventSchema small{"E", {"A"}};
        auto t = madlib::parse_template("[A] [Wizard]", small);
        auto rpt = madlib::validate(t, solution({{"A", "1"}, {"Wizard", "w"}}), small);
        CHECK(rpt.hallucinated_categories == std::set<std::string>{"Wizard"});
    }
}

TEST_CASE("postprocess strategy (ii): hallucinated slot's sentence removed") {
    corpus::EventSchema schema{"E", {"Date", "Location"}};
    auto t = madlib::parse_template(
        "On [Date] it began. The [Wizard] cast a spell. It hit [Location].", schema);
    auto sol = solution({{"Date", "Monday"}, {"Wizard", "Gandalf"}, {"Location", "Peru"}});
    auto [t2, sol2, rpt] = madlib::postprocess(t, sol, schema);
    CHECK(rpt.hallucinated_categories == std::set<std::string>{"Wizard"});
    std::string rendered = madlib::render(t2);
    CHECK(rendered == "On [Date] it began. It hit [Location].");
    CHECK(sol2.find("Wizard") == nullptr);
    // no out-of-schema category survives
    for (const auto& cat : t2.slot_categories()) CHECK(schema.has_role(cat));
    CHECK(rpt.ok);
}

TEST_CASE("postprocess strategy (i): category sharing a token remaps") {
    // "Location name" vs role "Location": cosine = 1/sqrt(2) >= 0.5 -> remap
    corpus::EventSchema schema{"E", {"Location", "Date"}};
    auto t = madlib::parse_template("It hit [Location name] on [Date].", schema);
    auto sol = solution({{"Location name", "Peru"}, {"Date", "Monday"}});
    providers::MockEmbedder emb;
    madlib::MadLibConfig cfg;
    cfg.strategy = madlib::HallucinationStrategy::remap_or_remove;
    auto [t2, sol2, rpt] = madlib::postprocess(t, sol, schema, cfg, &emb);
    CHECK(madlib::render(t2) == "It hit [Location] on [Date].");
    CHECK(*sol2.find("Location") == "Peru");
    CHECK(rpt.ok);
}

TEST_CASE("postprocess strategy (i): dissimilar category falls back to removal") {
    corpus::EventSchema schema{"E", {"Location", "Date"}};
    auto t = madlib::parse_template("On [Date] it began. A [Wizard] appeared.", schema);
    auto sol = solution({{"Date", "Monday"}, {"Wizard", "Gandalf"}});
    providers::MockEmbedder emb;
    madlib::MadLibConfig cfg;
    cfg.strategy = madlib::HallucinationStrategy::remap_or_remove;
    auto [t2, sol2, rpt] = madlib::postprocess(t, sol, schema, cfg, &emb);
    CHECK(madlib::render(t2) == "On [Date] it began. ");
    CHECK(rpt.hallucinated_categories == std::set<std::string>{"Wizard"});
}

TEST_CASE("postprocess: clean template is unchanged and ok") {
    auto t = madlib::parse_template("On [Date], [Location] shook.", kQuake);
    auto sol = solution({{"Date", "Monday"}, {"Location", "Peru"}});
    auto [t2, sol2, rpt] = madlib::postprocess(t, sol, kQuake);
    CHECK(madlib::render(t2) == madlib::render(t));
    CHECK(rpt.ok);
    CHECK(rpt.hallucinated_categories.empty());
    CHECK(rpt.actions.empty());
}

TEST_CASE("postprocess canonicalizes category casing to schema spelling") {
    auto t = madlib::parse_template("On [date], [LOCATION] shook.", kQuake);
    auto sol = solution({{"date", "Monday"}, {"LOCATION", "Peru"}});
    auto [t2, sol2, rpt] = madlib::postprocess(t, sol, kQuake);
    CHECK(t2.slot_categories() == std::vector<std::string>{"Date", "Location"});
    auto doc = madlib::fill(t2, sol2, "d");
    CHECK(doc.annotations[0].role == "Date");
    CHECK(doc.annotations[1].role == "Location");
}

namespace {

std::vector<corpus::AnnotatedDocument> exemplar_pool() {
    std::vector<corpus::AnnotatedDocument> pool;
    for (int i = 0; i < 5; ++i) {
        corpus::AnnotatedDocument doc;
        doc.doc_id = "pool-" + std::to_string(i);
        doc.event_type = "Earthquake";
        doc.text = "On Monday a quake hit Peru. People fled. Roads closed. Help came. It ended.";
        doc.annotations = {
            {"Date", "Monday", std::pair<std::size_t, std::size_t>{3, 9}},
            {"Location", "Peru", std::pair<std::size_t, std::size_t>{22, 26}},
        };
        pool.push_back(std::move(doc));
    }
    return pool;
}

constexpr const char* kGoodTemplate = "On [Date], a quake hit [Location].";
constexpr const char* kGoodSolution = "### Date: May 14, 2021\n### Location: Peru";

}  // namespace

TEST_CASE("generate_sample: success on first attempt uses two provider calls") {
    providers::MockChatProvider mock;
    mock.push_response(kGoodTemplate);
    mock.push_response(kGoodSolution);
    auto cfg = fast_cfg();
    auto doc = madlib::generate_sample(kQuake, exemplar_pool(), mock, cfg, 1234, "out-1");
    CHECK(mock.call_count() == 2);
    CHECK(doc.doc_id == "out-1");
    CHECK(doc.event_type == "Earthquake");
    CHECK(doc.text == "On May 14, 2021, a quake hit Peru.");
    REQUIRE(doc.annotations.size() == 2);
    for (const auto& ann : doc.annotations) {
        CHECK(kQuake.has_role(ann.role));
        auto [s, e] = *ann.span;
        CHECK(doc.text.substr(s, e - s) == ann.argument);
    }
}

TEST_CASE("generate_sample: garbage templates exhaust in max_retries template calls") {
    providers::MockChatProvider mock;
    for (int i = 0; i < 5; ++i) mock.push_response("no slots whatsoever");
    auto cfg = fast_cfg();
    CHECK_THROWS_AS(
        madlib::generate_sample(kQuake, exemplar_pool(), mock, cfg, 1, "out-1"),
        GenerationExhausted);
    CHECK(mock.call_count() == 5);
}

TEST_CASE("generate_sample: unparseable solutions drive 2 * max_retries calls") {
    providers::MockChatProvider mock;
    for (int i = 0; i < 5; ++i) {
        mock.push_response(kGoodTemplate);
        mock.push_response("nothing to see");
    }
    auto cfg = fast_cfg();
    CHECK_THROWS_AS(
        madlib::generate_sample(kQuake, exemplar_pool(), mock, cfg, 1, "out-1"),
        GenerationExhausted);
    CHECK(mock.call_count() == 10);
}

TEST_CASE("generate_sample: retry after one bad attempt succeeds") {
    providers::MockChatProvider mock;
    mock.push_response("still no slots");   // attempt 1 fails at template stage
    mock.push_response(kGoodTemplate);      // attempt 2
    mock.push_response(kGoodSolution);
    auto cfg = fast_cfg();
    auto doc = madlib::generate_sample(kQuake, exemplar_pool(), mock, cfg, 1, "out-1");
    CHECK(mock.call_count() == 3);
    CHECK(doc.annotations.size() == 2);
}

TEST_CASE("generate_sample: deterministic given seed") {
    auto run_once = [](std::uint64_t seed) {
        providers::MockChatProvider mock;
        mock.push_response(kGoodTemplate);
        mock.push_response(kGoodSolution);
        auto cfg = fast_cfg();
        auto doc = madlib::generate_sample(kQuake, exemplar_pool(), mock, cfg, seed, "out-1");
        return corpus::to_jsonl({doc});
    };
    CHECK(run_once(77) == run_once(77));
}

TEST_CASE("generate_sample: pool smaller than k throws") {
    providers::MockChatProvider mock;
    auto cfg = fast_cfg();
    cfg.k_exemplars = 3;
    CHECK_THROWS_AS(madlib::generate_sample(kQuake, {}, mock, cfg, 1, "x"),
                    corpus::InsufficientDocs);
}
