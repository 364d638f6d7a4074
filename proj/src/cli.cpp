#include "docaug/cli.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <future>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "docaug/corpus.hpp"
#include "docaug/depth.hpp"
#include "docaug/madlib.hpp"
#include "docaug/metrics.hpp"
#include "docaug/providers.hpp"
#include "docaug/strings.hpp"
#include "docaug/struct2text.hpp"

using nlohmann::json;

namespace docaug::cli {

namespace {

// Chat provider backed by a JSON script file: {"chat": ["...", ...],
// "cycle": bool}. Responses are served in order; "<fail>" entries raise
// a transport error.
class ScriptedChatProvider : public providers::ChatProvider {
public:
    explicit ScriptedChatProvider(const std::string& path) : path_(path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open mock script: " + path);
        json obj = json::parse(in, nullptr, false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("chat")) {
            throw Error("mock script must be a JSON object with a \"chat\" array: " + path);
        }
        for (const auto& item : obj.at("chat")) script_.push_back(item.get<std::string>());
        cycle_ = obj.value("cycle", false);
        if (script_.empty()) throw Error("mock script has no chat responses: " + path);
    }

    providers::ChatResponse complete(const providers::ChatRequest&,
                                     const providers::GenerationConfig&) override {
        std::lock_guard<std::mutex> lk(mu_);
        ++calls_;
        if (next_ >= script_.size()) {
            if (!cycle_) throw Error("mock script exhausted: " + path_);
            next_ = 0;
        }
        const std::string& text = script_[next_++];
        if (text == "<fail>") throw providers::TransportError(1);
        return providers::ChatResponse{text, "mock", 0.0};
    }

    std::string id() const override { return "mock:" + path_; }
    std::size_t call_count() const { return calls_; }

private:
    std::string path_;
    std::vector<std::string> script_;
    std::size_t next_ = 0;
    std::size_t calls_ = 0;
    bool cycle_ = false;
    std::mutex mu_;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Role list file: schema JSON (by .json extension) or one role per line.
std::vector<std::string> load_role_list(const std::string& path) {
    std::vector<std::string> roles;
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
        for (const auto& schema : corpus::load_schemas(path)) {
            for (const auto& r : schema.roles) {
                if (std::find(roles.begin(), roles.end(), r) == roles.end()) roles.push_back(r);
            }
        }
        return roles;
    }
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        std::string role = strings::trim(line);
        if (!role.empty()) roles.push_back(role);
    }
    return roles;
}

std::string sanitize_id(const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            out.push_back(static_cast<char>(std::tolower(c)));
        } else if (!out.empty() && out.back() != '-') {
            out.push_back('-');
        }
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out;
}

// Flags win over config file entries: any config key without a matching
// flag on the command line is appended as "--key value".
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
    std::string config_path;
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
        if (args[i] == "--config") config_path = args[i + 1];
    }
    if (config_path.empty()) return args;
    json cfg = json::parse(read_file(config_path));
    std::vector<std::string> merged = args;
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        std::string flag = "--" + it.key();
        if (std::find(args.begin(), args.end(), flag) != args.end()) continue;
        merged.push_back(flag);
        merged.push_back(it.value().is_string() ? it.value().get<std::string>()
                                                : it.value().dump());
    }
    return merged;
}

struct ProviderBundle {
    std::unique_ptr<providers::ChatProvider> chat;
    std::unique_ptr<providers::Embedder> embedder;
    ScriptedChatProvider* scripted = nullptr;  // for call counting
    std::string model_id;
};

struct CommonFlags {
    std::string provider = "mock";
    std::string mock_script;
    std::string embedder = "none";
    std::string model = "gpt-4";
    std::string embed_model = "text-embedding-3-small";
    std::string base_url = "https://api.openai.com";
    std::string api_key_env = "OPENAI_API_KEY";
};

void parse_reversed(CLI::App& cmd, std::vector<std::string> args) {
    std::reverse(args.begin(), args.end());
    cmd.parse(args);
}

void add_provider_flags(CLI::App& cmd, CommonFlags& flags) {
    static std::string config_sink;  // --config is consumed by merge_config
    cmd.add_option("--config", config_sink, "JSON config file merged with flags (flags win)");
    cmd.add_option("--provider", flags.provider, "Chat provider: mock|openai");
    cmd.add_option("--mock-script", flags.mock_script, "Scripted responses for the mock provider");
    cmd.add_option("--embedder", flags.embedder, "Embedder: none|mock|openai");
    cmd.add_option("--model", flags.model, "Chat model id");
    cmd.add_option("--embed-model", flags.embed_model, "Embedding model id");
    cmd.add_option("--base-url", flags.base_url, "OpenAI-compatible endpoint base URL");
    cmd.add_option("--api-key-env", flags.api_key_env, "Environment variable holding the credential");
}

ProviderBundle make_providers(const CommonFlags& flags, bool need_chat) {
    ProviderBundle bundle;
    if (need_chat) {
        if (flags.provider == "mock") {
            if (flags.mock_script.empty()) {
                throw Error("--provider mock requires --mock-script");
            }
            auto scripted = std::make_unique<ScriptedChatProvider>(flags.mock_script);
            bundle.scripted = scripted.get();
            bundle.chat = std::move(scripted);
            bundle.model_id = "mock";
        } else if (flags.provider == "openai") {
            bundle.chat = providers::make_openai_chat_provider(
                {flags.base_url, flags.model, flags.api_key_env});
            bundle.model_id = flags.model;
        } else {
            throw Error("unknown provider: " + flags.provider);
        }
    }
    if (flags.embedder == "mock") {
        bundle.embedder = std::make_unique<providers::MockEmbedder>();
    } else if (flags.embedder == "openai") {
        bundle.embedder = providers::make_openai_embedder(
            {flags.base_url, flags.embed_model, flags.api_key_env});
    } else if (flags.embedder != "none") {
        throw Error("unknown embedder: " + flags.embedder);
    }
    return bundle;
}

void write_manifest(const std::string& out_path, const json& manifest) {
    std::ofstream out(out_path + ".manifest.jsonl", std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot write manifest beside: " + out_path);
    out << manifest.dump() << "\n";
}

// ---------------------------------------------------------------------------

int cmd_generate(CLI::App& cmd, std::vector<std::string> args) {
    std::string method, schemas_path, out_path, exemplars_path;
    std::size_t per_event = 1, parallel = 1;
    std::uint64_t seed = 0;
    providers::GenerationConfig gen_cfg;
    gen_cfg.backoff_base_ms = 0;
    madlib::MadLibConfig mcfg;
    struct2text::AlignmentConfig align_cfg;
    std::string strategy = "remove";
    std::string cache_dir;
    CommonFlags flags;

    cmd.add_option("--method", method, "mla or s2t")->required();
    cmd.add_option("--schemas", schemas_path, "Schema JSON file")->required();
    cmd.add_option("--out", out_path, "Output corpus JSONL")->required();
    cmd.add_option("--per-event", per_event, "Samples per event type");
    cmd.add_option("--exemplars", exemplars_path, "Exemplar corpus JSONL (MLA few-shot pool)");
    cmd.add_option("--seed", seed, "Base RNG seed");
    cmd.add_option("--temperature", gen_cfg.temperature, "Sampling temperature");
    cmd.add_option("--max-retries", gen_cfg.max_retries, "Attempts per sample");
    cmd.add_option("--k", gen_cfg.k_exemplars, "Few-shot exemplar count");
    cmd.add_option("--parallel", parallel, "Concurrent generation pipelines");
    cmd.add_option("--strategy", strategy, "Hallucination handling: remove|remap");
    cmd.add_option("--threshold", align_cfg.sim_threshold, "Alignment similarity threshold");
    cmd.add_option("--max-n", align_cfg.max_n, "Maximum n-gram length");
    cmd.add_option("--cache", cache_dir, "Response cache directory");
    add_provider_flags(cmd, flags);
    parse_reversed(cmd, args);

    if (method != "mla" && method != "s2t") throw Error("--method must be mla or s2t");
    mcfg.strategy = strategy == "remap" ? madlib::HallucinationStrategy::remap_or_remove
                                        : madlib::HallucinationStrategy::remove_sentence;

    auto schemas = corpus::load_schemas(schemas_path);
    std::vector<corpus::AnnotatedDocument> pool;
    if (!exemplars_path.empty()) pool = corpus::load_corpus(exemplars_path);
    if (exemplars_path.empty()) gen_cfg.k_exemplars = 0;

    ProviderBundle bundle = make_providers(flags, true);
    if (method == "s2t" && !bundle.embedder) {
        throw Error("method s2t requires an embedder; pass --embedder mock or --embedder openai");
    }

    std::optional<providers::ResponseCache> cache;
    std::optional<providers::CachingChatProvider> cached_chat;
    providers::ChatProvider* chat_provider = bundle.chat.get();
    if (!cache_dir.empty()) {
        cache.emplace(cache_dir);
        cached_chat.emplace(*bundle.chat, *cache);
        chat_provider = &*cached_chat;
    }

    struct Job {
        const corpus::EventSchema* schema;
        std::string doc_id;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto& schema : schemas) {
        for (std::size_t i = 1; i <= per_event; ++i) {
            std::string doc_id = sanitize_id(schema.event_type) + "-" + method + "-" +
                                 std::to_string(i);
            jobs.push_back({&schema, doc_id, seed ^ strings::fnv1a64(doc_id)});
        }
    }

    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::optional<corpus::AnnotatedDocument>> results(jobs.size());
    std::vector<std::string> failures;
    std::mutex fail_mu;

    auto run_job = [&](std::size_t idx) {
        const Job& job = jobs[idx];
        providers::GenerationConfig cfg = gen_cfg;
        cfg.seed = job.seed;
        try {
            if (method == "mla") {
                results[idx] = madlib::generate_sample(*job.schema, pool, *chat_provider, cfg,
                                                       job.seed, job.doc_id, mcfg,
                                                       bundle.embedder.get());
            } else {
                results[idx] = struct2text::generate_sample(*job.schema, *chat_provider,
                                                            *bundle.embedder, cfg, align_cfg,
                                                            job.doc_id);
            }
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lk(fail_mu);
            failures.push_back(job.doc_id + ": " + e.what());
        }
    };

    if (parallel <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
    } else {
        for (std::size_t base = 0; base < jobs.size(); base += parallel) {
            std::vector<std::future<void>> batch;
            for (std::size_t i = base; i < std::min(base + parallel, jobs.size()); ++i) {
                batch.push_back(std::async(std::launch::async, run_job, i));
            }
            for (auto& f : batch) f.get();
        }
    }

    std::vector<corpus::AnnotatedDocument> docs;
    for (auto& r : results) {
        if (r) docs.push_back(std::move(*r));
    }
    corpus::save_corpus(docs, out_path);
    for (const auto& f : failures) std::cerr << "generation failed: " << f << "\n";

    double wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    json settings;
    settings["method"] = method;
    settings["schemas"] = schemas_path;
    settings["per_event"] = per_event;
    settings["seed"] = seed;
    settings["k_exemplars"] = gen_cfg.k_exemplars;
    settings["max_retries"] = gen_cfg.max_retries;
    settings["temperature"] = gen_cfg.temperature;
    settings["strategy"] = strategy;

    json manifest;
    manifest["command"] = "generate";
    manifest["config_digest"] = providers::ResponseCache::digest(settings.dump());
    manifest["seed"] = seed;
    manifest["model_ids"] = json::array({bundle.model_id});
    manifest["attempts"] = jobs.size();
    manifest["successes"] = docs.size();
    manifest["provider_calls"] = bundle.scripted ? bundle.scripted->call_count() : 0;
    manifest["wall_time_ms"] = wall_ms;
    write_manifest(out_path, manifest);

    return docs.empty() ? 2 : 0;
}

int cmd_depth(CLI::App& cmd, std::vector<std::string> args) {
    std::string source_path, target_path, out_path;
    double fraction = 0.25;
    std::vector<double> sweep;
    CommonFlags flags;
    flags.embedder = "mock";

    cmd.add_option("--source-roles", source_path, "Source-domain role list")->required();
    cmd.add_option("--target-roles", target_path, "Target-domain role list")->required();
    cmd.add_option("--fraction", fraction, "Outlier fraction in (0,1)");
    cmd.add_option("--sweep", sweep, "Comma-separated list of fractions")->delimiter(',');
    cmd.add_option("--out", out_path, "Output file (.csv or .json); stdout when omitted");
    add_provider_flags(cmd, flags);
    parse_reversed(cmd, args);

    depth::RoleSet sources{load_role_list(source_path), depth::RoleSet::Origin::source};
    depth::RoleSet targets{load_role_list(target_path), depth::RoleSet::Origin::target};
    sources.validate();
    targets.validate();

    ProviderBundle bundle = make_providers(flags, false);
    if (!bundle.embedder) throw Error("depth requires an embedder; pass --embedder mock|openai");

    auto ranked = depth::rank_roles(targets, sources, *bundle.embedder);
    std::vector<double> fractions = sweep.empty() ? std::vector<double>{fraction} : sweep;
    std::vector<std::set<std::string>> outlier_sets;
    for (double f : fractions) outlier_sets.push_back(depth::select_outliers(ranked, {f}));

    bool as_json = out_path.size() > 5 && out_path.substr(out_path.size() - 5) == ".json";
    std::ostringstream os;
    if (as_json) {
        json arr = json::array();
        for (const auto& ds : ranked) {
            json row;
            row["role"] = ds.role;
            row["depth"] = ds.score;
            for (std::size_t i = 0; i < fractions.size(); ++i) {
                std::string key = fractions.size() == 1
                                      ? "outlier"
                                      : "outlier@" + std::to_string(fractions[i]);
                row[key] = outlier_sets[i].count(ds.role) > 0;
            }
            arr.push_back(std::move(row));
        }
        os << arr.dump(2) << "\n";
    } else {
        os << "role,depth";
        if (fractions.size() == 1) {
            os << ",outlier";
        } else {
            for (double f : fractions) os << ",outlier@" << f;
        }
        os << "\n";
        for (const auto& ds : ranked) {
            std::string role = ds.role;
            if (role.find(',') != std::string::npos || role.find('"') != std::string::npos) {
                std::string quoted = "\"";
                for (char c : role) {
                    if (c == '"') quoted += "\"\"";
                    else quoted.push_back(c);
                }
                role = quoted + "\"";
            }
            os << role << "," << ds.score;
            for (const auto& outliers : outlier_sets) {
                os << "," << (outliers.count(ds.role) ? 1 : 0);
            }
            os << "\n";
        }
    }
    if (out_path.empty()) {
        std::cout << os.str();
    } else {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write: " + out_path);
        out << os.str();
    }
    return 0;
}

int cmd_eval(CLI::App& cmd, std::vector<std::string> args) {
    std::string pred_path, gold_path, train_path, outliers_path, universe_path, json_out;
    std::string policy_name = "score-zero";
    cmd.add_option("--pred", pred_path, "Predicted tuples JSONL")->required();
    cmd.add_option("--gold", gold_path, "Gold tuples JSONL")->required();
    cmd.add_option("--train", train_path, "Training corpus JSONL (enables zero-shot F1)");
    cmd.add_option("--outliers", outliers_path, "Outlier role list (enables RDF1)");
    cmd.add_option("--role-universe", universe_path, "Role universe (one role per line)");
    cmd.add_option("--absent-roles", policy_name, "score-zero|exclude");
    cmd.add_option("--json-out", json_out, "Write the report JSON to this file");
    static std::string config_sink;
    cmd.add_option("--config", config_sink, "JSON config file merged with flags (flags win)");
    parse_reversed(cmd, args);

    auto pred = metrics::load_tuples(pred_path);
    auto gold = metrics::load_tuples(gold_path);

    std::set<std::string> universe;
    if (!universe_path.empty()) {
        for (const auto& r : load_role_list(universe_path)) universe.insert(r);
    } else {
        for (const auto& t : gold) universe.insert(t.role);
        for (const auto& t : pred) universe.insert(t.role);
    }

    std::optional<std::set<std::string>> zero_roles;
    if (!train_path.empty()) {
        auto train = corpus::load_corpus(train_path);
        std::set<std::string> annotated;
        for (const auto& doc : train) {
            for (const auto& ann : doc.annotations) {
                annotated.insert(strings::ascii_lower(ann.role));
            }
        }
        zero_roles.emplace();
        for (const auto& role : universe) {
            if (!annotated.count(strings::ascii_lower(role))) zero_roles->insert(role);
        }
    }

    std::optional<std::set<std::string>> outliers;
    if (!outliers_path.empty()) {
        outliers.emplace();
        for (const auto& r : load_role_list(outliers_path)) outliers->insert(r);
    }

    auto policy = policy_name == "exclude" ? metrics::AbsentRolePolicy::exclude
                                           : metrics::AbsentRolePolicy::score_zero;
    auto report = metrics::evaluate(pred, gold, universe, zero_roles, outliers, policy);

    std::cout << metrics::report_to_table(report);
    if (!json_out.empty()) {
        std::ofstream out(json_out, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write: " + json_out);
        out << metrics::report_to_json(report) << "\n";
    } else {
        std::cout << metrics::report_to_json(report) << "\n";
    }
    return 0;
}

int cmd_align(CLI::App& cmd, std::vector<std::string> args) {
    std::string record_path, doc_path, out_path;
    struct2text::AlignmentConfig align_cfg;
    CommonFlags flags;
    flags.embedder = "mock";
    cmd.add_option("--record", record_path, "Event record JSON")->required();
    cmd.add_option("--doc", doc_path, "Document text file")->required();
    cmd.add_option("--threshold", align_cfg.sim_threshold, "Similarity threshold");
    cmd.add_option("--max-n", align_cfg.max_n, "Maximum n-gram length");
    cmd.add_option("--out", out_path, "Output JSONL; stdout when omitted");
    add_provider_flags(cmd, flags);
    parse_reversed(cmd, args);

    json rec_json = json::parse(read_file(record_path), nullptr, false);
    if (rec_json.is_discarded() || !rec_json.is_object() || !rec_json.contains("arguments")) {
        throw Error("malformed record file (need {\"event_type\", \"arguments\": {...}}): " +
                    record_path);
    }
    struct2text::EventRecord record;
    record.event_type = rec_json.value("event_type", "");
    for (auto it = rec_json.at("arguments").begin(); it != rec_json.at("arguments").end(); ++it) {
        record.arguments[it.key()] = it.value().get<std::string>();
    }
    if (record.arguments.empty()) throw Error("record has no arguments: " + record_path);

    ProviderBundle bundle = make_providers(flags, false);
    if (!bundle.embedder) throw Error("align requires an embedder; pass --embedder mock|openai");

    auto results = struct2text::align(record, read_file(doc_path), *bundle.embedder, align_cfg);
    std::string jsonl = struct2text::alignment_audit_jsonl(results);
    if (out_path.empty()) {
        std::cout << jsonl;
    } else {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write: " + out_path);
        out << jsonl;
    }
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& raw_args) {
    std::vector<std::string> args;
    try {
        args = merge_config(raw_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    if (args.empty()) {
        std::cerr << "usage: docaug <generate|depth|eval|align> [flags]\n";
        return 1;
    }
    std::string sub = args[0];
    std::vector<std::string> rest(args.begin() + 1, args.end());

    try {
        if (sub == "generate") {
            CLI::App cmd{"generate synthetic corpus samples"};
            return cmd_generate(cmd, rest);
        } else if (sub == "depth") {
            CLI::App cmd{"rank target roles by embedding depth"};
            return cmd_depth(cmd, rest);
        } else if (sub == "eval") {
            CLI::App cmd{"score predictions against gold tuples"};
            return cmd_eval(cmd, rest);
        } else if (sub == "align") {
            CLI::App cmd{"align an event record to a document"};
            return cmd_align(cmd, rest);
        } else if (sub == "--help" || sub == "-h" || sub == "help") {
            std::cout << "usage: docaug <generate|depth|eval|align> [flags]\n";
            return 0;
        }
        std::cerr << "unknown command: " << sub << "\n";
        std::cerr << "usage: docaug <generate|depth|eval|align> [flags]\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;  // --help
        std::cerr << "error: " << e.what() << "\n";
        std::cerr << "usage: docaug " << sub << " [flags]\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace docaug::cli
