#include "docaug/providers.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "docaug/strings.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace docaug::providers {

ChatResponse chat(ChatProvider& provider, const ChatRequest& req, const GenerationConfig& cfg) {
    std::size_t max_attempts = cfg.max_retries >= 1 ? cfg.max_retries : 1;
    std::mt19937_64 rng(cfg.seed ^ strings::fnv1a64(req.user));
    for (std::size_t attempt = 1;; ++attempt) {
        try {
            return provider.complete(req, cfg);
        } catch (const TransportError&) {
            if (attempt >= max_attempts) throw TransportError(max_attempts);
            if (cfg.backoff_base_ms > 0) {
                double base = static_cast<double>(cfg.backoff_base_ms) *
                              std::pow(2.0, static_cast<double>(attempt - 1));
                std::uniform_real_distribution<double> jitter(0.8, 1.2);
                auto delay = std::chrono::milliseconds(
                    static_cast<std::int64_t>(base * jitter(rng)));
                std::this_thread::sleep_for(delay);
            }
        }
    }
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("cosine: dimensions " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string structured_prompt(const corpus::EventSchema& schema) {
    std::string out;
    out += "Generate one plausible \"" + schema.event_type + "\" event record.\n";
    out += "Reply with a single JSON object whose keys are exactly the following fields, ";
    out += "each mapped to a short string value. Do not add any other keys.\n\n";
    out += "Fields: " + strings::join(schema.roles, ", ") + "\n";
    return out;
}

namespace {

// Pull the outermost JSON object out of a raw completion, tolerating
// code fences and surrounding prose.
std::optional<json> extract_json_object(const std::string& raw) {
    std::size_t start = raw.find('{');
    std::size_t end = raw.rfind('}');
    if (start == std::string::npos || end == std::string::npos || end <= start) {
        return std::nullopt;
    }
    json parsed = json::parse(raw.substr(start, end - start + 1), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
    return parsed;
}

}  // namespace

StructuredGeneration generate_structured(ChatProvider& provider,
                                         const corpus::EventSchema& schema,
                                         const GenerationConfig& cfg) {
    schema.validate();
    ChatRequest req;
    req.system = "You produce structured event records as JSON.";
    req.user = structured_prompt(schema);

    std::size_t max_attempts = cfg.max_retries >= 1 ? cfg.max_retries : 1;
    for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
        ChatResponse resp = chat(provider, req, cfg);
        auto obj = extract_json_object(resp.text);
        if (!obj) {
            if (attempt == max_attempts) {
                throw StructuredParseError("no parseable JSON object after " +
                                           std::to_string(max_attempts) + " attempts");
            }
            continue;
        }
        StructuredGeneration out;
        for (auto it = obj->begin(); it != obj->end(); ++it) {
            auto canonical = schema.canonical_role(it.key());
            if (!canonical) {
                out.warnings.push_back("dropped hallucinated field: " + it.key());
                continue;
            }
            std::string value;
            if (it.value().is_string()) {
                value = it.value().get<std::string>();
            } else if (it.value().is_number() || it.value().is_boolean()) {
                value = it.value().dump();
            } else {
                continue;
            }
            if (value.empty()) continue;
            out.assignments[*canonical] = value;
        }
        return out;
    }
    throw StructuredParseError("unreachable");
}

// ---------------------------------------------------------------------------
// Mocks

void MockChatProvider::push_response(std::string text) {
    script_.push_back({false, std::move(text)});
}

void MockChatProvider::push_failure(std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) script_.push_back({true, {}});
}

ChatResponse MockChatProvider::complete(const ChatRequest& req, const GenerationConfig&) {
    ++calls_;
    requests_.push_back(req);
    if (next_ >= script_.size()) {
        if (cycle_ && !script_.empty()) {
            next_ = 0;
        } else {
            throw Error("mock chat script exhausted after " + std::to_string(calls_) + " calls");
        }
    }
    const Step& step = script_[next_++];
    if (step.fail) throw TransportError(1);
    return ChatResponse{step.text, "mock", 0.0};
}

std::size_t MockEmbedder::bucket(const std::string& token) const {
    return static_cast<std::size_t>(strings::fnv1a64(token) % dim_);
}

std::vector<EmbeddingVector> MockEmbedder::embed(const std::vector<std::string>& texts) {
    ++calls_;
    texts_ += texts.size();
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        EmbeddingVector v(dim_, 0.0);
        for (const auto& tok : strings::alnum_tokens(text)) {
            v[bucket(tok)] += 1.0;
        }
        out.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cache

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

std::string ResponseCache::digest(const std::string& payload) {
    return strings::hex64(strings::fnv1a64(payload));
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
    std::lock_guard<std::mutex> lk(mu_);
    fs::path path = fs::path(dir_) / (key + ".json");
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void ResponseCache::put(const std::string& key, const std::string& value) {
    std::lock_guard<std::mutex> lk(mu_);
    fs::path path = fs::path(dir_) / (key + ".json");
    if (fs::exists(path)) return;
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << value;
    }
    fs::rename(tmp, path);
}

namespace {

std::string chat_cache_payload(const std::string& provider_id, const ChatRequest& req,
                               const GenerationConfig& cfg) {
    json payload;
    payload["provider"] = provider_id;
    payload["op"] = "chat";
    payload["system"] = req.system;
    payload["user"] = req.user;
    payload["temperature"] = cfg.temperature;
    payload["seed"] = cfg.seed;
    return payload.dump();
}

}  // namespace

ChatResponse CachingChatProvider::complete(const ChatRequest& req, const GenerationConfig& cfg) {
    std::string key = ResponseCache::digest(chat_cache_payload(inner_.id(), req, cfg));
    if (auto hit = cache_.get(key)) {
        json obj = json::parse(*hit);
        return ChatResponse{obj.at("text").get<std::string>(),
                            obj.at("model_id").get<std::string>(), 0.0};
    }
    ChatResponse resp = inner_.complete(req, cfg);
    json obj;
    obj["text"] = resp.text;
    obj["model_id"] = resp.model_id;
    cache_.put(key, obj.dump());
    return resp;
}

std::vector<EmbeddingVector> CachingEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::string> misses;
    std::vector<std::size_t> miss_idx;
    std::vector<std::string> keys(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        json payload;
        payload["provider"] = inner_.id();
        payload["op"] = "embed";
        payload["text"] = texts[i];
        keys[i] = ResponseCache::digest(payload.dump());
        if (auto hit = cache_.get(keys[i])) {
            out[i] = json::parse(*hit).get<EmbeddingVector>();
        } else {
            misses.push_back(texts[i]);
            miss_idx.push_back(i);
        }
    }
    if (!misses.empty()) {
        auto fresh = inner_.embed(misses);
        for (std::size_t j = 0; j < misses.size(); ++j) {
            out[miss_idx[j]] = fresh[j];
            cache_.put(keys[miss_idx[j]], json(fresh[j]).dump());
        }
    }
    return out;
}

}  // namespace docaug::providers
