#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "docaug/corpus.hpp"
#include "docaug/error.hpp"

namespace docaug::providers {

struct GenerationConfig {
    double temperature = 1.0;
    std::size_t max_output_tokens = 0;  // 0 = provider default
    std::size_t max_retries = 5;
    std::size_t k_exemplars = 3;
    std::uint64_t seed = 0;
    // Backoff base for transport retries; tests set this to 0.
    std::size_t backoff_base_ms = 1000;
};

using EmbeddingVector = std::vector<double>;

struct ChatRequest {
    std::string system;
    std::string user;
};

struct ChatResponse {
    std::string text;  // raw provider text, byte-exact
    std::string model_id;
    double latency_ms = 0.0;
};

struct TransportError : Error {
    explicit TransportError(std::size_t attempts_)
        : Error("transport failure after " + std::to_string(attempts_) + " attempt(s)"),
          attempts(attempts_) {}
    std::size_t attempts;
};

struct AuthError : Error {
    using Error::Error;
};

struct ProviderRefusal : Error {
    explicit ProviderRefusal(std::string raw_)
        : Error("provider refused the request"), raw(std::move(raw_)) {}
    std::string raw;
};

struct StructuredParseError : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    // Single attempt; throws TransportError on transport failure.
    virtual ChatResponse complete(const ChatRequest& req, const GenerationConfig& cfg) = 0;
    virtual std::string id() const = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    // One vector per input text, order-preserving.
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::string id() const = 0;
};

// Retrying wrapper: exponential backoff (base doubling, +-20% jitter),
// at most cfg.max_retries provider invocations total.
ChatResponse chat(ChatProvider& provider, const ChatRequest& req, const GenerationConfig& cfg);

// Standard cosine; zero vectors are treated as orthogonal (similarity 0).
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

inline double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    return 1.0 - cosine_similarity(a, b);
}

struct StructuredGeneration {
    std::map<std::string, std::string> assignments;  // schema role -> argument
    std::vector<std::string> warnings;
};

// Constrained JSON-object generation over the schema's roles. Parse
// failures consume retries; hallucinated keys are dropped with a warning.
StructuredGeneration generate_structured(ChatProvider& provider,
                                         const corpus::EventSchema& schema,
                                         const GenerationConfig& cfg);

std::string structured_prompt(const corpus::EventSchema& schema);

// ---------------------------------------------------------------------------
// Mocks

class MockChatProvider : public ChatProvider {
public:
    void push_response(std::string text);
    void push_failure(std::size_t count = 1);
    // When set, an exhausted script restarts from the beginning.
    void set_cycle(bool v) { cycle_ = v; }

    ChatResponse complete(const ChatRequest& req, const GenerationConfig& cfg) override;
    std::string id() const override { return "mock-chat"; }

    std::size_t call_count() const { return calls_; }
    const std::vector<ChatRequest>& requests() const { return requests_; }

private:
    struct Step {
        bool fail;
        std::string text;
    };
    std::vector<Step> script_;
    std::size_t next_ = 0;
    std::size_t calls_ = 0;
    bool cycle_ = false;
    std::vector<ChatRequest> requests_;
};

// Deterministic bag-of-tokens embedder: lowercase, split on runs of
// non-alphanumeric characters, each token hashed to one of `dimension()`
// buckets and counted. Multiset cosines are exact absent bucket
// collisions, which fixture tokens are tested not to produce.
class MockEmbedder : public Embedder {
public:
    explicit MockEmbedder(std::size_t dim = 1024) : dim_(dim) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    std::size_t dimension() const override { return dim_; }
    std::string id() const override { return "mock-embed"; }

    std::size_t call_count() const { return calls_; }
    std::size_t texts_embedded() const { return texts_; }

    std::size_t bucket(const std::string& token) const;

private:
    std::size_t dim_;
    std::size_t calls_ = 0;
    std::size_t texts_ = 0;
};

// ---------------------------------------------------------------------------
// On-disk response cache, content-addressed by request digest.

class ResponseCache {
public:
    explicit ResponseCache(std::string dir);

    std::optional<std::string> get(const std::string& key) const;
    // Write-once: first writer wins, later identical puts are no-ops.
    void put(const std::string& key, const std::string& value);

    static std::string digest(const std::string& payload);

private:
    std::string dir_;
    mutable std::mutex mu_;
};

class CachingChatProvider : public ChatProvider {
public:
    CachingChatProvider(ChatProvider& inner, ResponseCache& cache)
        : inner_(inner), cache_(cache) {}

    ChatResponse complete(const ChatRequest& req, const GenerationConfig& cfg) override;
    std::string id() const override { return inner_.id(); }

private:
    ChatProvider& inner_;
    ResponseCache& cache_;
};

class CachingEmbedder : public Embedder {
public:
    CachingEmbedder(Embedder& inner, ResponseCache& cache)
        : inner_(inner), cache_(cache) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    std::size_t dimension() const override { return inner_.dimension(); }
    std::string id() const override { return inner_.id(); }

private:
    Embedder& inner_;
    ResponseCache& cache_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP backends (chat completions + embeddings).
// Credential is read from the named environment variable.

struct HttpProviderConfig {
    std::string base_url;  // e.g. https://api.openai.com
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
};

std::unique_ptr<ChatProvider> make_openai_chat_provider(const HttpProviderConfig& cfg);
std::unique_ptr<Embedder> make_openai_embedder(const HttpProviderConfig& cfg);

}  // namespace docaug::providers
