#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "docaug/providers.hpp"

using nlohmann::json;

namespace docaug::providers {

namespace {

std::string require_api_key(const std::string& env_name) {
    const char* key = std::getenv(env_name.c_str());
    if (!key || !*key) {
        throw AuthError("credential environment variable not set: " + env_name);
    }
    return key;
}

class OpenAiChatProvider : public ChatProvider {
public:
    explicit OpenAiChatProvider(HttpProviderConfig cfg) : cfg_(std::move(cfg)) {}

    ChatResponse complete(const ChatRequest& req, const GenerationConfig& gen) override {
        std::string key = require_api_key(cfg_.api_key_env);
        httplib::Client client(cfg_.base_url);
        client.set_read_timeout(120, 0);
        httplib::Headers headers{{"Authorization", "Bearer " + key}};

        json body;
        body["model"] = cfg_.model;
        body["temperature"] = gen.temperature;
        if (gen.max_output_tokens > 0) body["max_tokens"] = gen.max_output_tokens;
        body["messages"] = json::array({
            json{{"role", "system"}, {"content", req.system}},
            json{{"role", "user"}, {"content", req.user}},
        });

        auto t0 = std::chrono::steady_clock::now();
        auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
        auto elapsed = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
        if (!res) throw TransportError(1);
        if (res->status == 401 || res->status == 403) throw AuthError("authentication failed");
        if (res->status >= 500 || res->status == 429) throw TransportError(1);
        if (res->status != 200) throw ProviderRefusal(res->body);

        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) throw ProviderRefusal(res->body);
        std::string text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        if (text.empty()) throw ProviderRefusal(res->body);
        std::string model = parsed.value("model", cfg_.model);
        return ChatResponse{text, model, elapsed};
    }

    std::string id() const override { return "openai-chat:" + cfg_.model; }

private:
    HttpProviderConfig cfg_;
};

class OpenAiEmbedder : public Embedder {
public:
    explicit OpenAiEmbedder(HttpProviderConfig cfg) : cfg_(std::move(cfg)) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        std::string key = require_api_key(cfg_.api_key_env);
        httplib::Client client(cfg_.base_url);
        client.set_read_timeout(120, 0);
        httplib::Headers headers{{"Authorization", "Bearer " + key}};

        json body;
        body["model"] = cfg_.model;
        body["input"] = texts;

        auto res = client.Post("/v1/embeddings", headers, body.dump(), "application/json");
        if (!res) throw TransportError(1);
        if (res->status == 401 || res->status == 403) throw AuthError("authentication failed");
        if (res->status >= 500 || res->status == 429) throw TransportError(1);
        if (res->status != 200) throw ProviderRefusal(res->body);

        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) throw ProviderRefusal(res->body);
        std::vector<EmbeddingVector> out;
        for (const auto& item : parsed.at("data")) {
            out.push_back(item.at("embedding").get<EmbeddingVector>());
        }
        if (out.size() != texts.size()) throw ProviderRefusal(res->body);
        if (dim_ == 0 && !out.empty()) dim_ = out[0].size();
        return out;
    }

    std::size_t dimension() const override { return dim_; }
    std::string id() const override { return "openai-embed:" + cfg_.model; }

private:
    HttpProviderConfig cfg_;
    std::size_t dim_ = 0;
};

}  // namespace

std::unique_ptr<ChatProvider> make_openai_chat_provider(const HttpProviderConfig& cfg) {
    return std::make_unique<OpenAiChatProvider>(cfg);
}

std::unique_ptr<Embedder> make_openai_embedder(const HttpProviderConfig& cfg) {
    return std::make_unique<OpenAiEmbedder>(cfg);
}

}  // namespace docaug::providers
