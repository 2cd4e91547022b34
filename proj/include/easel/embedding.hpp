#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace easel {

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    // Throws ProviderError for empty text or a failed backend call.
    virtual std::vector<double> embed(std::string_view text) = 0;
};

// Deterministic offline embedder. Each lowercase word contributes a
// pseudo-random vector derived from its SHA-256, and the whole normalized text
// contributes one more at half weight, so shared words raise similarity while
// distinct strings still map to distinct vectors.
class HashEmbedder : public EmbeddingProvider {
public:
    explicit HashEmbedder(std::size_t dimension = 16);

    std::size_t dimension() const noexcept { return dimension_; }
    std::vector<double> embed(std::string_view text) override;

private:
    std::size_t dimension_;
};

// OpenAI-compatible /embeddings endpoint. Key from EASEL_PROVIDER_KEY when not given.
class HttpEmbedder : public EmbeddingProvider {
public:
    HttpEmbedder(std::string endpoint_url, std::string model, std::optional<std::string> api_key = std::nullopt,
                 int timeout_seconds = 60);

    std::vector<double> embed(std::string_view text) override;

private:
    std::string base_;
    std::string path_;
    std::string model_;
    std::string api_key_;
    int timeout_seconds_;
};

} // namespace easel
