#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scotbench/error.hpp"
#include "scotbench/prompt.hpp"

namespace scotbench::llm {

inline constexpr int kMaxSamplesPerRequest = 128;

struct SamplingParams {
    double temperature = 0.8;
    double top_p = 0.95;
    int max_tokens = 300;
    int n = 1;
    std::optional<std::uint64_t> rng_seed;  // honored by mock backends only

    /// Throws Error{argument} when a field is out of range.
    void validate() const;
    bool operator==(const SamplingParams&) const = default;
};

nlohmann::json to_json(const SamplingParams& params);
SamplingParams sampling_params_from_json(const nlohmann::json& j, SamplingParams base = {});

enum class Purpose { code, intermediate };

struct GenerationRequest {
    std::string backend_id;
    std::string model;  // empty: the backend's configured model
    Prompt prompt;
    SamplingParams params;
    // Routing hints for scripted backends; not part of the cache key.
    std::string task_id;
    Purpose purpose = Purpose::code;
    // Explicit sample indexes to produce; empty means 0..n-1.
    std::vector<int> sample_indices;
};

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
    bool operator==(const Usage&) const = default;
};

struct GenerationResponse {
    std::vector<std::string> texts;
    std::optional<Usage> usage;
    bool from_cache = false;  // every text was served from the cache
};

enum class BackendFailure {
    auth,
    rate_limit,
    timeout,
    transient,
    malformed,
    credentials,
    no_script,
    unknown_backend,
    exhausted,
};

const char* to_string(BackendFailure failure);

class BackendError : public Error {
public:
    BackendError(BackendFailure failure, const std::string& message)
        : Error(ErrorKind::backend, message), failure_(failure) {}

    BackendFailure failure() const noexcept { return failure_; }
    bool retryable() const noexcept {
        return failure_ == BackendFailure::rate_limit || failure_ == BackendFailure::timeout ||
               failure_ == BackendFailure::transient;
    }

private:
    BackendFailure failure_;
};

struct Completion {
    std::string text;
    std::optional<Usage> usage;
};

class Backend {
public:
    virtual ~Backend() = default;
    /// One completion per entry of `sample_indices`, in the same order.
    virtual std::vector<Completion> complete(const GenerationRequest& request,
                                             const std::vector<int>& sample_indices) = 0;
    virtual std::string default_model() const { return {}; }
};

// Configuration of one backend, as read from a run config.
struct BackendSpec {
    std::string kind;  // openai_compatible_chat | openai_compatible_completion |
                       // mock_table | mock_oracle | mock_echo | mock_saboteur
    std::string name;
    std::string model;
    std::string base_url;
    std::string api_key_env;  // name of the variable, never the key
    std::filesystem::path solutions_path;
    std::filesystem::path table_path;
    double timeout_s = 120.0;

    static BackendSpec from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    nlohmann::json to_json() const;
};

std::shared_ptr<Backend> make_backend(const BackendSpec& spec);

// Scripted backends -----------------------------------------------------------

class MockEchoBackend final : public Backend {
public:
    std::vector<Completion> complete(const GenerationRequest& request,
                                     const std::vector<int>& sample_indices) override;
};

/// Entries match on the request's task id or on the SHA-256 of the flat
/// prompt; sample i receives texts[i % texts.size()].
class MockTableBackend final : public Backend {
public:
    struct Entry {
        std::string match;
        std::optional<Purpose> purpose;
        std::vector<std::string> texts;
    };

    explicit MockTableBackend(std::vector<Entry> entries);
    static std::shared_ptr<MockTableBackend> load(const std::filesystem::path& path);

    std::vector<Completion> complete(const GenerationRequest& request,
                                     const std::vector<int>& sample_indices) override;

private:
    std::vector<Entry> entries_;
};

/// Returns reference code (fenced) for any prompt tied to a known task id;
/// intermediate requests get the stored intermediate when one exists.
class MockOracleBackend final : public Backend {
public:
    struct Solution {
        std::string code;
        std::string language = "python";
        std::optional<std::string> intermediate;
    };

    explicit MockOracleBackend(std::map<std::string, Solution> solutions);
    static std::shared_ptr<MockOracleBackend> load(const std::filesystem::path& path);

    std::vector<Completion> complete(const GenerationRequest& request,
                                     const std::vector<int>& sample_indices) override;

private:
    std::map<std::string, Solution> solutions_;
};

/// Syntactically broken code in both supported languages.
class MockSaboteurBackend final : public Backend {
public:
    static constexpr const char* kBrokenProgram = "```\ndef broken(:\n    return ((\n```\n";
    std::vector<Completion> complete(const GenerationRequest& request,
                                     const std::vector<int>& sample_indices) override;
};

// OpenAI-compatible chat-completions or completions endpoint.
class OpenAiCompatibleBackend final : public Backend {
public:
    enum class Mode { chat, completion };

    OpenAiCompatibleBackend(Mode mode, std::string base_url, std::string model, std::string api_key_env,
                            double timeout_s);

    std::vector<Completion> complete(const GenerationRequest& request,
                                     const std::vector<int>& sample_indices) override;
    std::string default_model() const override { return model_; }

private:
    Mode mode_;
    std::string base_url_;
    std::string model_;
    std::string api_key_env_;
    double timeout_s_;
};

// Cache -----------------------------------------------------------------------

/// 64 hex chars; SHA-256 over a canonical JSON serialization.
std::string cache_key(const std::string& backend_id, const std::string& model, const Prompt& prompt,
                      const SamplingParams& params, int sample_index);

struct CacheEntry {
    std::string text;
    std::optional<Usage> usage;
};

// Append-only JSON Lines store of {key, text, usage, timestamp}, indexed in memory.
class ResponseCache {
public:
    ResponseCache() = default;  // memory only
    explicit ResponseCache(std::filesystem::path path);

    std::optional<CacheEntry> lookup(const std::string& key) const;
    void store(const std::string& key, const CacheEntry& entry);
    std::size_t size() const;

private:
    std::optional<std::filesystem::path> path_;
    mutable std::mutex mutex_;
    std::map<std::string, CacheEntry> index_;
};

// Gateway ---------------------------------------------------------------------

struct RetryPolicy {
    int max_attempts = 5;
    double base_delay_s = 1.0;
    double factor = 2.0;
    double max_delay_s = 60.0;
    bool full_jitter = true;
};

struct GatewayOptions {
    std::optional<std::filesystem::path> cache_path;
    RetryPolicy retry;
    int max_in_flight = 4;
    std::uint64_t jitter_seed = 0;
    // Replaceable so tests do not wait through backoff.
    std::function<void(std::chrono::duration<double>)> sleep;
};

struct RecordedCall {
    std::string backend_id;
    std::string model;
    std::string task_id;
    Purpose purpose = Purpose::code;
    SamplingParams params;
    std::vector<int> sample_indices;
    std::string prompt_digest;
};

class Gateway {
public:
    explicit Gateway(GatewayOptions options = {});
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Backend ids are distinct per registration: the spec name (or kind),
    /// suffixed with #2, #3, ... on repeats.
    std::string register_backend(const BackendSpec& spec);
    std::string register_backend(const std::string& name, std::shared_ptr<Backend> backend);

    /// Cache first per sample, then the backend for the misses, with
    /// bounded retry and exponential backoff on retryable failures.
    GenerationResponse generate(const GenerationRequest& request);

    /// Number of samples requested from backends (cache misses only).
    std::size_t backend_samples() const;
    std::vector<RecordedCall> recorded_calls() const;
    void clear_recorded_calls();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace scotbench::llm
