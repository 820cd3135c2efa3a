#include "scotbench/llm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <numeric>
#include <random>
#include <semaphore>
#include <thread>

#include "httplib.h"
#include "scotbench/util.hpp"

namespace scotbench::llm {

using util::json;

void SamplingParams::validate() const {
    if (!(temperature >= 0.0)) throw Error(ErrorKind::argument, "temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(ErrorKind::argument, "top_p must be in (0, 1]");
    if (max_tokens < 1) throw Error(ErrorKind::argument, "max_tokens must be positive");
    if (n < 1 || n > kMaxSamplesPerRequest) {
        throw Error(ErrorKind::argument,
                    "n must be in [1, " + std::to_string(kMaxSamplesPerRequest) + "], got " + std::to_string(n));
    }
}

json to_json(const SamplingParams& p) {
    json j = {{"temperature", p.temperature}, {"top_p", p.top_p}, {"max_tokens", p.max_tokens}, {"n", p.n}};
    j["rng_seed"] = p.rng_seed ? json(*p.rng_seed) : json(nullptr);
    return j;
}

SamplingParams sampling_params_from_json(const json& j, SamplingParams base) {
    if (j.contains("temperature")) base.temperature = j["temperature"].get<double>();
    if (j.contains("top_p")) base.top_p = j["top_p"].get<double>();
    if (j.contains("max_tokens")) base.max_tokens = j["max_tokens"].get<int>();
    if (j.contains("n")) base.n = j["n"].get<int>();
    if (j.contains("rng_seed")) {
        base.rng_seed = j["rng_seed"].is_null() ? std::nullopt
                                                : std::optional<std::uint64_t>(j["rng_seed"].get<std::uint64_t>());
    }
    return base;
}

const char* to_string(BackendFailure failure) {
    switch (failure) {
        case BackendFailure::auth: return "auth";
        case BackendFailure::rate_limit: return "rate-limit";
        case BackendFailure::timeout: return "timeout";
        case BackendFailure::transient: return "transient";
        case BackendFailure::malformed: return "malformed-reply";
        case BackendFailure::credentials: return "missing-credentials";
        case BackendFailure::no_script: return "no-scripted-response";
        case BackendFailure::unknown_backend: return "unknown-backend";
        case BackendFailure::exhausted: return "retries-exhausted";
    }
    return "unknown";
}

namespace {

std::string prompt_digest(const Prompt& prompt) { return util::sha256_hex(flat_text(prompt)); }

std::string last_user_content(const Prompt& prompt) {
    for (auto it = prompt.messages.rbegin(); it != prompt.messages.rend(); ++it) {
        if (it->role == Role::user) return it->content;
    }
    return {};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Specs

BackendSpec BackendSpec::from_json(const json& j, const std::filesystem::path& base_dir) {
    BackendSpec spec;
    spec.kind = j.at("kind").get<std::string>();
    spec.name = j.value("name", "");
    spec.model = j.value("model", "");
    spec.base_url = j.value("base_url", "");
    spec.api_key_env = j.value("api_key_env", "");
    spec.solutions_path = resolve(base_dir, j.value("solutions_path", ""));
    spec.table_path = resolve(base_dir, j.value("table_path", ""));
    spec.timeout_s = j.value("timeout_s", 120.0);
    return spec;
}

json BackendSpec::to_json() const {
    return {{"kind", kind},
            {"name", name},
            {"model", model},
            {"base_url", base_url},
            {"api_key_env", api_key_env},
            {"solutions_path", solutions_path.string()},
            {"table_path", table_path.string()},
            {"timeout_s", timeout_s}};
}

std::shared_ptr<Backend> make_backend(const BackendSpec& spec) {
    if (spec.kind == "mock_echo") return std::make_shared<MockEchoBackend>();
    if (spec.kind == "mock_saboteur") return std::make_shared<MockSaboteurBackend>();
    if (spec.kind == "mock_table") return MockTableBackend::load(spec.table_path);
    if (spec.kind == "mock_oracle") return MockOracleBackend::load(spec.solutions_path);
    if (spec.kind == "openai_compatible_chat" || spec.kind == "openai_compatible_completion") {
        if (spec.base_url.empty()) throw Error(ErrorKind::config, spec.kind + " needs base_url");
        if (spec.api_key_env.empty()) throw Error(ErrorKind::config, spec.kind + " needs api_key_env");
        return std::make_shared<OpenAiCompatibleBackend>(
            spec.kind == "openai_compatible_chat" ? OpenAiCompatibleBackend::Mode::chat
                                                  : OpenAiCompatibleBackend::Mode::completion,
            spec.base_url, spec.model, spec.api_key_env, spec.timeout_s);
    }
    throw Error(ErrorKind::config, "unknown backend kind '" + spec.kind + "'");
}

// ---------------------------------------------------------------------------
// Mocks

std::vector<Completion> MockEchoBackend::complete(const GenerationRequest& request,
                                                  const std::vector<int>& sample_indices) {
    const auto text = flat_text(request.prompt);
    std::vector<Completion> out;
    for (int i : sample_indices) {
        std::string seed = request.params.rng_seed ? std::to_string(*request.params.rng_seed) : "none";
        out.push_back({"[echo sample=" + std::to_string(i) + " seed=" + seed + "]\n" + text, std::nullopt});
    }
    return out;
}

MockTableBackend::MockTableBackend(std::vector<Entry> entries) : entries_(std::move(entries)) {}

std::shared_ptr<MockTableBackend> MockTableBackend::load(const std::filesystem::path& path) {
    std::vector<Entry> entries;
    util::for_each_jsonl(path, [&](std::size_t line, const json& rec) {
        try {
            Entry e;
            e.match = rec.at("match").get<std::string>();
            e.texts = rec.at("texts").get<std::vector<std::string>>();
            if (rec.contains("purpose")) {
                e.purpose = rec["purpose"].get<std::string>() == "intermediate" ? Purpose::intermediate
                                                                                : Purpose::code;
            }
            if (e.texts.empty()) throw Error(ErrorKind::config, "entry has no texts");
            entries.push_back(std::move(e));
        } catch (const std::exception& e) {
            throw Error(ErrorKind::config, path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    return std::make_shared<MockTableBackend>(std::move(entries));
}

std::vector<Completion> MockTableBackend::complete(const GenerationRequest& request,
                                                   const std::vector<int>& sample_indices) {
    const auto digest = prompt_digest(request.prompt);
    const Entry* found = nullptr;
    for (const auto& e : entries_) {
        if (e.match != request.task_id && e.match != digest) continue;
        if (e.purpose && *e.purpose != request.purpose) continue;
        found = &e;
        break;
    }
    if (!found) {
        throw BackendError(BackendFailure::no_script,
                           "mock_table has no entry for task '" + request.task_id + "' / prompt " + digest);
    }
    std::vector<Completion> out;
    for (int i : sample_indices) {
        out.push_back({found->texts[static_cast<std::size_t>(i) % found->texts.size()], std::nullopt});
    }
    return out;
}

MockOracleBackend::MockOracleBackend(std::map<std::string, Solution> solutions)
    : solutions_(std::move(solutions)) {}

std::shared_ptr<MockOracleBackend> MockOracleBackend::load(const std::filesystem::path& path) {
    std::map<std::string, Solution> solutions;
    util::for_each_jsonl(path, [&](std::size_t line, const json& rec) {
        try {
            // Accepts {task_id, code} records or native benchmark records.
            Solution s;
            std::string id;
            if (rec.contains("task_id")) {
                id = rec["task_id"].get<std::string>();
                s.code = rec.at("code").get<std::string>();
            } else {
                id = rec.at("id").get<std::string>();
                if (!rec.contains("reference_solution")) return;
                s.code = rec["reference_solution"].get<std::string>();
            }
            s.language = rec.value("language", "python");
            if (rec.contains("intermediate") && rec["intermediate"].is_string()) {
                s.intermediate = rec["intermediate"].get<std::string>();
            }
            solutions[id] = std::move(s);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::config, path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    return std::make_shared<MockOracleBackend>(std::move(solutions));
}

std::vector<Completion> MockOracleBackend::complete(const GenerationRequest& request,
                                                    const std::vector<int>& sample_indices) {
    auto it = solutions_.find(request.task_id);
    if (it == solutions_.end()) {
        // Fall back to a task id mentioned in the new-requirement section.
        const auto content = last_user_content(request.prompt);
        const auto section = content.rfind(prompt_layout::kRequirementDelimiter);
        const auto tail = section == std::string::npos ? std::string_view(content)
                                                       : std::string_view(content).substr(section);
        for (auto cand = solutions_.begin(); cand != solutions_.end(); ++cand) {
            if (tail.find(cand->first) != std::string_view::npos) {
                it = cand;
                break;
            }
        }
    }
    if (it == solutions_.end()) {
        throw BackendError(BackendFailure::no_script, "mock_oracle knows no task '" + request.task_id + "'");
    }
    const auto& s = it->second;
    const std::string text = request.purpose == Purpose::intermediate && s.intermediate
                                 ? *s.intermediate
                                 : "```" + s.language + "\n" + s.code + "\n```\n";
    return std::vector<Completion>(sample_indices.size(), Completion{text, std::nullopt});
}

std::vector<Completion> MockSaboteurBackend::complete(const GenerationRequest&,
                                                      const std::vector<int>& sample_indices) {
    return std::vector<Completion>(sample_indices.size(), Completion{kBrokenProgram, std::nullopt});
}

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP

OpenAiCompatibleBackend::OpenAiCompatibleBackend(Mode mode, std::string base_url, std::string model,
                                                 std::string api_key_env, double timeout_s)
    : mode_(mode),
      base_url_(std::move(base_url)),
      model_(std::move(model)),
      api_key_env_(std::move(api_key_env)),
      timeout_s_(timeout_s) {}

std::vector<Completion> OpenAiCompatibleBackend::complete(const GenerationRequest& request,
                                                          const std::vector<int>& sample_indices) {
    const char* key = std::getenv(api_key_env_.c_str());
    if (!key || !*key) {
        throw BackendError(BackendFailure::credentials,
                           "environment variable " + api_key_env_ + " holding the API key is not set");
    }
    const auto scheme = base_url_.find("://");
    const auto path_start = base_url_.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    const auto host = base_url_.substr(0, path_start);
    auto prefix = path_start == std::string::npos ? std::string() : base_url_.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    const auto count = static_cast<int>(sample_indices.size());
    json body = {{"model", request.model.empty() ? model_ : request.model},
                 {"temperature", request.params.temperature},
                 {"top_p", request.params.top_p},
                 {"max_tokens", request.params.max_tokens},
                 {"n", count}};
    std::string path;
    if (mode_ == Mode::chat) {
        json messages = json::array();
        for (const auto& m : request.prompt.messages) {
            messages.push_back({{"role", m.role == Role::system ? "system" : "user"}, {"content", m.content}});
        }
        body["messages"] = std::move(messages);
        path = prefix + "/chat/completions";
    } else {
        body["prompt"] = flat_text(request.prompt);
        path = prefix + "/completions";
    }

    httplib::Client client(host);
    const auto secs = static_cast<time_t>(timeout_s_);
    const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    const httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        const auto err = res.error();
        const bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
        throw BackendError(timed_out ? BackendFailure::timeout : BackendFailure::transient,
                           "request to " + host + path + " failed: " + httplib::to_string(err));
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
        throw BackendError(BackendFailure::auth, "authentication rejected (HTTP " + std::to_string(status) + ")");
    }
    if (status == 429) throw BackendError(BackendFailure::rate_limit, "rate limited (HTTP 429)");
    if (status == 408 || status >= 500) {
        throw BackendError(BackendFailure::transient, "server error (HTTP " + std::to_string(status) + ")");
    }
    if (status != 200) {
        throw BackendError(BackendFailure::malformed,
                           "unexpected HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));
    }
    json reply;
    try {
        reply = json::parse(res->body);
        auto choices = reply.at("choices");
        if (!choices.is_array() || static_cast<int>(choices.size()) < count) {
            throw BackendError(BackendFailure::malformed, "reply carries " + std::to_string(choices.size()) +
                                                              " choices, expected " + std::to_string(count));
        }
        std::vector<std::pair<int, std::string>> texts;
        for (std::size_t i = 0; i < choices.size(); ++i) {
            const auto& c = choices[i];
            const int index = c.value("index", static_cast<int>(i));
            texts.emplace_back(index, mode_ == Mode::chat ? c.at("message").at("content").get<std::string>()
                                                          : c.at("text").get<std::string>());
        }
        std::stable_sort(texts.begin(), texts.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::optional<Usage> usage;
        if (reply.contains("usage") && reply["usage"].is_object()) {
            usage = Usage{reply["usage"].value("prompt_tokens", 0), reply["usage"].value("completion_tokens", 0)};
        }
        std::vector<Completion> out;
        // Usage covers the whole request; attach it once.
        for (int i = 0; i < count; ++i) {
            out.push_back({texts[static_cast<std::size_t>(i)].second, i == 0 ? usage : std::nullopt});
        }
        return out;
    } catch (const json::exception& e) {
        throw BackendError(BackendFailure::malformed, std::string("malformed reply: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Cache

std::string cache_key(const std::string& backend_id, const std::string& model, const Prompt& prompt,
                      const SamplingParams& params, int sample_index) {
    json messages = json::array();
    for (const auto& m : prompt.messages) {
        messages.push_back({{"role", m.role == Role::system ? "system" : "user"}, {"content", m.content}});
    }
    // n is excluded: keys are per sample, so a larger n reuses earlier samples.
    const json canonical = {
        {"backend_id", backend_id},
        {"model", model},
        {"messages", std::move(messages)},
        {"params",
         {{"temperature", params.temperature},
          {"top_p", params.top_p},
          {"max_tokens", params.max_tokens},
          {"rng_seed", params.rng_seed ? json(*params.rng_seed) : json(nullptr)}}},
        {"sample_index", sample_index},
    };
    return util::sha256_hex(canonical.dump());
}

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(*path_)) return;
    const auto lines = util::split_lines(util::read_file(*path_));
    for (const auto& line : lines) {
        if (util::trim(line).empty()) continue;
        // A torn final line from an interrupted write is skipped.
        auto rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("key") || !rec.contains("text")) continue;
        CacheEntry entry;
        entry.text = rec["text"].get<std::string>();
        if (rec.contains("usage") && rec["usage"].is_object()) {
            entry.usage = Usage{rec["usage"].value("prompt_tokens", 0), rec["usage"].value("completion_tokens", 0)};
        }
        index_.try_emplace(rec["key"].get<std::string>(), std::move(entry));
    }
}

std::optional<CacheEntry> ResponseCache::lookup(const std::string& key) const {
    std::lock_guard lock(mutex_);
    const auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::store(const std::string& key, const CacheEntry& entry) {
    std::lock_guard lock(mutex_);
    if (!index_.try_emplace(key, entry).second) return;
    if (!path_) return;
    json rec = {{"key", key}, {"text", entry.text}, {"timestamp", iso8601_now()}};
    rec["usage"] = entry.usage ? json{{"prompt_tokens", entry.usage->prompt_tokens},
                                      {"completion_tokens", entry.usage->completion_tokens}}
                               : json(nullptr);
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    std::ofstream out(*path_, std::ios::app | std::ios::binary);
    out << rec.dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::io, "cannot append to cache " + path_->string());
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mutex_);
    return index_.size();
}

// ---------------------------------------------------------------------------
// Gateway

struct Gateway::Impl {
    struct Registered {
        std::shared_ptr<Backend> backend;
        std::string model;
    };

    explicit Impl(GatewayOptions opts)
        : options(std::move(opts)),
          cache(options.cache_path ? std::make_unique<ResponseCache>(*options.cache_path)
                                   : std::make_unique<ResponseCache>()),
          in_flight(std::max(1, std::min(options.max_in_flight, 1024))),
          jitter_rng(options.jitter_seed) {
        if (!options.sleep) {
            options.sleep = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
        }
    }

    std::string add(const std::string& name, Registered reg) {
        std::lock_guard lock(mutex);
        std::string id = name;
        for (int k = 2; backends.count(id); ++k) id = name + "#" + std::to_string(k);
        backends.emplace(id, std::move(reg));
        return id;
    }

    std::vector<Completion> call_with_retry(Backend& backend, const GenerationRequest& request,
                                            const std::vector<int>& indices) {
        const auto& retry = options.retry;
        for (int attempt = 1;; ++attempt) {
            try {
                in_flight.acquire();
                struct Release {
                    std::counting_semaphore<1024>& s;
                    ~Release() { s.release(); }
                } release{in_flight};
                auto out = backend.complete(request, indices);
                if (out.size() != indices.size()) {
                    throw BackendError(BackendFailure::malformed,
                                       "backend returned " + std::to_string(out.size()) + " completions for " +
                                           std::to_string(indices.size()) + " samples");
                }
                return out;
            } catch (const BackendError& e) {
                if (!e.retryable()) throw;
                if (attempt >= retry.max_attempts) {
                    throw BackendError(BackendFailure::exhausted, "giving up after " + std::to_string(attempt) +
                                                                      " attempts: " + e.what());
                }
                double delay = std::min(retry.max_delay_s,
                                        retry.base_delay_s * std::pow(retry.factor, attempt - 1));
                if (retry.full_jitter) {
                    std::lock_guard lock(mutex);
                    delay = std::uniform_real_distribution<double>(0.0, delay)(jitter_rng);
                }
                options.sleep(std::chrono::duration<double>(delay));
            }
        }
    }

    GatewayOptions options;
    std::unique_ptr<ResponseCache> cache;
    std::counting_semaphore<1024> in_flight;
    std::mutex mutex;
    std::mt19937_64 jitter_rng;
    std::map<std::string, Registered> backends;
    std::atomic<std::size_t> backend_samples{0};
    std::vector<RecordedCall> calls;
};

Gateway::Gateway(GatewayOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
Gateway::~Gateway() = default;

std::string Gateway::register_backend(const BackendSpec& spec) {
    auto backend = make_backend(spec);
    const auto model = spec.model.empty() ? backend->default_model() : spec.model;
    return impl_->add(spec.name.empty() ? spec.kind : spec.name, {std::move(backend), model});
}

std::string Gateway::register_backend(const std::string& name, std::shared_ptr<Backend> backend) {
    auto model = backend->default_model();
    return impl_->add(name, {std::move(backend), std::move(model)});
}

GenerationResponse Gateway::generate(const GenerationRequest& request) {
    Impl::Registered reg;
    {
        std::lock_guard lock(impl_->mutex);
        const auto it = impl_->backends.find(request.backend_id);
        if (it == impl_->backends.end()) {
            throw BackendError(BackendFailure::unknown_backend, "no backend registered as '" + request.backend_id + "'");
        }
        reg = it->second;
    }
    request.params.validate();
    if (request.prompt.messages.empty()) throw Error(ErrorKind::argument, "prompt is empty");

    std::vector<int> indices = request.sample_indices;
    if (indices.empty()) {
        indices.resize(static_cast<std::size_t>(request.params.n));
        std::iota(indices.begin(), indices.end(), 0);
    }
    const auto model = request.model.empty() ? reg.model : request.model;

    GenerationResponse response;
    response.texts.resize(indices.size());
    std::vector<std::string> keys(indices.size());
    std::vector<int> missing;
    std::vector<std::size_t> missing_pos;
    Usage total;
    bool any_usage = false;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        keys[i] = cache_key(request.backend_id, model, request.prompt, request.params, indices[i]);
        if (auto hit = impl_->cache->lookup(keys[i])) {
            response.texts[i] = std::move(hit->text);
        } else {
            missing.push_back(indices[i]);
            missing_pos.push_back(i);
        }
    }
    response.from_cache = missing.empty();
    if (!missing.empty()) {
        GenerationRequest resolved = request;
        resolved.model = model;
        {
            std::lock_guard lock(impl_->mutex);
            impl_->calls.push_back({request.backend_id, model, request.task_id, request.purpose, request.params,
                                    missing, prompt_digest(request.prompt)});
        }
        auto completions = impl_->call_with_retry(*reg.backend, resolved, missing);
        impl_->backend_samples += missing.size();
        for (std::size_t j = 0; j < completions.size(); ++j) {
            auto& c = completions[j];
            impl_->cache->store(keys[missing_pos[j]], {c.text, c.usage});
            if (c.usage) {
                any_usage = true;
                total.prompt_tokens = c.usage->prompt_tokens;
                total.completion_tokens += c.usage->completion_tokens;
            }
            response.texts[missing_pos[j]] = std::move(c.text);
        }
    }
    if (any_usage) response.usage = total;
    return response;
}

std::size_t Gateway::backend_samples() const { return impl_->backend_samples.load(); }

std::vector<RecordedCall> Gateway::recorded_calls() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->calls;
}

void Gateway::clear_recorded_calls() {
    std::lock_guard lock(impl_->mutex);
    impl_->calls.clear();
}

}  // namespace scotbench::llm
