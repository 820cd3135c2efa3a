#include "scotbench/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <numeric>
#include <regex>
#include <set>
#include <thread>

#include "scotbench/error.hpp"
#include "scotbench/util.hpp"

namespace scotbench {

const char* to_string(Extraction e) {
    switch (e) {
        case Extraction::fenced: return "fenced";
        case Extraction::heuristic: return "heuristic";
        case Extraction::verbatim: return "verbatim";
        case Extraction::failed: return "failed";
    }
    return "failed";
}

Extraction parse_extraction(std::string_view name) {
    for (auto e : {Extraction::fenced, Extraction::heuristic, Extraction::verbatim, Extraction::failed}) {
        if (name == to_string(e)) return e;
    }
    throw Error(ErrorKind::argument, "unknown extraction status '" + std::string(name) + "'");
}

nlohmann::ordered_json to_json(const CandidateProgram& c) {
    nlohmann::ordered_json j;
    j["task_id"] = c.task_id;
    j["sample_index"] = c.sample_index;
    j["technique"] = to_string(c.technique);
    j["intermediate_text"] = c.intermediate_text ? nlohmann::ordered_json(*c.intermediate_text) : nullptr;
    j["code"] = c.code;
    j["extraction"] = to_string(c.extraction);
    j["extraction_failed"] = c.extraction_failed;
    j["invalid_intermediate"] = c.invalid_intermediate;
    nlohmann::ordered_json meta;
    meta["backend_id"] = c.gen_meta.backend_id;
    meta["model"] = c.gen_meta.model;
    meta["step_params"] = nlohmann::ordered_json::array();
    for (const auto& p : c.gen_meta.step_params) meta["step_params"].push_back(nlohmann::ordered_json(llm::to_json(p)));
    j["gen_meta"] = std::move(meta);
    return j;
}

CandidateProgram candidate_from_json(const nlohmann::json& j) {
    CandidateProgram c;
    c.task_id = j.at("task_id").get<std::string>();
    c.sample_index = j.at("sample_index").get<int>();
    c.technique = parse_technique(j.at("technique").get<std::string>());
    if (!j.at("intermediate_text").is_null()) c.intermediate_text = j["intermediate_text"].get<std::string>();
    c.code = j.at("code").get<std::string>();
    c.extraction = parse_extraction(j.at("extraction").get<std::string>());
    c.extraction_failed = j.at("extraction_failed").get<bool>();
    c.invalid_intermediate = j.at("invalid_intermediate").get<bool>();
    const auto& meta = j.at("gen_meta");
    c.gen_meta.backend_id = meta.at("backend_id").get<std::string>();
    c.gen_meta.model = meta.at("model").get<std::string>();
    for (const auto& p : meta.at("step_params")) c.gen_meta.step_params.push_back(llm::sampling_params_from_json(p));
    return c;
}

}  // namespace scotbench

namespace scotbench::pipeline {

using util::json;

std::vector<llm::SamplingParams> default_step_params(PromptTechnique technique, int n,
                                                     const SamplingDefaults& defaults) {
    if (is_two_step(technique)) {
        auto step1 = defaults.intermediate;
        step1.n = n;
        auto step2 = defaults.code;
        step2.n = 1;
        return {step1, step2};
    }
    auto p = technique == PromptTechnique::cot ? defaults.cot : defaults.one_step;
    p.n = n;
    return {p};
}

void RunManifest::validate() const {
    if (n < 1) throw Error(ErrorKind::config, "n must be positive");
    if (k_values.empty()) throw Error(ErrorKind::config, "k list is empty");
    for (int k : k_values) {
        if (k < 1) throw Error(ErrorKind::config, "k values must be positive");
    }
    if (n < *std::max_element(k_values.begin(), k_values.end())) {
        throw Error(ErrorKind::config, "n < max(k): n=" + std::to_string(n));
    }
    const std::size_t steps = is_two_step(technique) ? 2 : 1;
    if (step_params.size() != steps) {
        throw Error(ErrorKind::config, std::string(to_string(technique)) + " needs " + std::to_string(steps) +
                                           " step parameter sets, got " + std::to_string(step_params.size()));
    }
    for (const auto& p : step_params) p.validate();
}

nlohmann::ordered_json to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["run_id"] = m.run_id;
    j["benchmark"] = m.benchmark;
    j["technique"] = to_string(m.technique);
    j["example_set_path"] = m.example_set_path;
    j["n"] = m.n;
    j["k_values"] = m.k_values;
    j["step_params"] = nlohmann::ordered_json::array();
    for (const auto& p : m.step_params) j["step_params"].push_back(nlohmann::ordered_json(llm::to_json(p)));
    j["backend_id"] = m.backend_id;
    j["model"] = m.model;
    j["backend_config_digest"] = m.backend_config_digest;
    j["complete"] = m.complete;
    j["progress"] = m.progress;
    return j;
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.benchmark = j.at("benchmark").get<std::string>();
    m.technique = parse_technique(j.at("technique").get<std::string>());
    m.example_set_path = j.value("example_set_path", "");
    m.n = j.at("n").get<int>();
    m.k_values = j.at("k_values").get<std::vector<int>>();
    for (const auto& p : j.at("step_params")) m.step_params.push_back(llm::sampling_params_from_json(p));
    m.backend_id = j.value("backend_id", "");
    m.model = j.value("model", "");
    m.backend_config_digest = j.value("backend_config_digest", "");
    m.complete = j.at("complete").get<bool>();
    if (j.contains("progress")) m.progress = j["progress"].get<std::map<std::string, int>>();
    return m;
}

// ---------------------------------------------------------------------------
// Extraction

namespace {

struct Fence {
    std::string tag;
    std::string code;
    std::size_t offset;  // start of the opening fence line
};

std::vector<Fence> find_fences(std::string_view raw) {
    std::vector<Fence> fences;
    std::size_t pos = 0;
    std::optional<Fence> open;
    while (pos <= raw.size()) {
        const auto nl = raw.find('\n', pos);
        const auto end = nl == std::string_view::npos ? raw.size() : nl;
        const auto line = raw.substr(pos, end - pos);
        const auto t = util::trim(line);
        if (util::starts_with(t, "```")) {
            if (!open) {
                std::string tag(util::trim(t.substr(3)));
                std::transform(tag.begin(), tag.end(), tag.begin(),
                               [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
                open = Fence{std::move(tag), {}, pos};
            } else {
                fences.push_back(std::move(*open));
                open.reset();
            }
        } else if (open) {
            open->code.append(line);
            open->code += '\n';
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (open) fences.push_back(std::move(*open));  // unterminated: runs to the end
    return fences;
}

bool tag_matches(std::string_view tag, Language lang) {
    static const std::set<std::string_view> py = {"python", "py", "python3"};
    static const std::set<std::string_view> cc = {"cpp", "c++", "cc", "cxx", "c"};
    return lang == Language::python ? py.count(tag) > 0 : cc.count(tag) > 0;
}

std::string rstrip(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
}

bool is_definition_header(std::string_view line, Language lang) {
    if (line.empty() || std::isspace(static_cast<unsigned char>(line.front()))) return false;
    if (lang == Language::python) {
        static const std::regex re(R"(^(async\s+def\s|def\s|class\s|import\s|from\s+\S+\s+import\s|@\w))");
        return std::regex_search(line.begin(), line.end(), re);
    }
    static const std::regex directive(R"(^(#include|template\s*<|using\s+namespace\s|namespace\s|struct\s|class\s))");
    static const std::regex function(
        R"(^[A-Za-z_][\w:<>,\*&\s]*[\s\*&]([A-Za-z_]\w*)\s*\([^;]*\)\s*(const\s*)?(\{.*)?$)");
    if (std::regex_search(line.begin(), line.end(), directive)) return true;
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(line.begin(), line.end(), m, function)) return false;
    static const std::set<std::string> keywords = {"if", "for", "while", "switch", "return"};
    return keywords.count(m[1].str()) == 0;
}

bool looks_like_code(std::string_view text) {
    static const std::regex re(R"([=;{}()\[\]]|\breturn\b)");
    return std::regex_search(text.begin(), text.end(), re);
}

}  // namespace

ExtractedCode extract_code(std::string_view raw, Language language) {
    const auto fences = find_fences(raw);
    const Fence* chosen = nullptr;
    for (const auto& f : fences) {
        if (tag_matches(f.tag, language) && !util::trim(f.code).empty()) {
            chosen = &f;
            break;
        }
    }
    if (!chosen) {
        for (const auto& f : fences) {
            if (f.tag.empty() && !util::trim(f.code).empty()) {
                chosen = &f;
                break;
            }
        }
    }
    if (!chosen) {
        for (const auto& f : fences) {
            if (!util::trim(f.code).empty()) {
                chosen = &f;
                break;
            }
        }
    }
    if (chosen) {
        return {rstrip(chosen->code), Extraction::fenced, util::trim_copy(raw.substr(0, chosen->offset))};
    }

    std::size_t pos = 0;
    while (pos < raw.size()) {
        const auto nl = raw.find('\n', pos);
        const auto end = nl == std::string_view::npos ? raw.size() : nl;
        auto line = raw.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (is_definition_header(line, language)) {
            return {rstrip(std::string(raw.substr(pos))), Extraction::heuristic, util::trim_copy(raw.substr(0, pos))};
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }

    const auto whole = util::trim(raw);
    if (!whole.empty() && looks_like_code(whole)) return {std::string(whole), Extraction::verbatim, {}};
    return {{}, Extraction::failed, {}};
}

// ---------------------------------------------------------------------------
// Generation

namespace {

std::vector<int> indices_or_all(const std::vector<int>& requested, int n) {
    if (!requested.empty()) return requested;
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    return all;
}

void require_ctx(const GenerationContext& ctx) {
    if (!ctx.gateway) throw Error(ErrorKind::argument, "generation context has no gateway");
}

// Model output for step 1 often repeats the label that ends the prompt.
std::string strip_leading_label(std::string_view text, std::string_view label) {
    const auto t = util::trim(text);
    if (util::starts_with(t, label)) {
        const auto nl = t.find('\n');
        const auto head = util::trim(t.substr(0, nl == std::string_view::npos ? t.size() : nl));
        if (head == label) return nl == std::string_view::npos ? std::string() : std::string(t.substr(nl + 1));
    }
    return std::string(text);
}

CandidateProgram make_candidate(const Task& task, int index, const GenerationContext& ctx, const RunManifest& cfg,
                                std::string_view raw_code) {
    CandidateProgram c;
    c.task_id = task.id;
    c.sample_index = index;
    c.technique = cfg.technique;
    auto extracted = extract_code(raw_code, task.language);
    c.code = std::move(extracted.code);
    c.extraction = extracted.extraction;
    c.extraction_failed = extracted.extraction == Extraction::failed;
    c.gen_meta = {ctx.backend_id, ctx.model, cfg.step_params};
    if (cfg.technique == PromptTechnique::cot) {
        c.intermediate_text = extracted.preamble.empty() ? std::nullopt : std::optional(extracted.preamble);
    }
    return c;
}

}  // namespace

std::vector<CandidateProgram> run_two_step(const Task& task, const std::vector<ExampleTriple>& examples,
                                           const GenerationContext& ctx, const RunManifest& cfg,
                                           const std::vector<int>& sample_indices, const CandidateSink& sink) {
    require_ctx(ctx);
    if (!is_two_step(cfg.technique)) {
        throw Error(ErrorKind::argument, std::string("run_two_step cannot run ") + to_string(cfg.technique));
    }
    if (cfg.step_params.size() != 2) throw Error(ErrorKind::config, "two-step runs need two step parameter sets");
    const auto indices = indices_or_all(sample_indices, cfg.n);

    llm::GenerationRequest step1;
    step1.backend_id = ctx.backend_id;
    step1.model = ctx.model;
    step1.prompt = build_scot_prompt(examples, task.requirement, cfg.technique, *ctx.instructions);
    step1.params = cfg.step_params[0];
    step1.params.n = static_cast<int>(indices.size());
    step1.task_id = task.id;
    step1.purpose = llm::Purpose::intermediate;
    step1.sample_indices = indices;
    const auto intermediates = ctx.gateway->generate(step1).texts;

    scot::ParseOptions parse_options;
    parse_options.require_io = cfg.technique != PromptTechnique::scot_no_io;

    std::vector<CandidateProgram> out;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto label = cfg.technique == PromptTechnique::scot_p ? "Pseudocode:" : "SCoT:";
        const auto raw = strip_leading_label(intermediates[i], label);
        std::string intermediate;
        bool invalid = false;
        if (uses_scot_intermediate(cfg.technique)) {
            auto parsed = scot::parse(raw, parse_options);
            if (parsed.ok()) {
                intermediate = scot::render(*parsed.ast);
            } else {
                intermediate = util::trim_copy(raw);
                invalid = true;
            }
        } else {
            intermediate = util::trim_copy(raw);
        }
        if (intermediate.empty()) {
            intermediate = "(empty)";
            invalid = invalid || uses_scot_intermediate(cfg.technique);
        }

        llm::GenerationRequest step2;
        step2.backend_id = ctx.backend_id;
        step2.model = ctx.model;
        step2.prompt = build_code_prompt(examples, task.requirement, intermediate, cfg.technique, *ctx.instructions);
        step2.params = cfg.step_params[1];
        step2.params.n = 1;
        step2.task_id = task.id;
        step2.purpose = llm::Purpose::code;
        step2.sample_indices = {indices[i]};
        const auto code = ctx.gateway->generate(step2).texts.at(0);

        auto cand = make_candidate(task, indices[i], ctx, cfg, code);
        cand.intermediate_text = intermediate;
        cand.invalid_intermediate = invalid;
        if (sink) sink(cand);
        out.push_back(std::move(cand));
    }
    return out;
}

std::vector<CandidateProgram> run_one_step(const Task& task, const std::vector<ExampleTriple>& examples,
                                           const GenerationContext& ctx, const RunManifest& cfg,
                                           const std::vector<int>& sample_indices, const CandidateSink& sink) {
    require_ctx(ctx);
    if (is_two_step(cfg.technique)) {
        throw Error(ErrorKind::argument, std::string("run_one_step cannot run ") + to_string(cfg.technique));
    }
    if (cfg.step_params.size() != 1) throw Error(ErrorKind::config, "one-step runs need one step parameter set");
    const auto indices = indices_or_all(sample_indices, cfg.n);

    llm::GenerationRequest req;
    req.backend_id = ctx.backend_id;
    req.model = ctx.model;
    req.prompt = build_baseline_prompt(examples, task.requirement, cfg.technique, *ctx.instructions);
    req.params = cfg.step_params[0];
    req.params.n = static_cast<int>(indices.size());
    req.task_id = task.id;
    req.sample_indices = indices;
    const auto texts = ctx.gateway->generate(req).texts;

    std::vector<CandidateProgram> out;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto cand = make_candidate(task, indices[i], ctx, cfg, texts[i]);
        if (sink) sink(cand);
        out.push_back(std::move(cand));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

void sort_candidates(std::vector<CandidateProgram>& cands) {
    std::sort(cands.begin(), cands.end(), [](const CandidateProgram& a, const CandidateProgram& b) {
        return std::tie(a.task_id, a.sample_index) < std::tie(b.task_id, b.sample_index);
    });
}

}  // namespace

void persist_run(const RunManifest& manifest, std::vector<CandidateProgram> candidates,
                 const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    sort_candidates(candidates);
    const auto cand_path = dir / "candidates.jsonl";
    if (candidates.empty()) {
        std::filesystem::remove(cand_path);
    } else {
        std::string lines;
        for (const auto& c : candidates) lines += to_json(c).dump() + "\n";
        util::write_file_atomic(cand_path, lines);
    }
    util::write_file_atomic(dir / "manifest.json", to_json(manifest).dump(2) + "\n");
}

LoadedRun load_run(const std::filesystem::path& dir) {
    LoadedRun run;
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) {
        throw Error(ErrorKind::incomplete_run, "no manifest.json in " + dir.string());
    }
    try {
        run.manifest = manifest_from_json(json::parse(util::read_file(manifest_path)));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::io, manifest_path.string() + ": " + e.what());
    }
    const auto cand_path = dir / "candidates.jsonl";
    if (std::filesystem::exists(cand_path)) {
        util::for_each_jsonl(cand_path, [&](std::size_t line, const json& rec) {
            try {
                run.candidates.push_back(candidate_from_json(rec));
            } catch (const std::exception& e) {
                throw Error(ErrorKind::io, cand_path.string() + ":" + std::to_string(line) + ": " + e.what());
            }
        });
    }
    return run;
}

BenchmarkGeneration generate_benchmark(const std::vector<Task>& tasks, const std::vector<ExampleTriple>& examples,
                                       const GenerationContext& ctx, const RunManifest& cfg,
                                       std::vector<CandidateProgram> existing, int workers) {
    BenchmarkGeneration result;
    std::map<std::string, std::set<int>> have;
    for (const auto& c : existing) have[c.task_id].insert(c.sample_index);

    std::vector<std::pair<const Task*, std::vector<int>>> work;
    for (const auto& t : tasks) {
        std::vector<int> missing;
        for (int i = 0; i < cfg.n; ++i) {
            if (!have[t.id].count(i)) missing.push_back(i);
        }
        if (!missing.empty()) work.emplace_back(&t, std::move(missing));
    }

    std::mutex mutex;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    auto sink = [&](const CandidateProgram& c) {
        std::lock_guard lock(mutex);
        existing.push_back(c);
        ++result.new_candidates;
    };
    auto worker = [&] {
        for (std::size_t i; !stop && (i = next.fetch_add(1)) < work.size();) {
            const auto& [task, missing] = work[i];
            try {
                if (is_two_step(cfg.technique)) run_two_step(*task, examples, ctx, cfg, missing, sink);
                else run_one_step(*task, examples, ctx, cfg, missing, sink);
            } catch (const std::exception& e) {
                std::lock_guard lock(mutex);
                if (result.error.empty()) result.error = "task " + task->id + ": " + e.what();
                stop = true;
            }
        }
    };
    const auto count = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), 1,
                                                std::max<std::size_t>(1, work.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < count; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    sort_candidates(existing);
    result.candidates = std::move(existing);
    result.complete = result.error.empty();
    return result;
}

}  // namespace scotbench::pipeline
