#include "scotbench/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "scotbench/error.hpp"
#include "scotbench/util.hpp"

namespace scotbench::harness {

using util::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::backend: return kBackendError;
        case ErrorKind::scoring:
        case ErrorKind::incomplete_run: return kHarnessError;
        default: return kConfigError;
    }
}

// ---------------------------------------------------------------------------
// Config

namespace {

const std::set<std::string> kTopKeys = {"benchmark", "technique", "example_set_path", "example_count",
                                        "backend",   "sampling",  "n",                "k_values",
                                        "exec",      "generation", "output_dir",      "rng_seed",
                                        "cache_path", "use_cache", "instructions_path", "$schema"};
const std::set<std::string> kBenchKeys = {"path", "format", "donor_examples_path", "donor_format"};
const std::set<std::string> kExecKeys = {"wall_timeout_s", "cpu_timeout_s", "compile_timeout_s", "max_output_bytes",
                                         "max_memory_bytes", "deny_network", "python_cmd", "cpp_cmd",
                                         "keep_artifacts", "workers", "dedupe", "temp_root"};
const std::set<std::string> kGenKeys = {"workers", "max_in_flight"};
const std::set<std::string> kSamplingKeys = {"step1", "step2"};
const std::set<std::string> kParamKeys = {"temperature", "top_p", "max_tokens", "rng_seed"};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorKind::config, where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw Error(ErrorKind::config, "unknown key '" + key + "' in " + where);
    }
}

fs::path resolve(const fs::path& base, const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return {};
    fs::path p(j[key].get<std::string>());
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

std::string file_digest(const fs::path& p) {
    if (p.empty() || !fs::exists(p)) return {};
    return util::sha256_hex(util::read_file(p));
}

}  // namespace

std::vector<llm::SamplingParams> RunConfig::step_params() const {
    auto params = pipeline::default_step_params(technique, n);
    params[0] = llm::sampling_params_from_json(step1_overrides, params[0]);
    params[0].n = n;
    if (params.size() > 1) {
        params[1] = llm::sampling_params_from_json(step2_overrides, params[1]);
        params[1].n = 1;
    }
    for (auto& p : params) {
        if (!p.rng_seed && backend.kind.rfind("mock_", 0) == 0) p.rng_seed = rng_seed;
    }
    return params;
}

std::string RunConfig::run_id() const {
    json id;
    id["benchmark"] = file_digest(benchmark.path);
    id["donor"] = file_digest(benchmark.donor_examples_path);
    id["technique"] = to_string(technique);
    id["examples"] = file_digest(example_set_path);
    id["example_count"] = example_count;
    id["backend"] = {{"kind", backend.kind},
                     {"name", backend.name},
                     {"model", backend.model},
                     {"base_url", backend.base_url},
                     {"solutions", file_digest(backend.solutions_path)},
                     {"table", file_digest(backend.table_path)}};
    id["params"] = json::array();
    for (const auto& p : step_params()) id["params"].push_back(llm::to_json(p));
    id["n"] = n;
    id["rng_seed"] = rng_seed;
    id["instructions"] = file_digest(instructions_path);
    return util::sha256_hex(id.dump()).substr(0, 16);
}

RunConfig config_from_json(const json& j, const fs::path& base_dir) {
    RunConfig c;
    c.source = j;
    try {
        check_keys(j, kTopKeys, "config");
        const auto& b = j.at("benchmark");
        check_keys(b, kBenchKeys, "benchmark");
        c.benchmark.path = resolve(base_dir, b, "path");
        if (c.benchmark.path.empty()) throw Error(ErrorKind::config, "benchmark.path is required");
        c.benchmark.format = parse_benchmark_format(b.value("format", "native"));
        c.benchmark.donor_examples_path = resolve(base_dir, b, "donor_examples_path");
        c.benchmark.donor_format = parse_benchmark_format(b.value("donor_format", "native"));

        c.technique = parse_technique(j.at("technique").get<std::string>());
        c.example_set_path = resolve(base_dir, j, "example_set_path");
        c.example_count = j.value("example_count", std::size_t{3});
        c.backend = llm::BackendSpec::from_json(j.at("backend"), base_dir);

        if (j.contains("sampling")) {
            const auto& s = j["sampling"];
            check_keys(s, kSamplingKeys, "sampling");
            if (s.contains("step1")) {
                check_keys(s["step1"], kParamKeys, "sampling.step1");
                c.step1_overrides = s["step1"];
            }
            if (s.contains("step2")) {
                check_keys(s["step2"], kParamKeys, "sampling.step2");
                c.step2_overrides = s["step2"];
            }
        }
        c.n = j.value("n", 20);
        if (j.contains("k_values")) c.k_values = j["k_values"].get<std::vector<int>>();

        if (j.contains("exec")) {
            const auto& e = j["exec"];
            check_keys(e, kExecKeys, "exec");
            auto& p = c.exec;
            p.wall_timeout_s = e.value("wall_timeout_s", p.wall_timeout_s);
            p.cpu_timeout_s = e.value("cpu_timeout_s", p.cpu_timeout_s);
            p.compile_timeout_s = e.value("compile_timeout_s", p.compile_timeout_s);
            p.max_output_bytes = e.value("max_output_bytes", p.max_output_bytes);
            if (e.contains("max_memory_bytes") && !e["max_memory_bytes"].is_null()) {
                p.max_memory_bytes = e["max_memory_bytes"].get<std::size_t>();
            }
            p.deny_network = e.value("deny_network", p.deny_network);
            if (e.contains("python_cmd")) p.python_cmd = e["python_cmd"].get<std::vector<std::string>>();
            if (e.contains("cpp_cmd")) p.cpp_cmd = e["cpp_cmd"].get<std::vector<std::string>>();
            p.keep_artifacts = e.value("keep_artifacts", p.keep_artifacts);
            p.temp_root = resolve(base_dir, e, "temp_root");
            c.exec_workers = e.value("workers", c.exec_workers);
            c.dedupe_executions = e.value("dedupe", c.dedupe_executions);
        }
        if (j.contains("generation")) {
            const auto& g = j["generation"];
            check_keys(g, kGenKeys, "generation");
            c.gen_workers = g.value("workers", c.gen_workers);
            c.max_in_flight = g.value("max_in_flight", c.max_in_flight);
        }
        c.output_dir = resolve(base_dir, j, "output_dir");
        if (c.output_dir.empty()) throw Error(ErrorKind::config, "output_dir is required");
        c.rng_seed = j.value("rng_seed", std::uint64_t{0});
        c.cache_path = resolve(base_dir, j, "cache_path");
        c.use_cache = j.value("use_cache", true);
        c.instructions_path = resolve(base_dir, j, "instructions_path");
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, std::string("config: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::config) throw;
        throw Error(ErrorKind::config, e.what());
    }
    return c;
}

RunConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorKind::config, "config file not found: " + path.string());
    json j;
    try {
        j = json::parse(util::read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

void apply_overrides(RunConfig& c, const Overrides& o) {
    if (o.wall_timeout_s) c.exec.wall_timeout_s = *o.wall_timeout_s;
    if (o.cpu_timeout_s) c.exec.cpu_timeout_s = *o.cpu_timeout_s;
    if (o.workers) c.exec_workers = *o.workers;
    if (o.python_cmd) c.exec.python_cmd = *o.python_cmd;
    if (o.cpp_cmd) c.exec.cpp_cmd = *o.cpp_cmd;
    if (o.keep_artifacts) c.exec.keep_artifacts = *o.keep_artifacts;
    if (o.output_dir) c.output_dir = *o.output_dir;
}

// ---------------------------------------------------------------------------
// Loading inputs

namespace {

struct Inputs {
    Benchmark bench;
    std::vector<ExampleTriple> examples;
    InstructionSet instructions;
};

std::vector<ExampleTriple> examples_for(const RunConfig& c, const Benchmark& bench) {
    if (!c.example_set_path.empty()) {
        auto examples = load_example_set(c.example_set_path);
        if (c.technique == PromptTechnique::zero_shot) return {};
        if (examples.size() > c.example_count) examples.resize(c.example_count);
        return examples;
    }
    if (c.technique == PromptTechnique::zero_shot) return {};
    if (c.technique != PromptTechnique::few_shot) {
        throw Error(ErrorKind::config, std::string(to_string(c.technique)) + " needs example_set_path");
    }
    // Plain few-shot can draw its examples straight from training data.
    std::vector<ExampleSeed> seeds;
    if (bench.train.empty() && !c.benchmark.donor_examples_path.empty()) {
        const auto donor = load_benchmark(c.benchmark.donor_examples_path, c.benchmark.donor_format);
        seeds = select_example_seeds(donor, c.example_count, c.rng_seed);
    } else {
        seeds = select_example_seeds(bench, c.example_count, c.rng_seed);
    }
    std::vector<ExampleTriple> out;
    for (auto& s : seeds) out.push_back({std::move(s.requirement), {}, std::move(s.code)});
    return out;
}

Inputs load_inputs(const RunConfig& c) {
    Inputs in;
    in.bench = load_benchmark(c.benchmark.path, c.benchmark.format);
    in.examples = examples_for(c, in.bench);
    in.instructions = c.instructions_path.empty() ? InstructionSet::defaults()
                                                  : InstructionSet::load(c.instructions_path);
    return in;
}

void require_file(std::vector<std::string>& diags, const fs::path& p, const std::string& what) {
    if (!p.empty() && !fs::exists(p)) diags.push_back(what + " not found: " + p.string());
}

}  // namespace

std::vector<std::string> check_config(const RunConfig& c) {
    std::vector<std::string> diags;
    if (c.n < 1) diags.push_back("n must be positive, got " + std::to_string(c.n));
    if (c.k_values.empty()) diags.push_back("k_values is empty");
    for (int k : c.k_values) {
        if (k < 1) diags.push_back("k values must be positive, got " + std::to_string(k));
    }
    if (!c.k_values.empty()) {
        const int max_k = *std::max_element(c.k_values.begin(), c.k_values.end());
        if (c.n < max_k) {
            diags.push_back("n < max(k): n=" + std::to_string(c.n) + ", max(k)=" + std::to_string(max_k));
        }
    }
    if (c.example_count < 1) diags.push_back("example_count must be positive");
    if (c.exec_workers < 1) diags.push_back("exec.workers must be positive");
    if (c.gen_workers < 1 || c.max_in_flight < 1) diags.push_back("generation workers must be positive");
    try {
        for (const auto& p : c.step_params()) p.validate();
    } catch (const std::exception& e) {
        diags.push_back(std::string("sampling: ") + e.what());
    }
    try {
        c.exec.validate();
    } catch (const std::exception& e) {
        diags.push_back(std::string("exec: ") + e.what());
    }

    require_file(diags, c.benchmark.path, "benchmark");
    require_file(diags, c.benchmark.donor_examples_path, "donor benchmark");
    require_file(diags, c.example_set_path, "example set");
    require_file(diags, c.instructions_path, "instructions");
    const auto& kind = c.backend.kind;
    static const std::set<std::string> kinds = {"openai_compatible_chat", "openai_compatible_completion",
                                                "mock_table", "mock_oracle", "mock_echo", "mock_saboteur"};
    if (!kinds.count(kind)) diags.push_back("unknown backend kind '" + kind + "'");
    if (kind == "mock_oracle") {
        if (c.backend.solutions_path.empty()) diags.push_back("mock_oracle needs backend.solutions_path");
        require_file(diags, c.backend.solutions_path, "oracle solutions");
    }
    if (kind == "mock_table") {
        if (c.backend.table_path.empty()) diags.push_back("mock_table needs backend.table_path");
        require_file(diags, c.backend.table_path, "mock table");
    }
    if (kind.rfind("openai_compatible", 0) == 0) {
        if (c.backend.base_url.empty()) diags.push_back("remote backend needs base_url");
        if (c.backend.api_key_env.empty()) diags.push_back("remote backend needs api_key_env");
    }
    if (!diags.empty()) return diags;

    // Deeper checks only once the files are known to exist.
    try {
        const auto bench = load_benchmark(c.benchmark.path, c.benchmark.format);
        for (const auto* split : {&bench.train, &bench.test}) {
            for (const auto& t : *split) {
                for (const auto& msg : validate_task(t)) diags.push_back("task " + t.id + ": " + msg);
            }
        }
        const auto examples = examples_for(c, bench);
        if (is_two_step(c.technique) || c.technique == PromptTechnique::cot ||
            c.technique == PromptTechnique::few_shot) {
            if (examples.size() < c.example_count) {
                diags.push_back("example set has " + std::to_string(examples.size()) + " examples, expected " +
                                std::to_string(c.example_count));
            }
        }
        const auto instructions =
            c.instructions_path.empty() ? InstructionSet::defaults() : InstructionSet::load(c.instructions_path);
        if (!bench.test.empty()) {
            const auto& req = bench.test.front().requirement;
            if (is_two_step(c.technique)) {
                build_scot_prompt(examples, req, c.technique, instructions);
            } else {
                build_baseline_prompt(examples, req, c.technique, instructions);
            }
        }
    } catch (const std::exception& e) {
        diags.push_back(e.what());
    }
    return diags;
}

int cmd_validate(const fs::path& config_path, const Io& io, const Overrides& overrides) {
    try {
        auto config = load_config(config_path);
        apply_overrides(config, overrides);
        const auto diags = check_config(config);
        if (diags.empty()) {
            io.out << "OK\n";
            return kOk;
        }
        for (const auto& d : diags) io.err << "error: " << d << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << "\n";
        return kConfigError;
    }
}

// ---------------------------------------------------------------------------
// Results

void save_results(const std::vector<ResultRecord>& records, const fs::path& path) {
    std::string out;
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["task_id"] = r.task_id;
        j["sample_index"] = r.sample_index;
        j["code_sha256"] = r.code_sha256;
        j["result"] = sandbox::to_json(r.result);
        out += j.dump() + "\n";
    }
    util::write_file_atomic(path, out);
}

std::vector<ResultRecord> load_results(const fs::path& path) {
    std::vector<ResultRecord> out;
    if (!fs::exists(path)) return out;
    util::for_each_jsonl(path, [&](std::size_t line, const json& j) {
        try {
            out.push_back({j.at("task_id").get<std::string>(), j.at("sample_index").get<int>(),
                           j.value("code_sha256", ""), sandbox::execution_result_from_json(j.at("result"))});
        } catch (const std::exception& e) {
            throw Error(ErrorKind::io, path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    return out;
}

nlohmann::ordered_json report_json(const passk::Report& report, const pipeline::RunManifest& manifest) {
    nlohmann::ordered_json j;
    j["run_id"] = manifest.run_id;
    j["benchmark"] = manifest.benchmark;
    j["technique"] = to_string(manifest.technique);
    const auto metrics = passk::to_json(report);
    for (const auto& [key, value] : metrics.items()) j[key] = value;
    return j;
}

namespace {

std::string pct(double v) { return util::format_fixed(v * 100.0, 2); }

void print_table(std::ostream& out, const passk::Report& report, const std::string& technique) {
    std::ostringstream line;
    line << std::left << std::setw(16) << "technique" << std::setw(6) << "n";
    for (const auto& a : report.aggregates) line << std::setw(10) << ("pass@" + std::to_string(a.k));
    out << util::trim(line.str()) << "\n";
    line.str({});
    line << std::left << std::setw(16) << technique << std::setw(6) << report.n;
    for (const auto& a : report.aggregates) line << std::setw(10) << pct(a.mean);
    out << util::trim(line.str()) << "\n";
}

std::string code_digest(const CandidateProgram& c) {
    return util::sha256_hex(std::string(c.extraction_failed ? "failed\n" : "ok\n") + c.code);
}

// Groups verdicts per task and checks every task has exactly n of them.
passk::Report score(const std::vector<ResultRecord>& results, const pipeline::RunManifest& manifest,
                    const std::vector<int>& k_values) {
    std::map<std::string, std::vector<sandbox::Verdict>> by_task;
    for (const auto& r : results) by_task[r.task_id].push_back(r.result.verdict);
    for (const auto& [task, count] : manifest.progress) {
        if (!by_task.count(task)) throw Error(ErrorKind::incomplete_run, "task " + task + " has no verdicts");
    }
    std::vector<passk::TaskStats> stats;
    for (const auto& [task, verdicts] : by_task) {
        if (static_cast<int>(verdicts.size()) != manifest.n) {
            throw Error(ErrorKind::incomplete_run, "task " + task + " has " + std::to_string(verdicts.size()) +
                                                       " verdicts, expected " + std::to_string(manifest.n));
        }
        stats.push_back(passk::stats_from_verdicts(task, verdicts));
    }
    return passk::build_report(std::move(stats), k_values);
}

void write_reports(const fs::path& dir, const passk::Report& report, const pipeline::RunManifest& manifest) {
    util::write_file_atomic(dir / "report.json", report_json(report, manifest).dump(2) + "\n");
    util::write_file_atomic(dir / "report.csv", passk::to_csv(report));
}

}  // namespace

// ---------------------------------------------------------------------------
// Run

RunOutcome cmd_run(const RunConfig& config, const Io& io, const RunHooks& hooks) {
    RunOutcome outcome;
    outcome.run_dir = config.output_dir;
    const auto fail = [&](int code, const std::string& msg) {
        io.err << "error: " << msg << "\n";
        outcome.exit_code = code;
        return outcome;
    };

    const auto diags = check_config(config);
    if (!diags.empty()) {
        for (const auto& d : diags) io.err << "error: " << d << "\n";
        outcome.exit_code = kConfigError;
        return outcome;
    }

    Inputs inputs;
    pipeline::RunManifest manifest;
    std::vector<CandidateProgram> existing;
    try {
        inputs = load_inputs(config);
        manifest.run_id = config.run_id();
        manifest.benchmark = inputs.bench.name;
        manifest.technique = config.technique;
        manifest.example_set_path = config.example_set_path.string();
        manifest.n = config.n;
        manifest.k_values = config.k_values;
        manifest.step_params = config.step_params();
        manifest.backend_id = config.backend.name.empty() ? config.backend.kind : config.backend.name;
        manifest.model = config.backend.model;
        manifest.backend_config_digest = util::sha256_hex(config.backend.to_json().dump());
        manifest.validate();

        fs::create_directories(config.output_dir);
        if (fs::exists(config.output_dir / "manifest.json")) {
            auto prior = pipeline::load_run(config.output_dir);
            if (prior.manifest.run_id != manifest.run_id) {
                return fail(kConfigError, "output_dir " + config.output_dir.string() + " holds run " +
                                              prior.manifest.run_id + ", not " + manifest.run_id);
            }
            existing = std::move(prior.candidates);
        }
    } catch (const Error& e) {
        return fail(exit_code_for(e.kind()), e.what());
    } catch (const std::exception& e) {
        return fail(kConfigError, e.what());
    }

    // Generation
    llm::GatewayOptions options;
    if (config.use_cache) options.cache_path = config.cache_path.empty() ? config.output_dir / "cache.jsonl"
                                                                          : config.cache_path;
    options.max_in_flight = config.max_in_flight;
    options.jitter_seed = config.rng_seed;
    options.sleep = hooks.sleep;
    pipeline::BenchmarkGeneration gen;
    try {
        llm::Gateway gateway(options);
        const auto backend_id = hooks.backend ? gateway.register_backend(manifest.backend_id, hooks.backend)
                                              : gateway.register_backend(config.backend);
        manifest.backend_id = backend_id;
        pipeline::GenerationContext ctx{&gateway, backend_id, config.backend.model, &inputs.instructions};
        gen = pipeline::generate_benchmark(inputs.bench.test, inputs.examples, ctx, manifest, std::move(existing),
                                           config.gen_workers);
        outcome.backend_samples = gateway.backend_samples();
        outcome.calls = gateway.recorded_calls();
    } catch (const Error& e) {
        return fail(exit_code_for(e.kind()), e.what());
    }

    manifest.progress.clear();
    for (const auto& t : inputs.bench.test) manifest.progress[t.id] = 0;
    for (const auto& c : gen.candidates) ++manifest.progress[c.task_id];
    manifest.complete = gen.complete;
    pipeline::persist_run(manifest, gen.candidates, config.output_dir);
    if (!gen.complete) {
        return fail(kBackendError, gen.error + " (rerun to resume; completed samples are cached)");
    }

    // Execution, reusing verdicts for unchanged candidates.
    std::map<std::pair<std::string, int>, ResultRecord> prior;
    const auto results_path = config.output_dir / "results.jsonl";
    try {
        for (auto& r : load_results(results_path)) {
            if (r.result.verdict == sandbox::Verdict::HarnessError) continue;
            prior[{r.task_id, r.sample_index}] = std::move(r);
        }
    } catch (const std::exception& e) {
        io.err << "warning: ignoring unreadable " << results_path.string() << ": " << e.what() << "\n";
        prior.clear();
    }

    auto policy = config.exec;
    if (policy.keep_artifacts && policy.artifacts_dir.empty()) policy.artifacts_dir = config.output_dir;

    std::vector<ResultRecord> records(gen.candidates.size());
    std::vector<sandbox::BatchItem> batch;
    std::vector<std::vector<std::size_t>> batch_targets;  // candidates sharing each batch slot
    std::map<std::pair<std::string, std::string>, std::size_t> slot_of;
    for (std::size_t i = 0; i < gen.candidates.size(); ++i) {
        const auto& c = gen.candidates[i];
        records[i] = {c.task_id, c.sample_index, code_digest(c), {}};
        const auto it = prior.find({c.task_id, c.sample_index});
        if (it != prior.end() && it->second.code_sha256 == records[i].code_sha256) {
            records[i].result = it->second.result;
            continue;
        }
        const std::pair key{c.task_id, records[i].code_sha256};
        if (config.dedupe_executions && !policy.keep_artifacts) {
            if (auto s = slot_of.find(key); s != slot_of.end()) {
                batch_targets[s->second].push_back(i);
                continue;
            }
            slot_of[key] = batch.size();
        }
        batch.push_back({inputs.bench.find(c.task_id), &c});
        batch_targets.push_back({i});
    }
    for (const auto& item : batch) {
        if (!item.task) return fail(kHarnessError, "candidate for unknown task " + item.candidate->task_id);
    }
    const auto results = sandbox::run_batch(batch, policy, config.exec_workers);
    outcome.executions = results.size();
    for (std::size_t s = 0; s < results.size(); ++s) {
        for (auto i : batch_targets[s]) records[i].result = results[s];
    }
    save_results(records, results_path);

    std::size_t harness_errors = 0;
    for (const auto& r : records) {
        if (r.result.verdict == sandbox::Verdict::HarnessError) {
            if (harness_errors++ == 0) {
                io.err << "harness error on " << r.task_id << "#" << r.sample_index << ": " << r.result.reason << "\n";
            }
        }
    }
    if (harness_errors > 0) {
        return fail(kHarnessError, std::to_string(harness_errors) + " executions hit harness errors; rerun to retry");
    }

    try {
        auto report = score(records, manifest, manifest.k_values);
        write_reports(config.output_dir, report, manifest);
        print_table(io.out, report, to_string(manifest.technique));
        outcome.report = std::move(report);
    } catch (const Error& e) {
        return fail(kHarnessError, e.what());
    }
    return outcome;
}

int cmd_run(const fs::path& config_path, const Io& io, const Overrides& overrides) {
    RunConfig config;
    try {
        config = load_config(config_path);
        apply_overrides(config, overrides);
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return cmd_run(config, io).exit_code;
}

// ---------------------------------------------------------------------------
// Score

int cmd_score(const fs::path& run_dir, const std::vector<int>& k_values, const Io& io) {
    try {
        const auto run = pipeline::load_run(run_dir);
        if (!run.manifest.complete) throw Error(ErrorKind::incomplete_run, "generation did not finish");
        const auto ks = k_values.empty() ? run.manifest.k_values : k_values;
        for (int k : ks) {
            if (k < 1 || k > run.manifest.n) {
                io.err << "error: k=" << k << " outside [1, n=" << run.manifest.n << "]\n";
                return kConfigError;
            }
        }
        const auto results_path = run_dir / "results.jsonl";
        if (!fs::exists(results_path)) throw Error(ErrorKind::incomplete_run, "no results.jsonl in " + run_dir.string());
        const auto results = load_results(results_path);
        if (results.size() != run.candidates.size()) {
            throw Error(ErrorKind::incomplete_run, std::to_string(results.size()) + " verdicts for " +
                                                       std::to_string(run.candidates.size()) + " candidates");
        }
        auto manifest = run.manifest;
        manifest.k_values = ks;
        const auto report = score(results, manifest, ks);
        write_reports(run_dir, report, manifest);
        print_table(io.out, report, to_string(manifest.technique));
        return kOk;
    } catch (const Error& e) {
        io.err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << "\n";
        return kHarnessError;
    }
}

// ---------------------------------------------------------------------------
// Compare

namespace {

struct ReportSummary {
    std::string label;
    std::string benchmark;
    int n = 0;
    std::map<int, double> values;
};

ReportSummary read_summary(const fs::path& input) {
    const auto path = fs::is_directory(input) ? input / "report.json" : input;
    if (!fs::exists(path)) throw Error(ErrorKind::config, "no report at " + path.string());
    json j;
    try {
        j = json::parse(util::read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, path.string() + ": " + e.what());
    }
    ReportSummary s;
    s.label = j.value("label", j.value("technique", path.parent_path().filename().string()));
    s.benchmark = j.value("benchmark", "");
    s.n = j.value("n", 0);
    for (const auto& [key, value] : j.at("aggregate").items()) {
        if (key.rfind("pass@", 0) != 0) continue;
        s.values[std::stoi(key.substr(5))] = value.get<double>();
    }
    return s;
}

}  // namespace

int cmd_compare(const std::vector<fs::path>& inputs, const CompareOptions& options, const Io& io) {
    try {
        if (inputs.empty()) throw Error(ErrorKind::config, "compare needs at least one report");
        std::vector<ReportSummary> rows;
        for (const auto& in : inputs) rows.push_back(read_summary(in));
        for (const auto& r : rows) {
            if (r.benchmark != rows.front().benchmark) {
                throw Error(ErrorKind::config, "benchmark mismatch: '" + r.benchmark + "' vs '" +
                                                   rows.front().benchmark + "'");
            }
            if (r.n != rows.front().n) {
                throw Error(ErrorKind::config, "n mismatch: " + std::to_string(r.n) + " vs " +
                                                   std::to_string(rows.front().n));
            }
        }
        std::vector<int> ks;
        for (const auto& [k, v] : rows.front().values) {
            if (std::all_of(rows.begin(), rows.end(), [k = k](const ReportSummary& r) { return r.values.count(k); })) {
                ks.push_back(k);
            }
        }
        const auto baseline = options.baseline.value_or(0);
        const auto target = options.target.value_or(rows.size() - 1);
        if (baseline >= rows.size() || target >= rows.size()) {
            throw Error(ErrorKind::config, "baseline/target index out of range");
        }
        std::vector<std::string> improvement;
        for (int k : ks) improvement.push_back(passk::relative_improvement(rows[baseline].values.at(k),
                                                                           rows[target].values.at(k)));

        switch (options.format) {
            case CompareFormat::text: {
                std::size_t width = 12;
                for (const auto& r : rows) width = std::max(width, r.label.size() + 2);
                std::ostringstream line;
                line << std::left << std::setw(static_cast<int>(width)) << "technique";
                for (int k : ks) line << std::setw(10) << ("pass@" + std::to_string(k));
                io.out << util::trim(line.str()) << "\n";
                for (const auto& r : rows) {
                    line.str({});
                    line << std::left << std::setw(static_cast<int>(width)) << r.label;
                    for (int k : ks) line << std::setw(10) << pct(r.values.at(k));
                    io.out << util::trim(line.str()) << "\n";
                }
                if (rows.size() > 1) {
                    line.str({});
                    line << std::left << std::setw(static_cast<int>(width)) << "improvement";
                    for (const auto& s : improvement) line << std::setw(10) << s;
                    io.out << util::trim(line.str()) << "\n";
                }
                break;
            }
            case CompareFormat::csv: {
                io.out << "technique";
                for (int k : ks) io.out << ",pass@" << k;
                io.out << "\n";
                for (const auto& r : rows) {
                    io.out << r.label;
                    for (int k : ks) io.out << "," << pct(r.values.at(k));
                    io.out << "\n";
                }
                if (rows.size() > 1) {
                    io.out << "improvement";
                    for (const auto& s : improvement) io.out << "," << s;
                    io.out << "\n";
                }
                break;
            }
            case CompareFormat::json: {
                nlohmann::ordered_json j;
                j["benchmark"] = rows.front().benchmark;
                j["n"] = rows.front().n;
                j["k_values"] = ks;
                j["rows"] = nlohmann::ordered_json::array();
                for (const auto& r : rows) {
                    nlohmann::ordered_json row;
                    row["label"] = r.label;
                    for (int k : ks) row["pass@" + std::to_string(k)] = r.values.at(k);
                    j["rows"].push_back(std::move(row));
                }
                j["baseline"] = rows[baseline].label;
                j["target"] = rows[target].label;
                nlohmann::ordered_json imp;
                for (std::size_t i = 0; i < ks.size(); ++i) imp["pass@" + std::to_string(ks[i])] = improvement[i];
                j["improvement"] = std::move(imp);
                io.out << j.dump(2) << "\n";
                break;
            }
        }
        return kOk;
    } catch (const Error& e) {
        io.err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << "\n";
        return kConfigError;
    }
}

// ---------------------------------------------------------------------------
// Ingest and seeds

int cmd_ingest(const fs::path& input, BenchmarkFormat format, const fs::path& output, const Io& io) {
    try {
        const auto bench = load_benchmark(input, format);
        save_native(bench, output);
        io.out << "wrote " << bench.test.size() << " test and " << bench.train.size() << " train tasks to "
               << output.string() << "\n";
        return kOk;
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << "\n";
        return kConfigError;
    }
}

int cmd_seeds(const BenchmarkRef& ref, std::size_t count, std::uint64_t rng_seed, const Io& io) {
    try {
        auto bench = load_benchmark(ref.path, ref.format);
        if (bench.train.empty() && !ref.donor_examples_path.empty()) {
            bench = load_benchmark(ref.donor_examples_path, ref.donor_format);
        }
        for (const auto& s : select_example_seeds(bench, count, rng_seed)) {
            nlohmann::ordered_json j;
            j["task_id"] = s.task_id;
            j["requirement"] = s.requirement;
            j["code"] = s.code;
            io.out << j.dump() << "\n";
        }
        return kOk;
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << "\n";
        return kConfigError;
    }
}

}  // namespace scotbench::harness
