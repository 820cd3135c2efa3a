// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "generators.hpp"
#include "prompt_fixtures.hpp"
#include "scotbench/harness.hpp"
#include "scotbench/passk.hpp"
#include "scotbench/prompt.hpp"
#include "scotbench/sandbox.hpp"
#include "scotbench/scot.hpp"
#include "scotbench/util.hpp"
#include "test_support.hpp"

using namespace scotbench;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Collects the first few problems of a criterion.
struct Check {
    std::vector<std::string> problems;
    std::size_t checked = 0;

    void expect(bool ok, const std::function<std::string()>& what) {
        ++checked;
        if (!ok && problems.size() < 5) problems.push_back(what());
    }
};

struct Criterion {
    int number;
    std::string title;
    double budget_s;
    std::function<std::string(Check&)> body;  // returns a short summary
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// --------------------------------------------------------------------------

std::string estimator_oracle(Check& check) {
    double worst = 0;
    for (int n = 1; n <= 12; ++n) {
        for (int c = 0; c <= n; ++c) {
            for (int k = 1; k <= n; ++k) {
                const double got = passk::pass_at_k(n, c, k);
                const double want = testkit::brute_force_pass_at_k(n, c, k);
                worst = std::max(worst, std::abs(got - want));
                check.expect(std::abs(got - want) <= 1e-12, [&] {
                    return "n=" + std::to_string(n) + " c=" + std::to_string(c) + " k=" + std::to_string(k) +
                           " got " + fmt(got) + " want " + fmt(want);
                });
            }
        }
    }
    const double big = passk::pass_at_k(200, 100, 100);
    check.expect(std::isfinite(big) && big >= 0.0 && big <= 1.0, [&] { return "(200,100,100) = " + fmt(big); });
    return "max |delta| " + fmt(worst) + "; (200,100,100) = " + fmt(big);
}

std::string estimator_properties(Check& check) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> n_dist(1, 200);
    int triples = 0;
    for (; triples < 2000; ++triples) {
        const int n = n_dist(rng);
        const int c = std::uniform_int_distribution<int>(0, n)(rng);
        const int k = std::uniform_int_distribution<int>(1, n)(rng);
        const double v = passk::pass_at_k(n, c, k);
        const auto where = [&] {
            return "(n=" + std::to_string(n) + ", c=" + std::to_string(c) + ", k=" + std::to_string(k) + ")";
        };
        check.expect(v >= 0.0 && v <= 1.0, [&] { return "out of range at " + where(); });
        if (c == 0) check.expect(v == 0.0, [&] { return "c=0 not 0 at " + where(); });
        if (n - c < k) check.expect(v == 1.0, [&] { return "n-c<k not 1 at " + where(); });
        check.expect(passk::pass_at_k(n, c, 1) == static_cast<double>(c) / n, [&] { return "pass@1 != c/n at " + where(); });
        if (k < n) check.expect(passk::pass_at_k(n, c, k + 1) >= v, [&] { return "not monotone in k at " + where(); });
        if (c < n) check.expect(passk::pass_at_k(n, c + 1, k) >= v, [&] { return "not monotone in c at " + where(); });
    }
    return std::to_string(triples) + " triples";
}

std::string scot_round_trip(Check& check) {
    std::mt19937_64 rng(17);
    int deepest = 0;
    const int trees = 1500;
    for (int i = 0; i < trees; ++i) {
        testkit::AstGenOptions opts;
        opts.with_io = i % 5 != 0;
        opts.force_depth = i % 3 == 0;
        const auto ast = testkit::random_ast(rng, opts);
        deepest = std::max(deepest, scot::count_nodes(ast).max_depth);
        const auto text = scot::render(ast);
        scot::ParseOptions po;
        po.require_io = opts.with_io;
        const auto parsed = scot::parse(text, po);
        check.expect(parsed.ok() && *parsed.ast == ast, [&] {
            return "round trip failed for:\n" + text + scot::format_diagnostics(parsed.diagnostics);
        });
    }
    check.expect(deepest == 8, [&] { return "generated trees only reach depth " + std::to_string(deepest); });

    const int fuzz = 12000;
    for (int i = 0; i < fuzz; ++i) {
        const auto input = i % 2 == 0 ? testkit::random_scot_like_text(rng) : testkit::random_bytes(rng, 400);
        try {
            const auto r = scot::parse(input, scot::ParseOptions{i % 4 != 1, scot::kDefaultMaxDepth});
            const bool has_error = std::any_of(r.diagnostics.begin(), r.diagnostics.end(),
                                               [](const scot::Diagnostic& d) { return d.severity == scot::Severity::error; });
            check.expect(r.ok() != has_error, [&] { return "ast/diagnostic mismatch on fuzz input " + std::to_string(i); });
        } catch (const std::exception& e) {
            check.expect(false, [&] { return std::string("parser threw: ") + e.what(); });
        }
    }
    return std::to_string(trees) + " trees up to depth " + std::to_string(deepest) + ", " + std::to_string(fuzz) +
           " fuzz inputs";
}

// Depth-first prose listing, written independently of the library walker.
void expected_flat(const scot::Block& block, std::vector<std::string>& out) {
    for (const auto& node : block) {
        if (const auto* s = std::get_if<scot::SeqStep>(&node.value)) {
            out.push_back(util::trim_copy(s->text));
        } else if (const auto* b = std::get_if<scot::Branch>(&node.value)) {
            for (std::size_t i = 0; i < b->arms.size(); ++i) {
                const auto& arm = b->arms[i];
                if (!arm.condition) out.push_back("else");
                else out.push_back((i == 0 ? "if " : "else if ") + util::trim_copy(*arm.condition));
                expected_flat(arm.body, out);
            }
        } else if (const auto* l = std::get_if<scot::Loop>(&node.value)) {
            out.push_back((l->kind == scot::LoopKind::for_loop ? "for " : "while ") + util::trim_copy(l->header));
            expected_flat(l->body, out);
        }
    }
}

std::size_t count_by_walk(const scot::Block& block) {
    std::size_t n = 0;
    for (const auto& node : block) {
        if (std::holds_alternative<scot::SeqStep>(node.value)) {
            ++n;
        } else if (const auto* b = std::get_if<scot::Branch>(&node.value)) {
            for (const auto& arm : b->arms) n += 1 + count_by_walk(arm.body);
        } else {
            const auto& l = std::get<scot::Loop>(node.value);
            n += 1 + count_by_walk(l.body);
        }
    }
    return n;
}

std::string ablation_transforms(Check& check) {
    std::mt19937_64 rng(99);
    const int trees = 1000;
    for (int i = 0; i < trees; ++i) {
        testkit::AstGenOptions opts;
        opts.force_depth = i % 4 == 0;
        const auto ast = testkit::random_ast(rng, opts);

        const auto once = scot::strip_io(ast);
        const auto text = scot::render(once);
        check.expect(!once.io && once.body == ast.body, [] { return "strip_io changed the body or kept IO"; });
        check.expect(scot::strip_io(once) == once, [] { return "strip_io not idempotent"; });
        check.expect(text.find("Input:") == std::string::npos && text.find("Output:") == std::string::npos,
                     [&] { return "IO lines survive strip_io:\n" + text; });

        const auto flat = scot::strip_basic_structures(ast);
        const auto counts = scot::count_nodes(ast);
        check.expect(flat.steps.size() == counts.steps + counts.arms + counts.loops &&
                         flat.steps.size() == count_by_walk(ast.body),
                     [&] { return "flat length " + std::to_string(flat.steps.size()) + " != node count"; });
        std::vector<std::string> want;
        expected_flat(ast.body, want);
        check.expect(flat.steps == want, [] { return "flattened order is not depth-first"; });
        check.expect(flat.io == ast.io, [] { return "strip_basic_structures dropped IO"; });
    }
    return std::to_string(trees) + " trees";
}

std::size_t occurrences(const std::string& text, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

std::string prompt_goldens(Check& check) {
    std::set<PromptTechnique> techniques;
    const auto prompts = testkit::golden_prompts();
    for (const auto& g : prompts) {
        const auto path = testkit::golden() / (g.name + ".txt");
        const bool exists = fs::exists(path);
        check.expect(exists, [&] { return "missing golden " + path.string(); });
        if (exists) {
            check.expect(testkit::serialize(g.prompt) == util::read_file(path), [&] { return g.name + " differs from golden"; });
        }
        const auto& text = g.prompt.messages.back().content;
        const auto req = text.find(prompt_layout::kRequirementDelimiter);
        const auto ins = text.find(prompt_layout::kInstructionDelimiter);
        const auto last_ex = text.rfind(prompt_layout::kExampleDelimiter);
        check.expect(occurrences(text, prompt_layout::kExampleDelimiter) == g.examples,
                     [&] { return g.name + ": wrong example count"; });
        check.expect(ins != std::string::npos && req != std::string::npos && ins < req &&
                         (last_ex == std::string::npos || last_ex < ins),
                     [&] { return g.name + ": blocks out of order"; });
        check.expect(g.name.rfind("zero_shot", 0) == 0 || g.examples == 3, [&] { return g.name + ": not 3 examples"; });
    }
    for (auto t : kAllTechniques) techniques.insert(t);
    check.expect(techniques.size() == 7, [] { return "expected 7 techniques"; });
    return std::to_string(prompts.size()) + " prompts over " + std::to_string(techniques.size()) + " techniques";
}

// --------------------------------------------------------------------------

struct Quiet {
    std::ostringstream out;
    std::ostringstream err;
    harness::Io io{out, err};
};

json minimal_config(const fs::path& out, const std::string& technique, const std::string& backend) {
    const auto fx = testkit::fixtures();
    json j = {
        {"benchmark", {{"path", (fx / "mini_bench.jsonl").string()}}},
        {"technique", technique},
        {"backend", {{"kind", backend}}},
        {"output_dir", out.string()},
    };
    if (backend == "mock_oracle") j["backend"]["solutions_path"] = (fx / "mini_oracle.jsonl").string();
    if (technique != "zero_shot" && technique != "few_shot") {
        j["example_set_path"] = (fx / "examples" / (testkit::example_set_for(parse_technique(technique)) + ".jsonl")).string();
    }
    return j;
}

harness::RunOutcome run_config(const json& j, Quiet& q) {
    return harness::cmd_run(harness::config_from_json(j, fs::current_path()), q.io);
}

std::string sampling_contract(Check& check) {
    testkit::ScratchDir dir("accept-sampling");
    std::size_t calls = 0;
    for (const std::string t : {"scot", "cot", "zero_shot"}) {
        Quiet q;
        // Only required keys: everything else comes from the defaults.
        const auto r = run_config(minimal_config(dir / t, t, "mock_oracle"), q);
        check.expect(r.exit_code == 0, [&] { return t + " run failed: " + q.err.str(); });
        if (r.exit_code != 0) continue;
        const auto run = pipeline::load_run(r.run_dir);
        check.expect(run.manifest.n == 20, [&] { return t + ": n=" + std::to_string(run.manifest.n); });
        std::map<std::string, int> per_task;
        for (const auto& c : run.candidates) ++per_task[c.task_id];
        for (const auto& [task, count] : per_task) {
            check.expect(count == 20, [&] { return t + ": " + task + " has " + std::to_string(count) + " samples"; });
        }
        check.expect(per_task.size() == 10, [&] { return t + ": tasks covered " + std::to_string(per_task.size()); });
        calls += r.calls.size();
        for (const auto& call : r.calls) {
            const auto& p = call.params;
            if (t == "scot" && call.purpose == llm::Purpose::intermediate) {
                check.expect(p.temperature == 0.8 && p.top_p == 0.95 && p.max_tokens == 300 && p.n == 20,
                             [&] { return "step-1 params " + llm::to_json(p).dump(); });
            } else if (t == "scot") {
                check.expect(p.temperature == 0.0 && p.max_tokens == 300 && p.n == 1,
                             [&] { return "step-2 params " + llm::to_json(p).dump(); });
            } else if (t == "cot") {
                check.expect(p.temperature == 0.8 && p.top_p == 0.95 && p.max_tokens == 600 && p.n == 20,
                             [&] { return "CoT params " + llm::to_json(p).dump(); });
            } else {
                check.expect(p.temperature == 0.8 && p.top_p == 0.95 && p.max_tokens == 300 && p.n == 20,
                             [&] { return "zero-shot params " + llm::to_json(p).dump(); });
            }
        }
        if (t == "scot") {
            const auto step1 = std::count_if(r.calls.begin(), r.calls.end(),
                                             [](const auto& c) { return c.purpose == llm::Purpose::intermediate; });
            check.expect(step1 == 10 && r.calls.size() == 10 + 200u,
                         [&] { return "scot call count " + std::to_string(r.calls.size()); });
        }
    }
    return std::to_string(calls) + " recorded requests";
}

struct Seeded {
    std::string wrong, broken, spinning;
};

Seeded seeded_candidates(const Task& t) {
    if (t.language == Language::python) {
        return {t.signature + "\n    return None\n", t.signature + "\n    return (\n",
                t.signature + "\n    while True:\n        pass\n"};
    }
    const std::string headers = "#include <string>\n#include <vector>\n";
    return {headers + t.signature + " { return {}; }\n", headers + t.signature + " { return ; \n",
            headers + t.signature + " { volatile int spin = 0; for (;;) { spin = spin + 1; } }\n"};
}

std::string executor_correctness(Check& check) {
    const auto bench = load_benchmark(testkit::fixtures() / "mini_bench.jsonl", BenchmarkFormat::native);
    std::vector<CandidateProgram> cands;
    std::vector<const Task*> tasks;
    std::vector<sandbox::Verdict> expected;
    int py = 0, cc = 0;
    for (const auto& t : bench.test) {
        (t.language == Language::python ? py : cc)++;
        const auto seeded = seeded_candidates(t);
        const std::vector<std::pair<std::string, sandbox::Verdict>> rows = {
            {t.reference_solution.value_or(""), sandbox::Verdict::Pass},
            {seeded.wrong, sandbox::Verdict::WrongAnswer},
            {seeded.broken, sandbox::Verdict::CompileError},
            {seeded.spinning, sandbox::Verdict::Timeout},
        };
        for (const auto& [code, verdict] : rows) {
            CandidateProgram c;
            c.task_id = t.id;
            c.sample_index = static_cast<int>(cands.size());
            c.code = code;
            c.extraction = Extraction::fenced;
            cands.push_back(c);
            tasks.push_back(&t);
            expected.push_back(verdict);
        }
    }
    check.expect(py == 5 && cc == 5, [&] { return "mini benchmark is not 5 Python + 5 C++"; });

    sandbox::ExecPolicy policy;
    policy.cpu_timeout_s = 1.0;
    policy.wall_timeout_s = 10.0;
    std::vector<sandbox::BatchItem> items;
    for (std::size_t i = 0; i < cands.size(); ++i) items.push_back({tasks[i], &cands[i]});
    const auto parallel = sandbox::run_batch(items, policy, 4);
    const auto sequential = sandbox::run_batch(items, policy, 1);
    for (std::size_t i = 0; i < items.size(); ++i) {
        check.expect(parallel[i].verdict == expected[i], [&] {
            return cands[i].task_id + ": got " + sandbox::to_string(parallel[i].verdict) + " want " +
                   sandbox::to_string(expected[i]) + " (" + parallel[i].reason + ")";
        });
        check.expect(parallel[i].verdict == sequential[i].verdict,
                     [&] { return cands[i].task_id + ": batch and sequential verdicts differ"; });
    }
    return std::to_string(items.size()) + " candidates, workers=4 vs sequential";
}

double mean_at(const harness::RunOutcome& r, int k) {
    for (const auto& a : r.report->aggregates) {
        if (a.k == k) return a.mean;
    }
    return std::nan("");
}

std::string end_to_end(Check& check) {
    testkit::ScratchDir dir("accept-e2e");
    Quiet q1;
    const auto oracle_cfg = minimal_config(dir / "oracle", "scot", "mock_oracle");
    const auto oracle = run_config(oracle_cfg, q1);
    check.expect(oracle.exit_code == 0 && oracle.report, [&] { return "oracle run failed: " + q1.err.str(); });
    if (oracle.report) check.expect(mean_at(oracle, 1) == 1.0, [&] { return "oracle pass@1 " + fmt(mean_at(oracle, 1)); });

    Quiet q2;
    const auto sab = run_config(minimal_config(dir / "sab", "scot", "mock_saboteur"), q2);
    check.expect(sab.exit_code == 0 && sab.report, [&] { return "saboteur run failed: " + q2.err.str(); });
    if (sab.report) {
        for (int k : {1, 3, 5}) {
            check.expect(mean_at(sab, k) == 0.0, [&] { return "saboteur pass@" + std::to_string(k) + " " + fmt(mean_at(sab, k)); });
        }
    }

    Quiet q3;
    const auto warm = run_config(oracle_cfg, q3);
    check.expect(warm.exit_code == 0, [&] { return "warm rerun failed: " + q3.err.str(); });
    check.expect(warm.backend_samples == 0 && warm.calls.empty(),
                 [&] { return "warm rerun made " + std::to_string(warm.calls.size()) + " backend calls"; });

    // A new run directory sharing only the cache file.
    auto shared = oracle_cfg;
    shared["output_dir"] = (dir / "oracle-copy").string();
    shared["cache_path"] = (dir / "oracle" / "cache.jsonl").string();
    Quiet q4;
    const auto copy = run_config(shared, q4);
    check.expect(copy.exit_code == 0 && copy.calls.empty(),
                 [&] { return "cache-only rerun made " + std::to_string(copy.calls.size()) + " backend calls"; });
    return "oracle pass@1 " + fmt(oracle.report ? mean_at(oracle, 1) : -1) + ", saboteur pass@5 " +
           fmt(sab.report ? mean_at(sab, 5) : -1) + ", warm-cache calls " + std::to_string(warm.calls.size());
}

// Reference aggregates in percent and their improvement row (baseline CoT, target SCoT).
struct ReferenceRow {
    std::string model, benchmark;
    double cot[3], scot[3], improvement[3];
};

const std::vector<ReferenceRow> kReference = {
    {"ChatGPT", "HumanEval", {53.29, 69.76, 75.52}, {60.64, 73.53, 77.32}, {13.79, 5.40, 2.38}},
    {"ChatGPT", "MBPP", {41.83, 51.04, 54.57}, {46.98, 55.31, 58.36}, {12.31, 8.37, 6.95}},
    {"ChatGPT", "MBCPP", {53.51, 63.84, 67.03}, {57.06, 65.70, 68.70}, {6.63, 2.91, 2.49}},
    {"Codex", "HumanEval", {43.79, 63.41, 71.56}, {49.82, 66.56, 75.14}, {13.77, 4.97, 5.00}},
    {"Codex", "MBPP", {35.66, 46.57, 50.11}, {38.29, 50.74, 53.16}, {7.38, 8.95, 6.09}},
    {"Codex", "MBCPP", {45.79, 58.92, 62.56}, {48.34, 60.77, 64.19}, {5.57, 3.14, 2.61}},
};

std::string table_arithmetic(Check& check) {
    testkit::ScratchDir dir("accept-table");
    int figures = 0;
    const auto write = [&](const std::string& name, const std::string& label, const std::string& bench,
                           const double (&v)[3]) {
        json j = {{"label", label},
                  {"benchmark", bench},
                  {"n", 20},
                  {"aggregate", {{"pass@1", v[0] / 100}, {"pass@3", v[1] / 100}, {"pass@5", v[2] / 100}}}};
        util::write_file(dir / name, j.dump());
        return dir / name;
    };
    std::string headline;
    for (const auto& row : kReference) {
        const auto base = write(row.model + row.benchmark + "-cot.json", "CoT", row.benchmark, row.cot);
        const auto target = write(row.model + row.benchmark + "-scot.json", "SCoT", row.benchmark, row.scot);
        Quiet q;
        harness::CompareOptions opts;
        opts.format = harness::CompareFormat::json;
        const int code = harness::cmd_compare({base, target}, opts, q.io);
        check.expect(code == 0, [&] { return "compare failed: " + q.err.str(); });
        if (code != 0) continue;
        const auto out = json::parse(q.out.str());
        const int ks[3] = {1, 3, 5};
        for (int i = 0; i < 3; ++i) {
            const auto rendered = out["improvement"]["pass@" + std::to_string(ks[i])].get<std::string>();
            const double value = std::stod(rendered);
            ++figures;
            check.expect(std::abs(value - row.improvement[i]) <= 0.01 + 1e-9, [&] {
                return row.model + "/" + row.benchmark + " pass@" + std::to_string(ks[i]) + ": " + rendered + " vs " +
                       fmt(row.improvement[i]);
            });
            if (row.model == "ChatGPT" && row.benchmark == "HumanEval" && ks[i] == 1) headline = rendered;
        }
        Quiet text;
        harness::cmd_compare({base, target}, {}, text.io);
        check.expect(text.out.str().find("improvement") != std::string::npos, [] { return "text table lacks improvement row"; });
    }
    check.expect(headline == "+13.79%", [&] { return "53.29 -> 60.64 rendered " + headline; });
    return "53.29 -> 60.64 renders " + headline + "; " + std::to_string(figures) + " figures checked";
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "estimator matches brute-force enumeration", 5, estimator_oracle},
        {2, "estimator boundary and monotonicity properties", 5, estimator_properties},
        {3, "SCoT round trip and parser fuzzing", 60, scot_round_trip},
        {4, "ablation transforms", 60, ablation_transforms},
        {5, "prompt goldens and layout", 60, prompt_goldens},
        {6, "sampling parameters reach the backend", 120, sampling_contract},
        {7, "executor verdicts and batch determinism", 90, executor_correctness},
        {8, "end-to-end offline runs", 120, end_to_end},
        {9, "relative improvement arithmetic", 60, table_arithmetic},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Check check;
        std::string summary;
        const auto start = std::chrono::steady_clock::now();
        try {
            summary = c.body(check);
        } catch (const std::exception& e) {
            check.problems.push_back(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs > c.budget_s) {
            check.problems.push_back("took " + util::format_fixed(secs, 1) + " s, budget " + util::format_fixed(c.budget_s, 0) + " s");
        }
        const bool ok = check.problems.empty();
        failed += ok ? 0 : 1;
        std::cout << (ok ? "PASS" : "FAIL") << " criterion " << c.number << ": " << c.title << " (" << summary << "; "
                  << check.checked << " checks, " << util::format_fixed(secs, 2) << " s)" << std::endl;
        for (const auto& p : check.problems) std::cout << "    " << p << "\n";
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
