#include <gtest/gtest.h>

#include <filesystem>

#include "scotbench/bench.hpp"
#include "scotbench/error.hpp"
#include "scotbench/sandbox.hpp"
#include "scotbench/util.hpp"
#include "test_support.hpp"

using namespace scotbench;
using namespace scotbench::sandbox;

namespace {

const Benchmark& mini() {
    static const Benchmark b = load_benchmark(testkit::fixtures() / "mini_bench.jsonl", BenchmarkFormat::native);
    return b;
}

const Task& task(std::string_view id) { return *mini().find(id); }

CandidateProgram cand(const Task& t, std::string code, int index = 0) {
    CandidateProgram c;
    c.task_id = t.id;
    c.sample_index = index;
    c.code = std::move(code);
    c.extraction = Extraction::fenced;
    return c;
}

ExecPolicy fast_policy() {
    ExecPolicy p;
    p.wall_timeout_s = 3.0;
    p.cpu_timeout_s = 2.0;
    return p;
}

Verdict verdict(const Task& t, const std::string& code, const ExecPolicy& policy = fast_policy()) {
    return evaluate_candidate(t, cand(t, code), policy).verdict;
}

}  // namespace

TEST(Verdicts, NamesRoundTrip) {
    for (auto v : {Verdict::Pass, Verdict::WrongAnswer, Verdict::CompileError, Verdict::RuntimeError,
                   Verdict::Timeout, Verdict::ResourceLimit, Verdict::HarnessError}) {
        EXPECT_EQ(parse_verdict(to_string(v)), v);
    }
    EXPECT_THROW(parse_verdict("Maybe"), Error);
}

TEST(Policy, Validate) {
    EXPECT_NO_THROW(ExecPolicy{}.validate());
    auto p = fast_policy();
    p.wall_timeout_s = 1.0;
    p.cpu_timeout_s = 2.0;
    EXPECT_THROW(p.validate(), Error);
    p = fast_policy();
    p.max_output_bytes = 0;
    EXPECT_THROW(p.validate(), Error);
}

TEST(ResultJson, RoundTrip) {
    ExecutionResult r;
    r.verdict = Verdict::RuntimeError;
    r.exit_code = 3;
    r.duration_ms = 12;
    r.stderr_tail = "boom";
    r.reason = "exit code 3";
    const auto back = execution_result_from_json(nlohmann::json::parse(to_json(r).dump()));
    EXPECT_EQ(back.verdict, r.verdict);
    EXPECT_EQ(back.exit_code, r.exit_code);
    EXPECT_EQ(back.stderr_tail, r.stderr_tail);
    EXPECT_EQ(back.reason, r.reason);
}

TEST(Python, VerdictTaxonomy) {
    const auto& t = task("mini/py_add");
    EXPECT_EQ(verdict(t, "def add(a, b):\n    return a + b"), Verdict::Pass);
    EXPECT_EQ(verdict(t, "def add(a, b):\n    return a - b"), Verdict::WrongAnswer);
    EXPECT_EQ(verdict(t, "def add(a, b:\n    return a + b"), Verdict::CompileError);
    EXPECT_EQ(verdict(t, "def add(a, b):\n  x = 1\n    return a + b"), Verdict::CompileError);
    EXPECT_EQ(verdict(t, "def add(a, b):\n    return a + b + undefined_name"), Verdict::RuntimeError);
    EXPECT_EQ(verdict(t, "def add(a, b):\n    while True:\n        pass"), Verdict::Timeout);
    EXPECT_EQ(verdict(t, "import sys\ndef add(a, b):\n    sys.exit(4)"), Verdict::WrongAnswer);
}

TEST(Python, MemoryLimit) {
    auto p = fast_policy();
    p.max_memory_bytes = 256u << 20;
    EXPECT_EQ(verdict(task("mini/py_add"), "x = bytearray(2 << 30)\ndef add(a, b):\n    return a + b", p),
              Verdict::ResourceLimit);
}

TEST(Python, NoCodeIsWrongAnswerWithoutRunning) {
    const auto& t = task("mini/py_add");
    auto c = cand(t, "");
    c.extraction_failed = true;
    const auto r = evaluate_candidate(t, c, fast_policy());
    EXPECT_EQ(r.verdict, Verdict::WrongAnswer);
    EXPECT_FALSE(r.exit_code);
}

TEST(Python, OutputIsTruncatedToTail) {
    auto p = fast_policy();
    p.max_output_bytes = 1024;
    const auto r = evaluate_candidate(
        task("mini/py_add"),
        cand(task("mini/py_add"), "import sys\nsys.stdout.write('a' * 500000 + 'END')\ndef add(a, b):\n    return a + b"),
        p);
    EXPECT_EQ(r.verdict, Verdict::Pass);
    EXPECT_LE(r.stdout_tail.size(), 1024u);
    EXPECT_TRUE(util::ends_with(r.stdout_tail, "END"));
}

TEST(Cpp, VerdictTaxonomy) {
    const auto& t = task("mini/cpp_gcd");
    ASSERT_TRUE(t.reference_solution);
    EXPECT_EQ(verdict(t, *t.reference_solution), Verdict::Pass);
    EXPECT_EQ(verdict(t, "int gcd_of(int a, int b) { return a + b; }"), Verdict::WrongAnswer);
    EXPECT_EQ(verdict(t, "int gcd_of(int a, int b) { return a +; }"), Verdict::CompileError);
    EXPECT_EQ(verdict(t, "#include <cstdlib>\nint gcd_of(int, int) { std::abort(); }"), Verdict::RuntimeError);
    EXPECT_EQ(verdict(t, "int gcd_of(int a, int b) { volatile int x = 0; while (true) { x = x + 1; } return a; }"),
              Verdict::Timeout);
}

TEST(Process, WallTimeoutKillsSleepers) {
    testkit::ScratchDir dir("proc");
    ProcessLimits limits;
    limits.wall_timeout_s = 0.5;
    const auto raw = run_process({"sleep", "5"}, dir.path(), limits);
    EXPECT_EQ(raw.status, OutcomeStatus::wall_timeout);
    EXPECT_LT(raw.duration_ms, 3000);
}

TEST(Process, MissingBinaryIsSpawnFailure) {
    testkit::ScratchDir dir("proc");
    const auto raw = run_process({"definitely-not-a-binary-xyz"}, dir.path(), ProcessLimits{});
    EXPECT_EQ(raw.status, OutcomeStatus::spawn_failed);

    const auto& t = task("mini/py_add");
    auto p = fast_policy();
    p.python_cmd = {"definitely-not-a-binary-xyz"};
    EXPECT_EQ(verdict(t, "def add(a, b):\n    return a + b", p), Verdict::HarnessError);
}

TEST(Process, RunsInScratchWorkdir) {
    testkit::ScratchDir dir("proc");
    const auto raw = run_process({"sh", "-c", "pwd; echo err >&2; exit 7"}, dir.path(), ProcessLimits{});
    EXPECT_EQ(raw.status, OutcomeStatus::exited);
    EXPECT_EQ(raw.exit_code, 7);
    EXPECT_EQ(std::filesystem::canonical(util::trim_copy(raw.stdout_tail)), std::filesystem::canonical(dir.path()));
    EXPECT_EQ(raw.stderr_tail, "err\n");
}

TEST(Artifacts, WrittenPerSample) {
    testkit::ScratchDir dir("artifacts");
    auto p = fast_policy();
    p.keep_artifacts = true;
    p.artifacts_dir = dir.path();
    const auto& t = task("mini/py_add");
    const auto r = evaluate_candidate(t, cand(t, "def add(a, b):\n    return a - b", 4), p);
    EXPECT_EQ(r.verdict, Verdict::WrongAnswer);
    const auto base = dir / "mini_py_add" / "4";
    EXPECT_TRUE(std::filesystem::exists(base / "program"));
    EXPECT_TRUE(std::filesystem::exists(base / "stderr"));
    const auto stored = execution_result_from_json(nlohmann::json::parse(util::read_file(base / "result.json")));
    EXPECT_EQ(stored.verdict, Verdict::WrongAnswer);
    EXPECT_NE(util::read_file(base / "program").find("assert add(1, 2) == 3"), std::string::npos);
}

TEST(Batch, MatchesSequentialAndKeepsOrder) {
    const auto& b = mini();
    std::vector<CandidateProgram> cands;
    std::vector<const Task*> tasks;
    int index = 0;
    for (const auto& t : b.test) {
        cands.push_back(cand(t, *t.reference_solution, index++));
        tasks.push_back(&t);
        cands.push_back(cand(t, t.language == Language::python ? "x = (" : "int broken(", index++));
        tasks.push_back(&t);
    }
    std::vector<BatchItem> items;
    for (std::size_t i = 0; i < cands.size(); ++i) items.push_back({tasks[i], &cands[i]});
    const auto parallel = run_batch(items, fast_policy(), 4);
    const auto sequential = run_batch(items, fast_policy(), 1);
    ASSERT_EQ(parallel.size(), items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        EXPECT_EQ(parallel[i].verdict, sequential[i].verdict) << cands[i].task_id;
        EXPECT_EQ(parallel[i].verdict, i % 2 == 0 ? Verdict::Pass : Verdict::CompileError) << cands[i].task_id;
    }
}
