#include "scotbench/bench.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "scotbench/error.hpp"
#include "scotbench/util.hpp"

namespace scotbench {

using util::json;

const char* to_string(Language lang) {
    return lang == Language::python ? "python" : "cpp";
}

Language parse_language(std::string_view tag) {
    if (tag == "python") return Language::python;
    if (tag == "cpp") return Language::cpp;
    throw Error(ErrorKind::unsupported_language,
                "unsupported language '" + std::string(tag) + "' (expected python or cpp)");
}

BenchmarkFormat parse_benchmark_format(std::string_view name) {
    if (name == "humaneval") return BenchmarkFormat::humaneval;
    if (name == "mbpp") return BenchmarkFormat::mbpp;
    if (name == "mbcpp") return BenchmarkFormat::mbcpp;
    if (name == "native") return BenchmarkFormat::native;
    throw Error(ErrorKind::argument, "unknown benchmark format '" + std::string(name) + "'");
}

const char* to_string(BenchmarkFormat format) {
    switch (format) {
        case BenchmarkFormat::humaneval: return "humaneval";
        case BenchmarkFormat::mbpp: return "mbpp";
        case BenchmarkFormat::mbcpp: return "mbcpp";
        case BenchmarkFormat::native: return "native";
    }
    return "native";
}

const Task* Benchmark::find(std::string_view id) const {
    for (const auto* split : {&train, &test}) {
        for (const auto& task : *split) {
            if (task.id == id) return &task;
        }
    }
    return nullptr;
}

std::vector<std::string> validate_task(const Task& task) {
    std::vector<std::string> diags;
    if (util::trim(task.id).empty()) diags.emplace_back("id is blank");
    const auto markers = util::count_occurrences(task.test_program_template, kCandidateMarker);
    if (markers == 0) {
        diags.emplace_back("missing {{CANDIDATE}}");
    } else if (markers > 1) {
        diags.push_back("marker count " + std::to_string(markers) + " ≠ 1");
    }
    if (task.test_count < 1) {
        diags.push_back("test_count " + std::to_string(task.test_count) + " < 1");
    }
    return diags;
}

std::string instantiate_test_program(const Task& task, std::string_view code) {
    std::string program = task.test_program_template;
    const auto pos = program.find(kCandidateMarker);
    if (pos == std::string::npos) {
        throw Error(ErrorKind::integrity, "task " + task.id + " has no candidate marker");
    }
    program.replace(pos, kCandidateMarker.size(), code);
    return program;
}

namespace {

struct RawRecord {
    Task task;
    Split split = Split::test;
};

std::string id_string(const json& value, std::string_view prefix) {
    if (value.is_number_integer()) return std::string(prefix) + std::to_string(value.get<long long>());
    return value.get<std::string>();
}

std::optional<Split> explicit_split(const json& rec) {
    if (!rec.contains("split") || rec["split"].is_null()) return std::nullopt;
    const auto s = rec["split"].get<std::string>();
    return s == "test" ? Split::test : Split::train;
}

void check_language(const json& rec, Language expected) {
    if (rec.contains("language") && rec["language"].is_string()) {
        if (parse_language(rec["language"].get<std::string>()) != expected) {
            throw Error(ErrorKind::unsupported_language,
                        "language '" + rec["language"].get<std::string>() +
                            "' not supported by this adapter");
        }
    }
}

std::string python_def_line(std::string_view code, std::string_view preferred_name) {
    std::string fallback;
    for (const auto& line : util::split_lines(code)) {
        const auto t = util::trim(line);
        if (!util::starts_with(t, "def ")) continue;
        const auto name_end = t.find('(');
        const auto name = util::trim(t.substr(4, name_end == std::string_view::npos ? t.npos : name_end - 4));
        if (!preferred_name.empty() && preferred_name.find(name) != std::string_view::npos) {
            return std::string(t);
        }
        if (fallback.empty()) fallback = std::string(t);
    }
    return fallback;
}

std::string cpp_signature_line(std::string_view code) {
    for (const auto& line : util::split_lines(code)) {
        const auto t = util::trim(line);
        if (t.empty() || t.front() == '#' || t.find('(') == std::string_view::npos) continue;
        if (util::starts_with(t, "if") || util::starts_with(t, "for") || util::starts_with(t, "while") ||
            util::starts_with(t, "using") || util::starts_with(t, "return")) {
            continue;
        }
        std::string sig(t);
        if (util::ends_with(sig, "{")) sig = util::trim_copy(sig.substr(0, sig.size() - 1));
        return sig;
    }
    return {};
}

RawRecord humaneval_record(const json& rec) {
    check_language(rec, Language::python);
    RawRecord out;
    auto& t = out.task;
    t.id = id_string(rec.at("task_id"), "HumanEval/");
    t.language = Language::python;
    t.requirement = rec.at("prompt").get<std::string>();
    const auto entry = rec.at("entry_point").get<std::string>();
    t.signature = python_def_line(t.requirement, "def " + entry + "(");
    const auto test = rec.at("test").get<std::string>();
    t.test_program_template =
        std::string(kCandidateMarker) + "\n\n" + test + "\n\ncheck(" + entry + ")\n";
    t.test_count = std::max<int>(1, static_cast<int>(util::count_occurrences(test, "assert")));
    if (rec.contains("canonical_solution") && rec["canonical_solution"].is_string()) {
        t.reference_solution = t.requirement + rec["canonical_solution"].get<std::string>();
    }
    out.split = explicit_split(rec).value_or(Split::test);
    return out;
}

RawRecord mbpp_record(const json& rec) {
    check_language(rec, Language::python);
    RawRecord out;
    auto& t = out.task;
    t.id = id_string(rec.at("task_id"), "MBPP/");
    t.language = Language::python;
    const auto tests = rec.at("test_list").get<std::vector<std::string>>();
    const auto code = rec.at("code").get<std::string>();
    t.signature = python_def_line(code, tests.empty() ? std::string_view{} : std::string_view(tests.front()));
    t.requirement = util::trim_copy(rec.at("text").get<std::string>());
    if (!t.signature.empty()) t.requirement += "\n" + t.signature;
    std::string tmpl;
    if (rec.contains("test_setup_code") && rec["test_setup_code"].is_string()) {
        const auto setup = rec["test_setup_code"].get<std::string>();
        if (!util::trim(setup).empty()) tmpl += setup + "\n";
    }
    tmpl += std::string(kCandidateMarker) + "\n\n";
    for (const auto& assertion : tests) tmpl += assertion + "\n";
    t.test_program_template = std::move(tmpl);
    t.test_count = static_cast<int>(tests.size());
    t.reference_solution = code;
    if (auto split = explicit_split(rec)) {
        out.split = *split;
    } else if (rec.at("task_id").is_number_integer()) {
        // Original MBPP ranges: 11-510 test, everything else train/validation/prompt.
        const auto n = rec["task_id"].get<long long>();
        out.split = (n >= 11 && n <= 510) ? Split::test : Split::train;
    }
    return out;
}

std::string unwrap_cpp_assertion(std::string_view raw) {
    auto s = util::trim(raw);
    while (!s.empty() && s.back() == ';') s = util::trim(s.substr(0, s.size() - 1));
    if (util::starts_with(s, "assert")) {
        auto rest = util::trim(s.substr(6));
        if (rest.size() >= 2 && rest.front() == '(' && rest.back() == ')') {
            return std::string(util::trim(rest.substr(1, rest.size() - 2)));
        }
        return std::string(rest);
    }
    return std::string(s);
}

RawRecord mbcpp_record(const json& rec) {
    check_language(rec, Language::cpp);
    RawRecord out;
    auto& t = out.task;
    t.id = id_string(rec.at("task_id"), "MBCPP/");
    t.language = Language::cpp;
    const auto tests = rec.at("test_list").get<std::vector<std::string>>();
    const auto code = rec.at("code").get<std::string>();
    t.signature = cpp_signature_line(code);
    t.requirement = util::trim_copy(rec.at("text").get<std::string>());
    if (!t.signature.empty()) t.requirement += "\n" + t.signature;
    std::string tmpl = "#include <bits/stdc++.h>\nusing namespace std;\n";
    if (rec.contains("test_setup_code") && rec["test_setup_code"].is_string()) {
        const auto setup = rec["test_setup_code"].get<std::string>();
        if (!util::trim(setup).empty()) tmpl += setup + "\n";
    }
    tmpl += "\n" + std::string(kCandidateMarker) + "\n\nint main() {\n";
    for (const auto& assertion : tests) {
        tmpl += "    if (!(" + unwrap_cpp_assertion(assertion) + ")) return 1;\n";
    }
    tmpl += "    return 0;\n}\n";
    t.test_program_template = std::move(tmpl);
    t.test_count = static_cast<int>(tests.size());
    t.reference_solution = code;
    out.split = explicit_split(rec).value_or(Split::test);
    return out;
}

RawRecord native_record(const json& rec) {
    RawRecord out;
    auto& t = out.task;
    t.id = rec.at("id").get<std::string>();
    t.language = parse_language(rec.at("language").get<std::string>());
    t.requirement = rec.at("requirement").get<std::string>();
    t.signature = rec.at("signature").get<std::string>();
    t.test_program_template = rec.at("test_program_template").get<std::string>();
    t.test_count = rec.at("test_count").get<int>();
    if (rec.contains("reference_solution") && !rec["reference_solution"].is_null()) {
        t.reference_solution = rec["reference_solution"].get<std::string>();
    }
    const auto split = rec.at("split").get<std::string>();
    if (split != "train" && split != "test") {
        throw Error(ErrorKind::ingestion, "split must be 'train' or 'test', got '" + split + "'");
    }
    out.split = split == "train" ? Split::train : Split::test;
    return out;
}

}  // namespace

Benchmark load_benchmark(const std::filesystem::path& path, BenchmarkFormat format) {
    Benchmark bench;
    bench.name = path.stem().string();
    std::set<std::string> seen;
    std::size_t records = 0;
    util::for_each_jsonl(path, [&](std::size_t line, const json& rec) {
        const auto where = path.string() + ":" + std::to_string(line);
        RawRecord raw;
        try {
            if (!rec.is_object()) throw Error(ErrorKind::ingestion, "record is not a JSON object");
            switch (format) {
                case BenchmarkFormat::humaneval: raw = humaneval_record(rec); break;
                case BenchmarkFormat::mbpp: raw = mbpp_record(rec); break;
                case BenchmarkFormat::mbcpp: raw = mbcpp_record(rec); break;
                case BenchmarkFormat::native: raw = native_record(rec); break;
            }
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ingestion, where + ": malformed record: " + e.what());
        } catch (const Error& e) {
            throw Error(e.kind(), where + ": " + e.what());
        }
        if (const auto diags = validate_task(raw.task); !diags.empty()) {
            throw Error(ErrorKind::ingestion, where + ": invalid task: " + util::join(diags, "; "));
        }
        if (!seen.insert(raw.task.id).second) {
            throw Error(ErrorKind::integrity, where + ": duplicate task id '" + raw.task.id + "'");
        }
        ++records;
        (raw.split == Split::train ? bench.train : bench.test).push_back(std::move(raw.task));
    });
    if (records == 0) throw Error(ErrorKind::ingestion, path.string() + ": no records");
    if (bench.test.empty()) {
        throw Error(ErrorKind::integrity, path.string() + ": benchmark has no test tasks");
    }
    return bench;
}

std::string to_native_jsonl(const Benchmark& bench) {
    std::ostringstream out;
    auto emit = [&](const Task& t, const char* split) {
        nlohmann::ordered_json rec;
        rec["id"] = t.id;
        rec["language"] = to_string(t.language);
        rec["requirement"] = t.requirement;
        rec["signature"] = t.signature;
        rec["test_program_template"] = t.test_program_template;
        rec["test_count"] = t.test_count;
        rec["split"] = split;
        if (t.reference_solution) rec["reference_solution"] = *t.reference_solution;
        out << rec.dump() << '\n';
    };
    for (const auto& t : bench.train) emit(t, "train");
    for (const auto& t : bench.test) emit(t, "test");
    return out.str();
}

void save_native(const Benchmark& bench, const std::filesystem::path& path) {
    util::write_file(path, to_native_jsonl(bench));
}

std::vector<ExampleSeed> select_example_seeds(const Benchmark& bench, std::size_t count,
                                              std::uint64_t rng_seed) {
    if (bench.train.empty()) {
        throw Error(ErrorKind::donor_required,
                    "benchmark '" + bench.name +
                        "' has no train split; supply a donor benchmark (e.g. MBPP) with --donor");
    }
    if (count == 0 || count > bench.train.size()) {
        throw Error(ErrorKind::precondition,
                    "cannot draw " + std::to_string(count) + " seeds from " +
                        std::to_string(bench.train.size()) + " train tasks");
    }
    std::vector<std::size_t> order(bench.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(rng_seed);
    std::vector<ExampleSeed> seeds;
    seeds.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(rng() % (order.size() - i));
        std::swap(order[i], order[j]);
        const auto& task = bench.train[order[i]];
        if (!task.reference_solution) {
            throw Error(ErrorKind::precondition,
                        "train task " + task.id + " has no reference solution to seed from");
        }
        seeds.push_back({task.id, task.requirement, *task.reference_solution});
    }
    return seeds;
}

}  // namespace scotbench
