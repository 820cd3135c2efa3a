#include "scotbench/passk.hpp"

#include <algorithm>
#include <cstdio>
#include <string_view>

#include "scotbench/error.hpp"

namespace scotbench::passk {

double pass_at_k(int n, int c, int k) {
    if (n < 1 || c < 0 || c > n || k < 1 || k > n) {
        throw Error(ErrorKind::argument, "pass@k needs 0 <= c <= n and 1 <= k <= n (n=" + std::to_string(n) +
                                             ", c=" + std::to_string(c) + ", k=" + std::to_string(k) + ")");
    }
    if (c == 0) return 0.0;
    if (n - c < k) return 1.0;
    if (k == 1) return static_cast<double>(c) / n;
    // 1 - C(n-c, k) / C(n, k) as a running product.
    double miss = 1.0;
    for (int i = 0; i < k; ++i) {
        miss *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
    }
    return std::clamp(1.0 - miss, 0.0, 1.0);
}

TaskStats stats_from_verdicts(const std::string& task_id, const std::vector<sandbox::Verdict>& verdicts) {
    TaskStats s{task_id, static_cast<int>(verdicts.size()), 0};
    for (auto v : verdicts) {
        if (v == sandbox::Verdict::HarnessError) {
            throw Error(ErrorKind::scoring, "task " + task_id + " has a HarnessError verdict; rerun execution");
        }
        if (v == sandbox::Verdict::Pass) ++s.c;
    }
    return s;
}

Aggregate aggregate(const std::vector<TaskStats>& stats, int k) {
    if (stats.empty()) throw Error(ErrorKind::scoring, "no tasks to score");
    const int n = stats.front().n;
    for (const auto& s : stats) {
        if (s.n != n) {
            throw Error(ErrorKind::scoring, "task " + s.task_id + " has " + std::to_string(s.n) +
                                                " samples, expected " + std::to_string(n));
        }
    }
    if (k < 1 || k > n) {
        throw Error(ErrorKind::scoring, "k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    Aggregate a;
    a.k = k;
    double sum = 0.0;
    for (const auto& s : stats) {
        const double v = pass_at_k(s.n, s.c, k);
        a.per_task[s.task_id] = v;
    }
    for (const auto& [id, v] : a.per_task) sum += v;  // sorted order keeps the sum reproducible
    a.mean = sum / static_cast<double>(a.per_task.size());
    return a;
}

Report build_report(std::vector<TaskStats> stats, const std::vector<int>& k_values) {
    if (k_values.empty()) throw Error(ErrorKind::scoring, "k list is empty");
    std::sort(stats.begin(), stats.end(),
              [](const TaskStats& a, const TaskStats& b) { return a.task_id < b.task_id; });
    for (std::size_t i = 1; i < stats.size(); ++i) {
        if (stats[i].task_id == stats[i - 1].task_id) {
            throw Error(ErrorKind::scoring, "duplicate task " + stats[i].task_id);
        }
    }
    Report r;
    r.k_values = k_values;
    r.tasks = std::move(stats);
    for (int k : k_values) r.aggregates.push_back(aggregate(r.tasks, k));
    r.n = r.tasks.front().n;
    return r;
}

nlohmann::ordered_json to_json(const Report& report) {
    nlohmann::ordered_json j;
    j["k_values"] = report.k_values;
    j["n"] = report.n;
    auto per_task = nlohmann::ordered_json::array();
    for (const auto& t : report.tasks) {
        nlohmann::ordered_json row;
        row["task_id"] = t.task_id;
        row["n"] = t.n;
        row["c"] = t.c;
        nlohmann::ordered_json values;
        for (const auto& a : report.aggregates) values["pass@" + std::to_string(a.k)] = a.per_task.at(t.task_id);
        row["pass_at_k"] = std::move(values);
        per_task.push_back(std::move(row));
    }
    j["per_task"] = std::move(per_task);
    nlohmann::ordered_json agg;
    for (const auto& a : report.aggregates) agg["pass@" + std::to_string(a.k)] = a.mean;
    j["aggregate"] = std::move(agg);
    return j;
}

namespace {

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string to_csv(const Report& report) {
    std::string out = "task_id,k,value\n";
    for (const auto& t : report.tasks) {
        for (const auto& a : report.aggregates) {
            out += t.task_id + "," + std::to_string(a.k) + "," + g17(a.per_task.at(t.task_id)) + "\n";
        }
    }
    for (const auto& a : report.aggregates) out += "aggregate," + std::to_string(a.k) + "," + g17(a.mean) + "\n";
    return out;
}

std::string relative_improvement(double baseline, double target) {
    if (baseline == 0.0) return target == 0.0 ? "0.00%" : "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.2f%%", (target - baseline) / baseline * 100.0);
    // No sign on a change that rounds to zero.
    if (std::string_view(buf + 1) == "0.00%") return "0.00%";
    return buf;
}

}  // namespace scotbench::passk
