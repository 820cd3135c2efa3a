#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "scotbench/sandbox.hpp"

namespace scotbench::passk {

/// Unbiased estimator of the probability that at least one of k samples drawn
/// without replacement from n (c of them correct) passes.
/// Requires 0 <= c <= n and 1 <= k <= n; throws Error{argument} otherwise.
double pass_at_k(int n, int c, int k);

struct TaskStats {
    std::string task_id;
    int n = 0;
    int c = 0;

    bool operator==(const TaskStats&) const = default;
};

/// Counts Pass verdicts. Throws Error{scoring} on a HarnessError verdict.
TaskStats stats_from_verdicts(const std::string& task_id, const std::vector<sandbox::Verdict>& verdicts);

struct Aggregate {
    int k = 0;
    double mean = 0.0;
    std::map<std::string, double> per_task;  // sorted by task id
};

/// Every task must have the same n. Throws Error{scoring} for empty input,
/// unequal n, or k outside [1, n].
Aggregate aggregate(const std::vector<TaskStats>& stats, int k);

struct Report {
    std::vector<int> k_values;
    int n = 0;
    std::vector<TaskStats> tasks;      // sorted by task id
    std::vector<Aggregate> aggregates;  // same order as k_values
};

Report build_report(std::vector<TaskStats> stats, const std::vector<int>& k_values);

nlohmann::ordered_json to_json(const Report& report);
/// task_id,k,value rows plus one "aggregate" row per k.
std::string to_csv(const Report& report);

/// "+13.79%" style relative change of `target` over `baseline`.
std::string relative_improvement(double baseline, double target);

}  // namespace scotbench::passk
