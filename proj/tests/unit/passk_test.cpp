#include <gtest/gtest.h>

#include <random>

#include "generators.hpp"
#include "scotbench/error.hpp"
#include "scotbench/passk.hpp"

using namespace scotbench;
using namespace scotbench::passk;
using sandbox::Verdict;

TEST(PassAtK, Examples) {
    EXPECT_EQ(pass_at_k(20, 0, 5), 0.0);
    EXPECT_NEAR(pass_at_k(5, 2, 3), 0.9, 1e-15);
    EXPECT_EQ(pass_at_k(20, 10, 1), 0.5);
}

TEST(PassAtK, MatchesSubsetEnumeration) {
    for (int n = 1; n <= 12; ++n) {
        for (int c = 0; c <= n; ++c) {
            for (int k = 1; k <= n; ++k) {
                EXPECT_NEAR(pass_at_k(n, c, k), testkit::brute_force_pass_at_k(n, c, k), 1e-12)
                    << n << " " << c << " " << k;
            }
        }
    }
}

TEST(PassAtK, BoundariesAreExact) {
    for (int n = 1; n <= 40; ++n) {
        for (int k = 1; k <= n; ++k) {
            EXPECT_EQ(pass_at_k(n, 0, k), 0.0);
            for (int c = n - k + 1; c <= n; ++c) EXPECT_EQ(pass_at_k(n, c, k), 1.0);
        }
    }
}

TEST(PassAtK, PassAtOneIsFraction) {
    for (int n = 1; n <= 64; ++n) {
        for (int c = 0; c <= n; ++c) EXPECT_EQ(pass_at_k(n, c, 1), static_cast<double>(c) / n);
    }
}

TEST(PassAtK, LargeInputsStayInRange) {
    const double v = pass_at_k(200, 100, 100);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_GT(v, 0.999999);
    EXPECT_EQ(pass_at_k(1000, 1, 1000), 1.0);
}

TEST(PassAtK, Monotone) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        const int n = std::uniform_int_distribution<int>(1, 200)(rng);
        const int c = std::uniform_int_distribution<int>(0, n)(rng);
        const int k = std::uniform_int_distribution<int>(1, n)(rng);
        const double v = pass_at_k(n, c, k);
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        if (k < n) ASSERT_LE(v, pass_at_k(n, c, k + 1)) << n << " " << c << " " << k;
        if (c < n) ASSERT_LE(v, pass_at_k(n, c + 1, k)) << n << " " << c << " " << k;
    }
}

TEST(PassAtK, RejectsBadArguments) {
    EXPECT_THROW(pass_at_k(5, 6, 1), Error);
    EXPECT_THROW(pass_at_k(5, -1, 1), Error);
    EXPECT_THROW(pass_at_k(5, 2, 0), Error);
    EXPECT_THROW(pass_at_k(5, 2, 6), Error);
    EXPECT_THROW(pass_at_k(0, 0, 1), Error);
}

TEST(PassStats, CountsPasses) {
    std::vector<Verdict> v(20, Verdict::WrongAnswer);
    for (int i = 0; i < 7; ++i) v[static_cast<std::size_t>(i)] = Verdict::Pass;
    v[10] = Verdict::Timeout;
    v[11] = Verdict::CompileError;
    const auto s = stats_from_verdicts("t", v);
    EXPECT_EQ(s.n, 20);
    EXPECT_EQ(s.c, 7);
}

TEST(PassStats, HarnessErrorIsRejected) {
    try {
        stats_from_verdicts("t", {Verdict::Pass, Verdict::HarnessError});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::scoring);
    }
}

TEST(PassAggregate, Mean) {
    const auto a = aggregate({{"a", 2, 1}, {"b", 2, 2}}, 1);
    EXPECT_EQ(a.mean, 0.75);
    EXPECT_EQ(a.per_task.at("a"), 0.5);
    EXPECT_EQ(aggregate({{"x", 5, 2}}, 3).mean, pass_at_k(5, 2, 3));
    for (int k = 1; k <= 4; ++k) EXPECT_EQ(aggregate({{"a", 4, 4}, {"b", 4, 4}}, k).mean, 1.0);
}

TEST(PassAggregate, Errors) {
    EXPECT_THROW(aggregate({}, 1), Error);
    EXPECT_THROW(aggregate({{"a", 5, 1}, {"b", 4, 1}}, 1), Error);
    EXPECT_THROW(aggregate({{"a", 5, 1}}, 6), Error);
    EXPECT_THROW(aggregate({{"a", 5, 1}}, 0), Error);
}

TEST(PassReport, JsonAndCsvAreSortedAndConsistent) {
    const auto report = build_report({{"b", 4, 1}, {"a", 4, 3}}, {1, 2});
    EXPECT_EQ(report.tasks.front().task_id, "a");
    const auto j = to_json(report);
    EXPECT_EQ(j["n"], 4);
    EXPECT_EQ(j["per_task"][0]["task_id"], "a");
    EXPECT_DOUBLE_EQ(j["aggregate"]["pass@1"].get<double>(), (0.75 + 0.25) / 2);
    const auto csv = to_csv(report);
    EXPECT_EQ(csv.rfind("task_id,k,value\na,1,0.75\na,2,1\nb,1,0.25\nb,2,0.5\naggregate,1,0.5\n", 0), 0u) << csv;
    EXPECT_THROW(build_report({{"a", 4, 1}, {"a", 4, 1}}, {1}), Error);
}

TEST(PassReport, RelativeImprovement) {
    EXPECT_EQ(relative_improvement(0.50, 0.60), "+20.00%");
    EXPECT_EQ(relative_improvement(0.5, 0.5), "0.00%");
    EXPECT_EQ(relative_improvement(0.5, 0.500001), "0.00%");
    EXPECT_EQ(relative_improvement(0.5329, 0.6064), "+13.79%");
    EXPECT_EQ(relative_improvement(0.6, 0.5), "-16.67%");
}
