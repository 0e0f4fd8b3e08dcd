#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "trendwatch/parallel.hpp"

using namespace trendwatch;

TEST(Parallel, EveryIndexRunsOnce) {
  for (int jobs : {1, 2, 4, 16}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

TEST(Parallel, LowestFailingIndexWins) {
  for (int jobs : {1, 3}) {
    try {
      parallel_for(200, jobs, [](std::size_t i) {
        if (i == 37 || i == 150) throw std::runtime_error(std::to_string(i));
      });
      FAIL() << "no exception";
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "37");
    }
  }
}

TEST(Parallel, ResolveJobs) {
  EXPECT_EQ(resolve_jobs(3), 3);
  ::setenv("TRENDWATCH_JOBS", "5", 1);
  EXPECT_EQ(resolve_jobs(0), 5);
  EXPECT_EQ(resolve_jobs(2), 2);
  ::setenv("TRENDWATCH_JOBS", "lots", 1);
  EXPECT_GE(resolve_jobs(0), 1);
  ::unsetenv("TRENDWATCH_JOBS");
  EXPECT_GE(resolve_jobs(0), 1);
}
