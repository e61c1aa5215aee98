#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <thread>
#include <vector>

#include "volbound/parallel.hpp"
#include "volbound/rng.hpp"

using namespace volbound;

TEST_CASE("substreams are reproducible and distinct") {
  RngStream a = rng_substream(42, 3);
  RngStream b = rng_substream(42, 3);
  RngStream c = rng_substream(42, 4);
  RngStream d = rng_substream(43, 3);
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    CHECK(x != c.normal());
    CHECK(x != d.normal());
  }
}

TEST_CASE("child streams depend on parent key and index only") {
  const RngStream parent(7, 1);
  RngStream c1 = parent.child(5);
  RngStream parent2(7, 1);
  parent2.normal();  // advancing the parent does not move its children
  RngStream c2 = parent2.child(5);
  CHECK(c1.next_u64() == c2.next_u64());
  CHECK(parent.child(5).key() != parent.child(6).key());
}

TEST_CASE("normal draws have unit variance") {
  RngStream s(1, 0);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(double(n)));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("default_workers honours VOLBOUND_WORKERS") {
  ::setenv("VOLBOUND_WORKERS", "3", 1);
  CHECK(default_workers() == 3u);
  ::setenv("VOLBOUND_WORKERS", "garbage", 1);
  CHECK(default_workers() == std::max(1u, std::thread::hardware_concurrency()));
  ::unsetenv("VOLBOUND_WORKERS");
  CHECK(default_workers() == std::max(1u, std::thread::hardware_concurrency()));
}

TEST_CASE("parallel_blocks visits every block once") {
  for (unsigned w : {1u, 2u, 8u}) {
    std::vector<std::atomic<int>> hits(97);
    parallel_blocks(hits.size(), w, [&](std::size_t b) { hits[b]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("parallel_blocks rethrows worker exceptions") {
  CHECK_THROWS_AS(parallel_blocks(10, 4,
                                  [](std::size_t b) {
                                    if (b == 6) throw std::runtime_error("boom");
                                  }),
                  std::runtime_error);
}
