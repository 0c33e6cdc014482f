#include <catch2/catch_amalgamated.hpp>

#include "saev/queueing.hpp"

using namespace saev;

TEST_CASE("queue evolution adds arrivals and removes pickups") {
  QueueState w{{2.0, 0.0, 5.0}};
  QueueState n = evolve_queue(w, {1.0, 2.0, 0.0}, {3.0, 1.0, 2.0});
  REQUIRE(n.waiting[0] == Catch::Approx(0.0));
  REQUIRE(n.waiting[1] == Catch::Approx(1.0));
  REQUIRE(n.waiting[2] == Catch::Approx(3.0));
  REQUIRE(n.total() == Catch::Approx(4.0));

  // picking up more than the post-arrival queue is rejected
  REQUIRE_THROWS(evolve_queue(w, {0.0, 0.0, 0.0}, {2.5, 0.0, 0.0}));
  REQUIRE_THROWS(evolve_queue(w, {0.0, 0.0}, {0.0, 0.0, 0.0}));
}

TEST_CASE("cumulative pickup bound is the running total of queue inflow") {
  // three slots: already-waiting 3, forecast (0, 0, 3)
  auto omega = cumulative_pickup_bound(3.0, {0.0, 0.0, 3.0});
  REQUIRE(omega == std::vector<double>{3.0, 3.0, 6.0});

  auto empty = cumulative_pickup_bound(0.0, {});
  REQUIRE(empty.empty());
}

TEST_CASE("poisson sampling matches its mean over many draws") {
  Rng rng(12345);
  const double lambda = 4.0;
  const int n = 100000;
  long long total = 0;
  long long sq = 0;
  for (int i = 0; i < n; ++i) {
    const int k = rng.poisson(lambda);
    total += k;
    sq += static_cast<long long>(k) * k;
  }
  const double mean = static_cast<double>(total) / n;
  const double var = static_cast<double>(sq) / n - mean * mean;
  // mean and variance both equal lambda; allow 4 standard errors
  REQUIRE(mean == Catch::Approx(lambda).margin(4.0 * 2.0 / std::sqrt(n)));
  REQUIRE(var == Catch::Approx(lambda).epsilon(0.05));
}

TEST_CASE("large rate poisson splitting stays consistent") {
  Rng rng(7);
  const int n = 20000;
  long long total = 0;
  for (int i = 0; i < n; ++i) total += rng.poisson(75.0);
  REQUIRE(static_cast<double>(total) / n == Catch::Approx(75.0).epsilon(0.01));
}

TEST_CASE("seeded streams are reproducible and forks are independent") {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) REQUIRE(a.raw() == b.raw());

  Rng parent(99);
  Rng f1 = parent.fork(1);
  Rng f2 = parent.fork(2);
  Rng f1_again = parent.fork(1);
  REQUIRE(f1.raw() == f1_again.raw());
  REQUIRE(f1.raw() != f2.raw());
  // fork result does not depend on parent draw position
  parent.raw();
  Rng f1_later = parent.fork(1);
  Rng probe = Rng(99).fork(1);
  REQUIRE(f1_later.raw() == probe.raw());
}

TEST_CASE("truncated normal respects its window") {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const double d = rng.truncated_normal(1.0, 0.1, 0.9, 1.1);
    REQUIRE(d >= 0.9);
    REQUIRE(d <= 1.1);
  }
  // degenerate sigma returns the clamped mean
  REQUIRE(rng.truncated_normal(2.0, 0.0, 0.0, 1.0) == 1.0);
}

TEST_CASE("arrival sampling covers every demand pair") {
  Scenario sc;
  sc.demand = {{1, 0, 0.5}, {2, 0, 0.0}, {0, 1, 3.0}};
  Rng rng(11);
  long long sums[3] = {0, 0, 0};
  for (int i = 0; i < 20000; ++i) {
    auto a = sample_arrivals(sc, rng);
    REQUIRE(a.size() == 3);
    for (int p = 0; p < 3; ++p) sums[p] += a[p];
  }
  REQUIRE(sums[1] == 0);
  REQUIRE(static_cast<double>(sums[0]) / 20000 == Catch::Approx(0.5).epsilon(0.05));
  REQUIRE(static_cast<double>(sums[2]) / 20000 == Catch::Approx(3.0).epsilon(0.03));
}
