#pragma once

// Passenger queue bookkeeping per origin-destination pair, demand sampling
// and the cumulative pickup bound used when per-step queue dynamics are
// relaxed to an aggregate constraint.

#include <stdexcept>
#include <vector>

#include "saev/rng.hpp"
#include "saev/scenario.hpp"

namespace saev {

// Waiting passengers, indexed like Scenario::demand.
struct QueueState {
  std::vector<double> waiting;

  static QueueState empty(const Scenario& sc) {
    return {std::vector<double>(sc.demand.size(), 0.0)};
  }

  double total() const {
    double t = 0.0;
    for (double w : waiting) t += w;
    return t;
  }
};

// Expected arrivals per pair and horizon slot; slot 0 is the current step
// whose arrivals are already merged into the queue, so forecasts start at 0.
struct DemandForecast {
  std::vector<std::vector<double>> mean;  // [pair][slot]

  static DemandForecast constant_rates(const Scenario& sc, int horizon) {
    DemandForecast f;
    f.mean.assign(sc.demand.size(), std::vector<double>(horizon, 0.0));
    for (std::size_t p = 0; p < sc.demand.size(); ++p)
      for (int t = 1; t < horizon; ++t)
        f.mean[p][t] = sc.demand[p].rate_per_step;
    return f;
  }
};

inline std::vector<int> sample_arrivals(const Scenario& sc, Rng& rng) {
  std::vector<int> out(sc.demand.size(), 0);
  for (std::size_t p = 0; p < sc.demand.size(); ++p)
    out[p] = rng.poisson(sc.demand[p].rate_per_step);
  return out;
}

// w' = w + arrivals - pickups, elementwise; pickups may not exceed the
// post-arrival queue.
inline QueueState evolve_queue(const QueueState& w,
                               const std::vector<double>& arrivals,
                               const std::vector<double>& pickups) {
  if (arrivals.size() != w.waiting.size() ||
      pickups.size() != w.waiting.size())
    throw std::invalid_argument("evolve_queue: size mismatch");
  QueueState out = w;
  for (std::size_t p = 0; p < w.waiting.size(); ++p) {
    const double avail = w.waiting[p] + arrivals[p];
    if (pickups[p] > avail + 1e-9)
      throw std::invalid_argument("evolve_queue: pickups exceed the queue");
    out.waiting[p] = std::max(0.0, avail - pickups[p]);
  }
  return out;
}

// omega(t') = w + sum_{tau <= t'} dtil(tau): the largest number of pickups
// any dispatch can cumulatively perform on this pair through slot t'.
inline std::vector<double> cumulative_pickup_bound(
    double waiting_now, const std::vector<double>& forecast) {
  std::vector<double> omega(forecast.size(), 0.0);
  double run = waiting_now;
  for (std::size_t t = 0; t < forecast.size(); ++t) {
    run += forecast[t];
    omega[t] = run;
  }
  return omega;
}

}  // namespace saev
