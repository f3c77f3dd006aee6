#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "pq/asympt.hpp"
#include "pq/model.hpp"

namespace pq {

struct Point {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend auto operator<=>(const Point&, const Point&) = default;
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t reps = 0;
  double bias_budget = 0.0;  // one-sided, from early stopping / horizon caps
  struct Meta {
    std::uint64_t seed = 0;
    std::uint64_t stream_count = 0;
    double wall_time = 0.0;  // seconds; never written to reproducible outputs
  } meta;
};

/// Success event for the walk estimators.
enum class EntryRule {
  /// max_k w1_k > x and max_k w2_k > y, possibly at different times.
  /// This is the event {Q1 > x, Q2 > y} of the stationary law.
  kJointMaxima,
  /// w1_n > x and w2_n > y at one common n.
  kSimultaneous
};

struct McOptions {
  unsigned threads = 1;
};

/// Per-replication ergodic fractions of slots with Q1 > x and Q2 > y,
/// observed over slots burnin+1..horizon of a path started at (0,0).
/// Draw order per slot is A, S1, S2.
std::vector<double> run_queue_replication(const ParallelQueueModel& model, std::span<const Point> points,
                                          std::uint64_t horizon, std::uint64_t burnin, Rng& rng);

/// Replication r uses stream r of `seed`; the stderr is the replication
/// standard deviation over sqrt(reps).
std::map<Point, Estimate> simulate_queue_tail(const ParallelQueueModel& model, std::span<const Point> points,
                                              std::uint64_t horizon, std::uint64_t burnin, std::uint64_t reps,
                                              std::uint64_t seed, const McOptions& opts = {});

struct FirstPassageOptions {
  EntryRule rule = EntryRule::kJointMaxima;
  unsigned threads = 1;
};

/// Walk simulation with early failure certified by the 1D Lundberg bounds:
/// a path stops as a failure once the remaining success probability is
/// provably below eps_stop.
Estimate first_passage_prob(const ParallelQueueModel& model, Point p, std::uint64_t reps, std::uint64_t seed,
                            double eps_stop, const FirstPassageOptions& opts = {});

struct TiltedOptions {
  EntryRule rule = EntryRule::kJointMaxima;
  std::uint64_t step_cap = 100'000;
  unsigned threads = 1;
};

struct TiltedEstimate {
  Estimate estimate;
  CramerRoot root;
  double max_weight = 0.0;   // largest likelihood ratio accumulated
  double tilted_mass = 0.0;  // total mass of the tilted step law before normalization (= phi(gamma))
  std::uint64_t capped = 0;  // paths stopped at step_cap
};

/// Importance sampling under the step law reweighted by
/// exp{gamma1 (a - s1) + gamma2 (a - s2)}, gamma from solve_cramer(eta).
TiltedEstimate first_passage_tilted(const ParallelQueueModel& model, Point p, Vec2 eta, std::uint64_t reps,
                                    std::uint64_t seed, const TiltedOptions& opts = {});

struct HeavyOptions {
  EntryRule rule = EntryRule::kJointMaxima;
  unsigned threads = 1;
  /// When > 0, a path is retired once every open point has heuristic
  /// remaining success bound 2 min_c integrated_tail(gap_c) / (E S^c - E A)
  /// below retire_eps; each retirement adds retire_eps / reps to that
  /// point's bias_budget. 0 runs every open path to the cap.
  double retire_eps = 0.0;
};

/// Plain walk simulation up to horizon_cap steps for heavy-tailed arrivals.
/// All points share each replication's path. bias_budget carries a
/// heuristic bound on entry after the cap:
///   2 sum_{k > cap} P(A > min_i (x_i + k (E S^i - E A))),
/// plus the retirement allowance when HeavyOptions::retire_eps > 0.
std::vector<Estimate> heavy_first_passage(const ParallelQueueModel& model, std::span<const Point> points,
                                          std::uint64_t reps, std::uint64_t horizon_cap, std::uint64_t seed,
                                          const HeavyOptions& opts = {});

Estimate heavy_first_passage(const ParallelQueueModel& model, Point p, std::uint64_t reps,
                             std::uint64_t horizon_cap, std::uint64_t seed, const HeavyOptions& opts = {});

/// Sum in a fixed pairwise tree order (independent of thread schedule).
double pairwise_sum(std::span<const double> v);

}  // namespace pq
