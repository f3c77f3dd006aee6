#pragma once

#include <array>
#include <cstdint>

#include "pq/dist.hpp"

namespace pq {

using Vec2 = std::array<double, 2>;

struct StabilityReport {
  bool stable;
  double arrival_mean;
  double service1_mean;
  double service2_mean;
};

/// stable iff E A < min(E S1, E S2).
StabilityReport check_stability(const Pmf& arrival, const Pmf& service1, const Pmf& service2);

/// Two queues fed by one common batch-arrival stream, each with its own
/// i.i.d. service capacity per slot. Construction rejects unstable triples.
class ParallelQueueModel {
 public:
  ParallelQueueModel(Pmf arrival, Pmf service1, Pmf service2);

  const Pmf& arrival() const { return arrival_; }
  const Pmf& service1() const { return service1_; }
  const Pmf& service2() const { return service2_; }
  const Pmf& service(int i) const { return i == 0 ? service1_ : service2_; }

  StabilityReport stability() const { return check_stability(arrival_, service1_, service2_); }

  /// Service laws equal as tables/parameters (not merely in mean).
  bool symmetric() const;

 private:
  Pmf arrival_, service1_, service2_;
};

StabilityReport check_stability(const ParallelQueueModel& model);

/// Queue lengths read after service and before the next arrival.
struct QueueState {
  std::int64_t q1 = 0;
  std::int64_t q2 = 0;
  friend bool operator==(const QueueState&, const QueueState&) = default;
};

/// Running sums (A_1+..+A_n - S^i_1-..-S^i_n) of the unreflected walk.
struct WalkState {
  std::int64_t w1 = 0;
  std::int64_t w2 = 0;
  std::uint64_t n = 0;
  friend bool operator==(const WalkState&, const WalkState&) = default;
};

/// One slot of the coupled Lindley recursion: the same a feeds both queues.
constexpr QueueState step(QueueState s, std::int64_t a, std::int64_t s1, std::int64_t s2) {
  const std::int64_t n1 = s.q1 + a - s1;
  const std::int64_t n2 = s.q2 + a - s2;
  return {n1 > 0 ? n1 : 0, n2 > 0 ? n2 : 0};
}

/// Walk coordinates beyond this magnitude raise OverflowError.
inline constexpr std::int64_t kWalkLimit = std::int64_t{1} << 61;

WalkState walk_step(WalkState s, std::int64_t a, std::int64_t s1, std::int64_t s2);

/// phi(theta) = E exp{theta1 (A-S1) + theta2 (A-S2)}
///            = M_A(theta1+theta2) M_S1(-theta1) M_S2(-theta2).
double increment_mgf(const ParallelQueueModel& model, Vec2 theta);

struct IncrementMgfDerivatives {
  double value;
  Vec2 gradient;
  std::array<Vec2, 2> hessian;
};

/// phi with analytic gradient and Hessian (product rule over the three factors).
IncrementMgfDerivatives increment_mgf_derivatives(const ParallelQueueModel& model, Vec2 theta);

/// True when every factor of phi converges at theta.
bool in_increment_domain(const ParallelQueueModel& model, Vec2 theta);

}  // namespace pq
