#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "pq/model.hpp"

namespace pq {

/// Positive root of M_A(g) M_S(-g) = 1 (the single-queue decay rate).
/// Throws NoLundbergRoot when the arrival mgf domain ends before a sign change.
double lundberg_1d(const Pmf& arrival, const Pmf& service);

struct CramerRoot {
  Vec2 gamma{};
  double s = 0.0;
  Vec2 eta{};      // normalized, eta1 + eta2 = 1
  Vec2 eta_raw{};  // as supplied
  Vec2 residuals{};  // |phi(gamma) - 1|, max_i |d_i phi(gamma) - eta_i s|
  std::uint32_t newton_iterations = 0;

  /// <gamma, eta>, the conjectured exponential decay rate per unit n.
  double rate() const { return gamma[0] * eta[0] + gamma[1] * eta[1]; }
  /// s for the unnormalized system grad phi = eta_raw s_raw.
  double s_raw() const { return s / (eta_raw[0] + eta_raw[1]); }
};

/// Solves phi(gamma) = 1, grad phi(gamma) = eta s with s > 0 by damped
/// Newton started from the 1D exponents, falling back to a start on the
/// support point of {phi <= 1} in direction eta.
CramerRoot solve_cramer(const ParallelQueueModel& model, Vec2 eta);

/// C n^{-1/2} exp(-<gamma, eta> n).
double light_tail_prediction(const CramerRoot& root, std::int64_t n, double C);

struct RateFit {
  double rate = 0.0;   // decay per unit n
  double power = 0.0;  // polynomial exponent
  double logC = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Least squares of log H = logC + power log n - rate n over (n, H) pairs.
RateFit extract_rate(std::span<const std::pair<double, double>> points);

enum class HeavySeriesForm {
  kAsWritten,      // thresholds n eta_i + k E S^i
  kDriftCorrected  // thresholds n eta_i + k (E S^i - E A)
};

struct HeavySeries {
  double value = 0.0;
  double truncation_bound = 0.0;  // bound on the omitted terms k > k_used
  std::uint64_t k_used = 0;
};

/// sum_{k>=0} P(A > max{n eta1 + k c1, n eta2 + k c2}), truncated once the
/// integral bound on the remainder is <= rel_tol times the partial sum.
/// eta is used as given (no normalization).
HeavySeries heavy_series(const ParallelQueueModel& model, Vec2 eta, std::int64_t n, double rel_tol,
                         HeavySeriesForm form = HeavySeriesForm::kAsWritten);

}  // namespace pq
