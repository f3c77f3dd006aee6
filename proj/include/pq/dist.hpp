#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "pq/rng.hpp"

namespace pq {

/// Support {0, 1}, P(X=1) = p.
struct Bernoulli {
  double p;
};

/// P(X=k) = alpha (1-alpha)^k for k = 0, 1, 2, ...
struct Geometric {
  double alpha;
};

/// P(X>k) = (1+k)^-delta for k >= 0; support starts at 1. Finite mean iff delta > 1.
struct DiscretePareto {
  double delta;
  double inv_delta;  // cached 1/delta
  double t2, t3;     // cached P(X>1), P(X>2) for the sampler fast path
};

/// Explicit table; weights[k] = P(X=k).
struct Finite {
  std::vector<double> weights;
  std::vector<double> cdf;        // cdf[k] = P(X<=k)
  std::vector<double> upper_tail; // upper_tail[k] = P(X>k), summed from the top
};

enum class PmfKind { kBernoulli, kGeometric, kPareto, kFinite };

/// Immutable discrete law on the nonnegative integers.
class Pmf {
 public:
  static Pmf bernoulli(double p);
  static Pmf geometric(double alpha);
  static Pmf pareto(double delta);
  static Pmf finite(std::vector<double> weights);
  static Pmf point(std::uint64_t k);

  PmfKind kind() const { return static_cast<PmfKind>(law_.index()); }
  const auto& law() const { return law_; }

  /// P(X=k); zero outside the support.
  double pmf(std::int64_t k) const;
  /// P(X>k); one for k < 0.
  double tail(std::int64_t k) const;
  double mean() const;

  /// E e^{theta X}. Throws DomainError outside the region of convergence.
  double mgf(double theta) const;
  /// d^order/dtheta^order E e^{theta X} for order in {0, 1, 2}.
  double mgf_derivative(double theta, int order) const;
  bool in_mgf_domain(double theta) const;
  /// Supremum of the convergence region (+inf when the mgf is entire).
  double mgf_domain_sup() const;

  /// Exponentially tilted law, P_theta(X=k) = P(X=k) e^{theta k} / mgf(theta).
  Pmf tilt(double theta) const;

  /// Largest support point; kUnbounded for infinite support.
  std::uint64_t support_max() const;
  std::uint64_t support_min() const;
  bool bounded() const { return support_max() != kUnbounded; }

  /// Upper bound on the integral of P(X>u) du over [from, inf), real from.
  double integrated_tail_bound(double from) const;

  /// Inverse-CDF draw. Point masses return without consuming randomness.
  std::uint64_t sample(Rng& rng) const;

  std::string describe() const;

  static constexpr std::uint64_t kUnbounded = std::numeric_limits<std::uint64_t>::max();

 private:
  using Law = std::variant<Bernoulli, Geometric, DiscretePareto, Finite>;
  explicit Pmf(Law law) : law_(std::move(law)) {}
  Law law_;
};

/// A law cut to 0..K with the discarded upper mass recorded.
struct TruncatedLaw {
  std::vector<double> weights;
  double lost = 0.0;
};

/// Smallest K with P(X>K) < eps, weights on 0..K.
TruncatedLaw truncate(const Pmf& d, double eps);

struct SubexpDiagnostic {
  std::vector<std::uint64_t> n;
  std::vector<double> ratio1;  // P(X1+X2>n) / P(X>n), NaN where undefined
  std::vector<double> ratio2;  // sum_k P(X>n-k)P(X>k) / (2 E X P(X>n))
  bool tail_exhausted = false;
  std::uint64_t first_exhausted = 0;
  bool ratio1_near_two = false;
  bool ratio2_near_one = false;
  double deficit = 0.0;
  bool consistent() const { return !tail_exhausted && ratio1_near_two && ratio2_near_one; }
};

/// Trend report for the two strong-subexponential conditions up to n_max.
/// It never certifies membership; it only reports whether the ratios have
/// settled near their limits at n_max.
SubexpDiagnostic strong_subexp_diagnostic(const Pmf& d, std::uint64_t n_max);

}  // namespace pq
