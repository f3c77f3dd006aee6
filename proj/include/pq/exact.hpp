#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pq/model.hpp"

namespace pq {

/// Joint law p(m, n) on 0..n1 x 0..n2, row-major in m. Mass pushed past the
/// boundary is discarded and accumulated in `deficit`.
class TruncatedGrid {
 public:
  TruncatedGrid() = default;
  TruncatedGrid(std::size_t n1, std::size_t n2);

  static TruncatedGrid point_mass(std::size_t n1, std::size_t n2, std::size_t m = 0, std::size_t n = 0);
  static TruncatedGrid uniform(std::size_t n1, std::size_t n2);

  std::size_t n1() const { return n1_; }
  std::size_t n2() const { return n2_; }
  std::size_t rows() const { return n1_ + 1; }
  std::size_t cols() const { return n2_ + 1; }

  double& operator()(std::size_t m, std::size_t n) { return p_[m * cols() + n]; }
  double operator()(std::size_t m, std::size_t n) const { return p_[m * cols() + n]; }
  const std::vector<double>& data() const { return p_; }
  std::vector<double>& data() { return p_; }

  double total() const;
  /// P(Q1 = m) for m = 0..n1.
  std::vector<double> marginal1() const;
  /// P(Q2 = n) for n = 0..n2.
  std::vector<double> marginal2() const;

  double deficit = 0.0;
  std::uint64_t iterations = 0;
  double residual = 0.0;

 private:
  std::size_t n1_ = 0, n2_ = 0;
  std::vector<double> p_;
};

/// Transition kernel of the coupled recursion, applied matrix-free.
/// Each law is cut where its tail drops below `tail_eps`; the cut mass
/// is treated as lost (it joins the deficit).
class LindleyKernel {
 public:
  explicit LindleyKernel(const ParallelQueueModel& model, double tail_eps = 1e-14);

  /// p_out(m', n') = sum p_in(m, n) P((m+A-S1)+ = m', (n+A-S2)+ = n').
  TruncatedGrid apply(const TruncatedGrid& in) const;

  const TruncatedLaw& arrival() const { return a_; }
  const TruncatedLaw& service1() const { return s1_; }
  const TruncatedLaw& service2() const { return s2_; }

 private:
  TruncatedLaw a_, s1_, s2_;
  std::vector<double> s1_upper_, s2_upper_;  // P(S >= u) within the truncated law
};

TruncatedGrid transition_apply(const TruncatedGrid& in, const ParallelQueueModel& model);

struct StationaryOptions {
  /// Largest cumulative deficit accepted before TruncationError.
  double eps_trunc = 1e-6;
  double kernel_tail_eps = 1e-14;
};

/// Power iteration from the point mass at (0,0) until successive iterates
/// differ by less than tol in L1. The final grid is renormalized; deficit
/// holds the total mass lost over all sweeps.
TruncatedGrid stationary(const ParallelQueueModel& model, std::size_t n1, std::size_t n2, double tol,
                         std::uint64_t max_iter, const StationaryOptions& opts = {});

/// max over cells |p - pK|.
double balance_residual(const TruncatedGrid& grid, const ParallelQueueModel& model);

struct TailBounds {
  double lower;  // sum over m > x, n > y of p(m, n)
  double upper;  // lower + deficit
  bool truncated;  // query reaches the grid edge; lower is then only a lower bound
};

/// H(x, y) = P(Q1 > x, Q2 > y) from the grid.
TailBounds H_from_grid(const TruncatedGrid& grid, std::int64_t x, std::int64_t y);

/// P(Q1 > x) and P(Q2 > y) from the grid's marginals.
double marginal1_tail(const TruncatedGrid& grid, std::int64_t x);
double marginal2_tail(const TruncatedGrid& grid, std::int64_t y);

/// Stationary law of the single recursion q' = (q + A - S)+ on 0..n,
/// by the same truncated power iteration.
std::vector<double> marginal_stationary_1d(const Pmf& arrival, const Pmf& service, std::size_t n, double tol,
                                           std::uint64_t max_iter = 1'000'000, double kernel_tail_eps = 1e-14);

/// sum_{m,n} z^m w^n p(m, n) over the grid, |z|, |w| <= 1.
std::complex<double> pgf_eval(const TruncatedGrid& grid, std::complex<double> z, std::complex<double> w);

/// Truncation size so that the Lundberg bound on each marginal tail at N
/// is below `target`.
std::size_t default_truncation(const ParallelQueueModel& model, double target = 1e-10);

/// CSV with header `m,n,p`.
void write_grid_csv(std::ostream& os, const TruncatedGrid& grid);

/// Binary snapshot: "PQGRID1", uint64 n1, uint64 n2, double deficit,
/// then (n1+1)(n2+1) doubles row-major; all little-endian.
void write_grid_binary(std::ostream& os, const TruncatedGrid& grid);
TruncatedGrid read_grid_binary(std::istream& is);

}  // namespace pq
