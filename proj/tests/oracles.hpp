#pragma once

// Independent reference computations. Nothing here calls the solver code
// paths under test; laws are read only through pmf()/tail().

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "pq/dist.hpp"
#include "pq/exact.hpp"
#include "pq/model.hpp"

namespace oracle {

// pmf table of d on 0..k_max (no truncation bookkeeping).
inline std::vector<double> table(const pq::Pmf& d, std::int64_t k_max) {
  std::vector<double> t(static_cast<std::size_t>(k_max + 1));
  for (std::int64_t k = 0; k <= k_max; ++k) t[static_cast<std::size_t>(k)] = d.pmf(k);
  return t;
}

// One kernel step by the five nested loops over (m, n, a, s1, s2).
inline pq::TruncatedGrid brute_apply(const pq::TruncatedGrid& in, const pq::ParallelQueueModel& model,
                                     std::int64_t k_max) {
  const auto pa = table(model.arrival(), k_max);
  const auto p1 = table(model.service1(), k_max);
  const auto p2 = table(model.service2(), k_max);
  const auto n1 = static_cast<std::int64_t>(in.n1()), n2 = static_cast<std::int64_t>(in.n2());
  // long double: corner cells collect ~10^8 tiny terms
  std::vector<long double> acc(in.data().size(), 0.0L);
  for (std::int64_t m = 0; m <= n1; ++m)
    for (std::int64_t n = 0; n <= n2; ++n) {
      const double p = in(m, n);
      if (p == 0.0) continue;
      for (std::int64_t a = 0; a <= k_max; ++a) {
        if (pa[a] == 0.0) continue;
        for (std::int64_t s1 = 0; s1 <= k_max; ++s1) {
          if (p1[s1] == 0.0) continue;
          for (std::int64_t s2 = 0; s2 <= k_max; ++s2) {
            const long double w = static_cast<long double>(p) * pa[a] * p1[s1] * p2[s2];
            if (w == 0.0L) continue;
            const std::int64_t m2 = std::max<std::int64_t>(0, m + a - s1);
            const std::int64_t nn = std::max<std::int64_t>(0, n + a - s2);
            if (m2 <= n1 && nn <= n2) acc[static_cast<std::size_t>(m2 * (n2 + 1) + nn)] += w;
          }
        }
      }
    }
  pq::TruncatedGrid out(in.n1(), in.n2());
  for (std::size_t i = 0; i < acc.size(); ++i) out.data()[i] = static_cast<double>(acc[i]);
  return out;
}

// Stationary law of the truncated chain by dense power iteration on the
// brute-force kernel; only for tiny grids.
inline pq::TruncatedGrid brute_stationary(const pq::ParallelQueueModel& model, std::size_t n, std::int64_t k_max,
                                          int sweeps) {
  auto g = pq::TruncatedGrid::point_mass(n, n);
  for (int i = 0; i < sweeps; ++i) {
    g = brute_apply(g, model, k_max);
    const double t = g.total();
    for (double& v : g.data()) v /= t;
  }
  return g;
}

// Larger root z of a z^2 + b z + c = 0, returned as log z.
inline double log_larger_root(double a, double b, double c) {
  const double disc = std::sqrt(b * b - 4.0 * a * c);
  return std::log(std::max((-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a)));
}

// (1-a+az)(1-s+s/z) = 1, times z:  a(1-s) z^2 + ((1-a)(1-s) + a s - 1) z + (1-a) s = 0.
inline double lundberg_bernoulli(double a, double s) {
  return log_larger_root(a * (1.0 - s), (1.0 - a) * (1.0 - s) + a * s - 1.0, (1.0 - a) * s);
}

// alpha/(1-(1-alpha)z) * beta/(1-(1-beta)/z) = 1:
//   -(1-alpha) z^2 + (1 + (1-alpha)(1-beta) - alpha beta) z - (1-beta) = 0.
inline double lundberg_geometric(double alpha, double beta) {
  return log_larger_root(-(1.0 - alpha), 1.0 + (1.0 - alpha) * (1.0 - beta) - alpha * beta, -(1.0 - beta));
}

// Q_n = max(0, max over suffixes j..n of sum of increments), Q_0 = 0.
inline std::int64_t suffix_max_queue(const std::vector<std::int64_t>& inc) {
  std::int64_t best = 0;
  for (std::size_t j = 0; j < inc.size(); ++j) {
    std::int64_t s = 0;
    for (std::size_t k = j; k < inc.size(); ++k) s += inc[k];
    best = std::max(best, s);
  }
  return best;
}

// P(max_{k<=depth} w1_k > x and max_{k<=depth} w2_k > y) for arrivals with
// table pa and deterministic services c1, c2, by exhaustive enumeration of
// (w1, w2, reached1, reached2) over depth steps.
inline double joint_maxima_by_enumeration(const std::vector<double>& pa, std::int64_t c1, std::int64_t c2,
                                          std::int64_t x, std::int64_t y, int depth) {
  struct Key {
    std::int64_t w1, w2;
    bool r1, r2;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, double> cur{{Key{0, 0, false, false}, 1.0}};
  double done = 0.0;
  for (int step = 0; step < depth; ++step) {
    std::map<Key, double> next;
    for (const auto& [k, p] : cur)
      for (std::size_t a = 0; a < pa.size(); ++a) {
        if (pa[a] == 0.0) continue;
        Key nk{k.w1 + static_cast<std::int64_t>(a) - c1, k.w2 + static_cast<std::int64_t>(a) - c2, k.r1, k.r2};
        nk.r1 = nk.r1 || nk.w1 > x;
        nk.r2 = nk.r2 || nk.w2 > y;
        if (nk.r1 && nk.r2)
          done += p * pa[a];
        else
          next[nk] += p * pa[a];
      }
    cur = std::move(next);
  }
  return done;
}

// Upper 0.999 quantiles of chi-square with df degrees of freedom.
inline double chi2_999(int df) {
  static const double q[] = {0,      10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877,
                             29.588, 31.264, 32.909, 34.528, 36.123, 37.697, 39.252, 40.790, 42.312, 43.820,
                             45.315, 46.797, 48.268, 49.728, 51.179, 52.620, 54.052, 55.476, 56.892, 58.301,
                             59.703};
  return q[df];
}

}  // namespace oracle
