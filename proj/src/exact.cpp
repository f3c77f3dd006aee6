#include "pq/exact.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "pq/asympt.hpp"
#include "pq/errors.hpp"

namespace pq {

namespace {

// upper[u] = P(S >= u) within the truncated law, u = 0..K+1.
std::vector<double> upper_sums(const TruncatedLaw& law) {
  std::vector<double> up(law.weights.size() + 1, 0.0);
  for (std::size_t u = law.weights.size(); u-- > 0;) up[u] = up[u + 1] + law.weights[u];
  return up;
}

double sum_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// One sweep of q' = (q + A - S)+ on 0..n; returns mass lost.
double apply_1d(const std::vector<double>& in, std::vector<double>& out, const TruncatedLaw& a,
                const TruncatedLaw& s, const std::vector<double>& s_upper) {
  const std::size_t n = in.size() - 1;
  const std::size_t amax = a.weights.size() - 1;
  const std::size_t smax = s.weights.size() - 1;
  const std::size_t m = n + amax;
  std::vector<double> shifted(m + 1, 0.0);
  for (std::size_t u = 0; u <= m; ++u) {
    const std::size_t lo = u > n ? u - n : 0;
    const std::size_t hi = std::min(amax, u);
    double acc = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) acc += a.weights[k] * in[u - k];
    shifted[u] = acc;
  }
  const double total_in = sum_of(in);
  const double total_shift = sum_of(shifted);
  out.assign(n + 1, 0.0);
  double zero = 0.0;
  for (std::size_t u = 0; u <= m; ++u) zero += shifted[u] * (u < s_upper.size() ? s_upper[u] : 0.0);
  out[0] = zero;
  for (std::size_t q = 1; q <= n; ++q) {
    const std::size_t hi = std::min(smax, m - q);
    double acc = 0.0;
    for (std::size_t k = 0; k <= hi; ++k) acc += s.weights[k] * shifted[q + k];
    out[q] = acc;
  }
  // Overflow: u - S > n, i.e. S < u - n.
  double overflow = 0.0;
  for (std::size_t u = n + 1; u <= m; ++u) {
    const std::size_t below = std::min(u - n, s.weights.size());
    double cdf = 0.0;
    for (std::size_t k = 0; k < below; ++k) cdf += s.weights[k];
    overflow += shifted[u] * cdf;
  }
  return a.lost * total_in + s.lost * total_shift + overflow;
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw Error("grid snapshot: unexpected end of stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

constexpr char kMagic[7] = {'P', 'Q', 'G', 'R', 'I', 'D', '1'};

}  // namespace

TruncatedGrid::TruncatedGrid(std::size_t n1, std::size_t n2) : n1_(n1), n2_(n2), p_((n1 + 1) * (n2 + 1), 0.0) {}

TruncatedGrid TruncatedGrid::point_mass(std::size_t n1, std::size_t n2, std::size_t m, std::size_t n) {
  TruncatedGrid g(n1, n2);
  g(m, n) = 1.0;
  return g;
}

TruncatedGrid TruncatedGrid::uniform(std::size_t n1, std::size_t n2) {
  TruncatedGrid g(n1, n2);
  const double v = 1.0 / static_cast<double>(g.p_.size());
  std::fill(g.p_.begin(), g.p_.end(), v);
  return g;
}

double TruncatedGrid::total() const { return sum_of(p_); }

std::vector<double> TruncatedGrid::marginal1() const {
  std::vector<double> r(rows(), 0.0);
  for (std::size_t m = 0; m < rows(); ++m)
    for (std::size_t n = 0; n < cols(); ++n) r[m] += (*this)(m, n);
  return r;
}

std::vector<double> TruncatedGrid::marginal2() const {
  std::vector<double> c(cols(), 0.0);
  for (std::size_t m = 0; m < rows(); ++m)
    for (std::size_t n = 0; n < cols(); ++n) c[n] += (*this)(m, n);
  return c;
}

LindleyKernel::LindleyKernel(const ParallelQueueModel& model, double tail_eps)
    : a_(truncate(model.arrival(), tail_eps)),
      s1_(truncate(model.service1(), tail_eps)),
      s2_(truncate(model.service2(), tail_eps)),
      s1_upper_(upper_sums(s1_)),
      s2_upper_(upper_sums(s2_)) {}

TruncatedGrid LindleyKernel::apply(const TruncatedGrid& in) const {
  const std::size_t n1 = in.n1(), n2 = in.n2();
  const std::size_t amax = a_.weights.size() - 1;
  const std::size_t m1 = n1 + amax, m2 = n2 + amax;
  const std::size_t qc = m2 + 1;

  // Common arrival: shift both coordinates by the same a.
  std::vector<double> q((m1 + 1) * qc, 0.0);
  for (std::size_t u = 0; u <= m1; ++u) {
    const std::size_t lo = u > n1 ? u - n1 : 0;
    const std::size_t hi = std::min(amax, u);
    double* qrow = &q[u * qc];
    for (std::size_t k = lo; k <= hi; ++k) {
      const double w = a_.weights[k];
      if (w == 0.0) continue;
      const double* prow = &in.data()[(u - k) * in.cols()];
      for (std::size_t n = 0; n <= n2; ++n) qrow[n + k] += w * prow[n];
    }
  }

  double lost = a_.lost * in.total();

  // Service 1 along the first coordinate: r is (n1+1) x (m2+1).
  const std::size_t smax1 = s1_.weights.size() - 1;
  std::vector<double> r((n1 + 1) * qc, 0.0);
  {
    double* r0 = &r[0];
    for (std::size_t u = 0; u <= m1; ++u) {
      const double up = u < s1_upper_.size() ? s1_upper_[u] : 0.0;
      if (up == 0.0) continue;
      const double* qrow = &q[u * qc];
      for (std::size_t v = 0; v < qc; ++v) r0[v] += up * qrow[v];
    }
    for (std::size_t mp = 1; mp <= n1; ++mp) {
      double* rrow = &r[mp * qc];
      const std::size_t hi = std::min(smax1, m1 - mp);
      for (std::size_t s = 0; s <= hi; ++s) {
        const double w = s1_.weights[s];
        if (w == 0.0) continue;
        const double* qrow = &q[(mp + s) * qc];
        for (std::size_t v = 0; v < qc; ++v) rrow[v] += w * qrow[v];
      }
    }
    const double q_total = sum_of(q);
    lost += s1_.lost * q_total;
    for (std::size_t u = n1 + 1; u <= m1; ++u) {
      // lands beyond n1 when S1 < u - n1
      const double below = s1_upper_[0] - (u - n1 < s1_upper_.size() ? s1_upper_[u - n1] : 0.0);
      double row = 0.0;
      const double* qrow = &q[u * qc];
      for (std::size_t v = 0; v < qc; ++v) row += qrow[v];
      lost += below * row;
    }
  }

  // Service 2 along the second coordinate.
  TruncatedGrid out(n1, n2);
  const std::size_t smax2 = s2_.weights.size() - 1;
  double r_total = 0.0;
  for (std::size_t mp = 0; mp <= n1; ++mp) {
    const double* rrow = &r[mp * qc];
    double* orow = &out.data()[mp * out.cols()];
    double zero = 0.0;
    for (std::size_t v = 0; v < qc; ++v) {
      r_total += rrow[v];
      zero += rrow[v] * (v < s2_upper_.size() ? s2_upper_[v] : 0.0);
    }
    orow[0] = zero;
    for (std::size_t np = 1; np <= n2; ++np) {
      const std::size_t hi = std::min(smax2, m2 - np);
      double acc = 0.0;
      for (std::size_t s = 0; s <= hi; ++s) acc += s2_.weights[s] * rrow[np + s];
      orow[np] = acc;
    }
    for (std::size_t v = n2 + 1; v < qc; ++v) {
      const double below = s2_upper_[0] - (v - n2 < s2_upper_.size() ? s2_upper_[v - n2] : 0.0);
      lost += below * rrow[v];
    }
  }
  lost += s2_.lost * r_total;

  out.deficit = in.deficit + lost;
  out.iterations = in.iterations;
  return out;
}

TruncatedGrid transition_apply(const TruncatedGrid& in, const ParallelQueueModel& model) {
  return LindleyKernel(model).apply(in);
}

namespace {

// L1 distance after scaling both vectors to unit mass. The iterates leak
// mass at the grid edge every sweep, so their raw difference never falls
// below the per-sweep loss.
double normalized_l1(const std::vector<double>& a, const std::vector<double>& b) {
  double ta = 0.0, tb = 0.0;
  for (double v : a) ta += v;
  for (double v : b) tb += v;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] / ta - b[i] / tb);
  return d;
}

}  // namespace

TruncatedGrid stationary(const ParallelQueueModel& model, std::size_t n1, std::size_t n2, double tol,
                         std::uint64_t max_iter, const StationaryOptions& opts) {
  if (!(tol > 0.0)) throw PreconditionFailed("stationary: tol must be positive");
  const LindleyKernel kernel(model, opts.kernel_tail_eps);
  TruncatedGrid cur = TruncatedGrid::point_mass(n1, n2);
  double diff = std::numeric_limits<double>::infinity();
  std::uint64_t it = 0;
  while (it < max_iter) {
    TruncatedGrid next = kernel.apply(cur);
    ++it;
    diff = normalized_l1(next.data(), cur.data());
    cur = std::move(next);
    if (diff < tol) break;
  }
  cur.iterations = it;
  cur.residual = diff;
  if (!(diff < tol)) {
    std::ostringstream os;
    os << "stationary: " << it << " sweeps, L1 change " << diff << " >= tol " << tol;
    throw NoConvergence(os.str(), it, diff);
  }
  const double total = cur.total();
  for (double& v : cur.data()) v /= total;
  if (cur.deficit > opts.eps_trunc) {
    std::ostringstream os;
    os << "stationary: truncation deficit " << cur.deficit << " exceeds " << opts.eps_trunc
       << "; enlarge the grid";
    throw TruncationError(os.str());
  }
  return cur;
}

double balance_residual(const TruncatedGrid& grid, const ParallelQueueModel& model) {
  const TruncatedGrid next = transition_apply(grid, model);
  double worst = 0.0;
  for (std::size_t i = 0; i < next.data().size(); ++i)
    worst = std::max(worst, std::abs(next.data()[i] - grid.data()[i]));
  return worst;
}

TailBounds H_from_grid(const TruncatedGrid& grid, std::int64_t x, std::int64_t y) {
  TailBounds b{0.0, 0.0, false};
  const auto n1 = static_cast<std::int64_t>(grid.n1());
  const auto n2 = static_cast<std::int64_t>(grid.n2());
  b.truncated = x >= n1 || y >= n2;
  const std::int64_t m0 = std::max<std::int64_t>(x + 1, 0);
  const std::int64_t c0 = std::max<std::int64_t>(y + 1, 0);
  for (std::int64_t m = m0; m <= n1; ++m)
    for (std::int64_t n = c0; n <= n2; ++n) b.lower += grid(m, n);
  b.upper = b.lower + grid.deficit;
  return b;
}

double marginal1_tail(const TruncatedGrid& grid, std::int64_t x) { return H_from_grid(grid, x, -1).lower; }

double marginal2_tail(const TruncatedGrid& grid, std::int64_t y) { return H_from_grid(grid, -1, y).lower; }

std::vector<double> marginal_stationary_1d(const Pmf& arrival, const Pmf& service, std::size_t n, double tol,
                                           std::uint64_t max_iter, double kernel_tail_eps) {
  if (!(arrival.mean() < service.mean()))
    throw UnstableModel("marginal_stationary_1d: E A must be below E S", arrival.mean(), service.mean(),
                        service.mean());
  const TruncatedLaw a = truncate(arrival, kernel_tail_eps);
  const TruncatedLaw s = truncate(service, kernel_tail_eps);
  const std::vector<double> s_upper = upper_sums(s);
  std::vector<double> cur(n + 1, 0.0), next;
  cur[0] = 1.0;
  double diff = std::numeric_limits<double>::infinity();
  std::uint64_t it = 0;
  while (it < max_iter) {
    apply_1d(cur, next, a, s, s_upper);
    ++it;
    diff = normalized_l1(next, cur);
    cur.swap(next);
    if (diff < tol) break;
  }
  if (!(diff < tol)) {
    std::ostringstream os;
    os << "marginal_stationary_1d: " << it << " sweeps, L1 change " << diff;
    throw NoConvergence(os.str(), it, diff);
  }
  const double total = sum_of(cur);
  for (double& v : cur) v /= total;
  return cur;
}

std::complex<double> pgf_eval(const TruncatedGrid& grid, std::complex<double> z, std::complex<double> w) {
  if (std::abs(z) > 1.0 + 1e-15 || std::abs(w) > 1.0 + 1e-15)
    throw PreconditionFailed("pgf_eval: arguments must lie in the closed unit disk");
  // Horner in both variables.
  std::complex<double> outer = 0.0;
  for (std::size_t m = grid.rows(); m-- > 0;) {
    std::complex<double> inner = 0.0;
    for (std::size_t n = grid.cols(); n-- > 0;) inner = inner * w + grid(m, n);
    outer = outer * z + inner;
  }
  return outer;
}

std::size_t default_truncation(const ParallelQueueModel& model, double target) {
  const double g1 = lundberg_1d(model.arrival(), model.service1());
  const double g2 = lundberg_1d(model.arrival(), model.service2());
  const double need = std::log(1.0 / target) / std::min(g1, g2);
  return static_cast<std::size_t>(std::ceil(need));
}

void write_grid_csv(std::ostream& os, const TruncatedGrid& grid) {
  os << "m,n,p\n";
  char buf[64];
  for (std::size_t m = 0; m < grid.rows(); ++m)
    for (std::size_t n = 0; n < grid.cols(); ++n) {
      std::snprintf(buf, sizeof buf, "%.17g", grid(m, n));
      os << m << ',' << n << ',' << buf << '\n';
    }
}

void write_grid_binary(std::ostream& os, const TruncatedGrid& grid) {
  os.write(kMagic, sizeof kMagic);
  put_u64(os, grid.n1());
  put_u64(os, grid.n2());
  put_u64(os, std::bit_cast<std::uint64_t>(grid.deficit));
  for (double v : grid.data()) put_u64(os, std::bit_cast<std::uint64_t>(v));
}

TruncatedGrid read_grid_binary(std::istream& is) {
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic))
    throw Error("grid snapshot: bad magic");
  const std::uint64_t n1 = get_u64(is);
  const std::uint64_t n2 = get_u64(is);
  TruncatedGrid g(n1, n2);
  g.deficit = std::bit_cast<double>(get_u64(is));
  for (double& v : g.data()) v = std::bit_cast<double>(get_u64(is));
  return g;
}

}  // namespace pq
