#include "pq/dist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pq/errors.hpp"

namespace pq {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kInf = std::numeric_limits<double>::infinity();
// Draws are clamped here so walk arithmetic cannot overflow.
constexpr double kSampleCap = 0x1.0p61;

std::uint64_t clamp_draw(double v) {
  if (!(v < kSampleCap)) return static_cast<std::uint64_t>(kSampleCap);
  return static_cast<std::uint64_t>(v);
}

double pareto_tail(const DiscretePareto& d, std::int64_t k) {
  if (k < 0) return 1.0;
  return std::pow(1.0 + static_cast<double>(k), -d.delta);
}

// sum_{k>=1} P(X=k) k^order e^{theta k} for theta < 0.
double pareto_mgf_series(const DiscretePareto& d, double theta, int order) {
  const double k_stop = std::min(1e7, 50.0 / -theta);
  double sum = 0.0;
  double prev_tail = 1.0;  // P(X>0)
  for (double k = 1.0; k <= k_stop; k += 1.0) {
    const double t = std::pow(1.0 + k, -d.delta);
    const double w = prev_tail - t;
    prev_tail = t;
    sum += w * std::pow(k, order) * std::exp(theta * k);
  }
  return sum;
}

}  // namespace

Pmf Pmf::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw PreconditionFailed("bernoulli: p must lie in [0,1]");
  return Pmf(Bernoulli{p});
}

Pmf Pmf::geometric(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionFailed("geometric: alpha must lie in (0,1)");
  return Pmf(Geometric{alpha});
}

Pmf Pmf::pareto(double delta) {
  if (!(delta > 1.0) || !std::isfinite(delta))
    throw PreconditionFailed("pareto: delta must exceed 1 (finite mean)");
  return Pmf(DiscretePareto{delta, 1.0 / delta, std::pow(2.0, -delta), std::pow(3.0, -delta)});
}

Pmf Pmf::finite(std::vector<double> weights) {
  if (weights.empty()) throw PreconditionFailed("finite: empty weight vector");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw PreconditionFailed("finite: weights must be finite and >= 0");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "finite: weights sum to " << total << ", not 1";
    throw PreconditionFailed(os.str());
  }
  while (weights.size() > 1 && weights.back() == 0.0) weights.pop_back();

  Finite f;
  f.weights = std::move(weights);
  const std::size_t n = f.weights.size();
  f.cdf.resize(n);
  f.upper_tail.resize(n);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    acc += f.weights[k];
    f.cdf[k] = acc;
  }
  double top = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    f.upper_tail[k] = top;
    top += f.weights[k];
  }
  return Pmf(std::move(f));
}

Pmf Pmf::point(std::uint64_t k) {
  std::vector<double> w(k + 1, 0.0);
  w[k] = 1.0;
  return finite(std::move(w));
}

double Pmf::pmf(std::int64_t k) const {
  if (k < 0) return 0.0;
  return std::visit(
      overloaded{
          [&](const Bernoulli& b) { return k == 0 ? 1.0 - b.p : (k == 1 ? b.p : 0.0); },
          [&](const Geometric& g) { return g.alpha * std::pow(1.0 - g.alpha, static_cast<double>(k)); },
          [&](const DiscretePareto& d) { return k == 0 ? 0.0 : pareto_tail(d, k - 1) - pareto_tail(d, k); },
          [&](const Finite& f) {
            return static_cast<std::size_t>(k) < f.weights.size() ? f.weights[k] : 0.0;
          }},
      law_);
}

double Pmf::tail(std::int64_t k) const {
  if (k < 0) return 1.0;
  return std::visit(
      overloaded{
          [&](const Bernoulli& b) { return k == 0 ? b.p : 0.0; },
          [&](const Geometric& g) { return std::pow(1.0 - g.alpha, static_cast<double>(k) + 1.0); },
          [&](const DiscretePareto& d) { return pareto_tail(d, k); },
          [&](const Finite& f) {
            return static_cast<std::size_t>(k) < f.upper_tail.size() ? f.upper_tail[k] : 0.0;
          }},
      law_);
}

double Pmf::mean() const {
  return std::visit(overloaded{[](const Bernoulli& b) { return b.p; },
                               [](const Geometric& g) { return (1.0 - g.alpha) / g.alpha; },
                               [](const DiscretePareto& d) { return std::riemann_zeta(d.delta); },
                               [](const Finite& f) {
                                 double m = 0.0;
                                 for (std::size_t k = 0; k < f.weights.size(); ++k)
                                   m += static_cast<double>(k) * f.weights[k];
                                 return m;
                               }},
                    law_);
}

bool Pmf::in_mgf_domain(double theta) const {
  if (std::isnan(theta)) return false;
  return std::visit(
      overloaded{[&](const Bernoulli&) { return std::isfinite(theta); },
                 [&](const Geometric& g) { return (1.0 - g.alpha) * std::exp(theta) < 1.0; },
                 [&](const DiscretePareto&) { return theta <= 0.0; },
                 [&](const Finite&) { return std::isfinite(theta); }},
      law_);
}

double Pmf::mgf_domain_sup() const {
  return std::visit(overloaded{[](const Bernoulli&) { return kInf; },
                               [](const Geometric& g) { return -std::log1p(-g.alpha); },
                               [](const DiscretePareto&) { return 0.0; },
                               [](const Finite&) { return kInf; }},
                    law_);
}

double Pmf::mgf(double theta) const { return mgf_derivative(theta, 0); }

double Pmf::mgf_derivative(double theta, int order) const {
  if (order < 0 || order > 2) throw PreconditionFailed("mgf_derivative: order must be 0, 1 or 2");
  if (!in_mgf_domain(theta)) {
    std::ostringstream os;
    os << "mgf of " << describe() << " diverges at theta=" << theta;
    throw DomainError(os.str());
  }
  return std::visit(
      overloaded{
          [&](const Bernoulli& b) {
            const double e = b.p * std::exp(theta);
            return order == 0 ? 1.0 - b.p + e : e;
          },
          [&](const Geometric& g) {
            const double qe = (1.0 - g.alpha) * std::exp(theta);
            const double d = 1.0 - qe;
            if (order == 0) return g.alpha / d;
            if (order == 1) return g.alpha * qe / (d * d);
            return g.alpha * qe * (1.0 + qe) / (d * d * d);
          },
          [&](const DiscretePareto& d) {
            if (theta == 0.0) {
              if (order == 0) return 1.0;
              if (order == 1) return std::riemann_zeta(d.delta);
              // E X^2 = sum_k (2k+1) P(X>k)
              return d.delta > 2.0 ? 2.0 * std::riemann_zeta(d.delta - 1.0) - std::riemann_zeta(d.delta) : kInf;
            }
            return pareto_mgf_series(d, theta, order);
          },
          [&](const Finite& f) {
            double s = 0.0;
            for (std::size_t k = 0; k < f.weights.size(); ++k) {
              if (f.weights[k] == 0.0) continue;
              const double kk = static_cast<double>(k);
              s += f.weights[k] * std::pow(kk, order) * std::exp(theta * kk);
            }
            return s;
          }},
      law_);
}

Pmf Pmf::tilt(double theta) const {
  const double m = mgf(theta);
  return std::visit(
      overloaded{
          [&](const Bernoulli& b) { return bernoulli(b.p * std::exp(theta) / m); },
          [&](const Geometric& g) { return geometric(1.0 - (1.0 - g.alpha) * std::exp(theta)); },
          [&](const DiscretePareto& d) {
            if (theta == 0.0) return *this;
            // Cut where the tilted upper mass is negligible, then renormalize.
            std::vector<double> w{0.0};
            double prev_tail = 1.0;
            double total = 0.0;
            for (double k = 1.0;; k += 1.0) {
              const double t = std::pow(1.0 + k, -d.delta);
              const double wk = (prev_tail - t) * std::exp(theta * k) / m;
              prev_tail = t;
              w.push_back(wk);
              total += wk;
              if (t * std::exp(theta * k) / m < 1e-16 || k >= 1e7) break;
            }
            for (double& x : w) x /= total;
            return finite(std::move(w));
          },
          [&](const Finite& f) {
            std::vector<double> w(f.weights.size());
            double total = 0.0;
            for (std::size_t k = 0; k < w.size(); ++k) {
              w[k] = f.weights[k] * std::exp(theta * static_cast<double>(k)) / m;
              total += w[k];
            }
            for (double& x : w) x /= total;
            return finite(std::move(w));
          }},
      law_);
}

std::uint64_t Pmf::support_max() const {
  return std::visit(overloaded{[](const Bernoulli& b) -> std::uint64_t { return b.p > 0.0 ? 1 : 0; },
                               [](const Geometric&) { return kUnbounded; },
                               [](const DiscretePareto&) { return kUnbounded; },
                               [](const Finite& f) -> std::uint64_t { return f.weights.size() - 1; }},
                    law_);
}

std::uint64_t Pmf::support_min() const {
  return std::visit(overloaded{[](const Bernoulli& b) -> std::uint64_t { return b.p < 1.0 ? 0 : 1; },
                               [](const Geometric&) -> std::uint64_t { return 0; },
                               [](const DiscretePareto&) -> std::uint64_t { return 1; },
                               [](const Finite& f) -> std::uint64_t {
                                 std::uint64_t k = 0;
                                 while (f.weights[k] == 0.0) ++k;
                                 return k;
                               }},
                    law_);
}

double Pmf::integrated_tail_bound(double from) const {
  if (from < 0.0) return -from + integrated_tail_bound(0.0);
  const double fl = std::floor(from);
  const auto f = static_cast<std::int64_t>(fl);
  const double head = (fl + 1.0 - from) * tail(f);
  return std::visit(
      overloaded{
          [&](const Geometric& g) {
            const double q = 1.0 - g.alpha;
            return head + std::pow(q, fl + 2.0) / g.alpha;
          },
          [&](const DiscretePareto& d) {
            // sum_{m >= f+2} m^-delta <= int_{f+1}^inf t^-delta dt
            return head + std::pow(fl + 1.0, 1.0 - d.delta) / (d.delta - 1.0);
          },
          [&](const auto&) {
            double s = head;
            const auto top = static_cast<std::int64_t>(support_max());
            for (std::int64_t j = f + 1; j < top; ++j) s += tail(j);
            return s;
          }},
      law_);
}

std::uint64_t Pmf::sample(Rng& rng) const {
  return std::visit(
      overloaded{
          [&](const Bernoulli& b) -> std::uint64_t { return rng.uniform() <= b.p ? 1 : 0; },
          [&](const Geometric& g) -> std::uint64_t {
            // X >= k  iff  U <= (1-alpha)^k
            return clamp_draw(std::floor(std::log(rng.uniform()) / std::log1p(-g.alpha)));
          },
          [&](const DiscretePareto& d) -> std::uint64_t {
            // X >= k  iff  U < k^-delta  (k >= 1)
            const double u = rng.uniform();
            if (u >= d.t2) return 1;
            if (u >= d.t3) return 2;
            return clamp_draw(std::ceil(std::pow(u, -d.inv_delta)) - 1.0);
          },
          [&](const Finite& f) -> std::uint64_t {
            if (f.weights.size() == 1) return 0;
            if (f.weights.back() == 1.0) return f.weights.size() - 1;
            const double u = rng.uniform();
            auto it = std::lower_bound(f.cdf.begin(), f.cdf.end(), u);
            if (it == f.cdf.end()) return f.weights.size() - 1;
            return static_cast<std::uint64_t>(it - f.cdf.begin());
          }},
      law_);
}

std::string Pmf::describe() const {
  std::ostringstream os;
  std::visit(overloaded{[&](const Bernoulli& b) { os << "bernoulli(p=" << b.p << ")"; },
                        [&](const Geometric& g) { os << "geometric(alpha=" << g.alpha << ")"; },
                        [&](const DiscretePareto& d) { os << "pareto(delta=" << d.delta << ")"; },
                        [&](const Finite& f) { os << "finite(" << f.weights.size() << " cells)"; }},
             law_);
  return os.str();
}

TruncatedLaw truncate(const Pmf& d, double eps) {
  TruncatedLaw out;
  if (d.bounded()) {
    const auto top = d.support_max();
    out.weights.resize(top + 1);
    for (std::uint64_t k = 0; k <= top; ++k) out.weights[k] = d.pmf(static_cast<std::int64_t>(k));
    return out;
  }
  std::int64_t k = 0;
  for (;; ++k) {
    out.weights.push_back(d.pmf(k));
    if (d.tail(k) < eps) break;
  }
  out.lost = d.tail(k);
  return out;
}

SubexpDiagnostic strong_subexp_diagnostic(const Pmf& d, std::uint64_t n_max) {
  SubexpDiagnostic r;
  const double ex = d.mean();
  std::vector<double> p(n_max + 1), t(n_max + 1);
  for (std::uint64_t k = 0; k <= n_max; ++k) {
    p[k] = d.pmf(static_cast<std::int64_t>(k));
    t[k] = d.tail(static_cast<std::int64_t>(k));
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::uint64_t n = 0; n <= n_max; ++n) {
    r.n.push_back(n);
    if (t[n] <= 0.0) {
      if (!r.tail_exhausted) r.first_exhausted = n;
      r.tail_exhausted = true;
      r.ratio1.push_back(nan);
      r.ratio2.push_back(nan);
      continue;
    }
    // P(X1+X2>n) = P(X1>n) + sum_{j<=n} P(X1=j) P(X2>n-j); exact on 0..n.
    double conv = t[n];
    double cross = 0.0;
    for (std::uint64_t j = 0; j <= n; ++j) {
      conv += p[j] * t[n - j];
      cross += t[n - j] * t[j];
    }
    r.ratio1.push_back(conv / t[n]);
    r.ratio2.push_back(cross / (2.0 * ex * t[n]));
  }
  if (!r.tail_exhausted) {
    r.ratio1_near_two = std::abs(r.ratio1.back() - 2.0) <= 0.2;
    r.ratio2_near_one = std::abs(r.ratio2.back() - 1.0) <= 0.15;
  }
  return r;
}

}  // namespace pq
