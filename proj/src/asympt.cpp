#include "pq/asympt.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

#include "pq/errors.hpp"

namespace pq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double lundberg_fn(const Pmf& a, const Pmf& s, double g) { return a.mgf(g) * s.mgf(-g) - 1.0; }

double lundberg_slope(const Pmf& a, const Pmf& s, double g) {
  return a.mgf_derivative(g, 1) * s.mgf(-g) - a.mgf(g) * s.mgf_derivative(-g, 1);
}

struct System {
  const ParallelQueueModel& model;
  Vec2 eta;

  bool in_domain(const Eigen::Vector3d& z) const { return in_increment_domain(model, {z[0], z[1]}); }

  Eigen::Vector3d F(const Eigen::Vector3d& z, Eigen::Matrix3d* J = nullptr) const {
    const auto d = increment_mgf_derivatives(model, {z[0], z[1]});
    if (J) {
      *J << d.gradient[0], d.gradient[1], 0.0,  //
          d.hessian[0][0], d.hessian[0][1], -eta[0],  //
          d.hessian[1][0], d.hessian[1][1], -eta[1];
    }
    return {d.value - 1.0, d.gradient[0] - eta[0] * z[2], d.gradient[1] - eta[1] * z[2]};
  }
};

struct NewtonResult {
  Eigen::Vector3d z;
  std::uint32_t iterations;
};

std::optional<NewtonResult> damped_newton(const System& sys, Eigen::Vector3d z) {
  if (!sys.in_domain(z)) return std::nullopt;
  Eigen::Matrix3d J;
  Eigen::Vector3d f = sys.F(z, &J);
  for (std::uint32_t it = 0; it < 200; ++it) {
    if (!f.allFinite()) return std::nullopt;
    if (f.lpNorm<Eigen::Infinity>() < 1e-14) return NewtonResult{z, it};
    Eigen::FullPivLU<Eigen::Matrix3d> lu(J);
    if (!lu.isInvertible()) return std::nullopt;
    const Eigen::Vector3d step = lu.solve(-f);
    const double f0 = f.norm();
    bool accepted = false;
    for (double lambda = 1.0; lambda > 1e-12; lambda *= 0.5) {
      const Eigen::Vector3d trial = z + lambda * step;
      if (!sys.in_domain(trial)) continue;
      Eigen::Matrix3d Jt;
      const Eigen::Vector3d ft = sys.F(trial, &Jt);
      if (ft.allFinite() && ft.norm() < (1.0 - 1e-4 * lambda) * f0) {
        z = trial;
        f = ft;
        J = Jt;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Stalled at round-off level is still a root.
      if (f.lpNorm<Eigen::Infinity>() < 1e-12) return NewtonResult{z, it};
      return std::nullopt;
    }
  }
  if (f.lpNorm<Eigen::Infinity>() < 1e-12) return NewtonResult{z, 200};
  return std::nullopt;
}

// Radial distance to {phi = 1} along direction u; 0 when phi does not dip
// below 1 along the ray.
double boundary_radius(const ParallelQueueModel& model, Vec2 u) {
  const auto at = [&](double r) -> double {
    const Vec2 g{r * u[0], r * u[1]};
    if (!in_increment_domain(model, g)) return kInf;
    return increment_mgf(model, g);
  };
  const double h = 1e-6;
  if (!(at(h) < 1.0)) return 0.0;
  double lo = h, hi = 2 * h;
  while (at(hi) < 1.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) return 0.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (at(mid) < 1.0 ? lo : hi) = mid;
  }
  return lo;
}

// Point of {phi <= 1} maximizing <gamma, eta>, by angle scan + golden section.
std::optional<Vec2> support_point(const ParallelQueueModel& model, Vec2 eta) {
  const auto score = [&](double psi) {
    const Vec2 u{std::cos(psi), std::sin(psi)};
    const double r = boundary_radius(model, u);
    return r * (u[0] * eta[0] + u[1] * eta[1]);
  };
  const int kAngles = 720;
  double best = 0.0, best_psi = 0.0;
  for (int i = 0; i < kAngles; ++i) {
    const double psi = -std::numbers::pi + 2.0 * std::numbers::pi * i / kAngles;
    const double v = score(psi);
    if (v > best) {
      best = v;
      best_psi = psi;
    }
  }
  if (!(best > 0.0)) return std::nullopt;
  const double width = 2.0 * std::numbers::pi / kAngles;
  double a = best_psi - width, b = best_psi + width;
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = score(c), fd = score(d);
  for (int i = 0; i < 80; ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = score(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = score(d);
    }
  }
  const double psi = 0.5 * (a + b);
  const double r = boundary_radius(model, {std::cos(psi), std::sin(psi)});
  return Vec2{r * std::cos(psi), r * std::sin(psi)};
}

double threshold_tail(const Pmf& a, double t) {
  // P(A > t) for integer-valued A: P(A > floor(t)).
  if (t < 0.0) return 1.0;
  if (t >= 0x1.0p62) return 0.0;
  return a.tail(static_cast<std::int64_t>(std::floor(t)));
}

}  // namespace

double lundberg_1d(const Pmf& arrival, const Pmf& service) {
  if (!(arrival.mean() < service.mean()))
    throw PreconditionFailed("lundberg_1d: needs E A < E S");
  const double sup = arrival.mgf_domain_sup();
  if (!(sup > 0.0)) throw NoLundbergRoot("lundberg_1d: arrival mgf is infinite for every theta > 0");

  // f is convex with f(0) = 0 and f'(0) = E A - E S < 0; find f(hi) > 0.
  double hi = 0.0;
  bool found = false;
  if (std::isfinite(sup)) {
    for (int k = 1; k <= 60 && !found; ++k) {
      hi = sup * (1.0 - std::ldexp(1.0, -k));
      if (arrival.in_mgf_domain(hi) && lundberg_fn(arrival, service, hi) > 0.0) found = true;
    }
  } else {
    for (hi = 0.25; hi < 700.0 && !found; hi *= 2.0)
      if (lundberg_fn(arrival, service, hi) > 0.0) found = true;
    if (found) hi /= 2.0;
  }
  if (!found) throw NoLundbergRoot("lundberg_1d: no sign change before the mgf domain boundary");

  double lo = 0.0;
  for (int i = 0; i < 400 && hi - lo > 1e-16 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (lundberg_fn(arrival, service, mid) < 0.0 ? lo : hi) = mid;
  }
  double g = 0.5 * (lo + hi);
  for (int i = 0; i < 5; ++i) {
    const double f = lundberg_fn(arrival, service, g);
    const double df = lundberg_slope(arrival, service, g);
    if (df <= 0.0) break;
    const double next = g - f / df;
    if (!(next >= lo && next <= hi)) break;
    g = next;
  }
  const double res = std::abs(lundberg_fn(arrival, service, g));
  if (!(res < 1e-12)) {
    std::ostringstream os;
    os << "lundberg_1d: residual " << res << " at gamma " << g;
    throw NoLundbergRoot(os.str());
  }
  return g;
}

CramerRoot solve_cramer(const ParallelQueueModel& model, Vec2 eta) {
  if (!(eta[0] > 0.0 && eta[1] > 0.0)) throw PreconditionFailed("solve_cramer: eta must be componentwise positive");
  CramerRoot root;
  root.eta_raw = eta;
  const double norm = eta[0] + eta[1];
  root.eta = {eta[0] / norm, eta[1] / norm};
  const System sys{model, root.eta};

  double g1 = 0.0, g2 = 0.0;
  try {
    g1 = lundberg_1d(model.arrival(), model.service1());
    g2 = lundberg_1d(model.arrival(), model.service2());
  } catch (const NoLundbergRoot& e) {
    throw NoCramerRoot(CramerFailure::kDomainExhausted, e.what());
  }

  const auto accept = [&](const NewtonResult& r) {
    const Vec2 g{r.z[0], r.z[1]};
    const double rate = g[0] * root.eta[0] + g[1] * root.eta[1];
    return r.z[2] > 0.0 && rate > 0.0 && std::hypot(g[0], g[1]) > 1e-8;
  };

  std::optional<NewtonResult> sol;
  bool trivial = false;
  {
    Eigen::Vector3d z0(g1 * root.eta[0], g2 * root.eta[1], 0.0);
    const auto d = increment_mgf_derivatives(model, {z0[0], z0[1]});
    z0[2] = std::hypot(d.gradient[0], d.gradient[1]) / std::hypot(root.eta[0], root.eta[1]);
    sol = damped_newton(sys, z0);
    if (sol && !accept(*sol)) {
      trivial = true;
      sol.reset();
    }
  }
  if (!sol) {
    if (const auto sp = support_point(model, root.eta)) {
      Eigen::Vector3d z0((*sp)[0], (*sp)[1], 0.0);
      const auto d = increment_mgf_derivatives(model, *sp);
      z0[2] = std::hypot(d.gradient[0], d.gradient[1]);
      sol = damped_newton(sys, z0);
      if (sol && !accept(*sol)) {
        trivial = true;
        sol.reset();
      }
    }
  }
  if (!sol) {
    if (trivial) throw NoCramerRoot(CramerFailure::kTrivialRootOnly, "Newton converged to gamma = 0 or s <= 0");
    throw NoCramerRoot(CramerFailure::kNoConvergence, "damped Newton failed from both starting points");
  }

  root.gamma = {sol->z[0], sol->z[1]};
  root.s = sol->z[2];
  root.newton_iterations = sol->iterations;
  const Eigen::Vector3d f = sys.F(sol->z);
  root.residuals = {std::abs(f[0]), std::max(std::abs(f[1]), std::abs(f[2]))};
  return root;
}

double light_tail_prediction(const CramerRoot& root, std::int64_t n, double C) {
  const double nn = static_cast<double>(n);
  return C * std::exp(-root.rate() * nn) / std::sqrt(nn);
}

RateFit extract_rate(std::span<const std::pair<double, double>> points) {
  if (points.size() < 5) throw PreconditionFailed("extract_rate: needs at least 5 points");
  const auto rows = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd X(rows, 3);
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto [n, h] = points[static_cast<std::size_t>(i)];
    if (!(h > 0.0) || !(n > 0.0)) throw PreconditionFailed("extract_rate: n and H must be positive");
    if (i > 0 && !(n > points[static_cast<std::size_t>(i - 1)].first))
      throw PreconditionFailed("extract_rate: n must be strictly increasing");
    X(i, 0) = 1.0;
    X(i, 1) = std::log(n);
    X(i, 2) = n;
    y[i] = std::log(h);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < 3) throw DegenerateFit("extract_rate: design matrix is rank-deficient");
  const Eigen::VectorXd b = qr.solve(y);
  RateFit fit;
  fit.logC = b[0];
  fit.power = b[1];
  fit.rate = -b[2];
  fit.points = points.size();
  const double ss_res = (y - X * b).squaredNorm();
  const double ss_tot = (y.array() - y.mean()).matrix().squaredNorm();
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

HeavySeries heavy_series(const ParallelQueueModel& model, Vec2 eta, std::int64_t n, double rel_tol,
                         HeavySeriesForm form) {
  if (!(eta[0] > 0.0 && eta[1] > 0.0)) throw PreconditionFailed("heavy_series: eta must be componentwise positive");
  if (n <= 0) throw PreconditionFailed("heavy_series: n must be positive");
  if (model.service1().pmf(0) > 0.0 || model.service2().pmf(0) > 0.0)
    throw PreconditionFailed("heavy_series: service laws must satisfy P(S = 0) = 0");
  const Pmf& a = model.arrival();
  if (!a.bounded()) {
    bool light = true;
    try {
      lundberg_1d(a, model.service1());
    } catch (const NoLundbergRoot&) {
      light = false;
    }
    if (light) throw PreconditionFailed("heavy_series: arrival law is light-tailed (Lundberg root exists)");
  }

  const double ea = form == HeavySeriesForm::kDriftCorrected ? a.mean() : 0.0;
  const double nn = static_cast<double>(n);
  const Vec2 base{nn * eta[0], nn * eta[1]};
  const Vec2 slope{model.service1().mean() - ea, model.service2().mean() - ea};

  // sum_{k>K} P(A > b + k c) <= (1/c) int_{b+Kc}^inf P(A > u) du, for either coordinate.
  const auto remainder = [&](double K) {
    double best = kInf;
    for (int i = 0; i < 2; ++i) best = std::min(best, a.integrated_tail_bound(base[i] + K * slope[i]) / slope[i]);
    return best;
  };

  HeavySeries out;
  double sum = 0.0;
  for (std::uint64_t k = 0;; ++k) {
    const double kk = static_cast<double>(k);
    const double t = std::max(base[0] + kk * slope[0], base[1] + kk * slope[1]);
    sum += threshold_tail(a, t);
    const double rem = remainder(kk);
    if (rem <= rel_tol * sum || rem == 0.0 || k >= 4'000'000'000ULL) {
      out.value = sum;
      out.truncation_bound = rem;
      out.k_used = k;
      break;
    }
  }
  return out;
}

}  // namespace pq
