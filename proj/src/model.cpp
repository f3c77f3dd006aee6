#include "pq/model.hpp"

#include <sstream>

#include "pq/errors.hpp"

namespace pq {

namespace {

bool same_law(const Pmf& a, const Pmf& b) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case PmfKind::kBernoulli:
      return std::get<Bernoulli>(a.law()).p == std::get<Bernoulli>(b.law()).p;
    case PmfKind::kGeometric:
      return std::get<Geometric>(a.law()).alpha == std::get<Geometric>(b.law()).alpha;
    case PmfKind::kPareto:
      return std::get<DiscretePareto>(a.law()).delta == std::get<DiscretePareto>(b.law()).delta;
    case PmfKind::kFinite:
      return std::get<Finite>(a.law()).weights == std::get<Finite>(b.law()).weights;
  }
  return false;
}

}  // namespace

StabilityReport check_stability(const Pmf& arrival, const Pmf& service1, const Pmf& service2) {
  StabilityReport r{false, arrival.mean(), service1.mean(), service2.mean()};
  r.stable = r.arrival_mean < r.service1_mean && r.arrival_mean < r.service2_mean;
  return r;
}

StabilityReport check_stability(const ParallelQueueModel& model) { return model.stability(); }

ParallelQueueModel::ParallelQueueModel(Pmf arrival, Pmf service1, Pmf service2)
    : arrival_(std::move(arrival)), service1_(std::move(service1)), service2_(std::move(service2)) {
  const auto r = stability();
  if (!r.stable) {
    std::ostringstream os;
    os << "unstable model: E A = " << r.arrival_mean << ", E S1 = " << r.service1_mean
       << ", E S2 = " << r.service2_mean << " (need E A < min(E S1, E S2))";
    throw UnstableModel(os.str(), r.arrival_mean, r.service1_mean, r.service2_mean);
  }
}

bool ParallelQueueModel::symmetric() const { return same_law(service1_, service2_); }

WalkState walk_step(WalkState s, std::int64_t a, std::int64_t s1, std::int64_t s2) {
  WalkState out{s.w1 + a - s1, s.w2 + a - s2, s.n + 1};
  if (out.w1 > kWalkLimit || out.w1 < -kWalkLimit || out.w2 > kWalkLimit || out.w2 < -kWalkLimit)
    throw OverflowError("walk coordinate exceeded 2^61");
  return out;
}

bool in_increment_domain(const ParallelQueueModel& model, Vec2 theta) {
  return model.arrival().in_mgf_domain(theta[0] + theta[1]) && model.service1().in_mgf_domain(-theta[0]) &&
         model.service2().in_mgf_domain(-theta[1]);
}

double increment_mgf(const ParallelQueueModel& model, Vec2 theta) {
  return model.arrival().mgf(theta[0] + theta[1]) * model.service1().mgf(-theta[0]) *
         model.service2().mgf(-theta[1]);
}

IncrementMgfDerivatives increment_mgf_derivatives(const ParallelQueueModel& model, Vec2 theta) {
  const double u = theta[0] + theta[1];
  const double a0 = model.arrival().mgf_derivative(u, 0);
  const double a1 = model.arrival().mgf_derivative(u, 1);
  const double a2 = model.arrival().mgf_derivative(u, 2);
  // Service factors are evaluated at -theta_i; chain rule flips odd orders.
  const double b0 = model.service1().mgf_derivative(-theta[0], 0);
  const double b1 = -model.service1().mgf_derivative(-theta[0], 1);
  const double b2 = model.service1().mgf_derivative(-theta[0], 2);
  const double c0 = model.service2().mgf_derivative(-theta[1], 0);
  const double c1 = -model.service2().mgf_derivative(-theta[1], 1);
  const double c2 = model.service2().mgf_derivative(-theta[1], 2);

  IncrementMgfDerivatives d;
  d.value = a0 * b0 * c0;
  d.gradient = {a1 * b0 * c0 + a0 * b1 * c0, a1 * b0 * c0 + a0 * b0 * c1};
  const double h11 = a2 * b0 * c0 + 2.0 * a1 * b1 * c0 + a0 * b2 * c0;
  const double h22 = a2 * b0 * c0 + 2.0 * a1 * b0 * c1 + a0 * b0 * c2;
  const double h12 = a2 * b0 * c0 + a1 * b0 * c1 + a1 * b1 * c0 + a0 * b1 * c1;
  d.hessian = {Vec2{h11, h12}, Vec2{h12, h22}};
  return d;
}

}  // namespace pq
