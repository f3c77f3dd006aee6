#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "pq/asympt.hpp"
#include "pq/errors.hpp"
#include "pq/exact.hpp"

using pq::ParallelQueueModel;
using pq::Pmf;
using pq::TruncatedGrid;

namespace {

ParallelQueueModel bernoulli_case() { return {Pmf::bernoulli(0.3), Pmf::bernoulli(0.5), Pmf::bernoulli(0.6)}; }
ParallelQueueModel geometric_case() { return {Pmf::geometric(0.5), Pmf::geometric(0.25), Pmf::geometric(0.3)}; }

TruncatedGrid pseudo_random_grid(std::size_t n, unsigned salt) {
  TruncatedGrid g(n, n);
  pq::Rng rng(salt, 0);
  for (double& v : g.data()) v = rng.uniform();
  const double t = g.total();
  for (double& v : g.data()) v /= t;
  return g;
}

}  // namespace

TEST_CASE("kernel matches the five-loop oracle") {
  const ParallelQueueModel models[] = {
      bernoulli_case(), geometric_case(),
      ParallelQueueModel(Pmf::finite({0.5, 0.2, 0.3}), Pmf::finite({0.1, 0.3, 0.6}), Pmf::point(2))};
  for (const auto& m : models) {
    for (unsigned salt : {1u, 2u}) {
      const auto in = pseudo_random_grid(12, salt);
      const pq::LindleyKernel k(m, 1e-16);
      const auto fast = k.apply(in);
      const auto slow = oracle::brute_apply(in, m, 130);
      for (std::size_t i = 0; i < in.data().size(); ++i)
        CHECK(fast.data()[i] == doctest::Approx(slow.data()[i]).epsilon(1e-12).scale(1e-15));
      // mass is conserved up to the recorded loss
      CHECK(fast.total() + fast.deficit == doctest::Approx(1.0).epsilon(1e-13));
    }
  }
}

TEST_CASE("stationary agrees with dense power iteration on a tiny grid") {
  const auto m = bernoulli_case();
  const auto g = pq::stationary(m, 40, 40, 1e-14, 100000);
  const auto o = oracle::brute_stationary(m, 40, 1, 3000);
  for (std::size_t i = 0; i < g.data().size(); ++i) CHECK(std::abs(g.data()[i] - o.data()[i]) < 1e-13);
}

TEST_CASE("stationary grid properties") {
  for (const auto& m : {bernoulli_case(), geometric_case()}) {
    const auto g = pq::stationary(m, 60, 60, 1e-13, 100000);
    CHECK(g.total() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(pq::balance_residual(g, m) < 1e-10);
    CHECK(pq::H_from_grid(g, -1, -1).lower == doctest::Approx(1.0));
    // H(0,0) = 1 - P(Q1 = 0 or Q2 = 0)
    double zero = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i) zero += g(i, 0);
    for (std::size_t j = 1; j < g.cols(); ++j) zero += g(0, j);
    CHECK(pq::H_from_grid(g, 0, 0).lower == doctest::Approx(1.0 - zero).epsilon(1e-12));
    CHECK(std::abs(pq::pgf_eval(g, 1.0, 1.0) - 1.0) < 1e-12);
    const auto pz = pq::pgf_eval(g, 0.0, 0.0);
    CHECK(pz.real() == doctest::Approx(g(0, 0)));
    CHECK_THROWS_AS(pq::pgf_eval(g, 1.5, 0.5), pq::PreconditionFailed);
  }
}

TEST_CASE("marginals match the one-dimensional recursion") {
  const auto m = geometric_case();
  const auto g = pq::stationary(m, 128, 128, 1e-12, 100000);
  for (int i = 0; i < 2; ++i) {
    const auto oned = pq::marginal_stationary_1d(m.arrival(), m.service(i), 128, 1e-13);
    const auto marg = i == 0 ? g.marginal1() : g.marginal2();
    double linf = 0.0;
    for (std::size_t k = 0; k < oned.size(); ++k) linf = std::max(linf, std::abs(oned[k] - marg[k]));
    CHECK(linf < 1e-8);
  }
}

TEST_CASE("1D tail ratio is exp(-gamma*)") {
  const auto q = pq::marginal_stationary_1d(Pmf::bernoulli(0.3), Pmf::bernoulli(0.5), 80, 1e-15);
  const double g = oracle::lundberg_bernoulli(0.3, 0.5);
  for (std::size_t k = 2; k < 20; ++k) CHECK(q[k + 1] / q[k] == doctest::Approx(std::exp(-g)).epsilon(1e-9));
}

TEST_CASE("truncation that is too small raises") {
  const auto m = geometric_case();
  CHECK_THROWS_AS(pq::stationary(m, 5, 5, 1e-12, 100000), pq::TruncationError);
  CHECK_THROWS_AS(pq::stationary(m, 60, 60, 1e-15, 3), pq::NoConvergence);
  CHECK(pq::default_truncation(m, 1e-10) >= 50);
}

TEST_CASE("H bounds carry the deficit") {
  const auto m = geometric_case();
  pq::StationaryOptions o;
  o.eps_trunc = 1e-2;
  const auto g = pq::stationary(m, 30, 30, 1e-12, 100000, o);
  CHECK(g.deficit > 0.0);
  const auto h = pq::H_from_grid(g, 3, 4);
  CHECK(h.upper == doctest::Approx(h.lower + g.deficit));
  CHECK_FALSE(h.truncated);
  CHECK(pq::H_from_grid(g, 30, 0).truncated);
}

TEST_CASE("grid serialization round trips") {
  pq::StationaryOptions loose;
  loose.eps_trunc = 1.0;
  const auto g = pq::stationary(bernoulli_case(), 10, 12, 1e-12, 100000, loose);
  std::stringstream bin;
  pq::write_grid_binary(bin, g);
  CHECK(bin.str().substr(0, 7) == "PQGRID1");
  CHECK(bin.str().size() == 7 + 3 * 8 + 11 * 13 * 8);
  const auto back = pq::read_grid_binary(bin);
  CHECK(back.n1() == 10);
  CHECK(back.n2() == 12);
  CHECK(back.data() == g.data());
  CHECK(back.deficit == g.deficit);
  std::stringstream csv;
  pq::write_grid_csv(csv, g);
  std::string line;
  std::getline(csv, line);
  CHECK(line == "m,n,p");
  std::stringstream bad("PQGRIDX");
  CHECK_THROWS(pq::read_grid_binary(bad));
}

TEST_CASE("symmetric services give a symmetric grid") {
  const ParallelQueueModel m(Pmf::geometric(0.6), Pmf::geometric(0.4), Pmf::geometric(0.4));
  const auto g = pq::stationary(m, 50, 50, 1e-13, 100000);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < i; ++j) CHECK(std::abs(g(i, j) - g(j, i)) < 1e-15);
}
