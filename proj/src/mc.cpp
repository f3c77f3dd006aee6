#include "pq/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "pq/errors.hpp"

namespace pq {

namespace {

// Runs fn(r) for r in [0, reps) on up to `threads` workers. Results must be
// written to per-r slots; nothing here depends on the schedule.
template <class Fn>
void for_each_rep(std::uint64_t reps, unsigned threads, Fn&& fn) {
  const std::uint64_t workers = std::clamp<std::uint64_t>(threads, 1, std::max<std::uint64_t>(reps, 1));
  if (workers == 1) {
    for (std::uint64_t r = 0; r < reps; ++r) fn(r);
    return;
  }
  constexpr std::uint64_t kChunk = 16;
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::uint64_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        try {
          for (;;) {
            const std::uint64_t begin = next.fetch_add(kChunk);
            if (begin >= reps) return;
            const std::uint64_t end = std::min(reps, begin + kChunk);
            for (std::uint64_t r = begin; r < end; ++r) fn(r);
          }
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next.store(reps);
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

struct Moments {
  double mean = 0.0;
  double std_error = 0.0;
};

Moments sample_moments(std::span<const double> v) {
  Moments m;
  const auto n = static_cast<double>(v.size());
  if (v.empty()) return m;
  m.mean = pairwise_sum(v) / n;
  if (v.size() < 2) return m;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m.mean) * (v[i] - m.mean);
  const double var = pairwise_sum(sq) / (n - 1.0);
  m.std_error = std::sqrt(var / n);
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Estimate binomial_estimate(std::uint64_t successes, std::uint64_t reps) {
  Estimate e;
  e.reps = reps;
  const double n = static_cast<double>(reps);
  const double p = static_cast<double>(successes) / n;
  e.value = p;
  // At 0 or n successes the plug-in stderr is 0, which claims exactness;
  // use p = (k + 1/2) / (n + 1) there instead.
  const double ps = successes == 0 || successes == reps ? (static_cast<double>(successes) + 0.5) / (n + 1.0) : p;
  e.std_error = std::sqrt(ps * (1.0 - ps) / n);
  return e;
}

bool walk_in_range(std::int64_t w1, std::int64_t w2) {
  return w1 <= kWalkLimit && w1 >= -kWalkLimit && w2 <= kWalkLimit && w2 >= -kWalkLimit;
}

// Tracks which levels the walk has passed under either entry rule.
struct EntryTracker {
  EntryRule rule;
  Point target;
  std::int64_t max1 = 0, max2 = 0;  // running maxima, T_0 = 0 included
  bool hit = false;

  void observe(std::int64_t w1, std::int64_t w2) {
    max1 = std::max(max1, w1);
    max2 = std::max(max2, w2);
    if (rule == EntryRule::kJointMaxima)
      hit = hit || (max1 > target.x && max2 > target.y);
    else
      hit = hit || (w1 > target.x && w2 > target.y);
  }
};

}  // namespace

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

std::vector<double> run_queue_replication(const ParallelQueueModel& model, std::span<const Point> points,
                                          std::uint64_t horizon, std::uint64_t burnin, Rng& rng) {
  std::vector<std::uint64_t> hits(points.size(), 0);
  QueueState q;
  for (std::uint64_t n = 1; n <= horizon; ++n) {
    const auto a = static_cast<std::int64_t>(model.arrival().sample(rng));
    const auto s1 = static_cast<std::int64_t>(model.service1().sample(rng));
    const auto s2 = static_cast<std::int64_t>(model.service2().sample(rng));
    q = step(q, a, s1, s2);
    if (n <= burnin) continue;
    for (std::size_t i = 0; i < points.size(); ++i)
      if (q.q1 > points[i].x && q.q2 > points[i].y) ++hits[i];
  }
  std::vector<double> frac(points.size());
  const auto slots = static_cast<double>(horizon - burnin);
  for (std::size_t i = 0; i < points.size(); ++i) frac[i] = static_cast<double>(hits[i]) / slots;
  return frac;
}

std::map<Point, Estimate> simulate_queue_tail(const ParallelQueueModel& model, std::span<const Point> points,
                                              std::uint64_t horizon, std::uint64_t burnin, std::uint64_t reps,
                                              std::uint64_t seed, const McOptions& opts) {
  if (!(burnin < horizon)) throw PreconditionFailed("simulate_queue_tail: burnin must be below horizon");
  if (reps == 0) throw PreconditionFailed("simulate_queue_tail: reps must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t np = points.size();
  std::vector<double> per_rep(reps * np);
  for_each_rep(reps, opts.threads, [&](std::uint64_t r) {
    Rng rng(seed, r);
    const auto f = run_queue_replication(model, points, horizon, burnin, rng);
    std::copy(f.begin(), f.end(), per_rep.begin() + static_cast<std::ptrdiff_t>(r * np));
  });
  std::map<Point, Estimate> out;
  std::vector<double> col(reps);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::uint64_t r = 0; r < reps; ++r) col[r] = per_rep[r * np + i];
    const Moments m = sample_moments(col);
    Estimate e;
    e.value = m.mean;
    e.std_error = m.std_error;
    e.reps = reps;
    e.meta = {seed, reps, 0.0};
    out[points[i]] = e;
  }
  const double wall = seconds_since(t0);
  for (auto& [p, e] : out) e.meta.wall_time = wall;
  return out;
}

Estimate first_passage_prob(const ParallelQueueModel& model, Point p, std::uint64_t reps, std::uint64_t seed,
                            double eps_stop, const FirstPassageOptions& opts) {
  if (!(eps_stop > 0.0)) throw PreconditionFailed("first_passage_prob: eps_stop must be positive");
  if (reps == 0) throw PreconditionFailed("first_passage_prob: reps must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  const double g1 = lundberg_1d(model.arrival(), model.service1());
  const double g2 = lundberg_1d(model.arrival(), model.service2());

  // 0 = failure, 1 = success, 2 = stopped by the certificate (counted as failure)
  std::vector<std::uint8_t> outcome(reps, 0);
  for_each_rep(reps, opts.threads, [&](std::uint64_t r) {
    Rng rng(seed, r);
    EntryTracker track{opts.rule, p};
    std::int64_t w1 = 0, w2 = 0;
#ifndef NDEBUG
    std::int64_t sum_s1 = 0, sum_s2 = 0;
#endif
    track.observe(0, 0);
    for (;;) {
      if (track.hit) {
        outcome[r] = 1;
        return;
      }
      // P(sup of walk i ever exceeds level) <= exp(-gamma_i * distance)
      const double b1 = std::exp(-g1 * static_cast<double>(p.x - w1));
      const double b2 = std::exp(-g2 * static_cast<double>(p.y - w2));
      double bound;
      if (opts.rule == EntryRule::kJointMaxima) {
        const bool need1 = !(track.max1 > p.x), need2 = !(track.max2 > p.y);
        bound = std::min(need1 ? b1 : 1.0, need2 ? b2 : 1.0);
      } else {
        bound = std::min(b1, b2);
      }
      if (bound < eps_stop) {
        outcome[r] = 2;
        return;
      }
      const auto a = static_cast<std::int64_t>(model.arrival().sample(rng));
      const auto s1 = static_cast<std::int64_t>(model.service1().sample(rng));
      const auto s2 = static_cast<std::int64_t>(model.service2().sample(rng));
      w1 += a - s1;
      w2 += a - s2;
      if (!walk_in_range(w1, w2)) throw OverflowError("first_passage_prob: walk coordinate exceeded 2^61");
#ifndef NDEBUG
      sum_s1 += s1;
      sum_s2 += s2;
      assert(w1 - w2 == sum_s2 - sum_s1);
#endif
      track.observe(w1, w2);
    }
  });
  const auto successes = static_cast<std::uint64_t>(std::count(outcome.begin(), outcome.end(), 1));
  const auto stopped = static_cast<std::uint64_t>(std::count(outcome.begin(), outcome.end(), 2));
  Estimate e = binomial_estimate(successes, reps);
  e.bias_budget = eps_stop * static_cast<double>(stopped) / static_cast<double>(reps);
  e.meta = {seed, reps, seconds_since(t0)};
  return e;
}

TiltedEstimate first_passage_tilted(const ParallelQueueModel& model, Point p, Vec2 eta, std::uint64_t reps,
                                    std::uint64_t seed, const TiltedOptions& opts) {
  if (reps == 0) throw PreconditionFailed("first_passage_tilted: reps must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  TiltedEstimate out;
  out.root = solve_cramer(model, eta);
  const double g1 = out.root.gamma[0], g2 = out.root.gamma[1];
  // The tilted joint law factorizes into three independently tilted laws.
  const Pmf ta = model.arrival().tilt(g1 + g2);
  const Pmf ts1 = model.service1().tilt(-g1);
  const Pmf ts2 = model.service2().tilt(-g2);
  out.tilted_mass = increment_mgf(model, {g1, g2});
  const double log_phi = std::log(out.tilted_mass);

  std::vector<double> weight(reps, 0.0);
  std::vector<std::uint8_t> capped(reps, 0);
  for_each_rep(reps, opts.threads, [&](std::uint64_t r) {
    Rng rng(seed, r);
    EntryTracker track{opts.rule, p};
    std::int64_t w1 = 0, w2 = 0;
    track.observe(0, 0);
    std::uint64_t n = 0;
    while (!track.hit) {
      if (n == opts.step_cap) {
        capped[r] = 1;
        return;
      }
      const auto a = static_cast<std::int64_t>(ta.sample(rng));
      const auto s1 = static_cast<std::int64_t>(ts1.sample(rng));
      const auto s2 = static_cast<std::int64_t>(ts2.sample(rng));
      w1 += a - s1;
      w2 += a - s2;
      ++n;
      if (!walk_in_range(w1, w2)) throw OverflowError("first_passage_tilted: walk coordinate exceeded 2^61");
      track.observe(w1, w2);
    }
    // dP/dQ over n steps = exp(-<gamma, W_n>) phi(gamma)^n
    weight[r] = std::exp(-(g1 * static_cast<double>(w1) + g2 * static_cast<double>(w2)) +
                         static_cast<double>(n) * log_phi);
  });
  const Moments m = sample_moments(weight);
  out.estimate.value = m.mean;
  out.estimate.std_error = m.std_error;
  out.estimate.reps = reps;
  out.max_weight = *std::max_element(weight.begin(), weight.end());
  out.capped = static_cast<std::uint64_t>(std::count(capped.begin(), capped.end(), 1));
  if (out.capped > 0) {
    // Heuristic: a capped path is charged the larger of the observed maximum
    // weight and the weight of a minimal-overshoot entry.
    const double per_path = std::max(out.max_weight, std::exp(-g1 * (p.x + 1.0) - g2 * (p.y + 1.0)));
    out.estimate.bias_budget = per_path * static_cast<double>(out.capped) / static_cast<double>(reps);
  }
  out.estimate.meta = {seed, reps, seconds_since(t0)};
  return out;
}

std::vector<Estimate> heavy_first_passage(const ParallelQueueModel& model, std::span<const Point> points,
                                          std::uint64_t reps, std::uint64_t horizon_cap, std::uint64_t seed,
                                          const HeavyOptions& opts) {
  if (model.service1().pmf(0) > 0.0 || model.service2().pmf(0) > 0.0)
    throw PreconditionFailed("heavy_first_passage: service laws must satisfy P(S = 0) = 0");
  if (reps == 0) throw PreconditionFailed("heavy_first_passage: reps must be positive");
  if (points.empty()) return {};
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t np = points.size();
  std::int64_t xmax = points[0].x, ymax = points[0].y;
  for (const Point& q : points) {
    xmax = std::max(xmax, q.x);
    ymax = std::max(ymax, q.y);
  }

  const Pmf& arr = model.arrival();
  const double ea = arr.mean();
  const double drift[2] = {model.service1().mean() - ea, model.service2().mean() - ea};
  if (opts.retire_eps < 0.0) throw PreconditionFailed("heavy_first_passage: retire_eps must be >= 0");
  if (opts.retire_eps > 0.0 && (drift[0] <= 0.0 || drift[1] <= 0.0))
    throw PreconditionFailed("heavy_first_passage: retirement needs E S^i > E A");
  // Deterministic services need no draws.
  const bool fixed1 = model.service1().support_min() == model.service1().support_max();
  const bool fixed2 = model.service2().support_min() == model.service2().support_max();
  const auto c1 = static_cast<std::int64_t>(model.service1().support_min());
  const auto c2 = static_cast<std::int64_t>(model.service2().support_min());

  // Heuristic bound on success from the current position for an open point.
  auto remaining = [&](const Point& q, std::int64_t w1, std::int64_t w2, std::int64_t m1, std::int64_t m2) {
    double b = std::numeric_limits<double>::infinity();
    if (m1 <= q.x) b = std::min(b, arr.integrated_tail_bound(static_cast<double>(q.x - w1)) / drift[0]);
    if (m2 <= q.y) b = std::min(b, arr.integrated_tail_bound(static_cast<double>(q.y - w2)) / drift[1]);
    return 2.0 * b;
  };
  constexpr std::uint64_t kRetireCheck = 1024;

  // 0 = miss, 1 = hit, 2 = retired while open
  std::vector<std::uint8_t> hit(reps * np, 0);
  for_each_rep(reps, opts.threads, [&](std::uint64_t r) {
    Rng rng(seed, r);
    std::uint8_t* h = &hit[r * np];
    std::int64_t w1 = 0, w2 = 0, max1 = 0, max2 = 0;
    std::size_t open = np;
    if (opts.rule == EntryRule::kSimultaneous) {
      for (std::size_t i = 0; i < np; ++i)
        if (0 > points[i].x && 0 > points[i].y) {
          h[i] = 1;
          --open;
        }
    }
    bool retired = false;
    for (std::uint64_t n = 0; n < horizon_cap && open > 0; ++n) {
      const auto a = static_cast<std::int64_t>(arr.sample(rng));
      const auto s1 = fixed1 ? c1 : static_cast<std::int64_t>(model.service1().sample(rng));
      const auto s2 = fixed2 ? c2 : static_cast<std::int64_t>(model.service2().sample(rng));
      w1 += a - s1;
      w2 += a - s2;
      if (!walk_in_range(w1, w2)) throw OverflowError("heavy_first_passage: walk coordinate exceeded 2^61");
      if (opts.rule == EntryRule::kJointMaxima) {
        max1 = std::max(max1, w1);
        max2 = std::max(max2, w2);
        if (max1 > xmax && max2 > ymax) break;
      } else {
        for (std::size_t i = 0; i < np; ++i)
          if (!h[i] && w1 > points[i].x && w2 > points[i].y) {
            h[i] = 1;
            --open;
          }
      }
      if (opts.retire_eps > 0.0 && (n + 1) % kRetireCheck == 0) {
        bool all_small = true;
        for (std::size_t i = 0; i < np && all_small; ++i) {
          const bool done = opts.rule == EntryRule::kJointMaxima ? (max1 > points[i].x && max2 > points[i].y) : h[i] != 0;
          const std::int64_t m1 = opts.rule == EntryRule::kJointMaxima ? max1 : std::numeric_limits<std::int64_t>::min();
          const std::int64_t m2 = opts.rule == EntryRule::kJointMaxima ? max2 : std::numeric_limits<std::int64_t>::min();
          if (!done && remaining(points[i], w1, w2, m1, m2) >= opts.retire_eps) all_small = false;
        }
        if (all_small) {
          retired = true;
          break;
        }
      }
    }
    if (opts.rule == EntryRule::kJointMaxima)
      for (std::size_t i = 0; i < np; ++i) h[i] = max1 > points[i].x && max2 > points[i].y;
    if (retired)
      for (std::size_t i = 0; i < np; ++i)
        if (!h[i]) h[i] = 2;
  });

  const double cap = static_cast<double>(horizon_cap);
  std::vector<Estimate> out(np);
  for (std::size_t i = 0; i < np; ++i) {
    std::uint64_t successes = 0, retired = 0;
    for (std::uint64_t r = 0; r < reps; ++r) {
      successes += hit[r * np + i] == 1;
      retired += hit[r * np + i] == 2;
    }
    out[i] = binomial_estimate(successes, reps);
    // Entry after the cap needs one jump above x_i + k (E S^i - E A) for some
    // k > cap; sum over both coordinates, doubled as a safety factor.
    const double lv[2] = {static_cast<double>(points[i].x), static_cast<double>(points[i].y)};
    double rem = 0.0;
    for (int c = 0; c < 2; ++c) rem += arr.integrated_tail_bound(lv[c] + cap * drift[c]) / drift[c];
    out[i].bias_budget = 2.0 * rem + opts.retire_eps * static_cast<double>(retired) / static_cast<double>(reps);
  }
  const double wall = seconds_since(t0);
  for (auto& e : out) e.meta = {seed, reps, wall};
  return out;
}

Estimate heavy_first_passage(const ParallelQueueModel& model, Point p, std::uint64_t reps,
                             std::uint64_t horizon_cap, std::uint64_t seed, const HeavyOptions& opts) {
  const Point pts[1] = {p};
  return heavy_first_passage(model, pts, reps, horizon_cap, seed, opts)[0];
}

}  // namespace pq
