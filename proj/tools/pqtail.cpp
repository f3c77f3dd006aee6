// pqtail: config-driven front end for the parallel-queue tail toolkit.
//
// Exit codes
//   0  all requested verdicts PASS
//   1  at least one verdict FAIL
//   2  ConfigError, UnstableModel
//   3  NoConvergence, TruncationError
//   4  NoCramerRoot, NoLundbergRoot
//   5  PreconditionFailed, DegenerateFit
//   6  DomainError, OverflowError
//   10 anything else

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "pq/errors.hpp"
#include "pq/experiment.hpp"

namespace {

enum class Mode { kExact, kSimulate, kCramer, kHeavy, kCompare };

// Restricts the config to what the subcommand covers.
pq::ExperimentConfig restrict(pq::ExperimentConfig c, Mode mode) {
  using pq::Asymptotic;
  using pq::Estimator;
  auto keep = [](auto& v, auto pred) { std::erase_if(v, [&](auto x) { return !pred(x); }); };
  switch (mode) {
    case Mode::kExact:
      c.estimators = {Estimator::kExact};
      c.asymptotics.clear();
      break;
    case Mode::kSimulate:
      keep(c.estimators, [](Estimator e) { return e != Estimator::kExact; });
      c.asymptotics.clear();
      if (c.estimators.empty()) c.estimators = {Estimator::kQueueMc};
      break;
    case Mode::kCramer:
      c.estimators.clear();
      c.asymptotics = {Asymptotic::kCramer};
      if (!c.direction) throw pq::ConfigError("config: cramer needs a direction grid {eta, n_values}");
      break;
    case Mode::kHeavy:
      c.estimators = {Estimator::kHeavyMc};
      c.asymptotics = {Asymptotic::kHeavySeries};
      break;
    case Mode::kCompare:
      break;
  }
  return c;
}

int run(Mode mode, const std::string& config, const std::string& out, std::optional<std::uint64_t> seed,
        std::optional<unsigned> threads) {
  auto cfg = restrict(pq::load_config(config), mode);
  if (seed) cfg.seed = *seed;
  if (threads) cfg.threads = *threads;
  const auto r = pq::run_experiment(cfg, out);
  for (const auto& v : r.summary["verdicts"]) {
    std::string where;
    if (v.contains("x")) where = " at (" + v["x"].dump() + "," + v["y"].dump() + ")";
    std::cout << v["verdict"].get<std::string>() << "  " << v["check"].get<std::string>() << where << '\n';
  }
  std::cout << "wrote " << out << '\n';
  return r.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint tail H(x,y) of two parallel queues with common arrivals"};
  app.require_subcommand(1);
  std::string config, out = "pqtail-out";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  Mode mode = Mode::kCompare;

  const std::pair<const char*, Mode> subs[] = {
      {"exact", Mode::kExact},   {"simulate", Mode::kSimulate}, {"cramer", Mode::kCramer},
      {"heavy", Mode::kHeavy},   {"compare", Mode::kCompare}};
  const char* help[] = {"stationary law by truncated power iteration", "Monte Carlo estimators",
                        "Cramer root and rate fit along a direction", "heavy-tail MC against the big-jump series",
                        "every configured estimator and asymptotic"};
  for (std::size_t i = 0; i < std::size(subs); ++i) {
    auto* sc = app.add_subcommand(subs[i].first, help[i]);
    sc->add_option("--config", config, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sc->add_option("--out", out, "output directory");
    sc->add_option("--seed", seed, "override the config seed");
    sc->add_option("--threads", threads, "worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
    const Mode m = subs[i].second;
    sc->callback([&mode, m] { mode = m; });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    return run(mode, config, out, seed, threads);
  } catch (const pq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const pq::UnstableModel& e) {
    std::cerr << "unstable model: " << e.what() << '\n';
    return 2;
  } catch (const pq::NoConvergence& e) {
    std::cerr << "no convergence: " << e.what() << '\n';
    return 3;
  } catch (const pq::TruncationError& e) {
    std::cerr << "truncation: " << e.what() << '\n';
    return 3;
  } catch (const pq::NoCramerRoot& e) {
    std::cerr << "no Cramer root (" << pq::to_string(e.reason()) << "): " << e.what() << '\n';
    return 4;
  } catch (const pq::NoLundbergRoot& e) {
    std::cerr << "no Lundberg root: " << e.what() << '\n';
    return 4;
  } catch (const pq::PreconditionFailed& e) {
    std::cerr << "precondition failed: " << e.what() << '\n';
    return 5;
  } catch (const pq::DegenerateFit& e) {
    std::cerr << "degenerate fit: " << e.what() << '\n';
    return 5;
  } catch (const pq::DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return 6;
  } catch (const pq::OverflowError& e) {
    std::cerr << "overflow: " << e.what() << '\n';
    return 6;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 10;
  }
}
