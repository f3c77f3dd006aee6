#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pq/errors.hpp"
#include "pq/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pq-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int pqtail(const std::string& args) {
  const int rc = std::system((std::string(PQTAIL_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("preset expansion") {
    const auto c = pq::parse_config(json::parse(R"({"preset":"geometric-case","grid":[[1,2]],"estimators":["exact"]})"));
    CHECK(c.model["arrival"]["alpha"] == 0.5);
    CHECK(pq::build_model(c).service2().mean() == doctest::Approx(7.0 / 3.0));
    const auto h = pq::parse_config(json::parse(R"({"preset":"heavy-case","grid":[[1,2]],"estimators":["heavy-mc"]})"));
    CHECK(pq::build_model(h).service1().mean() == 2.0);
  }
  SUBCASE("direction grid") {
    const auto c = pq::parse_config(
        json::parse(R"({"preset":"bernoulli-case","grid":{"eta":[0.5,1.5],"n_values":[3,4]},"asymptotics":["cramer"]})"));
    const auto pts = c.resolved_points();
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].first == pq::Point{1, 4});
    CHECK(pts[1].first == pq::Point{2, 6});
    CHECK(*pts[1].second == 4);
  }
  SUBCASE("errors") {
    auto rejects = [](const char* text) {
      CHECK_THROWS_AS(pq::parse_config(json::parse(text)), pq::ConfigError);
    };
    rejects(R"({"grid":[[0,0]],"estimators":["exact"]})");
    rejects(R"({"preset":"nope","grid":[[0,0]],"estimators":["exact"]})");
    rejects(R"({"preset":"bernoulli-case","grid":[[0,0]],"estimators":["magic"]})");
    rejects(R"({"preset":"bernoulli-case","grid":[[0,0]],"estimators":["exact"],"colour":1})");
    rejects(R"({"preset":"bernoulli-case","grid":[[0,0],[0,0]],"estimators":["exact"]})");
    rejects(R"({"preset":"bernoulli-case","grid":[[0,0]],"asymptotics":["cramer"]})");
    rejects(R"({"preset":"bernoulli-case","grid":[[0,0]]})");
    rejects(R"({"model":{"arrival":{"kind":"geometric","alpha":0.2},"service1":{"kind":"geometric","alpha":0.5},
               "service2":{"kind":"geometric","alpha":0.5}},"grid":[[0,0]],"estimators":["exact"]})");
    rejects(R"({"model":{"arrival":{"kind":"bernoulli","p":2},"service1":{"kind":"bernoulli","p":0.5},
               "service2":{"kind":"bernoulli","p":0.5}},"grid":[[0,0]],"estimators":["exact"]})");
  }
  SUBCASE("unstable model message carries the three means") {
    try {
      pq::parse_config(json::parse(R"({"model":{"arrival":{"kind":"geometric","alpha":0.4},
          "service1":{"kind":"geometric","alpha":0.5},"service2":{"kind":"geometric","alpha":0.3}},
          "grid":[[0,0]],"estimators":["exact"]})"));
      FAIL("expected ConfigError");
    } catch (const pq::ConfigError& e) {
      const std::string m = e.what();
      CHECK(m.find("1.5") != std::string::npos);
      CHECK(m.find("2.33") != std::string::npos);
    }
  }
  SUBCASE("resolved config round trips") {
    const auto c = pq::parse_config(json::parse(R"({"preset":"bernoulli-case","grid":[[0,0],[3,1]],
        "estimators":["queue-mc","exact"],"seed":9,"threads":4,"sampling":{"queue_reps":8}})"));
    const auto j = pq::to_json(c);
    CHECK_FALSE(j.contains("threads"));
    const auto back = pq::parse_config(j);
    CHECK(pq::to_json(back) == j);
    CHECK(back.sampling.queue_reps == 8);
    const auto h = pq::parse_config(json::parse(R"({"preset":"heavy-case","grid":[[1,1]],"estimators":["heavy-mc"]})"));
    CHECK(pq::to_json(pq::parse_config(pq::to_json(h))) == pq::to_json(h));
    auto clash = j;
    clash["model"]["arrival"]["p"] = 0.2;
    CHECK_THROWS_AS(pq::parse_config(clash), pq::ConfigError);
  }
}

TEST_CASE("bernoulli case with exact and queue-mc") {
  const auto dir = scratch("bern");
  const auto c = pq::parse_config(json::parse(R"({"preset":"bernoulli-case","grid":[[0,0],[2,1],[5,5]],
      "estimators":["exact","queue-mc"],"seed":5})"));
  const auto r = pq::run_experiment(c, dir);
  CHECK(r.all_pass);
  std::ifstream csv(dir / "estimates.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "x,y,estimator,value,stderr,bias_budget,reps,seed");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 6);
  CHECK(fs::exists(dir / "grid.csv"));
  CHECK(slurp(dir / "grid.bin").substr(0, 7) == "PQGRID1");
  CHECK(r.summary["verdicts"].size() == 3);
}

TEST_CASE("geometric case rate fit") {
  const auto dir = scratch("rate");
  const auto c = pq::parse_config(json::parse(R"({"preset":"geometric-case",
      "grid":{"eta":[0.5,0.5],"n_values":[4,6,8,10,12,14,16]},"asymptotics":["cramer"]})"));
  const auto r = pq::run_experiment(c, dir);
  CHECK(r.all_pass);
  const json s = json::parse(slurp(dir / "summary.json"));
  CHECK(s["rate_fit"]["relative_error"].get<double>() < 0.10);
  CHECK(s["cramer"]["residuals"][0].get<double>() < 1e-10);
  CHECK(s["cramer"].contains("gamma"));
  CHECK(s["config"]["preset"] == "geometric-case");
}

TEST_CASE("outputs are identical across thread counts") {
  const auto text = R"({"preset":"geometric-case","grid":[[0,1],[3,3]],
      "estimators":["exact","queue-mc","first-passage","tilted"],
      "sampling":{"queue_reps":6,"queue_horizon":20000,"queue_burnin":100,"first_passage_reps":3000,"tilted_reps":500},
      "seed":77})";
  auto c = pq::parse_config(json::parse(text));
  const auto a = scratch("det1"), b = scratch("det4");
  c.threads = 1;
  pq::run_experiment(c, a);
  c.threads = 4;
  pq::run_experiment(c, b);
  for (const char* f : {"estimates.csv", "summary.json", "grid.csv", "grid.bin"}) CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch("cli");
  auto write = [&](const char* name, const char* text) {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  };
  const auto ok = write("ok.json", R"({"preset":"bernoulli-case","grid":[[1,1]],"estimators":["exact"]})");
  const auto unstable = write("unstable.json", R"({"model":{"arrival":{"kind":"bernoulli","p":0.5},
      "service1":{"kind":"bernoulli","p":0.5},"service2":{"kind":"bernoulli","p":0.6}},"grid":[[0,0]],
      "estimators":["exact"]})");
  const auto heavy_exact = write("heavy.json", R"({"preset":"heavy-case","grid":[[1,1]],"estimators":["exact"]})");
  const auto heavy_cramer =
      write("hc.json", R"({"preset":"heavy-case","grid":{"eta":[1,1],"n_values":[1,2,3,4,5]},"asymptotics":["cramer"]})");
  const auto no_fp = write("fp.json", R"({"preset":"heavy-case","grid":[[1,1]],"estimators":["first-passage"]})");
  const auto out = (dir / "out").string();
  CHECK(pqtail("exact --config " + ok + " --out " + out) == 0);
  CHECK(pqtail("compare --config " + unstable + " --out " + out) == 2);
  CHECK(pqtail("exact --config " + heavy_exact + " --out " + out) == 5);
  CHECK(pqtail("cramer --config " + heavy_cramer + " --out " + out) == 4);
  CHECK(pqtail("simulate --config " + no_fp + " --out " + out) == 4);
  CHECK(pqtail("compare --config " + (dir / "missing.json").string()) != 0);
}
