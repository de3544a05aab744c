#include "doctest.h"

#include <cmath>

#include "gridmfg/metrics.hpp"
#include "gridmfg/text_io.hpp"
#include "market_fixtures.hpp"
#include "test_support.hpp"

using namespace gridmfg;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

RunLog cost_log(int days, int H, int buses, double bid, double lmp) {
  RunLog log;
  log.steps_per_day = H;
  log.bus_count = buses;
  for (long t = 0; t < static_cast<long>(days) * H; ++t) {
    for (int m = 0; m < buses; ++m) {
      StepRecord r;
      r.t = t;
      r.day = t / H;
      r.hour = static_cast<int>(t % H);
      r.bus = m;
      r.bid_mwh = bid;
      r.lmp = r.hub_price = lmp;
      log.records.push_back(r);
    }
  }
  return log;
}

}  // namespace

TEST_CASE("imv examples") {
  CHECK(imv(vec({5, 5, 5, 5})) == 0.0);
  CHECK(imv(vec({1, 2, 4})) == 1.5);
  CHECK(imv(vec({4, 2, 1})) == 1.5);
  CHECK_THROWS_AS(imv(vec({3})), SeriesTooShort);
  CHECK_THROWS_AS(imv(Eigen::VectorXd()), SeriesTooShort);
  Eigen::Matrix<long double, 3, 1> wide(1, 2, 4);
  CHECK(imv(wide) == 1.5L);
}

TEST_CASE("imv properties") {
  RngStream rng(21, StreamKind::test, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(50));
    Eigen::VectorXd p(n);
    for (int i = 0; i < n; ++i) p[i] = 100 * rng.uniform() - 20;
    const double v = imv(p);
    CHECK(v >= 0.0);
    CHECK(imv(p.reverse().eval()) == doctest::Approx(v));
    CHECK(imv((p.array() + 17.5).matrix().eval()) == doctest::Approx(v));
    CHECK(imv((3.0 * p).eval()) == doctest::Approx(3.0 * v));
    const bool constant = (p.array() == p[0]).all();
    CHECK((v == 0.0) == constant);
  }
}

TEST_CASE("ex-post cost") {
  CHECK(ex_post_cost(cost_log(2, 3, 2, 0.0, 30), 0, 2).average == 0.0);
  const auto one = ex_post_cost(cost_log(1, 1, 1, 2.0, 30), 0, 1);
  CHECK(one.per_bus[0] == 60.0);
  CHECK(ex_post_cost(cost_log(1, 1, 1, -1.0, 30), 0, 1).per_bus[0] == -30.0);

  const auto bundle = load_case_bundle(test_support::fixture_dir() / "three_bus");
  const RunLog log = run_scenario(bundle, fixtures::quick_config(bundle, 4), 4);
  const auto whole = ex_post_cost(log, 0, 4);
  const auto left = ex_post_cost(log, 0, 1), right = ex_post_cost(log, 1, 4);
  for (int m = 0; m < 3; ++m) {
    CHECK(whole.per_bus[m] == doctest::Approx(left.per_bus[m] + right.per_bus[m]));
  }
  CHECK(whole.average == doctest::Approx(whole.per_bus.mean()));
  CHECK_THROWS_AS(ex_post_cost(log, 2, 5), ModelError);
}

TEST_CASE("seed summary") {
  const auto s = seed_summary({1.0, 3.0});
  CHECK(s.mean == 2.0);
  CHECK(s.std == doctest::Approx(std::sqrt(2.0)));
  CHECK(s.min == 1.0);
  CHECK(s.max == 3.0);
  CHECK(seed_summary({4.0, 4.0, 4.0}).std == 0.0);
  CHECK(seed_summary({4.0}).std == 0.0);
  CHECK_THROWS_AS(seed_summary({}), ModelError);
}

TEST_CASE("report files from a run") {
  const auto bundle = load_case_bundle(test_support::fixture_dir() / "three_bus");
  const auto config = fixtures::quick_config(bundle, 2);
  std::vector<RunMetrics> runs;
  for (std::uint64_t seed : {1, 2}) runs.push_back(run_metrics(run_scenario(bundle, config, seed), 5, config.monitor));
  const auto dir = test_support::scratch_dir("report");
  write_report(dir, runs, 5);
  const auto j = nlohmann::json::parse(read_text_file(dir / "report.json"));
  CHECK(j.at("imv").at("per_seed").size() == 2);
  CHECK(j.at("imv").at("mean").get<double>() == doctest::Approx((runs[0].imv + runs[1].imv) / 2));
  CHECK(j.at("converged").get<bool>() == false);  // two days cannot fill two windows
  const CsvTable csv = read_csv(dir / "summary.csv");
  CHECK(csv.rows.size() == 2);
  CHECK(parse_number(csv.rows[1][csv.column("imv")]) == runs[1].imv);
}
