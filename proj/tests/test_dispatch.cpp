#include "doctest.h"

#include <cmath>
#include <numeric>

#include "dispatch_fixtures.hpp"
#include "gridmfg/dispatch.hpp"
#include "gridmfg/simplex.hpp"

using namespace gridmfg;
using fixtures::full_capacity;

TEST_CASE("linearize_costs") {
  SUBCASE("linear cost gives equal marginals") {
    Network net(1, Eigen::MatrixXd::Zero(0, 1), {}, {fixtures::thermal(1, 0, 0, 20, 50)});
    const auto pc = linearize_costs(net, Eigen::VectorXd::Constant(1, 50), 3);
    REQUIRE(pc.segments[0].size() == 3);
    for (const auto& s : pc.segments[0]) {
      CHECK(s.width == doctest::Approx(50.0 / 3));
      CHECK(s.marginal == doctest::Approx(20));
    }
  }
  SUBCASE("quadratic cost priced at midpoints") {
    Network net(1, Eigen::MatrixXd::Zero(0, 1), {}, {fixtures::thermal(1, 0, 0.01, 10, 100)});
    const auto pc = linearize_costs(net, Eigen::VectorXd::Constant(1, 100), 2);
    CHECK(pc.segments[0][0].marginal == doctest::Approx(10.5));
    CHECK(pc.segments[0][1].marginal == doctest::Approx(11.5));
  }
  SUBCASE("zero capacity gives zero-width segments") {
    Network net(1, Eigen::MatrixXd::Zero(0, 1), {}, {fixtures::thermal(1, 0, 0.01, 10, 100)});
    const auto pc = linearize_costs(net, Eigen::VectorXd::Zero(1), 4);
    REQUIRE(pc.segments[0].size() == 4);
    for (const auto& s : pc.segments[0]) CHECK(s.width == 0.0);
    CHECK(pc.capacity(0) == 0.0);
  }
  SUBCASE("marginals are nondecreasing") {
    Network net(1, Eigen::MatrixXd::Zero(0, 1), {}, {fixtures::thermal(1, 0, 0.03, 19.98, 80)});
    const auto pc = linearize_costs(net, Eigen::VectorXd::Constant(1, 70), 16);
    for (std::size_t j = 1; j < pc.segments[0].size(); ++j) {
      CHECK(pc.segments[0][j].marginal >= pc.segments[0][j - 1].marginal);
    }
  }
  Network net(1, Eigen::MatrixXd::Zero(0, 1), {}, {fixtures::thermal(1, 0, 0, 20, 50)});
  CHECK_THROWS(linearize_costs(net, Eigen::VectorXd::Constant(1, 50), 0));
  CHECK_THROWS(linearize_costs(net, Eigen::VectorXd::Constant(1, 60), 2));
}

TEST_CASE("merit-order dispatch on one bus") {
  const auto net = fixtures::merit_order_bus();
  const auto costs = linearize_costs(net, full_capacity(net), 1);
  const auto r = solve_dispatch(net, Eigen::VectorXd::Constant(1, 60), costs);
  REQUIRE(r.status == DispatchStatus::optimal);
  CHECK(r.p[0] == doctest::Approx(50));
  CHECK(r.p[1] == doctest::Approx(10));
  CHECK(r.hub_price == doctest::Approx(20));
  CHECK(r.lmp[0] == doctest::Approx(20));
  CHECK(r.objective == doctest::Approx(50 * 10 + 10 * 20));
  CHECK(r.nu_upper[0] == doctest::Approx(10));  // cheap unit at capacity
}

TEST_CASE("zero demand prices at the cheapest available unit") {
  Generator idle_solar;
  idle_solar.id = 3;
  idle_solar.kind = GeneratorKind::solar;
  idle_solar.p_max = 30;
  idle_solar.capacity_factor = Eigen::VectorXd::Zero(12);
  Network net(2, Eigen::MatrixXd::Zero(0, 2), {},
              {fixtures::thermal(1, 0, 0, 20, 50), fixtures::thermal(2, 1, 0, 12, 50), idle_solar});
  Eigen::VectorXd caps(3);
  caps << 50, 50, 0;  // night: solar unavailable
  const auto costs = linearize_costs(net, caps, 4);
  Eigen::VectorXd bids(2);
  bids << 0.0, 0.0;
  const auto r = solve_dispatch(net, bids, costs);
  REQUIRE(r.status == DispatchStatus::optimal);
  CHECK(r.p.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(r.objective == doctest::Approx(0.0));
  CHECK(r.lmp[0] == doctest::Approx(12));
  CHECK(r.lmp[1] == doctest::Approx(12));
  CHECK(verify_kkt(r, net, bids, costs).max_violation() < 1e-6);

  SUBCASE("prosumer supply exactly offsets demand") {
    bids << 8.0, -8.0;
    const auto r2 = solve_dispatch(net, bids, costs);
    REQUIRE(r2.status == DispatchStatus::optimal);
    CHECK(r2.objective == doctest::Approx(0.0));
    CHECK(r2.lmp[0] == doctest::Approx(12));
  }
}

TEST_CASE("congested two-bus case") {
  const auto net = fixtures::congested_pair();
  const auto costs = linearize_costs(net, full_capacity(net), 1);
  Eigen::VectorXd bids(2);
  bids << 0.0, 25.0;
  const auto r = solve_dispatch(net, bids, costs);
  REQUIRE(r.status == DispatchStatus::optimal);
  // Hand KKT: p1 = 10 is held by the line, p2 = 15 is interior so the hub
  // price is 30; stationarity at p1 gives 10 - 30 + mu_up = 0.
  CHECK(r.p[0] == doctest::Approx(10));
  CHECK(r.p[1] == doctest::Approx(15));
  CHECK(r.flow[0] == doctest::Approx(10));
  CHECK(r.hub_price == doctest::Approx(30));
  CHECK(r.mu_upper[0] == doctest::Approx(20));
  CHECK(r.mu_lower[0] == doctest::Approx(0));
  CHECK(r.lmp[0] == doctest::Approx(10));
  CHECK(r.lmp[1] == doctest::Approx(30));
  CHECK(verify_kkt(r, net, bids, costs).max_violation() < 1e-9);
}

TEST_CASE("infeasible and invalid dispatch inputs") {
  const auto net = fixtures::merit_order_bus();
  const auto costs = linearize_costs(net, full_capacity(net), 2);
  CHECK(solve_dispatch(net, Eigen::VectorXd::Constant(1, 150), costs).status ==
        DispatchStatus::infeasible);
  CHECK_THROWS_AS(solve_dispatch(net, Eigen::VectorXd::Constant(1, -1), costs),
                  AggregateDemandError);

  const auto pair = fixtures::congested_pair();
  const auto pair_costs = linearize_costs(pair, full_capacity(pair), 1);
  Eigen::VectorXd bids(2);
  bids << 70.0, 0.0;  // bus 1 cannot import more than 10 MW
  CHECK(solve_dispatch(pair, bids, pair_costs).status == DispatchStatus::infeasible);
}

TEST_CASE("verify_kkt flags constructed violations") {
  const auto net = fixtures::congested_pair();
  const auto costs = linearize_costs(net, full_capacity(net), 1);
  Eigen::VectorXd bids(2);
  bids << 0.0, 25.0;
  auto r = solve_dispatch(net, bids, costs);
  CHECK(verify_kkt(r, net, bids, costs).max_violation() < 1e-6);

  auto bumped = r;
  bumped.p[1] += 1.0;
  CHECK(verify_kkt(bumped, net, bids, costs).balance == doctest::Approx(1.0));

  auto negated = r;
  negated.mu_upper = -negated.mu_upper;
  CHECK(verify_kkt(negated, net, bids, costs).dual_feasibility == doctest::Approx(20.0));

  DispatchResult infeasible;
  CHECK_THROWS(verify_kkt(infeasible, net, bids, costs));
}

TEST_CASE("dual LMP agrees with finite differences") {
  SUBCASE("merit order") {
    const auto net = fixtures::merit_order_bus();
    const auto costs = linearize_costs(net, full_capacity(net), 1);
    const auto s = lmp_sensitivity_check(net, Eigen::VectorXd::Constant(1, 60), costs, 0, 0.1);
    CHECK(s.dual_lmp == doctest::Approx(20));
    CHECK(s.finite_difference_lmp == doctest::Approx(20));
  }
  SUBCASE("congested bus") {
    const auto net = fixtures::congested_pair();
    const auto costs = linearize_costs(net, full_capacity(net), 1);
    Eigen::VectorXd bids(2);
    bids << 0.0, 25.0;
    const auto s = lmp_sensitivity_check(net, bids, costs, 1, 0.1);
    CHECK(s.dual_lmp == doctest::Approx(30));
    CHECK(s.finite_difference_lmp == doctest::Approx(30));
    const auto s1 = lmp_sensitivity_check(net, bids, costs, 0, 0.1);
    CHECK(s1.dual_lmp == doctest::Approx(10));
    CHECK(s1.finite_difference_lmp == doctest::Approx(10));
  }
  SUBCASE("kink is reported as degenerate") {
    const auto net = fixtures::merit_order_bus();
    const auto costs = linearize_costs(net, full_capacity(net), 1);
    CHECK_THROWS_AS(lmp_sensitivity_check(net, Eigen::VectorXd::Constant(1, 50), costs, 0, 0.1),
                    DegenerateSensitivity);
  }
  const auto net = fixtures::merit_order_bus();
  const auto costs = linearize_costs(net, full_capacity(net), 1);
  CHECK_THROWS_AS(lmp_sensitivity_check(net, Eigen::VectorXd::Constant(1, 60), costs, 0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("randomized cases satisfy the optimality conditions") {
  int optimal = 0, checked_fd = 0;
  for (std::uint64_t seed = 1; optimal < 100 && seed < 1000; ++seed) {
    const auto c = fixtures::random_case(seed);
    const auto r = solve_dispatch(c.network, c.bids, c.costs);
    if (r.status != DispatchStatus::optimal) continue;
    ++optimal;
    const auto rep = verify_kkt(r, c.network, c.bids, c.costs);
    CAPTURE(seed);
    CHECK(rep.max_violation() < 1e-6);
    if (c.network.line_count() == 0 || (r.mu_lower.sum() + r.mu_upper.sum()) == 0.0) {
      for (int m = 0; m < c.network.bus_count(); ++m) {
        CHECK(r.lmp[m] == doctest::Approx(r.hub_price).epsilon(1e-12));
      }
    }
    if (c.network.line_count() == 0) {
      CHECK(r.objective == doctest::Approx(fixtures::merit_order_objective(c.costs, c.bids.sum()))
                               .epsilon(1e-9));
    }
    for (int m = 0; m < c.network.bus_count(); ++m) {
      try {
        const auto s = lmp_sensitivity_check(c.network, c.bids, c.costs, m, 1e-3);
        CHECK(std::abs(s.dual_lmp - s.finite_difference_lmp) <=
              std::max(1e-4, 1e-3 * std::abs(s.dual_lmp)));
        ++checked_fd;
      } catch (const DegenerateSensitivity&) {
      }
    }
  }
  CHECK(optimal == 100);
  CHECK(checked_fd > 100);
}

TEST_CASE("objective invariant under generator permutation") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto c = fixtures::random_case(seed);
    const auto r = solve_dispatch(c.network, c.bids, c.costs);
    if (r.status != DispatchStatus::optimal) continue;
    std::vector<Generator> gens = c.network.generators();
    std::vector<std::vector<CostSegment>> segs = c.costs.segments;
    std::reverse(gens.begin(), gens.end());
    std::reverse(segs.begin(), segs.end());
    Network permuted(c.network.bus_count(), c.network.ptdf(), c.network.lines(), gens);
    PiecewiseCost pc{segs};
    const auto r2 = solve_dispatch(permuted, c.bids, pc);
    REQUIRE(r2.status == DispatchStatus::optimal);
    CHECK(r2.objective == doctest::Approx(r.objective).epsilon(1e-9));

    // Reversing the segment order inside every generator keeps LMPs.
    PiecewiseCost shuffled = c.costs;
    for (auto& s : shuffled.segments) std::reverse(s.begin(), s.end());
    const auto r3 = solve_dispatch(c.network, c.bids, shuffled);
    REQUIRE(r3.status == DispatchStatus::optimal);
    CHECK(r3.objective == doctest::Approx(r.objective).epsilon(1e-9));
    for (int m = 0; m < c.network.bus_count(); ++m) {
      try {
        lmp_sensitivity_check(c.network, c.bids, c.costs, m, 1e-3);
      } catch (const DegenerateSensitivity&) {
        continue;  // tie: LMP not unique
      }
      CHECK(r3.lmp[m] == doctest::Approx(r.lmp[m]).epsilon(1e-9));
    }
  }
}

TEST_CASE("finer linearization converges") {
  // One bus, a=0.01, b=10, 100 MW; D=37 MW. The dual LMP is the midpoint
  // marginal of the partially loaded segment.
  Network net(1, Eigen::MatrixXd::Zero(0, 1), {}, {fixtures::thermal(1, 0, 0.01, 10, 100)});
  double previous_lmp = 0, previous_change = 1e9;
  for (int K = 4; K <= 64; K *= 2) {
    const auto r = solve_dispatch(net, Eigen::VectorXd::Constant(1, 37),
                                  linearize_costs(net, full_capacity(net), K));
    REQUIRE(r.status == DispatchStatus::optimal);
    if (K > 4) {
      const double change = std::abs(r.lmp[0] - previous_lmp);
      CHECK(change < previous_change);
      previous_change = change;
    }
    previous_lmp = r.lmp[0];
  }
  CHECK(previous_lmp == doctest::Approx(10.734375));
}

TEST_CASE("simplex handles bound flips and degenerate rows") {
  // min -x1 - x2, x1 + x2 = 1 twice (redundant), 0 <= x <= 1.
  LinearProgram<double> lp;
  lp.A = Eigen::MatrixXd::Ones(2, 2);
  lp.b = Eigen::VectorXd::Ones(2);
  lp.c = -Eigen::VectorXd::Ones(2);
  lp.lower = Eigen::VectorXd::Zero(2);
  lp.upper = Eigen::VectorXd::Ones(2);
  const auto sol = solve_bounded_simplex(lp);
  REQUIRE(sol.status == LpStatus::optimal);
  CHECK(sol.objective == doctest::Approx(-1));
  CHECK((lp.A * sol.x - lp.b).norm() < 1e-12);

  // Works in long double as well.
  LinearProgram<long double> lq;
  lq.A = Eigen::Matrix<long double, -1, -1>::Ones(1, 3);
  lq.b = Eigen::Matrix<long double, -1, 1>::Constant(1, 2.5L);
  lq.c = Eigen::Matrix<long double, -1, 1>(3);
  lq.c << 3, 1, 2;
  lq.lower = Eigen::Matrix<long double, -1, 1>::Zero(3);
  lq.upper = Eigen::Matrix<long double, -1, 1>::Ones(3);
  const auto sq = solve_bounded_simplex(lq);
  REQUIRE(sq.status == LpStatus::optimal);
  CHECK(static_cast<double>(sq.objective) == doctest::Approx(1 + 2 + 1.5));
  CHECK(static_cast<double>(sq.row_duals[0]) == doctest::Approx(3));

  // Unbounded.
  LinearProgram<double> ub;
  ub.A = Eigen::MatrixXd::Ones(1, 2);
  ub.A(0, 1) = -1;
  ub.b = Eigen::VectorXd::Zero(1);
  ub.c = Eigen::VectorXd::Constant(2, -1);
  ub.lower = Eigen::VectorXd::Zero(2);
  ub.upper = Eigen::VectorXd::Constant(2, std::numeric_limits<double>::infinity());
  CHECK(solve_bounded_simplex(ub).status == LpStatus::unbounded);
}
