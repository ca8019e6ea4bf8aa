#include <catch2/catch_amalgamated.hpp>

#include "lapflow/analysis.hpp"
#include "lapflow/protocols.hpp"
#include "support.hpp"

using lapflow::ConsensusOutcome;
using lapflow::ConvexSet;
using lapflow::GraphSignal;
using lapflow::WeightedDigraph;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

GraphSignal two_node_symmetric() {
  Eigen::MatrixXd w(2, 2);
  w << 0, 1, 1, 0;
  return GraphSignal::constant(WeightedDigraph(w));
}

GraphSignal example1_signal() {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 2);
  w(0, 1) = 1.0;
  return GraphSignal::constant(WeightedDigraph(w));
}

lapflow::Trajectory example1_trajectory(double t_end, double h) {
  return lapflow::sampled_trajectory(
      2, 1, t_end, h,
      [](double t) { return vec({std::sin(t), 2.0}); },
      [](double t) { return vec({std::cos(t), 0.0}); });
}

}  // namespace

TEST_CASE("consensus verdict on the symmetric pair") {
  const auto field = lapflow::consensus_field(two_node_symmetric());
  const auto traj = lapflow::integrate(field, vec({1.0, 0.0}), 20.0, 1e-3);
  const auto v = lapflow::consensus_verdict(traj, 1e-6);
  REQUIRE(v.outcome == ConsensusOutcome::Consensus);
  REQUIRE(std::abs(v.limit - 0.5) < 1e-6);
}

TEST_CASE("consensus verdict flags the example-1 oscillation") {
  const auto v = lapflow::consensus_verdict(example1_trajectory(20.0, 1e-3), 1e-4);
  REQUIRE(v.outcome == ConsensusOutcome::BoundedNonConvergent);
  REQUIRE(v.tail_spread > 0.5);
}

TEST_CASE("consensus verdict is immediate on agreement states") {
  const auto field = lapflow::consensus_field(two_node_symmetric());
  const auto traj = lapflow::integrate(field, vec({0.3, 0.3}), 5.0, 1e-3);
  const auto v = lapflow::consensus_verdict(traj, 1e-10);
  REQUIRE(v.outcome == ConsensusOutcome::Consensus);
  REQUIRE(v.limit == 0.3);
}

TEST_CASE("rate fit recovers the decay exponent") {
  SECTION("single-agent pull toward a point") {
    const auto s = GraphSignal::constant(WeightedDigraph::zero(1));
    lapflow::AggregationParams p{ConvexSet::singleton(vec({0.0})),
                                 lapflow::GainSignal::constant(vec({1.0})),
                                 lapflow::AnchorSignal::constant({vec({0.0})})};
    const auto field = lapflow::aggregation_field(s, p);
    const auto traj = lapflow::integrate(field, vec({2.0}), 20.0, 1e-3);
    const auto fit = lapflow::exponential_rate_fit(traj, 0.0);
    REQUIRE_FALSE(fit.instant);
    REQUIRE(std::abs(fit.rate + 1.0) < 1e-3);
    REQUIRE(fit.quality > 0.999);
  }
  SECTION("leader chain") {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 2);
    w(1, 0) = 1.0;
    const auto field = lapflow::leader_field(GraphSignal::constant(WeightedDigraph(w)), 0);
    const auto traj = lapflow::integrate(field, vec({0.0, 1.0}), 20.0, 1e-3);
    const auto fit = lapflow::exponential_rate_fit(traj, 0.0);
    REQUIRE(std::abs(fit.rate + 1.0) < 1e-3);
    REQUIRE(fit.quality > 0.99);
  }
  SECTION("constant trajectory reports instant convergence") {
    const auto traj = lapflow::sampled_trajectory(
        2, 1, 5.0, 1e-2, [](double) { return vec({0.0, 0.0}); },
        [](double) { return vec({0.0, 0.0}); });
    const auto fit = lapflow::exponential_rate_fit(traj, 0.0);
    REQUIRE(fit.instant);
  }
}

TEST_CASE("summability flags") {
  SECTION("static symmetric consensus plateaus") {
    const auto field = lapflow::consensus_field(two_node_symmetric());
    const auto traj = lapflow::integrate(field, vec({1.0, 0.0}), 30.0, 1e-3);
    const auto report = lapflow::summability_check(traj, field.graph, 0.01);
    REQUIRE(report.all_plateau);
    REQUIRE(report.pair_flow.size() == 2);
  }
  SECTION("example 1 flow integral grows without plateau") {
    const auto traj = example1_trajectory(40.0, 1e-3);
    const auto report = lapflow::summability_check(traj, example1_signal(), 0.01);
    REQUIRE(report.pair_flow.size() == 1);
    REQUIRE_FALSE(report.pair_flow.front().plateau);
    REQUIRE(report.pair_flow.front().total == Catch::Approx(2.0 * 40.0).epsilon(0.05));
  }
  SECTION("zero graph integrates to zero") {
    const auto field = lapflow::consensus_field(GraphSignal::constant(WeightedDigraph::zero(3)));
    const auto traj = lapflow::integrate(field, vec({1.0, 2.0, 3.0}), 5.0, 1e-2);
    const auto report = lapflow::summability_check(traj, field.graph, 0.01);
    REQUIRE(report.pair_flow.empty());
    for (const auto& e : report.state_rate) REQUIRE(e.total == 0.0);
    REQUIRE(report.all_plateau);
  }
}

TEST_CASE("equidistance of agents initialized inside the target") {
  const auto ball = ConvexSet::ball(vec({0.0, 0.0}), 1.0);
  std::vector<ConvexSet> sets{ball, ball};
  const auto field = lapflow::optimal_consensus_field(two_node_symmetric(), sets);
  const auto traj = lapflow::integrate(field, vec({0.2, 0.1, -0.3, 0.4}), 10.0, 1e-3);
  const auto v = lapflow::equidistance_verdict(traj, ball, 1e-6);
  REQUIRE(v.holds);
  REQUIRE(v.d_star < 1e-9);
}

TEST_CASE("modulus consensus classification") {
  SECTION("antagonistic pair polarizes") {
    Eigen::MatrixXd b(2, 2);
    b << 0, -1, -1, 0;
    const auto field = lapflow::altafini_field(lapflow::AltafiniParams::constant(b));
    const auto traj = lapflow::integrate(field, vec({1.0, -1.0}), 10.0, 1e-3);
    const auto v = lapflow::modulus_consensus_verdict(traj, 1e-4);
    REQUIRE(v.holds);
    REQUIRE(v.x_star == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(v.classification == "polarization");
    REQUIRE(v.positive_group == std::vector<int>{0});
    REQUIRE(v.negative_group == std::vector<int>{1});
  }
  SECTION("nonnegative couplings keep one sign camp") {
    lapflow::SplitMix64 rng(8);
    const auto g = oracle::random_strong_graph(rng, 4, 0.5);
    const auto field = lapflow::altafini_field(lapflow::AltafiniParams::constant(g.weights()));
    const auto traj = lapflow::integrate(field, vec({1.0, 2.0, 0.5, 1.5}), 60.0, 1e-3);
    const auto v = lapflow::modulus_consensus_verdict(traj, 1e-4);
    REQUIRE(v.holds);
    REQUIRE(v.classification == "consensus-sign");
  }
  SECTION("zero start stays at stability") {
    Eigen::MatrixXd b(2, 2);
    b << 0, -1, 1, 0;
    const auto field = lapflow::altafini_field(lapflow::AltafiniParams::constant(b));
    const auto traj = lapflow::integrate(field, vec({0.0, 0.0}), 5.0, 1e-3);
    const auto v = lapflow::modulus_consensus_verdict(traj, 1e-4);
    REQUIRE(v.holds);
    REQUIRE(v.x_star == 0.0);
    REQUIRE(v.classification == "stability");
  }
}

TEST_CASE("surround verdict") {
  SECTION("single agent is trivially surrounded") {
    const auto ball = ConvexSet::ball(vec({0.0, 0.0}), 1.0);
    const auto traj = lapflow::sampled_trajectory(
        1, 2, 2.0, 1e-2, [](double) { return vec({3.0, 0.0}); },
        [](double) { return vec({0.0, 0.0}); });
    Eigen::VectorXcd p(1);
    p << std::complex<double>(1.0, 0.0);
    const auto v = lapflow::surround_verdict(traj, p, ball, 1e-6);
    REQUIRE(v.holds);
    REQUIRE(v.tail_max == 0.0);
  }
  SECTION("all-ones W with point target reduces to planar consensus") {
    const auto origin = ConvexSet::singleton(vec({0.0, 0.0}));
    auto params = lapflow::SurroundingParams::direct(origin, Eigen::MatrixXcd::Ones(2, 2));
    const auto field = lapflow::surrounding_field(two_node_symmetric(), params);
    const auto traj = lapflow::integrate(field, vec({1.0, 0.5, -1.0, -0.5}), 20.0, 1e-3);
    Eigen::VectorXcd p = Eigen::VectorXcd::Ones(2);
    const auto v = lapflow::surround_verdict(traj, p, origin, 1e-6);
    REQUIRE(v.holds);
    REQUIRE(std::abs(traj.states.back()(0)) < 1e-6);
    REQUIRE(std::abs(traj.states.back()(1)) < 1e-6);
  }
}

TEST_CASE("contraction certificate") {
  const auto s = two_node_symmetric();
  SECTION("frozen constant for T=1, delta=0.5, unit weights") {
    const auto field = lapflow::consensus_field(s);
    const auto traj = lapflow::integrate(field, vec({1.0, 0.0}), 6.0, 1e-3);
    const auto cert = lapflow::contraction_certificate(s, 1.0, 0.5, traj);
    REQUIRE(cert.row_sum_bound == Catch::Approx(2.0));
    REQUIRE(cert.theta1 == Catch::Approx(std::exp(-2.0)));
    REQUIRE(cert.theta2 == Catch::Approx(0.5 * std::exp(-4.0)));
    REQUIRE(cert.theta == Catch::Approx(0.5 * std::exp(-4.0)));
    REQUIRE(cert.windows_checked > 0);
    REQUIRE(cert.violations == 0);
  }
  SECTION("tiny delta collapses to the monotone-max inequality") {
    const auto field = lapflow::consensus_field(s);
    const auto traj = lapflow::integrate(field, vec({0.4, -0.7}), 4.0, 1e-3);
    const auto cert = lapflow::contraction_certificate(s, 1.0, 1e-9, traj);
    REQUIRE(cert.theta < 1e-9);
    REQUIRE(cert.violations == 0);
  }
  SECTION("constant trajectories satisfy the bound with equality") {
    const auto field = lapflow::consensus_field(s);
    const auto traj = lapflow::integrate(field, vec({0.6, 0.6}), 4.0, 1e-3);
    const auto cert = lapflow::contraction_certificate(s, 1.0, 0.5, traj);
    REQUIRE(cert.violations == 0);
  }
  SECTION("missing USC precondition is an error") {
    const auto zero = GraphSignal::constant(WeightedDigraph::zero(2));
    const auto field = lapflow::consensus_field(zero);
    const auto traj = lapflow::integrate(field, vec({1.0, 0.0}), 4.0, 1e-3);
    REQUIRE_THROWS_AS(lapflow::contraction_certificate(zero, 1.0, 0.5, traj),
                      lapflow::CertificateError);
  }
}

TEST_CASE("dichotomy sweep on a static strongly connected graph") {
  lapflow::SplitMix64 rng(2026);
  const auto g = oracle::random_strong_graph(rng, 4, 0.5);
  const auto field = lapflow::consensus_field(GraphSignal::constant(g));
  std::vector<Eigen::VectorXd> ics;
  for (int r = 0; r < 20; ++r) {
    Eigen::VectorXd x0(4);
    for (int i = 0; i < 4; ++i) x0(i) = rng.uniform(-3, 3);
    ics.push_back(x0);
  }
  const auto report = lapflow::dichotomy_sweep(field, ics, 60.0, 1e-3);
  REQUIRE(report.bounded_nonconvergent_count == 0);
  REQUIRE(report.consensus_count == 20);
  REQUIRE(report.unbounded_count == 1);  // the crafted ray
  REQUIRE(report.witness_attempted);
  REQUIRE_FALSE(report.witness_found);
  for (const auto& run : report.runs)
    if (run.label == "ray") REQUIRE(run.residual_ok);
}

TEST_CASE("dichotomy sweep finds the sin witness on non-isolated components") {
  // Closed 2-cycle {1, 2} feeding node 0: components are not isolated.
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3);
  w(0, 1) = 1.0;
  w(1, 2) = 1.0;
  w(2, 1) = 1.0;
  const auto g = WeightedDigraph(w);
  REQUIRE_FALSE(lapflow::components_isolated(g));
  const auto field = lapflow::consensus_field(GraphSignal::constant(g));
  const auto report = lapflow::dichotomy_sweep(field, {vec({1.0, 0.0, -1.0})}, 40.0, 1e-3);
  REQUIRE(report.witness_attempted);
  REQUIRE(report.witness_found);
  REQUIRE(report.bounded_nonconvergent_count >= 1);
  for (const auto& run : report.runs)
    if (run.label == "sin-witness") {
      REQUIRE(run.residual_ok);
      REQUIRE(run.tail_spread > 0.5);
    }
}

TEST_CASE("isolated components keep every bounded run convergent") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 4);
  w(0, 1) = w(1, 0) = 1.0;
  w(2, 3) = w(3, 2) = 1.0;
  const auto g = WeightedDigraph(w);
  REQUIRE(lapflow::components_isolated(g));
  REQUIRE(lapflow::sin_witness_trajectory(g, 10.0, 1e-2) == std::nullopt);
}
