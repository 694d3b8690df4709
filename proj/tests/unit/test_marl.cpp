#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

#include "hypercurv/marl.hpp"

using namespace hypercurv;
using namespace hypercurv::marl;

namespace {

// Largest gain either player can get by deviating to a pure strategy.
double deviation_gain(const StageGame& g, const Equilibrium& eq) {
  const auto [va, vb] = expected_payoffs(g, eq.pi_hgnn, eq.pi_ace);
  double gain = 0.0;
  for (int i = 0; i < 2; ++i) {
    std::array<double, 2> pure{};
    pure[i] = 1.0;
    gain = std::max(gain, expected_payoffs(g, pure, eq.pi_ace).first - va);
    gain = std::max(gain, expected_payoffs(g, eq.pi_hgnn, pure).second - vb);
  }
  return gain;
}

const QState kS{{0}};

}  // namespace

TEST_CASE("state discretization") {
  const CurvatureBounds b;
  CHECK(discretize_state(std::vector<double>{0.1}, b).bins == std::vector<int>{0});
  CHECK(discretize_state(std::vector<double>{0.35}, b).bins == std::vector<int>{2});
  CHECK(discretize_state(std::vector<double>{0.4}, b).bins == std::vector<int>{3});
  CHECK(discretize_state(std::vector<double>{0.41, 0.42}, b) == discretize_state(std::vector<double>{0.45, 0.49}, b));
  CHECK(discretize_state(std::vector<double>{50.0}, b).bins == std::vector<int>{99});
  CHECK(discretize_state(std::vector<double>{0.0}, b).bins == std::vector<int>{0});
}

TEST_CASE("Nash equilibria of 2x2 games") {
  SUBCASE("common payoff") {
    StageGame g;
    g.hgnn = {{{1, 0}, {0, 0}}};
    g.ace = g.hgnn;
    const Equilibrium eq = nash_equilibrium_2x2(g);
    CHECK(eq.pure);
    CHECK(eq.pi_hgnn == std::array<double, 2>{1, 0});
    CHECK(eq.pi_ace == std::array<double, 2>{1, 0});
    CHECK(eq.value_hgnn == 1.0);
    CHECK(eq.value_ace == 1.0);
  }
  SUBCASE("matching pennies") {
    StageGame g;
    g.hgnn = {{{1, -1}, {-1, 1}}};
    g.ace = {{{-1, 1}, {1, -1}}};
    const Equilibrium eq = nash_equilibrium_2x2(g);
    CHECK_FALSE(eq.pure);
    CHECK_FALSE(eq.degenerate);
    CHECK(eq.pi_hgnn == std::array<double, 2>{0.5, 0.5});
    CHECK(eq.pi_ace == std::array<double, 2>{0.5, 0.5});
  }
  SUBCASE("ties prefer the larger payoff sum, then index order") {
    StageGame g;
    g.hgnn = {{{2, 0}, {0, 3}}};
    g.ace = g.hgnn;
    auto eq = nash_equilibrium_2x2(g);
    CHECK(eq.pi_hgnn[1] == 1.0);
    CHECK(eq.pi_ace[1] == 1.0);
    g.hgnn = {{{1, 0}, {0, 1}}};
    g.ace = g.hgnn;
    eq = nash_equilibrium_2x2(g);
    CHECK(eq.pi_hgnn[0] == 1.0);
    CHECK(eq.pi_ace[0] == 1.0);
  }
  SUBCASE("all zero") {
    const Equilibrium eq = nash_equilibrium_2x2(StageGame{});
    CHECK(eq.pure);
    CHECK(eq.pi_hgnn[0] == 1.0);
    CHECK(eq.value_hgnn == 0.0);
  }
  SUBCASE("non-finite payoffs are rejected") {
    StageGame g;
    g.hgnn[0][0] = std::nan("");
    CHECK_THROWS_AS(nash_equilibrium_2x2(g), std::invalid_argument);
  }
  SUBCASE("random games give mutual best responses") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 10000; ++t) {
      StageGame g;
      for (auto* m : {&g.hgnn, &g.ace})
        for (auto& row : *m)
          for (double& v : row) v = u(rng);
      const Equilibrium eq = nash_equilibrium_2x2(g);
      CHECK(eq.pi_hgnn[0] + eq.pi_hgnn[1] == doctest::Approx(1.0));
      CHECK(eq.pi_ace[0] + eq.pi_ace[1] == doctest::Approx(1.0));
      CHECK(deviation_gain(g, eq) <= 1e-9);
    }
  }
}

TEST_CASE("nash value") {
  QTables q;
  CHECK(nash_value(q, kS, kHgnnAgent) == 0.0);
  q.set(kHgnnAgent, kS, {HgnnAction::kKeep, AceAction::kExplore}, 2.0);
  q.set(kAceAgent, kS, {HgnnAction::kKeep, AceAction::kExplore}, 3.0);
  CHECK(nash_value(q, kS, kHgnnAgent) == 2.0);
  CHECK(nash_value(q, kS, kAceAgent) == 3.0);

  QTables pennies;
  const double A[2][2] = {{1, -1}, {-1, 1}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const ActionPair a{static_cast<HgnnAction>(i), static_cast<AceAction>(j)};
      pennies.set(kHgnnAgent, kS, a, A[i][j] + 0.5 * i);
      pennies.set(kAceAgent, kS, a, -A[i][j]);
    }
  const Equilibrium eq = nash_equilibrium_2x2(pennies.stage_game(kS));
  REQUIRE_FALSE(eq.pure);
  double direct = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) direct += eq.pi_hgnn[i] * eq.pi_ace[j] * (A[i][j] + 0.5 * i);
  CHECK(nash_value(pennies, kS, kHgnnAgent) == doctest::Approx(direct).epsilon(1e-14));
}

TEST_CASE("epsilon-greedy joint actions") {
  SUBCASE("eps = 1 is uniform") {
    QTables q;
    Rng rng(5);
    std::array<int, 4> counts{};
    const int n = 10000;
    for (int t = 0; t < n; ++t) {
      const ActionPair a = epsilon_greedy_joint(q, kS, 1.0, rng);
      ++counts[2 * static_cast<int>(a.hgnn) + static_cast<int>(a.ace)];
    }
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - n / 4.0) * (c - n / 4.0) / (n / 4.0);
    CHECK(chi2 < 16.27);  // 3 dof, p = 0.001
  }
  SUBCASE("eps = 0 picks the unique joint maximum") {
    QTables q;
    for (auto* agent : {&kHgnnAgent, &kAceAgent}) {
      q.set(*agent, kS, {HgnnAction::kAdopt, AceAction::kExplore}, 1.0);
      q.set(*agent, kS, {HgnnAction::kKeep, AceAction::kExplore}, 0.2);
    }
    Rng rng(1);
    for (int t = 0; t < 50; ++t)
      CHECK(epsilon_greedy_joint(q, kS, 0.0, rng) == ActionPair{HgnnAction::kAdopt, AceAction::kExplore});
  }
  SUBCASE("fixed seed gives a fixed sequence") {
    QTables q;
    Rng a(3), b(3);
    for (int t = 0; t < 100; ++t) CHECK(epsilon_greedy_joint(q, kS, 0.5, a) == epsilon_greedy_joint(q, kS, 0.5, b));
  }
  SUBCASE("out of range eps") {
    QTables q;
    Rng r(0);
    CHECK_THROWS_AS(epsilon_greedy_joint(q, kS, 1.5, r), std::invalid_argument);
  }
}

TEST_CASE("Q update") {
  const ActionPair a{HgnnAction::kAdopt, AceAction::kHold};
  const QState s2{{1}};
  SUBCASE("alpha 1, beta 0 overwrites") {
    QTables q;
    q_update(q, kS, a, {0.3, -0.2}, s2, 1.0, 0.0);
    CHECK(q.get(kHgnnAgent, kS, a) == 0.3);
    CHECK(q.get(kAceAgent, kS, a) == -0.2);
  }
  SUBCASE("zero reward decays geometrically") {
    QTables q;
    q.set(kHgnnAgent, kS, a, 1.0);
    for (int t = 1; t <= 5; ++t) {
      q_update(q, kS, a, {0.0, 0.0}, s2, 0.3, 0.9);
      CHECK(q.get(kHgnnAgent, kS, a) == doctest::Approx(std::pow(0.7, t)));
    }
  }
  SUBCASE("two steps by hand with alpha 0.5, beta 0.9") {
    QTables q;
    // s2 holds a pure common-payoff maximum of 0.4 / 0.6 at (KEEP, EXPLORE).
    const ActionPair best{HgnnAction::kKeep, AceAction::kExplore};
    q.set(kHgnnAgent, s2, best, 0.4);
    q.set(kAceAgent, s2, best, 0.6);
    q_update(q, kS, a, {0.1, 0.2}, s2, 0.5, 0.9);
    // Q_h = 0 + 0.5 (0.1 + 0.36 - 0) = 0.23; Q_a = 0.5 (0.2 + 0.54) = 0.37
    CHECK(q.get(kHgnnAgent, kS, a) == doctest::Approx(0.23).epsilon(1e-15));
    CHECK(q.get(kAceAgent, kS, a) == doctest::Approx(0.37).epsilon(1e-15));
    q_update(q, kS, a, {-0.05, 0.0}, s2, 0.5, 0.9);
    // Q_h = 0.23 + 0.5 (-0.05 + 0.36 - 0.23) = 0.27; Q_a = 0.37 + 0.5 (0.54 - 0.37) = 0.455
    CHECK(q.get(kHgnnAgent, kS, a) == doctest::Approx(0.27).epsilon(1e-15));
    CHECK(q.get(kAceAgent, kS, a) == doctest::Approx(0.455).epsilon(1e-15));
  }
  SUBCASE("parameter ranges") {
    QTables q;
    CHECK_THROWS_AS(q_update(q, kS, a, {}, s2, 0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(q_update(q, kS, a, {}, s2, 0.5, 1.0), std::invalid_argument);
  }
  SUBCASE("bounded rewards keep Q bounded") {
    QTables q;
    Rng rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 5000; ++t) {
      const QState from{{static_cast<int>(uniform_index(rng, 3))}}, to{{static_cast<int>(uniform_index(rng, 3))}};
      const ActionPair act = epsilon_greedy_joint(q, from, 1.0, rng);
      q_update(q, from, act, {u(rng), u(rng)}, to, 0.5, 0.9);
    }
    for (const auto& [s, vals] : q.entries())
      for (double v : vals) CHECK(std::abs(v) <= 1.0 / (1.0 - 0.9) + 1e-9);
  }
}

TEST_CASE("rewards") {
  const Rewards r = compute_rewards(0.85, 0.80, 0.7, 0.7);
  CHECK(r.hgnn == doctest::Approx(0.05));
  CHECK(r.ace == 0.0);
  const Rewards s = compute_rewards(0.80, 0.85, 0.7, 0.7);
  CHECK(s.hgnn == -r.hgnn);
}

TEST_CASE("equilibrium detection") {
  const HistoryEntry rest{kS, {HgnnAction::kKeep, AceAction::kHold}};
  std::vector<HistoryEntry> h(20, rest);
  CHECK(equilibrium_reached(h, 20));
  CHECK_FALSE(equilibrium_reached(std::span(h).first(19), 20));
  h[7].greedy.ace = AceAction::kExplore;
  CHECK_FALSE(equilibrium_reached(h, 20));
  h[7] = rest;
  h[3].state = QState{{4}};
  CHECK_FALSE(equilibrium_reached(h, 20));
  h.insert(h.end(), 4, rest);
  CHECK(equilibrium_reached(h, 20));
}

TEST_CASE("epsilon schedule") {
  const EpsilonSchedule e;
  CHECK(e.at(0) == doctest::Approx(0.9));
  CHECK(e.at(1) == doctest::Approx(0.891));
  CHECK(e.at(1000) == 0.1);
}

TEST_CASE("tabular learning finds the best joint action of a common-payoff game") {
  int successes = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(derive_seed(77, trial));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::array<double, 4> R{};
    for (double& r : R) r = u(rng);
    const std::size_t best = std::max_element(R.begin(), R.end()) - R.begin();
    QTables q;
    const EpsilonSchedule eps;
    for (std::size_t ep = 0; ep < 500; ++ep) {
      const ActionPair a = epsilon_greedy_joint(q, kS, eps.at(ep), rng);
      const double r = R[2 * static_cast<int>(a.hgnn) + static_cast<int>(a.ace)];
      q_update(q, kS, a, {r, r}, kS, 0.5, 0.9);
    }
    const ActionPair g = equilibrium_action(q, kS, rng);
    successes += (2 * static_cast<std::size_t>(g.hgnn) + static_cast<std::size_t>(g.ace)) == best;
  }
  CHECK(successes >= 19);
}
