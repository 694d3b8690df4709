#include "hypercurv/marl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace hypercurv::marl {

std::string to_string(HgnnAction a) { return a == HgnnAction::kAdopt ? "ADOPT" : "KEEP"; }
std::string to_string(AceAction a) { return a == AceAction::kExplore ? "EXPLORE" : "HOLD"; }

QState discretize_state(std::span<const double> zetas, const CurvatureBounds& bounds,
                        double bin_width) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
  QState s;
  for (double z : zetas) {
    // The small slack keeps values such as min + 0.3 out of the bin below.
    s.bins.push_back(static_cast<int>(std::floor((bounds.clamp(z) - bounds.min) / bin_width + 1e-9)));
  }
  return s;
}

std::pair<double, double> expected_payoffs(const StageGame& game, const std::array<double, 2>& pi_hgnn,
                                           const std::array<double, 2>& pi_ace) {
  double a = 0.0, b = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double w = pi_hgnn[i] * pi_ace[j];
      a += w * game.hgnn[i][j];
      b += w * game.ace[i][j];
    }
  return {a, b};
}

Equilibrium nash_equilibrium_2x2(const StageGame& game) {
  const Payoff& A = game.hgnn;
  const Payoff& B = game.ace;
  for (const auto* m : {&A, &B})
    for (const auto& row : *m)
      for (double v : row)
        if (!std::isfinite(v)) throw std::invalid_argument("stage game has non-finite payoffs");

  int best = -1;
  double best_sum = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const bool row_best = A[i][j] >= A[1 - i][j];
      const bool col_best = B[i][j] >= B[i][1 - j];
      if (!row_best || !col_best) continue;
      const double sum = A[i][j] + B[i][j];
      if (best < 0 || sum > best_sum) {
        best = 2 * i + j;
        best_sum = sum;
      }
    }
  }
  Equilibrium eq;
  if (best >= 0) {
    const int i = best / 2, j = best % 2;
    eq.pi_hgnn[i] = 1.0;
    eq.pi_ace[j] = 1.0;
    eq.value_hgnn = A[i][j];
    eq.value_ace = B[i][j];
    eq.pure = true;
    return eq;
  }

  const double den_p = B[0][0] - B[1][0] - B[0][1] + B[1][1];
  const double den_q = A[0][0] - A[0][1] - A[1][0] + A[1][1];
  double p = 0.5, q = 0.5;
  if (den_p != 0.0 && den_q != 0.0) {
    p = (B[1][1] - B[1][0]) / den_p;
    q = (A[1][1] - A[0][1]) / den_q;
  }
  if (den_p == 0.0 || den_q == 0.0 || !(p >= 0.0 && p <= 1.0) || !(q >= 0.0 && q <= 1.0)) {
    spdlog::debug("degenerate stage game; falling back to uniform strategies");
    p = q = 0.5;
    eq.degenerate = true;
  }
  eq.pi_hgnn = {p, 1.0 - p};
  eq.pi_ace = {q, 1.0 - q};
  std::tie(eq.value_hgnn, eq.value_ace) = expected_payoffs(game, eq.pi_hgnn, eq.pi_ace);
  return eq;
}

std::size_t QTables::slot(int agent, ActionPair a) {
  if (agent != kHgnnAgent && agent != kAceAgent) throw std::out_of_range("agent index");
  return static_cast<std::size_t>(agent) * 4 + static_cast<std::size_t>(a.hgnn) * 2 +
         static_cast<std::size_t>(a.ace);
}

double QTables::get(int agent, const QState& s, ActionPair a) const {
  const auto it = table_.find(s);
  return it == table_.end() ? 0.0 : it->second[slot(agent, a)];
}

void QTables::set(int agent, const QState& s, ActionPair a, double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("Q value must be finite");
  table_.try_emplace(s, std::array<double, 8>{}).first->second[slot(agent, a)] = value;
}

StageGame QTables::stage_game(const QState& s) const {
  StageGame g;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const ActionPair a{static_cast<HgnnAction>(i), static_cast<AceAction>(j)};
      g.hgnn[i][j] = get(kHgnnAgent, s, a);
      g.ace[i][j] = get(kAceAgent, s, a);
    }
  return g;
}

double nash_value(const QTables& q, const QState& s, int agent) {
  const Equilibrium eq = nash_equilibrium_2x2(q.stage_game(s));
  return agent == kHgnnAgent ? eq.value_hgnn : eq.value_ace;
}

ActionPair equilibrium_action(const QTables& q, const QState& s, Rng& rng) {
  const Equilibrium eq = nash_equilibrium_2x2(q.stage_game(s));
  if (eq.pure) {
    return {eq.pi_hgnn[0] == 1.0 ? HgnnAction::kAdopt : HgnnAction::kKeep,
            eq.pi_ace[0] == 1.0 ? AceAction::kExplore : AceAction::kHold};
  }
  const bool adopt = uniform01(rng) < eq.pi_hgnn[0];
  const bool explore = uniform01(rng) < eq.pi_ace[0];
  return {adopt ? HgnnAction::kAdopt : HgnnAction::kKeep,
          explore ? AceAction::kExplore : AceAction::kHold};
}

ActionPair epsilon_greedy_joint(const QTables& q, const QState& s, double eps, Rng& rng) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (uniform01(rng) < eps) {
    const std::size_t k = uniform_index(rng, 4);
    return {static_cast<HgnnAction>(k / 2), static_cast<AceAction>(k % 2)};
  }
  return equilibrium_action(q, s, rng);
}

void q_update(QTables& q, const QState& s, ActionPair a, Rewards r, const QState& s_next,
              double alpha, double beta) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in [0, 1)");
  const Equilibrium next = nash_equilibrium_2x2(q.stage_game(s_next));
  const double target_h = r.hgnn + beta * next.value_hgnn;
  const double target_a = r.ace + beta * next.value_ace;
  const double qh = q.get(kHgnnAgent, s, a);
  const double qa = q.get(kAceAgent, s, a);
  q.set(kHgnnAgent, s, a, qh + alpha * (target_h - qh));
  q.set(kAceAgent, s, a, qa + alpha * (target_a - qa));
}

Rewards compute_rewards(double metric_curr, double metric_prev_hgnn, double metric_remapped_curr,
                        double metric_remapped_prev) {
  return {metric_curr - metric_prev_hgnn, metric_remapped_curr - metric_remapped_prev};
}

bool equilibrium_reached(std::span<const HistoryEntry> history, std::size_t patience) {
  if (patience == 0 || history.size() < patience) return false;
  const ActionPair rest{HgnnAction::kKeep, AceAction::kHold};
  const auto window = history.last(patience);
  return std::all_of(window.begin(), window.end(), [&](const HistoryEntry& e) {
    return e.state == window.front().state && e.greedy == rest;
  });
}

double EpsilonSchedule::at(std::size_t epoch) const {
  return std::max(floor, start * std::pow(decay, static_cast<double>(epoch)));
}

}  // namespace hypercurv::marl
