#pragma once

// Two-agent tabular Nash Q-learning over 2x2 stage games.

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hypercurv/manifold.hpp"
#include "hypercurv/rng.hpp"

namespace hypercurv::marl {

enum class HgnnAction { kAdopt = 0, kKeep = 1 };
enum class AceAction { kExplore = 0, kHold = 1 };

std::string to_string(HgnnAction a);
std::string to_string(AceAction a);

struct ActionPair {
  HgnnAction hgnn = HgnnAction::kKeep;
  AceAction ace = AceAction::kHold;

  friend bool operator==(const ActionPair&, const ActionPair&) = default;
};

/// One bin index per layer curvature.
struct QState {
  std::vector<int> bins;

  friend bool operator==(const QState&, const QState&) = default;
  friend auto operator<=>(const QState&, const QState&) = default;
};

/// floor((clamp(zeta) - min) / width) per layer.
QState discretize_state(std::span<const double> zetas, const CurvatureBounds& bounds = {},
                        double bin_width = 0.1);

/// Row = HGNN action, column = ACE action.
using Payoff = std::array<std::array<double, 2>, 2>;

struct StageGame {
  Payoff hgnn{};
  Payoff ace{};
};

struct Equilibrium {
  std::array<double, 2> pi_hgnn{};  // probabilities over {ADOPT, KEEP}
  std::array<double, 2> pi_ace{};   // probabilities over {EXPLORE, HOLD}
  double value_hgnn = 0.0;
  double value_ace = 0.0;
  bool pure = false;
  bool degenerate = false;  // uniform fallback was used
};

/// Pure equilibria are preferred, selected by the largest payoff sum and then
/// by action-index order. Without one, the mixed equilibrium from the
/// indifference conditions; uniform when those are degenerate.
Equilibrium nash_equilibrium_2x2(const StageGame& game);

/// Expected payoff of both agents under the given mixed strategies.
std::pair<double, double> expected_payoffs(const StageGame& game, const std::array<double, 2>& pi_hgnn,
                                           const std::array<double, 2>& pi_ace);

class QTables {
 public:
  double get(int agent, const QState& s, ActionPair a) const;
  void set(int agent, const QState& s, ActionPair a, double value);
  StageGame stage_game(const QState& s) const;

  /// All stored entries: (state, hgnn action, ace action) -> (Q_hgnn, Q_ace).
  const std::map<QState, std::array<double, 8>>& entries() const { return table_; }
  void restore(std::map<QState, std::array<double, 8>> table) { table_ = std::move(table); }

 private:
  static std::size_t slot(int agent, ActionPair a);
  std::map<QState, std::array<double, 8>> table_;
};

inline constexpr int kHgnnAgent = 0;
inline constexpr int kAceAgent = 1;

/// Equilibrium value of `agent` in the stage game at s.
double nash_value(const QTables& q, const QState& s, int agent);

/// The pure joint action of the equilibrium at s; mixed equilibria are
/// sampled with `rng`.
ActionPair equilibrium_action(const QTables& q, const QState& s, Rng& rng);

/// With probability eps a uniform joint action, otherwise
/// equilibrium_action.
ActionPair epsilon_greedy_joint(const QTables& q, const QState& s, double eps, Rng& rng);

struct Rewards {
  double hgnn = 0.0;
  double ace = 0.0;
};

/// Q_i(s,a) += alpha (R_i + beta NashQ_i(s') - Q_i(s,a)) for both agents.
void q_update(QTables& q, const QState& s, ActionPair a, Rewards r, const QState& s_next,
              double alpha, double beta);

/// R_hgnn = metric_curr - metric_prev_hgnn; R_ace = metric_remapped_curr -
/// metric_remapped_prev.
Rewards compute_rewards(double metric_curr, double metric_prev_hgnn, double metric_remapped_curr,
                        double metric_remapped_prev);

struct HistoryEntry {
  QState state;
  ActionPair greedy;
};

/// True when the last `patience` entries share one state and all have the
/// greedy action (KEEP, HOLD).
bool equilibrium_reached(std::span<const HistoryEntry> history, std::size_t patience = 20);

struct EpsilonSchedule {
  double start = 0.9;
  double decay = 0.99;
  double floor = 0.1;

  double at(std::size_t epoch) const;
};

}  // namespace hypercurv::marl
