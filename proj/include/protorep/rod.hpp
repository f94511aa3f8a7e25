#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "protorep/agents.hpp"
#include "protorep/mdp.hpp"
#include "protorep/represent.hpp"

namespace protorep {

/// Representation-driven option discovery flavours: RACE learns a DR by TD
/// and extracts eigenvectors in log domain, CEO does the same with an SR in
/// linear domain, RW is the option-free random-walk baseline.
enum class RodKind { RACE, CEO, RW };
RodKind rod_kind_from_name(const std::string& name);
std::string rod_kind_name(RodKind kind);

struct RodConfig {
  RodKind kind = RodKind::RACE;
  int n_iter = 50;            // discovery cycles
  int n_steps = 100;          // environment interactions per cycle
  double p_option = 0.05;     // per-interaction probability of running an option
  int n_option = 8;           // option set capacity; oldest evicted beyond it
  int n_learn = 10;           // backward TD sweeps over the cycle's episode
  double alpha = 0.1;         // representation TD step size, in (0, 1]
  double lambda = 1.3;        // DR temperature (RACE)
  double gamma = 0.99;        // SR discount (CEO)
  int option_sweeps = 10;     // offline Q-learning sweeps when training an option
  double alpha0 = 0.1;        // option-training step size
  double gamma0 = 0.99;       // option-training discount
  int option_step_cap = 100;  // max steps per option execution
  bool with_q = false;        // also learn a task Q from the relabeled dataset
  double q_alpha = 0.1;
  double q_gamma = 0.99;
  int q_sweeps = 10;          // task-Q backward sweeps per cycle
  int q_eval_cap = 500;       // step cap of the per-cycle greedy evaluation
};

/// An option extracted from the current representation: a greedy policy over
/// `q_int`, the action values of the intrinsic reward e(s') - e(s).  It
/// terminates wherever max_a q_int(s,a) <= 0, at any state not yet visited
/// when it was invoked, or after `option_step_cap` steps.
struct EigenOption {
  Matrix q_int;
  int born_iter = 0;
};

struct RodIterationRow {
  int iter = 0;
  long env_steps = 0;  // cumulative environment interactions
  int n_visited = 0;
  double visited_frac = 0.0;
  double mean_step_reward = 0.0;  // over all interactions so far
  int options = 0;
  double eval_return = std::numeric_limits<double>::quiet_NaN();
};

struct RodResult {
  std::vector<RodIterationRow> rows;
  std::vector<long> visit_counts;        // arrivals per state, start states included
  std::vector<char> visited;             // ever-visited flags
  std::vector<TransitionSample> dataset; // full interaction log, in order
  Matrix repr;                           // final TD table (DR or SR); empty for RW
  Matrix q_ctrl;                         // task Q values (with_q only)
  int final_options = 0;
};

/// Runs the discovery cycle on `explore`, which must have no terminal states
/// (episodes are fixed-length).  Each cycle collects one `n_steps`-interaction
/// episode from the start distribution, mixing uniform primitive actions with
/// (probability `p_option`) a uniformly chosen option run to termination; an
/// option that terminates immediately falls back to one primitive step.  The
/// representation is then refreshed with `n_learn` backward sweeps over the
/// episode just collected, its dominant eigenvector over the visited set is
/// extracted, and a new option is trained offline on the full dataset against
/// an eigenvector-difference reward (the SR eigenvector is descended: it
/// grows with how developed a row is, so covering means seeking its small
/// entries).  With `with_q`, `episodic` (same layout, with terminals) relabels
/// the dataset for task Q-learning, evaluated once greedily per cycle.
RodResult run_rod(const TabularMdp& explore, const RodConfig& cfg, std::uint64_t seed,
                  const TabularMdp* episodic = nullptr);

}  // namespace protorep
