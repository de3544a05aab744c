#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridmfg/aggregator.hpp"
#include "gridmfg/core_model.hpp"
#include "gridmfg/rng.hpp"

namespace gridmfg {

struct PgConfig {
  int hidden = 32;
  double learning_rate = 0.01;
  int batch_steps = 240;
  int epochs = 4;
  double clip = 0.2;
  double entropy = 0.01;
  double value_rate = 0.1;
  int divergence_batches = 10;
  double divergence_drop = 0.5;
};

enum class LearnerKind { q, pg };

LearnerKind parse_learner_kind(std::string_view text);
std::string_view to_string(LearnerKind kind);

struct LearnerConfig {
  LearnerKind kind = LearnerKind::q;
  double gamma = 0.95;
  double epsilon_start = 0.1;
  double epsilon_end = 0.01;
  double alpha_power = 0.6;  // alpha = (1 + visits)^-alpha_power
  int storage_bins = 11;
  int demand_bins = 0;  // 0 keeps demand out of the state
  long t_train = 3600;
  bool warm_start = true;
  PgConfig pg;
};

/// Training environment for one aggregator over one phase. The belief is
/// frozen for the whole phase.
struct TrainEnv {
  Eigen::VectorXd belief;
  double initial_storage = 0.5;
  int start_hour = 0;
  DemandProfile profile;
  double efficiency = 1.0;
  double capacity_kwh = 10.0;
  ActionSpace space;
  double gamma = 0.95;

  int steps_per_day() const { return static_cast<int>(belief.size()); }
};

struct StateKey {
  int bin = 0;
  int hour = 0;
  int demand_bin = 0;
};

/// floor(x * bins) clamped to bins - 1.
int storage_bin(double x, int bins);
double bin_midpoint(int bin, int bins);
int demand_bin(double d, const DemandProfile& profile, int h, int bins);

struct StateSpace {
  int storage_bins = 11;
  int hours = 12;
  int demand_bins = 1;

  int size() const { return storage_bins * hours * demand_bins; }
  int index(const StateKey& key) const {
    return (key.hour * storage_bins + key.bin) * demand_bins + key.demand_bin;
  }
  StateKey key(int index) const;
};

StateSpace make_state_space(const LearnerConfig& config, int hours);

/// Storage, hour and the demand already drawn for that hour.
struct EnvState {
  double storage = 0.0;
  int hour = 0;
  double demand = 0.0;
};

struct StepOutcome {
  EnvState next;
  double reward = 0.0;
};

EnvState env_reset(const TrainEnv& env, RngStream& rng);

/// Applies action index `a` with the demand held in `state`, then draws the
/// demand of the next hour.
StepOutcome env_step(const TrainEnv& env, const EnvState& state, int a, RngStream& rng);

StateKey state_key(const EnvState& state, const TrainEnv& env, const StateSpace& states);

/// Actions allowed at the midpoint of the key's storage bin. Policies never
/// put mass outside this set.
ActionMask key_mask(const StateKey& key, const StateSpace& states,
                    const ActionSpace& space, double eta);

/// Row-per-state action distribution.
struct Policy {
  ActionSpace space;
  StateSpace states;
  Eigen::MatrixXd prob;  // states.size() x space.size()

  Eigen::VectorXd row(const StateKey& key) const {
    return prob.row(states.index(key)).transpose();
  }
  /// Probability-weighted action value at key.
  double mean_action(const StateKey& key) const;
};

/// Puts all mass on the valid action nearest to `value` at every state.
Policy constant_policy(const ActionSpace& space, const StateSpace& states, double eta,
                       double value);

/// Largest deviation from the policy contract: row sums over the bin-midpoint
/// mask must be 1 and masked entries exactly 0.
double policy_violation(const Policy& policy, double eta);

void write_policy_csv(const Policy& policy, const std::filesystem::path& path);
Policy read_policy_csv(const std::filesystem::path& path);

/// Samples from the policy restricted to `mask` and renormalized. When the
/// policy has no mass on the mask, returns the valid action nearest to the
/// policy's mean action.
int act(const Policy& policy, const StateKey& key, const ActionMask& mask, RngStream& rng);

struct QTable {
  Eigen::MatrixXd q;
  Eigen::MatrixXi visits;
};

struct QTrainResult {
  Policy policy;
  QTable table;
  double late_max_change = 0.0;  // largest |dQ| over the last 10% of steps
};

/// Greedy action per state with ties toward 0, then smaller |a|, then the
/// lower index.
Policy greedy_policy(const QTable& table, const StateSpace& states,
                     const ActionSpace& space, double eta);

QTrainResult train_q(const TrainEnv& env, const LearnerConfig& config, RngStream& rng,
                     const QTable* warm = nullptr);

/// Single tanh hidden layer over one-hot (bin, hour, demand bin) features.
class PgNetwork {
 public:
  PgNetwork() = default;
  PgNetwork(const StateSpace& states, int hidden, int actions, RngStream& rng);

  int inputs() const { return inputs_; }
  int hidden() const { return hidden_; }
  int outputs() const { return outputs_; }
  const StateSpace& states() const { return states_; }

  Eigen::VectorXd params;

  std::vector<int> features(int state) const;
  /// Logits with masked actions at -inf.
  Eigen::VectorXd logits(const Eigen::VectorXd& theta, int state, const ActionMask& mask) const;
  /// Back-propagates dL/dlogits into `grad`.
  void accumulate(const Eigen::VectorXd& theta, int state, const Eigen::VectorXd& dlogits,
                  Eigen::VectorXd& grad) const;

 private:
  StateSpace states_;
  int inputs_ = 0;
  int hidden_ = 0;
  int outputs_ = 0;
};

Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits);

struct PgBatch {
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<ActionMask> masks;
  Eigen::VectorXd old_logp;
  Eigen::VectorXd advantages;
};

/// Clipped surrogate plus entropy bonus, averaged over the batch. Fills
/// `grad` with the exact gradient when given.
double surrogate(const PgNetwork& net, const Eigen::VectorXd& theta, const PgBatch& batch,
                 double clip, double entropy, Eigen::VectorXd* grad);

class PgDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PgTrainResult {
  Policy policy;
  PgNetwork net;
  Eigen::VectorXd values;
  std::vector<double> batch_returns;
};

Policy tabulate_policy(const PgNetwork& net, const ActionSpace& space, double eta);

PgTrainResult train_pg(const TrainEnv& env, const LearnerConfig& config, RngStream& rng,
                       const PgTrainResult* warm = nullptr);

/// Learner with optional state carried between training phases.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual Policy train(const TrainEnv& env, RngStream& rng) = 0;
};

std::unique_ptr<Learner> make_learner(const LearnerConfig& config);

/// Discounted return of `policy` from the env's start, averaged over
/// `episodes` rollouts of `steps` steps.
double evaluate_policy(const Policy& policy, const TrainEnv& env, int episodes, int steps,
                       RngStream& rng);

}  // namespace gridmfg
