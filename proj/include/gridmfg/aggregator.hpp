#pragma once

#include <Eigen/Dense>

#include <vector>

namespace gridmfg {

inline constexpr double kKwhPerMwh = 1000.0;

/// Discrete actions k/n for k = -n..n, where n = 1/step.
class ActionSpace {
 public:
  ActionSpace() : ActionSpace(0.1) {}
  explicit ActionSpace(double step);

  int size() const { return static_cast<int>(values_.size()); }
  double step() const { return 1.0 / n_; }
  double value(int i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  int zero_index() const { return n_; }

 private:
  int n_;
  std::vector<double> values_;
};

/// Realized storage change for action a, exactly as in the storage model:
/// eta * a when discharging, a / eta when charging.
double phi(double a, double eta);

/// One flag per action of `space`: true when 0 <= x + phi(a, eta) <= 1.
using ActionMask = std::vector<char>;

ActionMask mask_actions(double x, const ActionSpace& space, double eta);

std::vector<int> valid_indices(const ActionMask& mask);

/// x + phi(a, eta). Throws std::logic_error when the action is not valid at x.
double step_storage(double x, double a, double eta);

/// -belief * capacity * (phi(a, eta) + d) in $, capacity in kWh.
double reward(double belief_h, double capacity_kwh, double a, double eta, double d);

struct BeliefUpdateParams {
  double delta = 0.5;

  static BeliefUpdateParams make(double delta);
};

/// Moves entry h toward `observed` by delta / sqrt(k + 1) of the gap.
Eigen::VectorXd update_belief(const Eigen::VectorXd& belief, int h, long k,
                              double observed, double delta);

struct AggregatorState {
  int bus = 0;
  double storage = 0.5;
  double capacity_kwh = 10.0;
  double efficiency = 1.0;
  Eigen::VectorXd belief;

  double capacity_mwh() const { return capacity_kwh / kKwhPerMwh; }
};

}  // namespace gridmfg
