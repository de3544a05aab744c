#include "gridmfg/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gridmfg/core_model.hpp"

namespace gridmfg {

namespace {
constexpr double kStorageTol = 1e-12;
}

ActionSpace::ActionSpace(double step) {
  if (!(step > 0.0) || step > 1.0) throw ModelError("action step must lie in (0, 1]");
  const double n = std::round(1.0 / step);
  if (std::abs(n * step - 1.0) > 1e-9) {
    throw ModelError("action step must divide 1 exactly, got " + std::to_string(step));
  }
  n_ = static_cast<int>(n);
  values_.reserve(2 * n_ + 1);
  for (int k = -n_; k <= n_; ++k) values_.push_back(static_cast<double>(k) / n_);
}

double phi(double a, double eta) { return a < 0.0 ? eta * a : a / eta; }

ActionMask mask_actions(double x, const ActionSpace& space, double eta) {
  ActionMask mask(space.size());
  for (int i = 0; i < space.size(); ++i) {
    const double next = x + phi(space.value(i), eta);
    mask[i] = next >= -kStorageTol && next <= 1.0 + kStorageTol;
  }
  mask[space.zero_index()] = 1;
  return mask;
}

std::vector<int> valid_indices(const ActionMask& mask) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(mask.size()); ++i) {
    if (mask[i]) out.push_back(i);
  }
  return out;
}

double step_storage(double x, double a, double eta) {
  const double next = x + phi(a, eta);
  if (next < -kStorageTol || next > 1.0 + kStorageTol) {
    throw std::logic_error("masked action " + std::to_string(a) + " applied at storage " +
                           std::to_string(x));
  }
  return std::clamp(next, 0.0, 1.0);
}

double reward(double belief_h, double capacity_kwh, double a, double eta, double d) {
  return -belief_h * (capacity_kwh / kKwhPerMwh) * (phi(a, eta) + d);
}

BeliefUpdateParams BeliefUpdateParams::make(double delta) {
  if (!(delta >= 0.5 && delta <= 1.0)) {
    throw ModelError("belief learning rate must lie in [0.5, 1], got " + std::to_string(delta));
  }
  return BeliefUpdateParams{delta};
}

Eigen::VectorXd update_belief(const Eigen::VectorXd& belief, int h, long k,
                              double observed, double delta) {
  Eigen::VectorXd out = belief;
  out[h] -= delta * (belief[h] - observed) / std::sqrt(static_cast<double>(k) + 1.0);
  return out;
}

}  // namespace gridmfg
