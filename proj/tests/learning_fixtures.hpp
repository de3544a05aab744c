#pragma once

#include <cmath>
#include <vector>

#include "gridmfg/learning.hpp"

namespace fixtures {

using namespace gridmfg;

/// Two-step day with beliefs (cheap, expensive), zero demand, lossless
/// 10 kWh storage starting half full.
inline TrainEnv two_hour_env(double b0, double b1) {
  TrainEnv env;
  env.belief.resize(2);
  env.belief << b0, b1;
  env.profile.hourly_mean = Eigen::VectorXd::Zero(2);
  env.initial_storage = 0.5;
  env.gamma = 0.95;
  return env;
}

/// Twelve-step day with an evening price peak and noisy prosumer demand.
inline TrainEnv duck_env() {
  TrainEnv env;
  env.belief.resize(12);
  env.belief << 22, 21, 21.5, 22, 20, 19, 19, 20, 24, 31, 28, 23;
  env.profile.hourly_mean.resize(12);
  env.profile.hourly_mean << 0.16, 0.14, 0.15, 0.12, -0.06, -0.19, -0.21, -0.10, 0.15, 0.38,
      0.33, 0.22;
  env.initial_storage = 0.5;
  return env;
}

/// Value iteration over storage levels k/10 with the bin-midpoint action
/// restriction of an 11-bin policy, in integer tenths.
struct GridOracle {
  std::vector<std::vector<int>> best;  // [k][h] -> action in tenths

  int best_action(int k, int h) const { return best[k][h]; }
};

inline bool midpoint_allows(int k, int j) {
  const int b = std::min((k * 11) / 10, 10);
  const int level = 10 * (2 * b + 1) + 22 * j;  // 220 * (midpoint + j / 10)
  return level >= 0 && level <= 220 && k + j >= 0 && k + j <= 10;
}

inline GridOracle two_hour_value_iteration(const Eigen::VectorXd& belief, double gamma) {
  const int H = static_cast<int>(belief.size());
  std::vector<std::vector<double>> V(11, std::vector<double>(H, 0.0)), next = V;
  auto q = [&](int k, int h, int j) {
    return -belief[h] * 0.01 * (j / 10.0) + gamma * V[k + j][(h + 1) % H];
  };
  for (int it = 0; it < 3000; ++it) {
    for (int k = 0; k <= 10; ++k) {
      for (int h = 0; h < H; ++h) {
        double best = -1e300;
        for (int j = -10; j <= 10; ++j) {
          if (midpoint_allows(k, j)) best = std::max(best, q(k, h, j));
        }
        next[k][h] = best;
      }
    }
    V.swap(next);
  }
  GridOracle oracle;
  oracle.best.assign(11, std::vector<int>(H, 0));
  for (int k = 0; k <= 10; ++k) {
    for (int h = 0; h < H; ++h) {
      int arg = 0;
      for (int j = -10; j <= 10; ++j) {
        if (!midpoint_allows(k, j)) continue;
        const double gap = q(k, h, j) - q(k, h, arg);
        const bool tie = std::abs(gap) <= 1e-9;
        if (gap > 1e-9 || (tie && arg != 0 &&
                           (std::abs(j) < std::abs(arg) || (std::abs(j) == std::abs(arg) && j < arg)))) {
          arg = j;
        }
      }
      oracle.best[k][h] = arg;
    }
  }
  return oracle;
}

struct RolloutStep {
  int storage_tenths;
  int hour;
  int action_tenths;
};

/// Deterministic rollout taking the most probable valid action each step.
inline std::vector<RolloutStep> greedy_rollout(const Policy& policy, const TrainEnv& env,
                                               double x0, int h0, int steps) {
  std::vector<RolloutStep> out;
  double x = x0;
  int h = h0;
  for (int s = 0; s < steps; ++s) {
    const StateKey key{storage_bin(x, policy.states.storage_bins), h, 0};
    const auto mask = mask_actions(x, env.space, env.efficiency);
    const Eigen::VectorXd p = policy.row(key);
    int best = env.space.zero_index();
    for (int i = 0; i < env.space.size(); ++i) {
      if (mask[i] && p[i] > p[best] + 1e-12) best = i;
    }
    const double a = env.space.value(best);
    out.push_back({static_cast<int>(std::lround(x * 10)), h, static_cast<int>(std::lround(a * 10))});
    x = step_storage(x, a, env.efficiency);
    h = (h + 1) % env.steps_per_day();
  }
  return out;
}

inline bool pattern_charges_cheap(const std::vector<RolloutStep>& path, int cheap, int expensive) {
  bool charged = false, discharged = false;
  for (const auto& s : path) {
    if (s.hour == cheap && s.action_tenths < 0) return false;
    if (s.hour == expensive && s.action_tenths > 0) return false;
    charged |= s.hour == cheap && s.action_tenths > 0;
    discharged |= s.hour == expensive && s.action_tenths < 0;
  }
  return charged && discharged;
}

struct PairedDifference {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Discounted-return difference between two policies on common random
/// numbers.
inline PairedDifference paired_value_difference(const Policy& a, const Policy& b,
                                                const TrainEnv& env, int episodes, int steps) {
  auto run = [&](const Policy& p, std::uint64_t episode) {
    RngStream rng(episode, StreamKind::test, 77);
    EnvState state = env_reset(env, rng);
    double ret = 0.0, discount = 1.0;
    for (int k = 0; k < steps; ++k) {
      const int act_index = act(p, state_key(state, env, p.states),
                                mask_actions(state.storage, env.space, env.efficiency), rng);
      const StepOutcome out = env_step(env, state, act_index, rng);
      ret += discount * out.reward;
      discount *= env.gamma;
      state = out.next;
    }
    return ret;
  };
  double sum = 0.0, sq = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const double d = run(a, e) - run(b, e);
    sum += d;
    sq += d * d;
  }
  PairedDifference out;
  out.mean = sum / episodes;
  const double var = std::max(0.0, (sq - episodes * out.mean * out.mean) / (episodes - 1));
  out.standard_error = std::sqrt(var / episodes);
  return out;
}

/// Random frozen batch. Old log-probabilities are offset from the current ones
/// so that ratios land both inside and well outside the clip range.
inline PgBatch random_batch(const PgNetwork& net, const ActionSpace& space, RngStream& rng, int n) {
  PgBatch batch;
  batch.old_logp.resize(n);
  batch.advantages.resize(n);
  for (int k = 0; k < n; ++k) {
    const int s = static_cast<int>(rng.index(net.states().size()));
    const ActionMask mask = mask_actions(rng.uniform(), space, 1.0);
    const auto valid = valid_indices(mask);
    const int a = valid[rng.index(valid.size())];
    const Eigen::VectorXd p = masked_softmax(net.logits(net.params, s, mask));
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double offset = rng.uniform() < 0.5 ? 0.02 + 0.08 * rng.uniform()
                                              : 0.35 + 0.15 * rng.uniform();
    batch.states.push_back(s);
    batch.actions.push_back(a);
    batch.masks.push_back(mask);
    batch.old_logp[k] = std::log(p[a]) + sign * offset;
    batch.advantages[k] = 2 * rng.uniform() - 1;
  }
  return batch;
}

/// Worst per-parameter relative error of `grad` against central differences.
/// Entries whose magnitude is below 1e-6 are compared absolutely.
inline double gradient_check(const PgNetwork& net, const PgBatch& batch, double clip,
                             double entropy, const Eigen::VectorXd& grad) {
  const double h = 1e-6;
  double worst = 0.0;
  Eigen::VectorXd theta = net.params;
  for (int i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + h;
    const double up = surrogate(net, theta, batch, clip, entropy, nullptr);
    theta[i] = keep - h;
    const double down = surrogate(net, theta, batch, clip, entropy, nullptr);
    theta[i] = keep;
    const double fd = (up - down) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
    worst = std::max(worst, std::abs(fd - grad[i]) / scale);
  }
  return worst;
}

}  // namespace fixtures
