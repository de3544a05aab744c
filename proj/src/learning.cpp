#include "gridmfg/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gridmfg/text_io.hpp"

namespace gridmfg {

namespace {

constexpr double kTieTol = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Preference among equal values: action 0, then smaller |a|, then lower index.
bool preferred(const ActionSpace& space, int i, int j) {
  if (i == space.zero_index()) return true;
  if (j == space.zero_index()) return false;
  const double ai = std::abs(space.value(i)), aj = std::abs(space.value(j));
  if (ai != aj) return ai < aj;
  return i < j;
}

int greedy_among(const ActionSpace& space, const Eigen::Ref<const Eigen::RowVectorXd>& q,
                 const std::vector<int>& valid) {
  int best = valid.front();
  for (int i : valid) {
    if (q[i] > q[best] + kTieTol) {
      best = i;
    } else if (q[i] >= q[best] - kTieTol && preferred(space, i, best)) {
      best = i;
    }
  }
  return best;
}

int nearest_valid(const ActionSpace& space, const std::vector<int>& valid, double value) {
  int best = valid.front();
  for (int i : valid) {
    const double di = std::abs(space.value(i) - value), db = std::abs(space.value(best) - value);
    if (di < db - kTieTol || (di <= db + kTieTol && preferred(space, i, best))) best = i;
  }
  return best;
}

ActionMask training_mask(const EnvState& state, const StateKey& key, const TrainEnv& env,
                         const StateSpace& states) {
  ActionMask mask = mask_actions(state.storage, env.space, env.efficiency);
  const ActionMask mid = key_mask(key, states, env.space, env.efficiency);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] && mid[i];
  return mask;
}

int sample_index(const Eigen::VectorXd& p, double u) {
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last = i;
    acc += p[i];
    if (u < acc) return i;
  }
  return last;
}

void check_env(const TrainEnv& env) {
  if (env.belief.size() < 1) throw ModelError("training belief is empty");
  if (env.profile.hourly_mean.size() != env.belief.size()) {
    throw ModelError("demand profile and belief disagree on steps per day");
  }
  if (env.start_hour < 0 || env.start_hour >= env.steps_per_day()) {
    throw ModelError("start hour outside the day");
  }
}

}  // namespace

LearnerKind parse_learner_kind(std::string_view text) {
  if (text == "q" || text == "tabular") return LearnerKind::q;
  if (text == "pg" || text == "ppo") return LearnerKind::pg;
  throw ModelError("unknown learner '" + std::string(text) + "' (expected q or pg)");
}

std::string_view to_string(LearnerKind kind) { return kind == LearnerKind::q ? "q" : "pg"; }

int storage_bin(double x, int bins) {
  const int b = static_cast<int>(std::floor(x * bins));
  return std::clamp(b, 0, bins - 1);
}

double bin_midpoint(int bin, int bins) { return (bin + 0.5) / bins; }

int demand_bin(double d, const DemandProfile& profile, int h, int bins) {
  if (bins <= 1) return 0;
  const double base = profile.hourly_mean[h];
  const double width = profile.scale.upper - profile.scale.lower;
  if (base == 0.0 || width <= 0.0) return 0;
  const double pos = (d / base - profile.scale.lower) / width;
  return std::clamp(static_cast<int>(std::floor(pos * bins)), 0, bins - 1);
}

StateKey StateSpace::key(int index) const {
  StateKey k;
  k.demand_bin = index % demand_bins;
  index /= demand_bins;
  k.bin = index % storage_bins;
  k.hour = index / storage_bins;
  return k;
}

StateSpace make_state_space(const LearnerConfig& config, int hours) {
  if (config.storage_bins < 1) throw ModelError("storage_bins must be positive");
  return StateSpace{config.storage_bins, hours, std::max(1, config.demand_bins)};
}

EnvState env_reset(const TrainEnv& env, RngStream& rng) {
  check_env(env);
  return EnvState{env.initial_storage, env.start_hour,
                  sample_demand(env.profile, env.start_hour, rng)};
}

StepOutcome env_step(const TrainEnv& env, const EnvState& state, int a, RngStream& rng) {
  const double action = env.space.value(a);
  StepOutcome out;
  out.reward = reward(env.belief[state.hour], env.capacity_kwh, action, env.efficiency,
                      state.demand);
  out.next.storage = step_storage(state.storage, action, env.efficiency);
  out.next.hour = (state.hour + 1) % env.steps_per_day();
  out.next.demand = sample_demand(env.profile, out.next.hour, rng);
  return out;
}

StateKey state_key(const EnvState& state, const TrainEnv& env, const StateSpace& states) {
  return StateKey{storage_bin(state.storage, states.storage_bins), state.hour,
                  demand_bin(state.demand, env.profile, state.hour, states.demand_bins)};
}

ActionMask key_mask(const StateKey& key, const StateSpace& states, const ActionSpace& space,
                    double eta) {
  return mask_actions(bin_midpoint(key.bin, states.storage_bins), space, eta);
}

double Policy::mean_action(const StateKey& key) const {
  const Eigen::VectorXd p = row(key);
  double m = 0.0;
  for (int i = 0; i < p.size(); ++i) m += p[i] * space.value(i);
  return m;
}

Policy constant_policy(const ActionSpace& space, const StateSpace& states, double eta,
                       double value) {
  Policy policy{space, states, Eigen::MatrixXd::Zero(states.size(), space.size())};
  for (int s = 0; s < states.size(); ++s) {
    const auto valid = valid_indices(key_mask(states.key(s), states, space, eta));
    policy.prob(s, nearest_valid(space, valid, value)) = 1.0;
  }
  return policy;
}

double policy_violation(const Policy& policy, double eta) {
  double worst = 0.0;
  for (int s = 0; s < policy.states.size(); ++s) {
    const ActionMask mask = key_mask(policy.states.key(s), policy.states, policy.space, eta);
    double sum = 0.0;
    for (int i = 0; i < policy.space.size(); ++i) {
      const double p = policy.prob(s, i);
      if (mask[i]) {
        sum += p;
        worst = std::max(worst, std::max(0.0, -p));
      } else {
        worst = std::max(worst, std::abs(p));
      }
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

void write_policy_csv(const Policy& policy, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# gridmfg policy v1\nbin,hour,demand_bin";
  for (double a : policy.space.values()) out << ",a=" << format_number(a);
  out << '\n';
  for (int s = 0; s < policy.states.size(); ++s) {
    const StateKey k = policy.states.key(s);
    out << k.bin << ',' << k.hour << ',' << k.demand_bin;
    for (int i = 0; i < policy.space.size(); ++i) out << ',' << format_number(policy.prob(s, i));
    out << '\n';
  }
  write_text_file(path, out.str());
}

Policy read_policy_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const int actions = static_cast<int>(t.header.size()) - 3;
  if (actions < 3 || actions % 2 == 0) throw ModelError("policy file has a malformed header");
  const ActionSpace space(2.0 / (actions - 1));
  StateSpace states{1, 1, 1};
  std::vector<StateKey> keys;
  for (const auto& row : t.rows) {
    StateKey k{static_cast<int>(parse_integer(row[t.column("bin")])),
               static_cast<int>(parse_integer(row[t.column("hour")])),
               static_cast<int>(parse_integer(row[t.column("demand_bin")]))};
    states.storage_bins = std::max(states.storage_bins, k.bin + 1);
    states.hours = std::max(states.hours, k.hour + 1);
    states.demand_bins = std::max(states.demand_bins, k.demand_bin + 1);
    keys.push_back(k);
  }
  if (static_cast<int>(t.rows.size()) != states.size()) {
    throw ModelError("policy file does not cover every state");
  }
  Policy policy{space, states, Eigen::MatrixXd::Zero(states.size(), actions)};
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (int i = 0; i < actions; ++i) {
      policy.prob(states.index(keys[r]), i) = parse_number(t.rows[r][3 + i]);
    }
  }
  return policy;
}

int act(const Policy& policy, const StateKey& key, const ActionMask& mask, RngStream& rng) {
  const auto valid = valid_indices(mask);
  if (valid.empty()) throw std::logic_error("act called with an empty mask");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(policy.space.size());
  const Eigen::VectorXd row = policy.row(key);
  for (int i : valid) p[i] = row[i];
  const double mass = p.sum();
  if (!(mass > 0.0)) return nearest_valid(policy.space, valid, policy.mean_action(key));
  return sample_index(p, rng.uniform() * mass);
}

Policy greedy_policy(const QTable& table, const StateSpace& states, const ActionSpace& space,
                     double eta) {
  Policy policy{space, states, Eigen::MatrixXd::Zero(states.size(), space.size())};
  for (int s = 0; s < states.size(); ++s) {
    const auto valid = valid_indices(key_mask(states.key(s), states, space, eta));
    policy.prob(s, greedy_among(space, table.q.row(s), valid)) = 1.0;
  }
  return policy;
}

QTrainResult train_q(const TrainEnv& env, const LearnerConfig& config, RngStream& rng,
                     const QTable* warm) {
  if (config.t_train < 1) throw ModelError("t_train must be at least 1");
  const StateSpace states = make_state_space(config, env.steps_per_day());
  QTrainResult result;
  if (warm && warm->q.rows() == states.size() && warm->q.cols() == env.space.size()) {
    result.table = *warm;
  } else {
    result.table.q = Eigen::MatrixXd::Zero(states.size(), env.space.size());
    result.table.visits = Eigen::MatrixXi::Zero(states.size(), env.space.size());
  }
  Eigen::MatrixXd& q = result.table.q;

  const long T = config.t_train;
  const long late_start = T - std::max(1L, T / 10);
  EnvState state = env_reset(env, rng);
  for (long i = 0; i < T; ++i) {
    const double frac = T > 1 ? static_cast<double>(i) / (T - 1) : 0.0;
    const double eps = config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
    const StateKey key = state_key(state, env, states);
    const int s = states.index(key);
    const auto valid = valid_indices(training_mask(state, key, env, states));
    const bool explore = rng.uniform() < eps;
    const int a = explore ? valid[rng.index(valid.size())] : greedy_among(env.space, q.row(s), valid);

    const StepOutcome out = env_step(env, state, a, rng);
    const StateKey nkey = state_key(out.next, env, states);
    const int ns = states.index(nkey);
    double best_next = kNegInf;
    for (int j : valid_indices(training_mask(out.next, nkey, env, states))) {
      best_next = std::max(best_next, q(ns, j));
    }
    const double target = out.reward + env.gamma * best_next;
    const double alpha = std::pow(1.0 + result.table.visits(s, a), -config.alpha_power);
    const double change = alpha * (target - q(s, a));
    q(s, a) += change;
    ++result.table.visits(s, a);
    if (i >= late_start) result.late_max_change = std::max(result.late_max_change, std::abs(change));
    state = out.next;
  }
  result.policy = greedy_policy(result.table, states, env.space, env.efficiency);
  return result;
}

PgNetwork::PgNetwork(const StateSpace& states, int hidden, int actions, RngStream& rng)
    : states_(states),
      inputs_(states.storage_bins + states.hours + (states.demand_bins > 1 ? states.demand_bins : 0)),
      hidden_(hidden),
      outputs_(actions) {
  params = Eigen::VectorXd::Zero(hidden_ * inputs_ + hidden_ + outputs_ * hidden_ + outputs_);
  const double s1 = 1.0 / std::sqrt(3.0);
  const double s2 = 0.01;
  for (int i = 0; i < hidden_ * inputs_; ++i) params[i] = s1 * (2.0 * rng.uniform() - 1.0);
  const int w2 = hidden_ * inputs_ + hidden_;
  for (int i = 0; i < outputs_ * hidden_; ++i) params[w2 + i] = s2 * (2.0 * rng.uniform() - 1.0);
}

std::vector<int> PgNetwork::features(int state) const {
  const StateKey k = states_.key(state);
  std::vector<int> f{k.bin, states_.storage_bins + k.hour};
  if (states_.demand_bins > 1) f.push_back(states_.storage_bins + states_.hours + k.demand_bin);
  return f;
}

Eigen::VectorXd PgNetwork::logits(const Eigen::VectorXd& theta, int state,
                                  const ActionMask& mask) const {
  const Eigen::Map<const Eigen::MatrixXd> W1(theta.data(), hidden_, inputs_);
  const Eigen::Map<const Eigen::VectorXd> b1(theta.data() + hidden_ * inputs_, hidden_);
  const double* p2 = theta.data() + hidden_ * inputs_ + hidden_;
  const Eigen::Map<const Eigen::MatrixXd> W2(p2, outputs_, hidden_);
  const Eigen::Map<const Eigen::VectorXd> b2(p2 + outputs_ * hidden_, outputs_);
  Eigen::VectorXd pre = b1;
  for (int f : features(state)) pre += W1.col(f);
  Eigen::VectorXd z = b2 + W2 * pre.array().tanh().matrix();
  for (int i = 0; i < outputs_; ++i) {
    if (!mask[i]) z[i] = kNegInf;
  }
  return z;
}

void PgNetwork::accumulate(const Eigen::VectorXd& theta, int state, const Eigen::VectorXd& dz,
                           Eigen::VectorXd& grad) const {
  const Eigen::Map<const Eigen::MatrixXd> W1(theta.data(), hidden_, inputs_);
  const Eigen::Map<const Eigen::VectorXd> b1(theta.data() + hidden_ * inputs_, hidden_);
  const Eigen::Map<const Eigen::MatrixXd> W2(theta.data() + hidden_ * inputs_ + hidden_, outputs_,
                                             hidden_);
  const auto fs = features(state);
  Eigen::VectorXd pre = b1;
  for (int f : fs) pre += W1.col(f);
  const Eigen::VectorXd h = pre.array().tanh();

  Eigen::Map<Eigen::MatrixXd> gW1(grad.data(), hidden_, inputs_);
  Eigen::Map<Eigen::VectorXd> gb1(grad.data() + hidden_ * inputs_, hidden_);
  double* g2 = grad.data() + hidden_ * inputs_ + hidden_;
  Eigen::Map<Eigen::MatrixXd> gW2(g2, outputs_, hidden_);
  Eigen::Map<Eigen::VectorXd> gb2(g2 + outputs_ * hidden_, outputs_);

  gW2.noalias() += dz * h.transpose();
  gb2 += dz;
  const Eigen::VectorXd dpre = (W2.transpose() * dz).array() * (1.0 - h.array().square());
  for (int f : fs) gW1.col(f) += dpre;
  gb1 += dpre;
}

Eigen::VectorXd masked_softmax(const Eigen::VectorXd& z) {
  double top = kNegInf;
  for (int i = 0; i < z.size(); ++i) top = std::max(top, z[i]);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(z.size());
  for (int i = 0; i < z.size(); ++i) {
    if (z[i] != kNegInf) p[i] = std::exp(z[i] - top);
  }
  return p / p.sum();
}

double surrogate(const PgNetwork& net, const Eigen::VectorXd& theta, const PgBatch& batch,
                 double clip, double entropy, Eigen::VectorXd* grad) {
  const int n = static_cast<int>(batch.states.size());
  if (grad) *grad = Eigen::VectorXd::Zero(theta.size());
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    const int s = batch.states[k], a = batch.actions[k];
    const Eigen::VectorXd p = masked_softmax(net.logits(theta, s, batch.masks[k]));
    const double ratio = std::exp(std::log(p[a]) - batch.old_logp[k]);
    const double A = batch.advantages[k];
    const double unclipped = ratio * A;
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * A;
    double H = 0.0;
    for (int i = 0; i < p.size(); ++i) {
      if (p[i] > 0.0) H -= p[i] * std::log(p[i]);
    }
    total += std::min(unclipped, clipped) + entropy * H;
    if (!grad) continue;

    const bool inside = ratio >= 1.0 - clip && ratio <= 1.0 + clip;
    const double dlogp = (inside || unclipped < clipped) ? ratio * A : 0.0;
    Eigen::VectorXd dz = Eigen::VectorXd::Zero(p.size());
    for (int i = 0; i < p.size(); ++i) {
      if (p[i] <= 0.0) continue;
      dz[i] = dlogp * ((i == a ? 1.0 : 0.0) - p[i]) - entropy * p[i] * (std::log(p[i]) + H);
    }
    net.accumulate(theta, s, dz / n, *grad);
  }
  return total / n;
}

Policy tabulate_policy(const PgNetwork& net, const ActionSpace& space, double eta) {
  const StateSpace& states = net.states();
  Policy policy{space, states, Eigen::MatrixXd::Zero(states.size(), space.size())};
  for (int s = 0; s < states.size(); ++s) {
    const ActionMask mask = key_mask(states.key(s), states, space, eta);
    policy.prob.row(s) = masked_softmax(net.logits(net.params, s, mask)).transpose();
  }
  return policy;
}

PgTrainResult train_pg(const TrainEnv& env, const LearnerConfig& config, RngStream& rng,
                       const PgTrainResult* warm) {
  if (config.t_train < 1) throw ModelError("t_train must be at least 1");
  const PgConfig& pc = config.pg;
  const StateSpace states = make_state_space(config, env.steps_per_day());
  PgTrainResult result;
  const bool reuse = warm && warm->net.outputs() == env.space.size() &&
                     warm->net.states().size() == states.size() &&
                     warm->net.hidden() == pc.hidden;
  result.net = reuse ? warm->net : PgNetwork(states, pc.hidden, env.space.size(), rng);
  result.values = reuse ? warm->values : Eigen::VectorXd::Zero(states.size());

  Eigen::VectorXd& theta = result.net.params;
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size()), m2 = m1;
  const double beta1 = 0.9, beta2 = 0.999;
  long adam_t = 0;

  double best = kNegInf, reference = 0.0;
  int worse_streak = 0;
  EnvState state = env_reset(env, rng);
  long remaining = config.t_train;
  int batch_index = 0;
  while (remaining > 0) {
    const int n = static_cast<int>(std::min<long>(remaining, pc.batch_steps));
    remaining -= n;
    PgBatch batch;
    batch.old_logp.resize(n);
    Eigen::VectorXd rewards(n);
    for (int k = 0; k < n; ++k) {
      const StateKey key = state_key(state, env, states);
      const int s = states.index(key);
      ActionMask mask = training_mask(state, key, env, states);
      const Eigen::VectorXd p = masked_softmax(result.net.logits(theta, s, mask));
      const int a = sample_index(p, rng.uniform());
      const StepOutcome out = env_step(env, state, a, rng);
      batch.states.push_back(s);
      batch.actions.push_back(a);
      batch.masks.push_back(std::move(mask));
      batch.old_logp[k] = std::log(p[a]);
      rewards[k] = out.reward;
      state = out.next;
    }
    Eigen::VectorXd G(n);
    double running = result.values[states.index(state_key(state, env, states))];
    for (int k = n - 1; k >= 0; --k) {
      running = rewards[k] + env.gamma * running;
      G[k] = running;
    }
    batch.advantages.resize(n);
    for (int k = 0; k < n; ++k) batch.advantages[k] = G[k] - result.values[batch.states[k]];
    const double mean_adv = batch.advantages.mean();
    const double sd = std::sqrt((batch.advantages.array() - mean_adv).square().mean());
    batch.advantages.array() -= mean_adv;
    if (sd > 1e-12) batch.advantages /= sd;
    for (int k = 0; k < n; ++k) {
      double& v = result.values[batch.states[k]];
      v += pc.value_rate * (G[k] - v);
    }

    Eigen::VectorXd grad;
    for (int e = 0; e < pc.epochs; ++e) {
      surrogate(result.net, theta, batch, pc.clip, pc.entropy, &grad);
      ++adam_t;
      m1 = beta1 * m1 + (1 - beta1) * grad;
      m2 = beta2 * m2 + (1 - beta2) * grad.cwiseProduct(grad);
      const double c1 = 1 - std::pow(beta1, adam_t), c2 = 1 - std::pow(beta2, adam_t);
      theta.array() += pc.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + 1e-8);
    }

    const double batch_return = rewards.mean();
    result.batch_returns.push_back(batch_return);
    if (batch_index == 0) reference = rewards.cwiseAbs().mean();
    best = std::max(best, batch_return);
    const double threshold = best - pc.divergence_drop * std::max(std::abs(best), reference);
    worse_streak = batch_return < threshold ? worse_streak + 1 : 0;
    if (worse_streak >= pc.divergence_batches) {
      std::ostringstream msg;
      msg << "policy-gradient training diverged at batch " << batch_index << ": mean reward "
          << batch_return << " stayed below " << threshold << " (best " << best << ") for "
          << worse_streak << " batches";
      throw PgDivergence(msg.str());
    }
    ++batch_index;
  }
  result.policy = tabulate_policy(result.net, env.space, env.efficiency);
  return result;
}

namespace {

class QLearner : public Learner {
 public:
  explicit QLearner(LearnerConfig config) : config_(std::move(config)) {}
  Policy train(const TrainEnv& env, RngStream& rng) override {
    auto r = train_q(env, config_, rng, config_.warm_start && has_ ? &table_ : nullptr);
    table_ = std::move(r.table);
    has_ = true;
    return std::move(r.policy);
  }

 private:
  LearnerConfig config_;
  QTable table_;
  bool has_ = false;
};

class PgLearner : public Learner {
 public:
  explicit PgLearner(LearnerConfig config) : config_(std::move(config)) {}
  Policy train(const TrainEnv& env, RngStream& rng) override {
    auto r = train_pg(env, config_, rng, config_.warm_start && has_ ? &last_ : nullptr);
    last_ = std::move(r);
    has_ = true;
    return last_.policy;
  }

 private:
  LearnerConfig config_;
  PgTrainResult last_;
  bool has_ = false;
};

}  // namespace

std::unique_ptr<Learner> make_learner(const LearnerConfig& config) {
  if (config.kind == LearnerKind::pg) return std::make_unique<PgLearner>(config);
  return std::make_unique<QLearner>(config);
}

double evaluate_policy(const Policy& policy, const TrainEnv& env, int episodes, int steps,
                       RngStream& rng) {
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    EnvState state = env_reset(env, rng);
    double discount = 1.0, ret = 0.0;
    for (int k = 0; k < steps; ++k) {
      const StateKey key = state_key(state, env, policy.states);
      const int a = act(policy, key, mask_actions(state.storage, env.space, env.efficiency), rng);
      const StepOutcome out = env_step(env, state, a, rng);
      ret += discount * out.reward;
      discount *= env.gamma;
      state = out.next;
    }
    total += ret;
  }
  return total / episodes;
}

}  // namespace gridmfg
