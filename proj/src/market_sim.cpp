#include "gridmfg/market_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "gridmfg/text_io.hpp"

namespace gridmfg {

namespace {

template <typename T>
std::vector<T> per_bus(const nlohmann::json& node, int bus_count, const char* name) {
  if (node.is_number()) return std::vector<T>(bus_count, node.get<T>());
  auto v = node.get<std::vector<T>>();
  if (static_cast<int>(v.size()) != bus_count) {
    throw ModelError(std::string(name) + " needs one entry per bus (" +
                     std::to_string(bus_count) + "), got " + std::to_string(v.size()));
  }
  return v;
}

std::string bids_text(const Eigen::VectorXd& bids) {
  std::ostringstream out;
  for (int m = 0; m < bids.size(); ++m) out << (m ? ", " : "") << format_number(bids[m]);
  return "[" + out.str() + "]";
}

Eigen::VectorXd read_probabilities(const std::vector<std::string>& row, std::size_t first) {
  Eigen::VectorXd p(row.size() - first);
  for (std::size_t i = first; i < row.size(); ++i) p[i - first] = parse_number(row[i]);
  return p;
}

}  // namespace

void ScenarioConfig::validate(int bus_count) const {
  if (days < 1) throw ModelError("days must be at least 1");
  if (seeds.empty()) throw ModelError("at least one seed is required");
  if (static_cast<int>(delta.size()) != bus_count ||
      static_cast<int>(prosumers.size()) != bus_count ||
      static_cast<int>(consumers.size()) != bus_count) {
    throw ModelError("delta and population need one entry per bus");
  }
  long total = 0;
  for (int m = 0; m < bus_count; ++m) {
    BeliefUpdateParams::make(delta[m]);
    if (prosumers[m] < 0 || consumers[m] < 0) throw ModelError("population counts must be >= 0");
    total += prosumers[m] + consumers[m];
  }
  if (total <= 0) throw ModelError("the market has no prosumers or consumers");
  if (!(efficiency > 0.0 && efficiency <= 1.0)) throw ModelError("efficiency must lie in (0, 1]");
  if (!(capacity_kwh > 0.0)) throw ModelError("storage capacity must be positive");
  if (!(initial_level >= 0.0 && initial_level <= 1.0)) {
    throw ModelError("initial storage level must lie in [0, 1]");
  }
  if (cost_segments < 1) throw ModelError("cost_segments must be at least 1");
  if (learner.t_train < 1) throw ModelError("t_train must be at least 1");
  if (monitor.window_days < 2) throw ModelError("monitor window must be at least 2 days");
  (void)ActionSpace(action_step);
}

ScenarioConfig scenario_from_json(const nlohmann::json& s, int bus_count) {
  ScenarioConfig c;
  c.days = s.value("days", c.days);
  if (s.contains("seeds")) c.seeds = s.at("seeds").get<std::vector<std::uint64_t>>();
  c.delta = per_bus<double>(s.value("delta", nlohmann::json(0.5)), bus_count, "delta");
  const auto pop = s.value("population", nlohmann::json::object());
  c.prosumers = per_bus<long>(pop.value("prosumers", nlohmann::json(100)), bus_count, "prosumers");
  c.consumers = per_bus<long>(pop.value("consumers", nlohmann::json(1000)), bus_count, "consumers");
  const auto st = s.value("storage", nlohmann::json::object());
  c.storage = st.value("enabled", c.storage);
  c.capacity_kwh = st.value("capacity_kwh", c.capacity_kwh);
  c.efficiency = st.value("efficiency", c.efficiency);
  c.initial_level = st.value("initial_level", c.initial_level);
  c.action_step = s.value("action_step", c.action_step);
  c.cost_segments = s.value("cost_segments", c.cost_segments);
  const std::string draw = s.value("renewable_draw", std::string("step"));
  if (draw != "step" && draw != "day") throw ModelError("renewable_draw must be step or day");
  c.renewable_draw_per_day = draw == "day";
  if (s.contains("belief_init") && s.at("belief_init").is_number()) {
    c.belief_override = s.at("belief_init").get<double>();
  }
  c.learner.t_train = s.value("t_train", c.learner.t_train);
  if (s.contains("learner")) {
    const auto& l = s.at("learner");
    auto& L = c.learner;
    if (l.contains("kind")) L.kind = parse_learner_kind(l.at("kind").get<std::string>());
    L.gamma = l.value("gamma", L.gamma);
    L.epsilon_start = l.value("epsilon_start", L.epsilon_start);
    L.epsilon_end = l.value("epsilon_end", L.epsilon_end);
    L.alpha_power = l.value("alpha_power", L.alpha_power);
    L.storage_bins = l.value("storage_bins", L.storage_bins);
    L.demand_bins = l.value("demand_bins", L.demand_bins);
    L.t_train = l.value("t_train", L.t_train);
    L.warm_start = l.value("warm_start", L.warm_start);
    if (l.contains("pg")) {
      const auto& p = l.at("pg");
      auto& P = L.pg;
      P.hidden = p.value("hidden", P.hidden);
      P.learning_rate = p.value("learning_rate", P.learning_rate);
      P.batch_steps = p.value("batch_steps", P.batch_steps);
      P.epochs = p.value("epochs", P.epochs);
      P.clip = p.value("clip", P.clip);
      P.entropy = p.value("entropy", P.entropy);
      P.value_rate = p.value("value_rate", P.value_rate);
      P.divergence_batches = p.value("divergence_batches", P.divergence_batches);
      P.divergence_drop = p.value("divergence_drop", P.divergence_drop);
    }
  }
  if (s.contains("monitor")) {
    const auto& m = s.at("monitor");
    c.monitor.window_days = m.value("window_days", c.monitor.window_days);
    c.monitor.price_rel_tol = m.value("price_rel_tol", c.monitor.price_rel_tol);
    c.monitor.policy_tv_tol = m.value("policy_tv_tol", c.monitor.policy_tv_tol);
  }
  return c;
}

nlohmann::json to_json(const ScenarioConfig& c) {
  const auto& L = c.learner;
  nlohmann::json j = {
      {"days", c.days},
      {"seeds", c.seeds},
      {"delta", c.delta},
      {"population", {{"prosumers", c.prosumers}, {"consumers", c.consumers}}},
      {"storage",
       {{"enabled", c.storage},
        {"capacity_kwh", c.capacity_kwh},
        {"efficiency", c.efficiency},
        {"initial_level", c.initial_level}}},
      {"action_step", c.action_step},
      {"cost_segments", c.cost_segments},
      {"renewable_draw", c.renewable_draw_per_day ? "day" : "step"},
      {"learner",
       {{"kind", to_string(L.kind)},
        {"gamma", L.gamma},
        {"epsilon_start", L.epsilon_start},
        {"epsilon_end", L.epsilon_end},
        {"alpha_power", L.alpha_power},
        {"storage_bins", L.storage_bins},
        {"demand_bins", L.demand_bins},
        {"t_train", L.t_train},
        {"warm_start", L.warm_start},
        {"pg",
         {{"hidden", L.pg.hidden},
          {"learning_rate", L.pg.learning_rate},
          {"batch_steps", L.pg.batch_steps},
          {"epochs", L.pg.epochs},
          {"clip", L.pg.clip},
          {"entropy", L.pg.entropy},
          {"value_rate", L.pg.value_rate},
          {"divergence_batches", L.pg.divergence_batches},
          {"divergence_drop", L.pg.divergence_drop}}}}},
      {"monitor",
       {{"window_days", c.monitor.window_days},
        {"price_rel_tol", c.monitor.price_rel_tol},
        {"policy_tv_tol", c.monitor.policy_tv_tol}}}};
  if (c.belief_override) j["belief_init"] = *c.belief_override;
  return j;
}

MarketStreams::MarketStreams(std::uint64_t seed, int bus_count)
    : renewable(seed, StreamKind::renewable, 0) {
  for (int m = 0; m < bus_count; ++m) {
    prosumer_demand.emplace_back(seed, StreamKind::prosumers, m);
    prosumer_actions.emplace_back(seed, StreamKind::actions, m);
    consumer_demand.emplace_back(seed, StreamKind::consumers, m);
  }
}

PlayResult actual_play(int h, std::vector<AggregatorState>& aggregators,
                       const std::vector<const Policy*>& policies, const CaseBundle& bundle,
                       const ScenarioConfig& config, MarketStreams& streams) {
  const int M = bundle.network.bus_count();
  const ActionSpace default_space(config.action_step);
  PlayResult out{Eigen::VectorXd::Zero(M), Eigen::VectorXd::Zero(M), Eigen::VectorXd::Zero(M),
                 Eigen::VectorXd::Zero(M)};
  for (int m = 0; m < M; ++m) {
    AggregatorState& agg = aggregators[m];
    const Policy* policy = policies.empty() ? nullptr : policies[m];
    const ActionSpace& space = policy ? policy->space : default_space;
    const ActionMask mask = mask_actions(agg.storage, space, agg.efficiency);
    const DemandProfile& pro = bundle.prosumer_demand[m];
    const long np = config.prosumers[m];
    double sum_d = 0.0, sum_a = 0.0, sum_phi = 0.0;
    for (long i = 0; i < np; ++i) {
      const double d = sample_demand(pro, h, streams.prosumer_demand[m]);
      double a = 0.0;
      if (policy) {
        const StateKey key{storage_bin(agg.storage, policy->states.storage_bins), h,
                           demand_bin(d, pro, h, policy->states.demand_bins)};
        a = space.value(act(*policy, key, mask, streams.prosumer_actions[m]));
      }
      sum_d += d;
      sum_a += a;
      sum_phi += phi(a, agg.efficiency);
    }
    double sum_c = 0.0;
    for (long j = 0; j < config.consumers[m]; ++j) {
      sum_c += sample_demand(bundle.consumer_demand[m], h, streams.consumer_demand[m]);
    }
    out.bids_mwh[m] = (sum_d + sum_phi + sum_c) * agg.capacity_mwh();
    if (np > 0) {
      out.action_mean[m] = sum_a / np;
      out.phi_mean[m] = sum_phi / np;
      out.demand_mean[m] = sum_d / np;
    }
    const double next = agg.storage + out.phi_mean[m];
    if (next < -1e-9 || next > 1.0 + 1e-9) {
      throw std::logic_error("aggregate storage left [0, 1] at bus " + std::to_string(m + 1));
    }
    agg.storage = std::clamp(next, 0.0, 1.0);
  }
  return out;
}

namespace {

Eigen::VectorXd mean_capacities(const Network& net, int h) {
  Eigen::VectorXd caps(net.generator_count());
  for (int g = 0; g < net.generator_count(); ++g) {
    const Generator& gen = net.generators()[g];
    caps[g] = effective_capacity(gen, h, gen.capacity_scale.mean());
  }
  return caps;
}

}  // namespace

std::vector<Eigen::VectorXd> initial_beliefs(const CaseBundle& bundle,
                                             const ScenarioConfig& config) {
  const int M = bundle.network.bus_count(), H = bundle.steps_per_day;
  std::vector<Eigen::VectorXd> beliefs(M, Eigen::VectorXd::Zero(H));
  if (config.belief_override) {
    for (auto& b : beliefs) b.setConstant(*config.belief_override);
    return beliefs;
  }
  for (int h = 0; h < H; ++h) {
    Eigen::VectorXd bids(M);
    for (int m = 0; m < M; ++m) {
      bids[m] = (config.prosumers[m] * bundle.prosumer_demand[m].mean(h) +
                 config.consumers[m] * bundle.consumer_demand[m].mean(h)) *
                config.capacity_kwh / kKwhPerMwh;
    }
    const auto costs = linearize_costs(bundle.network, mean_capacities(bundle.network, h),
                                       config.cost_segments);
    const auto r = solve_dispatch(bundle.network, bids, costs);
    if (r.status != DispatchStatus::optimal) {
      throw ModelError("mean-profile dispatch is infeasible at hour " + std::to_string(h) +
                       " with bids " + bids_text(bids));
    }
    for (int m = 0; m < M; ++m) beliefs[m][h] = r.lmp[m];
  }
  return beliefs;
}

int worker_count() {
  if (const char* env = std::getenv("GRIDMFG_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<int>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, const std::function<void(int)>& body) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

RunLog run_scenario(const CaseBundle& bundle, const ScenarioConfig& config, std::uint64_t seed,
                    const DayObserver& on_day_end) {
  const Network& net = bundle.network;
  const int M = net.bus_count(), H = bundle.steps_per_day;
  config.validate(M);
  const ActionSpace space(config.action_step);
  const StateSpace states = make_state_space(config.learner, H);

  std::vector<AggregatorState> aggregators;
  const auto beliefs = initial_beliefs(bundle, config);
  for (int m = 0; m < M; ++m) {
    aggregators.push_back(
        AggregatorState{m, config.initial_level, config.capacity_kwh, config.efficiency, beliefs[m]});
  }
  std::vector<std::unique_ptr<Learner>> learners;
  std::vector<RngStream> learner_rngs;
  for (int m = 0; m < M; ++m) {
    learners.push_back(make_learner(config.learner));
    learner_rngs.emplace_back(seed, StreamKind::learner, m);
  }
  MarketStreams streams(seed, M);
  const Policy idle = constant_policy(space, states, config.efficiency, 0.0);

  RunLog log;
  log.seed = seed;
  log.steps_per_day = H;
  log.bus_count = M;
  log.actions = space.values();
  log.records.reserve(static_cast<std::size_t>(config.days) * H * M);

  Eigen::VectorXd day_scale = Eigen::VectorXd::Ones(net.generator_count());
  std::vector<Policy> policies(M);
  const long T = static_cast<long>(config.days) * H;
  for (long t = 0; t < T; ++t) {
    const ClockIndex clock = clock_indices(t, H);
    const int h = clock.hour;

    std::vector<const Policy*> active;
    if (config.storage) {
      parallel_for(M, [&](int m) {
        TrainEnv env;
        env.belief = aggregators[m].belief;
        env.initial_storage = aggregators[m].storage;
        env.start_hour = h;
        env.profile = bundle.prosumer_demand[m];
        env.efficiency = config.efficiency;
        env.capacity_kwh = config.capacity_kwh;
        env.space = space;
        env.gamma = config.learner.gamma;
        policies[m] = learners[m]->train(env, learner_rngs[m]);
      });
      for (const auto& p : policies) active.push_back(&p);
    }

    std::vector<double> before(M);
    for (int m = 0; m < M; ++m) before[m] = aggregators[m].storage;
    const PlayResult play = actual_play(h, aggregators, active, bundle, config, streams);

    const double total = play.bids_mwh.sum();
    if (total < -1e-9 * (1.0 + play.bids_mwh.cwiseAbs().sum())) {
      throw ScenarioError("aggregate bid " + format_number(total) + " MWh is negative at t=" +
                              std::to_string(t) + "; bids " + bids_text(play.bids_mwh),
                          t, play.bids_mwh);
    }

    if (config.renewable_draw_per_day && h == 0) {
      for (int g = 0; g < net.generator_count(); ++g) {
        const Generator& gen = net.generators()[g];
        if (gen.renewable()) day_scale[g] = sample_triangular(gen.capacity_scale, streams.renewable);
      }
    }
    Eigen::VectorXd caps(net.generator_count());
    for (int g = 0; g < net.generator_count(); ++g) {
      const Generator& gen = net.generators()[g];
      caps[g] = config.renewable_draw_per_day ? effective_capacity(gen, h, day_scale[g])
                                              : effective_capacity(gen, h, streams.renewable);
    }
    const auto costs = linearize_costs(net, caps, config.cost_segments);
    const DispatchResult r = solve_dispatch(net, play.bids_mwh, costs);
    if (r.status != DispatchStatus::optimal) {
      throw ScenarioError("dispatch infeasible at t=" + std::to_string(t) + " (day " +
                              std::to_string(clock.day) + ", hour " + std::to_string(h) +
                              "); bids " + bids_text(play.bids_mwh),
                          t, play.bids_mwh);
    }

    for (int m = 0; m < M; ++m) {
      AggregatorState& agg = aggregators[m];
      const Policy& used = config.storage ? policies[m] : idle;
      agg.belief = update_belief(agg.belief, h, clock.day, r.lmp[m], config.delta[m]);
      StepRecord rec;
      rec.t = t;
      rec.day = clock.day;
      rec.hour = h;
      rec.bus = m;
      rec.bid_mwh = play.bids_mwh[m];
      rec.lmp = r.lmp[m];
      rec.hub_price = r.hub_price;
      rec.storage_before = before[m];
      rec.storage_after = agg.storage;
      rec.action_mean = play.action_mean[m];
      rec.phi_mean = play.phi_mean[m];
      rec.demand_mean = play.demand_mean[m];
      rec.reward = -r.lmp[m] * agg.capacity_mwh() * (play.phi_mean[m] + play.demand_mean[m]);
      rec.status = r.status;
      rec.belief_after = agg.belief;
      rec.policy_at_state = used.row(StateKey{storage_bin(before[m], states.storage_bins), h, 0});
      log.records.push_back(std::move(rec));
    }
    if (h == H - 1 && on_day_end) on_day_end(log, clock.day);
  }
  return log;
}

MfeReport check_mfe(const RunLog& log, const MonitorConfig& monitor) {
  MfeReport rep;
  const int W = monitor.window_days, H = log.steps_per_day;
  const long D = log.days();
  rep.enough_data = W >= 1 && D >= 2L * W;
  if (!rep.enough_data) return rep;
  auto hub = [&](long d, int h) { return log.at(d * H + h, 0).hub_price; };

  double sum = 0.0;
  for (long d = D - W; d < D; ++d) {
    for (int h = 0; h < H; ++h) {
      sum += hub(d, h);
      rep.price_day_change = std::max(rep.price_day_change, std::abs(hub(d, h) - hub(d - 1, h)));
    }
  }
  rep.mean_price = sum / (static_cast<double>(W) * H);
  for (int h = 0; h < H; ++h) {
    double last = 0.0, prev = 0.0;
    for (long d = D - W; d < D; ++d) last += hub(d, h);
    for (long d = D - 2 * W; d < D - W; ++d) prev += hub(d, h);
    rep.price_window_change = std::max(rep.price_window_change, std::abs(last - prev) / W);
  }
  for (int m = 0; m < log.bus_count; ++m) {
    for (int h = 0; h < H; ++h) {
      Eigen::VectorXd last, prev;
      for (long d = D - 2 * W; d < D; ++d) {
        const Eigen::VectorXd& p = log.at(d * H + h, m).policy_at_state;
        if (p.size() == 0) throw ModelError("run log has no policy trace");
        Eigen::VectorXd& acc = d < D - W ? prev : last;
        if (acc.size() == 0) acc = Eigen::VectorXd::Zero(p.size());
        acc += p / W;
      }
      rep.policy_tv = std::max(rep.policy_tv, 0.5 * (last - prev).cwiseAbs().sum());
    }
  }
  const double bound = monitor.price_rel_tol * std::abs(rep.mean_price);
  rep.converged = rep.price_day_change < bound && rep.price_window_change < bound &&
                  rep.policy_tv <= monitor.policy_tv_tol;
  return rep;
}

nlohmann::json to_json(const MfeReport& r) {
  return {{"enough_data", r.enough_data},
          {"converged", r.converged},
          {"mean_price", r.mean_price},
          {"price_day_change", r.price_day_change},
          {"price_window_change", r.price_window_change},
          {"policy_tv", r.policy_tv}};
}

RunLogWriter::RunLogWriter(const std::filesystem::path& dir, const RunLog& header) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  runlog_.open(dir / "runlog.csv");
  beliefs_.open(dir / "beliefs.csv");
  trace_.open(dir / "policy_trace.csv");
  if (!runlog_ || !beliefs_ || !trace_) {
    throw ModelError("cannot write run files under " + dir.string());
  }
  runlog_ << "t,day,hour,bus,bid_mwh,lmp,hub_price,storage_mean,action_mean,reward,status\n";
  beliefs_ << "day,bus";
  for (int h = 0; h < header.steps_per_day; ++h) beliefs_ << ",h" << h;
  beliefs_ << '\n';
  trace_ << "t,bus";
  for (double a : header.actions) trace_ << ",a=" << format_number(a);
  trace_ << '\n';
}

void RunLogWriter::append_day(const RunLog& log, long day) {
  const int H = log.steps_per_day;
  for (long t = day * H; t < (day + 1) * H; ++t) {
    for (int m = 0; m < log.bus_count; ++m) {
      const StepRecord& r = log.at(t, m);
      runlog_ << r.t << ',' << r.day << ',' << r.hour << ',' << r.bus + 1 << ','
              << format_number(r.bid_mwh) << ',' << format_number(r.lmp) << ','
              << format_number(r.hub_price) << ',' << format_number(r.storage_after) << ','
              << format_number(r.action_mean) << ',' << format_number(r.reward) << ','
              << to_string(r.status) << '\n';
      trace_ << r.t << ',' << r.bus + 1;
      for (int i = 0; i < r.policy_at_state.size(); ++i) {
        trace_ << ',' << format_number(r.policy_at_state[i]);
      }
      trace_ << '\n';
    }
  }
  for (int m = 0; m < log.bus_count; ++m) {
    const StepRecord& r = log.at((day + 1) * H - 1, m);
    beliefs_ << day << ',' << m + 1;
    for (int h = 0; h < r.belief_after.size(); ++h) beliefs_ << ',' << format_number(r.belief_after[h]);
    beliefs_ << '\n';
  }
  runlog_.flush();
  beliefs_.flush();
  trace_.flush();
}

void write_run_json(const std::filesystem::path& dir, const RunLog& log,
                    const ScenarioConfig& config) {
  nlohmann::json j = {{"seed", log.seed},
                      {"storage", config.storage},
                      {"learner", to_string(config.learner.kind)},
                      {"days", config.days},
                      {"steps_per_day", log.steps_per_day},
                      {"bus_count", log.bus_count},
                      {"actions", log.actions},
                      {"monitor",
                       {{"window_days", config.monitor.window_days},
                        {"price_rel_tol", config.monitor.price_rel_tol},
                        {"policy_tv_tol", config.monitor.policy_tv_tol}}},
                      {"scenario", to_json(config)}};
  write_text_file(dir / "run.json", j.dump(2) + "\n");
}

void write_run_directory(const std::filesystem::path& dir, const RunLog& log,
                         const ScenarioConfig& config) {
  RunLogWriter writer(dir, log);
  for (long d = 0; d < log.days(); ++d) writer.append_day(log, d);
  write_run_json(dir, log, config);
}

RunLog read_runlog_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto c_t = t.column("t"), c_day = t.column("day"), c_hour = t.column("hour"),
             c_bus = t.column("bus"), c_bid = t.column("bid_mwh"), c_lmp = t.column("lmp"),
             c_hub = t.column("hub_price"), c_st = t.column("storage_mean"),
             c_act = t.column("action_mean"), c_rew = t.column("reward"),
             c_status = t.column("status");
  RunLog log;
  int max_hour = -1;
  for (const auto& row : t.rows) {
    StepRecord r;
    r.t = parse_integer(row[c_t]);
    r.day = parse_integer(row[c_day]);
    r.hour = static_cast<int>(parse_integer(row[c_hour]));
    r.bus = static_cast<int>(parse_integer(row[c_bus])) - 1;
    r.bid_mwh = parse_number(row[c_bid]);
    r.lmp = parse_number(row[c_lmp]);
    r.hub_price = parse_number(row[c_hub]);
    r.storage_after = parse_number(row[c_st]);
    r.action_mean = parse_number(row[c_act]);
    r.reward = parse_number(row[c_rew]);
    r.status = row[c_status] == "optimal" ? DispatchStatus::optimal : DispatchStatus::infeasible;
    if (r.bus < 0) throw ModelError(path.string() + ": bus numbers are one-based");
    log.bus_count = std::max(log.bus_count, r.bus + 1);
    max_hour = std::max(max_hour, r.hour);
    log.records.push_back(std::move(r));
  }
  if (log.records.empty()) throw ModelError(path.string() + " has no records");
  log.steps_per_day = max_hour + 1;
  std::sort(log.records.begin(), log.records.end(), [](const StepRecord& a, const StepRecord& b) {
    return a.t != b.t ? a.t < b.t : a.bus < b.bus;
  });
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const StepRecord& r = log.records[i];
    if (r.t != static_cast<long>(i) / log.bus_count || r.bus != static_cast<int>(i % log.bus_count)) {
      throw ModelError(path.string() + " does not hold exactly one record per (t, bus)");
    }
  }
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    log.records[i].storage_before = i >= static_cast<std::size_t>(log.bus_count)
                                        ? log.records[i - log.bus_count].storage_after
                                        : std::numeric_limits<double>::quiet_NaN();
  }
  return log;
}

RunLog read_run_directory(const std::filesystem::path& dir) {
  RunLog log = read_runlog_csv(dir / "runlog.csv");
  if (std::filesystem::exists(dir / "run.json")) {
    const auto j = nlohmann::json::parse(read_text_file(dir / "run.json"));
    log.seed = j.value("seed", std::uint64_t{0});
    log.actions = j.value("actions", std::vector<double>{});
  }
  if (std::filesystem::exists(dir / "beliefs.csv")) {
    const CsvTable b = read_csv(dir / "beliefs.csv");
    const auto c_day = b.column("day"), c_bus = b.column("bus");
    for (const auto& row : b.rows) {
      const long day = parse_integer(row[c_day]);
      const int bus = static_cast<int>(parse_integer(row[c_bus])) - 1;
      const long t = (day + 1) * log.steps_per_day - 1;
      if (t >= log.steps() || bus < 0 || bus >= log.bus_count) continue;
      log.records[t * log.bus_count + bus].belief_after = read_probabilities(row, 2);
    }
  }
  if (std::filesystem::exists(dir / "policy_trace.csv")) {
    const CsvTable p = read_csv(dir / "policy_trace.csv");
    const auto c_t = p.column("t"), c_bus = p.column("bus");
    for (const auto& row : p.rows) {
      const long t = parse_integer(row[c_t]);
      const int bus = static_cast<int>(parse_integer(row[c_bus])) - 1;
      if (t >= log.steps() || bus < 0 || bus >= log.bus_count) continue;
      log.records[t * log.bus_count + bus].policy_at_state = read_probabilities(row, 2);
    }
  }
  return log;
}

MonitorConfig read_monitor(const std::filesystem::path& run_dir) {
  MonitorConfig m;
  if (!std::filesystem::exists(run_dir / "run.json")) return m;
  const auto j = nlohmann::json::parse(read_text_file(run_dir / "run.json"));
  if (!j.contains("monitor")) return m;
  const auto& n = j.at("monitor");
  m.window_days = n.value("window_days", m.window_days);
  m.price_rel_tol = n.value("price_rel_tol", m.price_rel_tol);
  m.policy_tv_tol = n.value("policy_tv_tol", m.policy_tv_tol);
  return m;
}

}  // namespace gridmfg
