#include "gridmfg/cli.hpp"

#include <algorithm>
#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"

#include "gridmfg/case_bundle.hpp"
#include "gridmfg/case_gen.hpp"
#include "gridmfg/dispatch.hpp"
#include "gridmfg/market_sim.hpp"
#include "gridmfg/metrics.hpp"
#include "gridmfg/plot.hpp"
#include "gridmfg/text_io.hpp"

namespace gridmfg {

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  if (text.find(',') == std::string::npos) {
    const long n = parse_integer(trim(text));
    if (n < 1) throw ModelError("--seeds needs a positive count or a comma-separated list");
    for (long s = 1; s <= n; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
    return seeds;
  }
  for (const auto& item : split(text, ',')) {
    const long s = parse_integer(trim(item));
    if (s < 0) throw ModelError("seeds must be >= 0");
    seeds.push_back(static_cast<std::uint64_t>(s));
  }
  return seeds;
}

std::vector<std::filesystem::path> seed_dirs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) throw ModelError(dir.string() + " is not a directory");
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0 &&
        std::filesystem::exists(e.path() / "runlog.csv")) {
      out.push_back(e.path());
    }
  }
  if (out.empty() && std::filesystem::exists(dir / "runlog.csv")) out.push_back(dir);
  if (out.empty()) throw ModelError("no run logs under " + dir.string());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    const auto sa = a.filename().string(), sb = b.filename().string();
    return sa.size() != sb.size() ? sa.size() < sb.size() : sa < sb;
  });
  return out;
}

struct GenCaseArgs {
  int buses = 37;
  std::string gens = "oil:4,biomass:2,solar:17,wind:3";
  std::uint64_t seed = 1;
  int steps_per_day = 12;
  long prosumers = 500;
  long consumers = 5000;
  std::string out;
};

struct DispatchArgs {
  std::string case_dir, bids, out;
  int hour = 0;
  int segments = 16;
};

struct SimulateArgs {
  std::string case_dir, out, seeds, learner;
  std::optional<int> days;
  std::optional<long> t_train;
  bool no_storage = false;
};

struct ReportArgs {
  std::string dir, out;
  int window = 5;
};

struct PlotArgs {
  std::vector<std::string> runlogs;
  std::string kind, out;
  int window = 5;
};

int gen_case(const GenCaseArgs& a, std::ostream& out) {
  CaseGenOptions o;
  o.buses = a.buses;
  o.mix = parse_generator_mix(a.gens);
  o.seed = a.seed;
  o.steps_per_day = a.steps_per_day;
  o.prosumers_per_bus = a.prosumers;
  o.consumers_per_bus = a.consumers;
  const CaseBundle bundle = generate_case(o);
  write_case_bundle(bundle, a.out);
  out << "wrote " << bundle.network.bus_count() << "-bus case with "
      << bundle.network.generator_count() << " generators to " << a.out << '\n';
  return 0;
}

int dispatch(const DispatchArgs& a, std::ostream& out) {
  const CaseBundle bundle = load_case_bundle(a.case_dir);
  const Network& net = bundle.network;
  if (a.hour < 0 || a.hour >= bundle.steps_per_day) {
    throw ModelError("--hour must lie in [0, " + std::to_string(bundle.steps_per_day) + ")");
  }
  const BidVector bids = load_bids_csv(a.bids, net.bus_count());
  Eigen::VectorXd caps(net.generator_count());
  for (int g = 0; g < net.generator_count(); ++g) {
    const Generator& gen = net.generators()[g];
    caps[g] = effective_capacity(gen, a.hour, gen.capacity_scale.mean());
  }
  const DispatchResult r = solve_dispatch(net, bids, linearize_costs(net, caps, a.segments));
  nlohmann::json j = to_json(r);
  j["hour"] = a.hour;
  const std::string text = j.dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    write_text_file(a.out, text);
  }
  if (r.status != DispatchStatus::optimal) throw ModelError("dispatch is infeasible for these bids");
  return 0;
}

int simulate(const SimulateArgs& a, std::ostream& out) {
  const CaseBundle bundle = load_case_bundle(a.case_dir);
  const int M = bundle.network.bus_count();
  ScenarioConfig config = scenario_from_json(bundle.scenario, M);
  if (a.days) config.days = *a.days;
  if (!a.seeds.empty()) config.seeds = parse_seeds(a.seeds);
  if (!a.learner.empty()) config.learner.kind = parse_learner_kind(a.learner);
  if (a.t_train) config.learner.t_train = *a.t_train;
  config.storage = !a.no_storage;
  config.validate(M);

  const std::filesystem::path root(a.out);
  std::vector<RunMetrics> metrics(config.seeds.size());
  parallel_for(static_cast<int>(config.seeds.size()), [&](int i) {
    const std::uint64_t seed = config.seeds[i];
    const auto dir = root / ("seed_" + std::to_string(seed));
    std::unique_ptr<RunLogWriter> writer;
    const RunLog log = run_scenario(bundle, config, seed, [&](const RunLog& partial, long day) {
      if (!writer) writer = std::make_unique<RunLogWriter>(dir, partial);
      writer->append_day(partial, day);
    });
    write_run_json(dir, log, config);
    metrics[i] = run_metrics(log, config.monitor.window_days, config.monitor);
  });
  write_report(root, metrics, config.monitor.window_days);
  for (const auto& m : metrics) {
    out << "seed " << m.seed << ": " << m.days << " days, imv " << format_number(m.imv)
        << ", ex-post cost " << format_number(m.cost.average) << ", converged "
        << (m.mfe.converged ? "yes" : "no") << '\n';
  }
  out << "report written to " << (root / "report.json").string() << '\n';
  return 0;
}

int report(const ReportArgs& a, std::ostream& out) {
  std::vector<RunMetrics> metrics;
  for (const auto& dir : seed_dirs(a.dir)) {
    metrics.push_back(run_metrics(read_run_directory(dir), a.window, read_monitor(dir)));
  }
  const std::filesystem::path target = std::filesystem::path(a.out.empty() ? a.dir : a.out);
  write_report(target, metrics, a.window);
  out << build_report(metrics, a.window).dump(2) << '\n';
  return 0;
}

int plot(const PlotArgs& a, std::ostream& out) {
  const PlotKind kind = parse_plot_kind(a.kind);
  std::vector<PlotSeries> series;
  for (const auto& p : a.runlogs) series.push_back(load_plot_series(p));
  write_text_file(a.out, render_svg(kind, series, a.window));
  out << "wrote " << a.out << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean-field storage aggregation market simulator"};
  app.name("gridmfg");
  app.require_subcommand(1);

  GenCaseArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-case", "Generate a synthetic case bundle");
  gen_cmd->add_option("--buses", gen.buses, "Number of buses")->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--gens", gen.gens, "Generator counts as kind:count,...")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--steps-per-day", gen.steps_per_day, "Steps per day")->capture_default_str();
  gen_cmd->add_option("--prosumers", gen.prosumers, "Typical prosumers per bus")->capture_default_str();
  gen_cmd->add_option("--consumers", gen.consumers, "Typical consumers per bus")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  DispatchArgs disp;
  auto* disp_cmd = app.add_subcommand("dispatch", "Clear one hour for a bid file");
  disp_cmd->add_option("--case", disp.case_dir, "Case bundle directory")->required();
  disp_cmd->add_option("--bids", disp.bids, "bids.csv with bus,D_mt")->required();
  disp_cmd->add_option("--hour", disp.hour, "Hour of day index")->capture_default_str();
  disp_cmd->add_option("--segments", disp.segments, "Cost segments per generator")->capture_default_str();
  disp_cmd->add_option("--out", disp.out, "Result JSON (stdout when omitted)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the market for one or more seeds");
  sim_cmd->add_option("--case", sim.case_dir, "Case bundle directory")->required();
  sim_cmd->add_option("--days", sim.days, "Simulated days");
  sim_cmd->add_option("--seeds", sim.seeds, "Seed count N (runs 1..N) or a comma list");
  sim_cmd->add_flag("--no-storage", sim.no_storage, "Baseline without storage or learning");
  sim_cmd->add_option("--learner", sim.learner, "q or pg");
  sim_cmd->add_option("--t-train", sim.t_train, "Training steps per phase");
  sim_cmd->add_option("--out", sim.out, "Output directory")->required();

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Recompute metrics from run logs");
  rep_cmd->add_option("--runs", rep.dir, "simulate output directory")->required();
  rep_cmd->add_option("--window", rep.window, "Days in the metrics window")->capture_default_str();
  rep_cmd->add_option("--out", rep.out, "Report directory (defaults to --runs)");

  PlotArgs pl;
  auto* plot_cmd = app.add_subcommand("plot", "Render run logs as SVG");
  plot_cmd->add_option("--runlog", pl.runlogs, "runlog.csv files")->required();
  plot_cmd->add_option("--kind", pl.kind, "hub, storage, imv or cost")->required();
  plot_cmd->add_option("--window", pl.window, "Days in the metrics window")->capture_default_str();
  plot_cmd->add_option("--out", pl.out, "Output SVG")->required();

  std::vector<const char*> argv{"gridmfg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (*gen_cmd) return gen_case(gen, out);
    if (*disp_cmd) return dispatch(disp, out);
    if (*sim_cmd) return simulate(sim, out);
    if (*rep_cmd) return report(rep, out);
    if (*plot_cmd) return plot(pl, out);
  } catch (const ScenarioError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace gridmfg
