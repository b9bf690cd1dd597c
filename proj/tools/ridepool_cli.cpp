// ridepool: command line driver for stream ingestion, synthesis, predictor
// training, single simulations and day-by-day sweeps.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "ridepool/city.hpp"
#include "ridepool/engine.hpp"
#include "ridepool/error.hpp"
#include "ridepool/experiment.hpp"
#include "ridepool/ingest.hpp"
#include "ridepool/lstm.hpp"
#include "ridepool/predictor.hpp"
#include "ridepool/stream.hpp"

namespace fs = std::filesystem;
using namespace ridepool;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_logger_mt("ridepool");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("RIDEPOOL_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  return out;
}

// "grid:N" builds an N x N grid; anything else is an edge file.
ZoneMap load_zones(const std::string& spec) {
  if (spec.rfind("grid:", 0) == 0) {
    const int n = std::stoi(spec.substr(5));
    if (n < 1) throw ConfigError("grid size must be >= 1");
    return desk_zones(n);
  }
  auto in = open_in(spec);
  return shortest_travel_times(read_zone_graph(in));
}

RequestStream load_stream(const std::string& path) {
  auto in = open_in(path);
  return read_stream(in);
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::vector<std::string> parse_name_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct SimOptions {
  std::string zones = "grid:5";
  int max_wait = 5;
  double driver_prob = 0.5;
  int capacity = kDefaultCapacity;
  bool no_lookahead = false;
  double margin = 0.0;
  RewardWeights weights;
  long long evaluations = 4000;
  long long nodes = 200000;
  double budget_ms = 0.0;
  double d_rate = 0.8;
  int l_size = 3;
  int workers = 1;
  std::string lstm_path;
};

void add_sim_options(CLI::App* app, SimOptions& o) {
  app->add_option("--zones", o.zones, "Zone edge file, or grid:N for an N x N grid")->capture_default_str();
  app->add_option("--max-wait", o.max_wait, "Wait budget of provisional requests (steps)")->capture_default_str();
  app->add_option("--driver-prob", o.driver_prob, "Driver share for sampled provisional flags")->capture_default_str();
  app->add_option("--capacity", o.capacity, "Seats per car, driver included")->capture_default_str();
  app->add_flag("--no-lookahead", o.no_lookahead, "Commit every real-only winner immediately");
  app->add_option("--margin", o.margin, "Look-ahead deferral margin")->capture_default_str();
  app->add_option("--rho-co2", o.weights.rho_co2, "Reward weight of CO2 savings")->capture_default_str();
  app->add_option("--rho-noise", o.weights.rho_noise, "Reward weight of noise savings")->capture_default_str();
  app->add_option("--rho-traffic", o.weights.rho_traffic, "Reward weight of cars removed")->capture_default_str();
  app->add_option("--rho-qos", o.weights.rho_qos, "Reward weight of quality of service")->capture_default_str();
  app->add_option("--deterministic-budget", o.evaluations, "Car evaluations per step in deterministic mode")
      ->capture_default_str();
  app->add_option("--packing-nodes", o.nodes, "Branch-and-bound nodes per step in deterministic mode")
      ->capture_default_str();
  app->add_option("--budget-ms", o.budget_ms, "Wall-clock budget per step; > 0 replaces the deterministic budget")
      ->capture_default_str();
  app->add_option("--d-rate", o.d_rate, "Probability of the greedy-best addition")->capture_default_str();
  app->add_option("--l-size", o.l_size, "Restricted candidate list size")->capture_default_str();
  app->add_option("--workers", o.workers, "Candidate generation threads per step")->capture_default_str();
  app->add_option("--lstm", o.lstm_path, "Trained LSTM parameter file");
}

SimConfig make_sim_config(const SimOptions& o, int horizon, std::uint64_t seed) {
  SimConfig cfg;
  cfg.horizon = horizon;
  cfg.max_wait = o.max_wait;
  cfg.driver_prob = o.driver_prob;
  cfg.capacity = o.capacity;
  cfg.lookahead = !o.no_lookahead;
  cfg.margin = o.margin;
  cfg.weights = o.weights;
  cfg.seed = seed;
  cfg.solver.generation_evaluations = o.evaluations;
  cfg.solver.packing_nodes = o.nodes;
  cfg.solver.deterministic = o.budget_ms <= 0.0;
  if (o.budget_ms > 0.0) cfg.solver.budget_ms = o.budget_ms;
  cfg.solver.d_rate = o.d_rate;
  cfg.solver.l_size = o.l_size;
  cfg.solver.workers = o.workers;
  validate(cfg);
  return cfg;
}

std::optional<LstmModel> load_lstm(const std::string& path) {
  if (path.empty()) return std::nullopt;
  auto in = open_in(path);
  return load_model(in);
}

// ---------------------------------------------------------------- ingest

struct IngestOptions {
  std::string input;
  std::string day;
  std::string lookup;
  std::string zones = "grid:5";
  std::string out = "stream.txt";
  double driver_prob = 0.5;
  int max_wait = 5;
  int step_seconds = 60;
  std::uint64_t seed = 1;
};

int cmd_ingest(const IngestOptions& o) {
  const ZoneMap zones = load_zones(o.zones);
  std::map<int, ZoneId> lookup;
  if (o.lookup.empty()) {
    lookup = default_grid_lookup(zones.size());
  } else {
    auto in = open_in(o.lookup);
    lookup = read_zone_lookup(in);
  }
  auto in = open_in(o.input);
  auto parsed = parse_trip_records(in, o.day, lookup);
  for (auto row : parsed.malformed_rows) spdlog::warn("malformed row {}", row);

  StreamPolicy policy{o.driver_prob, o.max_wait, o.step_seconds, o.seed};
  auto built = build_stream(parsed.records, lookup, zones.size(), policy, o.day);
  auto out = open_out(o.out);
  write_stream(out, built.stream);

  std::cout << "rows " << parsed.rows << "\n"
            << "records " << parsed.records.size() << "\n"
            << "requests " << built.stream.request_count() << "\n"
            << "skipped " << parsed.skipped() << " (malformed " << parsed.malformed << ", unmapped " << parsed.unmapped
            << ")\n"
            << "other_day " << parsed.other_day << "\n"
            << "same_zone " << built.dropped_same_zone << "\n";
  return 0;
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  DeskScenario scenario;
  std::string noise = "poisson";
  int repeat = -1;
  std::string out = "stream.txt";
};

int cmd_synth(SynthOptions o) {
  if (o.noise == "none") {
    o.scenario.noise = Noise::none;
  } else if (o.noise == "poisson") {
    o.scenario.noise = Noise::poisson;
  } else {
    throw ConfigError("noise must be 'none' or 'poisson'");
  }
  auto stream = desk_stream(o.scenario);
  if (o.repeat >= 0) stream = repeat_day(stream, o.repeat, o.scenario.days);
  auto out = open_out(o.out);
  write_stream(out, stream);
  std::cout << "requests " << stream.request_count() << "\n"
            << "days " << stream.days << "\n"
            << "steps " << stream.horizon() << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::string stream;
  std::string out = "lstm";
  TrainConfig cfg;
  int holdout_days = 1;
};

int cmd_train(const TrainOptions& o) {
  const auto stream = load_stream(o.stream);
  if (stream.days < 2) throw ConfigError("training needs at least two days of history, stream has " +
                                         std::to_string(stream.days));
  const int holdout = std::clamp(o.holdout_days, 0, stream.days - 1);
  const int fit_days = stream.days - holdout;

  std::vector<CountsGrid> history;
  for (TimeStep t = 1; t <= stream.day_end(fit_days - 1); ++t) history.push_back(counts_at(stream, t));
  const int cells = stream.zones * stream.zones;
  const int hidden = o.cfg.hidden_dim > 0 ? o.cfg.hidden_dim : cells;
  spdlog::info("training on {} steps, hidden {}", history.size(), hidden);
  auto result = train(init_lstm(cells, hidden, cells, o.cfg.seed), history, o.cfg);

  fs::create_directories(o.out);
  {
    auto out = open_out(fs::path(o.out) / "params.txt");
    save_model(out, result.model);
  }
  {
    auto out = open_out(fs::path(o.out) / "loss.csv");
    out << "epoch,loss\n" << std::setprecision(10);
    for (std::size_t e = 0; e < result.loss_curve.size(); ++e) out << e + 1 << ',' << result.loss_curve[e] << '\n';
  }
  std::cout << std::setprecision(6);
  if (!result.loss_curve.empty()) std::cout << "final_loss " << result.loss_curve.back() << "\n";
  if (holdout > 0) {
    LstmPredictor predictor(result.model, stream.zones);
    const auto acc = score_predictor(predictor, stream, stream.day_begin(fit_days), stream.horizon());
    std::cout << "heldout_smape_cell " << acc.cell_smape() << "\n"
              << "heldout_smape_total " << acc.total_smape() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string stream;
  SimOptions sim;
  std::string predictor = "none";
  int horizon = 0;
  std::vector<std::uint64_t> seeds{1};
  int day = -1;
  std::string out = "run";
  bool compare = false;
};

RunReport simulate_once(const RequestStream& stream, const ZoneMap& zones, const SimConfig& cfg, PredictorKind kind,
                        const std::optional<LstmModel>& lstm, int day) {
  PredictorSpec ps;
  ps.kind = cfg.horizon > 0 ? kind : PredictorKind::none;
  ps.lstm = lstm;
  ps.seed = cfg.seed;
  auto predictor = make_predictor(ps, &stream);
  return day >= 0 ? run_day(stream, day, cfg, zones, predictor.get()) : run(stream, cfg, zones, predictor.get());
}

void write_run(const fs::path& dir, const RunReport& report, const RequestStream& stream) {
  {
    auto out = open_out(dir / "steps.csv");
    write_steps_csv(out, report);
  }
  {
    auto out = open_out(dir / "summary.json");
    write_summary_json(out, report);
  }
  SmapeAccumulator acc;
  for (const auto& s : report.steps) {
    if (s.next_forecast && s.t + 1 <= report.last) acc.add(s.t + 1, *s.next_forecast, counts_at(stream, s.t + 1));
  }
  if (!acc.empty()) {
    auto out = open_out(dir / "forecast.csv");
    acc.write_csv(out);
  }
}

int cmd_simulate(const SimulateOptions& o) {
  const auto stream = load_stream(o.stream);
  const ZoneMap zones = load_zones(o.sim.zones);
  const PredictorKind kind = parse_predictor_kind(o.predictor);
  if (kind == PredictorKind::none && o.horizon > 0) throw ConfigError("--horizon > 0 needs a --predictor");
  if (kind != PredictorKind::none && o.horizon == 0) throw ConfigError("--predictor needs --horizon >= 1");
  const auto lstm = load_lstm(o.sim.lstm_path);

  std::cout << std::setprecision(10);
  for (auto seed : o.seeds) {
    const SimConfig cfg = make_sim_config(o.sim, o.horizon, seed);
    spdlog::info("seed {}: {} f={}", seed, o.predictor, o.horizon);
    const auto report = simulate_once(stream, zones, cfg, kind, lstm, o.day);
    const fs::path dir = fs::path(o.out) / ("seed_" + std::to_string(seed));
    write_run(dir, report, stream);
    std::cout << "seed " << seed << " total_reward " << report.total_reward << " served_fraction "
              << report.served_fraction() << " average_pool " << report.average_pool << "\n";
    if (o.compare && o.horizon > 0) {
      SimConfig base = cfg;
      base.horizon = 0;
      const auto baseline = simulate_once(stream, zones, base, PredictorKind::none, std::nullopt, o.day);
      write_run(dir / "baseline", baseline, stream);
      const auto gain = compare_runs(baseline, report);
      std::cout << "seed " << seed << " baseline_reward " << baseline.total_reward << " improvement_percent ";
      if (gain) {
        std::cout << *gain << "\n";
      } else {
        std::cout << "NA\n";
      }
    }
  }
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepOptions {
  std::string stream;
  SimOptions sim;
  std::string predictors = "perfect";
  std::string horizons = "1,2,3,4,5";
  std::string days;
  std::uint64_t seed = 1;
  int jobs = 1;
  int first_weekday = 5;
  std::string out = "sweep";
};

int cmd_sweep(const SweepOptions& o) {
  const auto stream = load_stream(o.stream);
  const ZoneMap zones = load_zones(o.sim.zones);
  SweepSpec spec;
  spec.base = make_sim_config(o.sim, 0, o.seed);
  spec.jobs = o.jobs;
  spec.first_weekday = o.first_weekday;
  spec.days = parse_int_list(o.days);
  spec.lstm = load_lstm(o.sim.lstm_path);
  for (const auto& name : parse_name_list(o.predictors)) {
    for (int f : parse_int_list(o.horizons)) spec.treatments.push_back({parse_predictor_kind(name), f});
  }
  if (spec.treatments.empty()) throw ConfigError("sweep needs at least one predictor and horizon");

  const auto table = run_sweep(stream, zones, spec);
  const fs::path dir(o.out);
  for (const auto& row : table.rows) {
    const fs::path runs = dir / "runs" / ("day_" + std::to_string(row.day + 1));
    auto out = open_out(runs / "baseline.json");
    write_summary_json(out, row.baseline);
    for (std::size_t k = 0; k < row.treatments.size(); ++k) {
      auto t = open_out(runs / (table.treatments[k].name() + ".json"));
      write_summary_json(t, row.treatments[k]);
    }
  }
  {
    auto out = open_out(dir / "improvement.csv");
    write_improvement_csv(out, table);
  }
  {
    auto out = open_out(dir / "pool.csv");
    write_pool_csv(out, table);
  }
  {
    auto out = open_out(dir / "smape.csv");
    write_smape_csv(out, table);
  }

  std::cout << std::setprecision(6);
  for (std::size_t k = 0; k < table.treatments.size(); ++k) {
    double sum = 0.0;
    int n = 0;
    for (const auto& row : table.rows) {
      if (row.improvement[k]) {
        sum += *row.improvement[k];
        ++n;
      }
    }
    std::cout << table.treatments[k].name() << " mean_improvement_percent ";
    if (n > 0) {
      std::cout << sum / n << "\n";
    } else {
      std::cout << "NA\n";
    }
  }
  return 0;
}

// Flat "key = value" files apply to the subcommand being run; [section]
// headers still address a subcommand explicitly.
class SubcommandConfig : public CLI::ConfigTOML {
public:
  explicit SubcommandConfig(const CLI::App& app) : app_(&app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigTOML::from_config(input);
    const auto chosen = app_->get_subcommands();
    if (chosen.empty()) return items;
    for (auto& item : items) {
      if (item.parents.empty() && item.name != "++" && item.name != "--") item.parents.push_back(chosen.front()->get_name());
    }
    return items;
  }

private:
  const CLI::App* app_;
};

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"ridepool: online ridesharing with request forecasts"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key = value file of long option names; command-line flags override it");
  app.config_formatter(std::make_shared<SubcommandConfig>(app));
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();

  IngestOptions ingest;
  auto* ing = app.add_subcommand("ingest", "Turn a taxi trip CSV into a request stream");
  ing->add_option("--input", ingest.input, "Trip CSV with a header row")->required();
  ing->add_option("--day", ingest.day, "Day to keep, YYYY-MM-DD")->required();
  ing->add_option("--lookup", ingest.lookup, "Location id to zone file (default: ids 1..n map to zones 0..n-1)");
  ing->add_option("--zones", ingest.zones, "Zone edge file, or grid:N")->capture_default_str();
  ing->add_option("--out", ingest.out, "Stream file to write")->capture_default_str();
  ing->add_option("--driver-prob", ingest.driver_prob, "Probability a request is a driver")->capture_default_str();
  ing->add_option("--max-wait", ingest.max_wait, "Wait budget per request (steps)")->capture_default_str();
  ing->add_option("--step-seconds", ingest.step_seconds, "Seconds per step")->capture_default_str();
  ing->add_option("--seed", ingest.seed, "Seed for driver flags")->capture_default_str();

  SynthOptions synth;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic commuter stream on a grid");
  syn->add_option("--grid", synth.scenario.grid, "Grid side; the city has grid^2 zones")->capture_default_str();
  syn->add_option("--days", synth.scenario.days, "Days to generate")->capture_default_str();
  syn->add_option("--steps-per-day", synth.scenario.steps_per_day, "Steps per day")->capture_default_str();
  syn->add_option("--daily-requests", synth.scenario.daily_requests, "Expected weekday requests")
      ->capture_default_str();
  syn->add_option("--weekend-scale", synth.scenario.weekend_scale, "Demand multiplier on weekend days")
      ->capture_default_str();
  syn->add_option("--noise", synth.noise, "none or poisson")->capture_default_str();
  syn->add_option("--repeat-day", synth.repeat, "Copy this 0-based day over every day, making the stream periodic");
  syn->add_option("--driver-prob", synth.scenario.driver_prob, "Probability a request is a driver")
      ->capture_default_str();
  syn->add_option("--max-wait", synth.scenario.max_wait, "Wait budget per request (steps)")->capture_default_str();
  syn->add_option("--hubs", synth.scenario.profile.hubs, "Zones attracting commuter trips")->capture_default_str();
  syn->add_option("--peak-width", synth.scenario.profile.peak_width, "Rush hour width as a fraction of the day")
      ->capture_default_str();
  syn->add_option("--seed", synth.scenario.seed, "Stream seed")->capture_default_str();
  syn->add_option("--out", synth.out, "Stream file to write")->capture_default_str();

  TrainOptions tr;
  auto* trn = app.add_subcommand("train", "Fit the LSTM forecaster on a stream");
  trn->add_option("--stream", tr.stream, "Stream file")->required();
  trn->add_option("--out", tr.out, "Directory for params.txt and loss.csv")->capture_default_str();
  trn->add_option("--epochs", tr.cfg.epochs, "Training epochs")->capture_default_str();
  trn->add_option("--window", tr.cfg.window, "Steps per training window")->capture_default_str();
  trn->add_option("--lr", tr.cfg.learning_rate, "Adam learning rate")->capture_default_str();
  trn->add_option("--batch", tr.cfg.batch_size, "Windows per update")->capture_default_str();
  trn->add_option("--stride", tr.cfg.stride, "Steps between window starts")->capture_default_str();
  trn->add_option("--hidden", tr.cfg.hidden_dim, "Hidden units; 0 uses zones^2")->capture_default_str();
  trn->add_option("--holdout-days", tr.holdout_days, "Trailing days kept out of training and scored")
      ->capture_default_str();
  trn->add_option("--seed", tr.cfg.seed, "Initialization and shuffling seed")->capture_default_str();

  SimulateOptions simo;
  auto* sim = app.add_subcommand("simulate", "Run the online engine over a stream");
  sim->add_option("--stream", simo.stream, "Stream file")->required();
  sim->add_option("--predictor", simo.predictor, "Forecaster")
      ->check(CLI::IsMember({"none", "perfect", "yesterday", "lstm", "scrambled"}))
      ->capture_default_str();
  sim->add_option("--horizon", simo.horizon, "Forecast horizon f; 0 disables prediction")->capture_default_str();
  sim->add_option("--seed", simo.seeds, "One run per seed")->capture_default_str();
  sim->add_option("--day", simo.day, "Run a single day (0-based); -1 runs the whole stream")->capture_default_str();
  sim->add_option("--out", simo.out, "Output directory")->capture_default_str();
  sim->add_flag("--compare", simo.compare, "Also run the no-prediction baseline and print the improvement");
  add_sim_options(sim, simo.sim);

  SweepOptions sw;
  auto* swp = app.add_subcommand("sweep", "Baseline and every predictor/horizon for each day of a stream");
  swp->add_option("--stream", sw.stream, "Stream file")->required();
  swp->add_option("--predictor", sw.predictors, "Comma separated forecasters")->capture_default_str();
  swp->add_option("--horizon", sw.horizons, "Comma separated horizons")->capture_default_str();
  swp->add_option("--days", sw.days, "Comma separated 0-based days (default: all)");
  swp->add_option("--seed", sw.seed, "Simulation seed")->capture_default_str();
  swp->add_option("--jobs", sw.jobs, "Concurrent runs")->capture_default_str();
  swp->add_option("--first-weekday", sw.first_weekday, "Weekday of day 0, Monday = 0")->capture_default_str();
  swp->add_option("--out", sw.out, "Output directory")->capture_default_str();
  add_sim_options(swp, sw.sim);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ing) return cmd_ingest(ingest);
    if (*syn) return cmd_synth(synth);
    if (*trn) return cmd_train(tr);
    if (*sim) return cmd_simulate(simo);
    if (*swp) return cmd_sweep(sw);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
