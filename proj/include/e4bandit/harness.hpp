#pragma once

// Benchmark driver: instance specs, algorithm x seed grids, mean/stderr
// aggregation and CSV output. Output is a pure function of the config
// (wall-clock columns are opt-in).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "e4bandit/algorithms.hpp"
#include "e4bandit/env.hpp"

namespace e4 {

enum class Algorithm { E4, PhaElimD, RsOful };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::E4: return "e4";
    case Algorithm::PhaElimD: return "phaelimd";
    case Algorithm::RsOful: return "rsoful";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& name) {
  if (name == "e4") return Algorithm::E4;
  if (name == "phaelimd") return Algorithm::PhaElimD;
  if (name == "rsoful") return Algorithm::RsOful;
  throw BanditError("unknown algorithm '" + name + "' (expected e4, phaelimd or rsoful)");
}

struct ExperimentConfig {
  std::string instance_spec;
  std::vector<Algorithm> algorithms;
  std::int64_t horizon = 10000;
  int trials = 10;
  std::uint64_t base_seed = 1;
  Schedule::Kind schedule = Schedule::Kind::T1;
  double gamma = 0.9;
  double rsoful_c = 0.5;
  int jobs = 1;
  std::filesystem::path output_dir = "results";
  bool raw = false;
  bool wall_clock = false;

  void validate() const {
    if (trials < 1) throw BanditError("trials must be >= 1");
    if (horizon < 16) throw BanditError("horizon must be >= 16");
    if (algorithms.empty()) throw BanditError("at least one algorithm is required");
    if (!(gamma > 0.0 && gamma < 1.0)) throw BanditError("gamma must lie in (0,1)");
    if (!(rsoful_c > 0.0)) throw BanditError("rsoful C must be positive");
    if (jobs < 1) throw BanditError("jobs must be >= 1");
  }
};

struct AggregateRow {
  std::string algorithm;
  std::string instance;
  std::int64_t t = 0;
  double mean_regret = 0.0;
  double stderr_regret = 0.0;
  int trials = 0;
};

namespace detail {

inline std::map<std::string, std::string> parse_kv(const std::string& body) {
  std::map<std::string, std::string> out;
  std::stringstream in(body);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw BanditError("malformed instance spec item '" + item + "'");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

inline long long parse_int(const std::string& s, const std::string& what) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw BanditError("instance spec: '" + what + "' must be an integer, got '" + s + "'");
  return v;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

/// Instance spec mini-grammar:
///   endoa:d=<int>,eps=<float> | random:d=<int>,k=<int>,seed=<int> | file:<path>
inline Instance parse_instance_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw BanditError("malformed instance spec '" + spec + "'");
  const std::string kind = spec.substr(0, colon);
  const std::string body = spec.substr(colon + 1);
  if (kind == "file") {
    if (body.empty()) throw BanditError("instance spec 'file:' needs a path");
    return load_instance(body);
  }
  const auto kv = detail::parse_kv(body);
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw BanditError("instance spec '" + spec + "' is missing '" + key + "'");
    return it->second;
  };
  auto check_keys = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : kv)
      if (std::none_of(keys.begin(), keys.end(), [&](const char* e) { return k == e; }))
        throw BanditError("instance spec '" + spec + "': unknown key '" + k + "'");
  };
  if (kind == "endoa") {
    check_keys({"d", "eps"});
    return make_end_of_optimism(static_cast<int>(detail::parse_int(need("d"), "d")),
                                e4::detail::parse_double(need("eps")));
  }
  if (kind == "random") {
    check_keys({"d", "k", "seed"});
    const long long seed = detail::parse_int(need("seed"), "seed");
    if (seed < 0) throw BanditError("instance spec: seed must be >= 0");
    return make_random_instance(static_cast<int>(detail::parse_int(need("d"), "d")),
                                static_cast<int>(detail::parse_int(need("k"), "k")),
                                static_cast<std::uint64_t>(seed));
  }
  throw BanditError("unknown instance kind '" + kind + "' (expected endoa, random or file)");
}

/// Runs one trial of `algo` with its own RNG seeded by `seed`.
inline TrialResult run_trial(const ExperimentConfig& cfg, const Instance& inst, Algorithm algo,
                             std::uint64_t seed) {
  Rng rng(seed);
  switch (algo) {
    case Algorithm::E4: {
      const Schedule sched{cfg.schedule, cfg.gamma};
      const auto alloc = AllocConfig::for_horizon(static_cast<double>(cfg.horizon), inst.dim(), cfg.gamma);
      return run_e4(inst, cfg.horizon, sched, alloc, rng);
    }
    case Algorithm::PhaElimD: return run_phaelimd(inst, cfg.horizon, rng);
    case Algorithm::RsOful: return run_rs_oful(inst, cfg.horizon, cfg.rsoful_c, rng);
  }
  throw BanditError("unreachable");
}

/// Mean and standard error of cumulative regret over trials at every
/// checkpoint time present in all of them.
inline std::vector<AggregateRow> aggregate_regret(const std::string& algorithm, const std::string& instance,
                                                  const std::vector<TrialResult>& trials) {
  if (trials.empty()) return {};
  std::vector<std::map<std::int64_t, double>> series;
  for (const auto& tr : trials) {
    std::map<std::int64_t, double> m;
    for (const auto& [t, r] : tr.regret_checkpoints) m[t] = r;
    series.push_back(std::move(m));
  }
  std::vector<AggregateRow> rows;
  const double n = static_cast<double>(trials.size());
  for (const auto& [t, r0] : series.front()) {
    bool everywhere = true;
    for (const auto& s : series)
      if (!s.count(t)) {
        everywhere = false;
        break;
      }
    if (!everywhere) continue;
    double sum = 0.0;
    for (const auto& s : series) sum += s.at(t);
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& s : series) ss += (s.at(t) - mean) * (s.at(t) - mean);
    const double sd = trials.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    rows.push_back({algorithm, instance, t, mean, sd / std::sqrt(n), static_cast<int>(trials.size())});
  }
  return rows;
}

/// Results of every (algorithm, trial) pair, in (algorithm order, trial) order.
struct ExperimentResults {
  Instance instance;
  std::vector<Algorithm> algorithms;
  std::vector<std::vector<TrialResult>> trials;  // [algorithm][trial]
};

inline ExperimentResults run_trials(const ExperimentConfig& cfg, const Instance& inst) {
  cfg.validate();
  std::vector<Algorithm> algos = cfg.algorithms;
  std::sort(algos.begin(), algos.end(), [](Algorithm a, Algorithm b) { return to_string(a) < to_string(b); });
  algos.erase(std::unique(algos.begin(), algos.end()), algos.end());

  const std::size_t n_tasks = algos.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<TrialResult>> results(algos.size(), std::vector<TrialResult>(cfg.trials));
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t task = next++; task < n_tasks; task = next++) {
      const std::size_t a = task / cfg.trials;
      const int i = static_cast<int>(task % cfg.trials);
      try {
        results[a][i] = run_trial(cfg, inst, algos[a], cfg.base_seed + static_cast<std::uint64_t>(i));
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const int n_threads = std::min<int>(cfg.jobs, static_cast<int>(n_tasks));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < n_threads; ++j) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return {inst, std::move(algos), std::move(results)};
}

inline void write_regret_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BanditError("cannot write '" + path.string() + "'");
  out << "algorithm,instance,t,mean_regret,stderr,trials\n";
  for (const auto& r : rows)
    out << detail::csv_field(r.algorithm) << ',' << detail::csv_field(r.instance) << ',' << r.t << ','
        << e4::detail::format_double(r.mean_regret) << ',' << e4::detail::format_double(r.stderr_regret) << ','
        << r.trials << '\n';
  if (!out) throw BanditError("failed writing '" + path.string() + "'");
}

/// Writes regret.csv, batches.csv and (optionally) raw/ traces into `dir`.
inline std::vector<std::filesystem::path> write_results(const ExperimentConfig& cfg, const ExperimentResults& res,
                                                        const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw BanditError("cannot create output directory '" + dir.string() + "'");
  const std::string label = res.instance.label();
  std::vector<fs::path> written;

  std::vector<AggregateRow> rows;
  for (std::size_t a = 0; a < res.algorithms.size(); ++a) {
    auto part = aggregate_regret(to_string(res.algorithms[a]), label, res.trials[a]);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  write_regret_csv(dir / "regret.csv", rows);
  written.push_back(dir / "regret.csv");

  {
    std::ofstream out(dir / "batches.csv", std::ios::binary);
    if (!out) throw BanditError("cannot write '" + (dir / "batches.csv").string() + "'");
    out << "algorithm,instance,trial,batch_count,wall_clock_ms\n";
    for (std::size_t a = 0; a < res.algorithms.size(); ++a)
      for (std::size_t i = 0; i < res.trials[a].size(); ++i) {
        const auto& tr = res.trials[a][i];
        out << to_string(res.algorithms[a]) << ',' << detail::csv_field(label) << ',' << i << ','
            << tr.batch_count << ',';
        if (cfg.wall_clock) out << e4::detail::format_double(tr.wall_clock.count());
        out << '\n';
      }
    written.push_back(dir / "batches.csv");
  }

  if (cfg.raw) {
    const fs::path raw = dir / "raw";
    fs::create_directories(raw, ec);
    if (ec) throw BanditError("cannot create '" + raw.string() + "'");
    for (std::size_t a = 0; a < res.algorithms.size(); ++a)
      for (std::size_t i = 0; i < res.trials[a].size(); ++i) {
        const auto& tr = res.trials[a][i];
        const fs::path p = raw / (to_string(res.algorithms[a]) + "_trial" + std::to_string(i) + ".csv");
        std::ofstream out(p, std::ios::binary);
        if (!out) throw BanditError("cannot write '" + p.string() + "'");
        out << "t,regret\n";
        for (const auto& [t, r] : tr.regret_checkpoints) out << t << ',' << e4::detail::format_double(r) << '\n';
        written.push_back(p);
      }
  }
  return written;
}

/// Runs every configured algorithm for `trials` seeds (base_seed + i) and
/// writes the CSV artifacts. Returns the written paths.
inline std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Instance inst = parse_instance_spec(cfg.instance_spec);
  return write_results(cfg, run_trials(cfg, inst), cfg.output_dir);
}

/// End-of-Optimism ablation over epsilon. The dimension comes from the
/// config's endoa spec (default 2). Each epsilon gets its own
/// `eps_<eps>/` directory; `sweep.csv` summarises final regret and batches.
inline std::vector<std::filesystem::path> sweep_epsilon(const ExperimentConfig& cfg, const std::vector<double>& eps_list) {
  cfg.validate();
  if (eps_list.empty()) throw BanditError("sweep needs at least one epsilon");
  int d = 2;
  if (!cfg.instance_spec.empty()) {
    if (cfg.instance_spec.rfind("endoa:", 0) != 0) throw BanditError("sweep works on endoa instances only");
    d = parse_instance_spec(cfg.instance_spec).dim();
  }
  for (double e : eps_list)
    if (!(e > 0.0 && e < 0.5)) throw BanditError("sweep epsilon must lie in (0, 0.5)");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir))
    throw BanditError("cannot create output directory '" + cfg.output_dir.string() + "'");
  std::vector<fs::path> written;
  std::ostringstream summary;
  summary << "eps,algorithm,instance,final_mean_regret,final_stderr,mean_batch_count,trials\n";
  for (double e : eps_list) {
    const Instance inst = make_end_of_optimism(d, e);
    const auto res = run_trials(cfg, inst);
    const auto files = write_results(cfg, res, cfg.output_dir / ("eps_" + e4::detail::format_double(e)));
    written.insert(written.end(), files.begin(), files.end());
    for (std::size_t a = 0; a < res.algorithms.size(); ++a) {
      const auto rows = aggregate_regret(to_string(res.algorithms[a]), inst.label(), res.trials[a]);
      double batches = 0.0;
      for (const auto& tr : res.trials[a]) batches += tr.batch_count;
      batches /= static_cast<double>(res.trials[a].size());
      summary << e4::detail::format_double(e) << ',' << to_string(res.algorithms[a]) << ','
              << detail::csv_field(inst.label()) << ',' << e4::detail::format_double(rows.back().mean_regret) << ','
              << e4::detail::format_double(rows.back().stderr_regret) << ',' << e4::detail::format_double(batches)
              << ',' << res.trials[a].size() << '\n';
    }
  }
  std::ofstream out(cfg.output_dir / "sweep.csv", std::ios::binary);
  if (!out) throw BanditError("cannot write sweep.csv");
  out << summary.str();
  written.push_back(cfg.output_dir / "sweep.csv");
  return written;
}

// ---------------------------------------------------------------------------
// Command line

class UsageError : public BanditError {
 public:
  using BanditError::BanditError;
};

struct CliCommand {
  enum class Kind { Run, Sweep, GenInstance, Help };
  Kind kind = Kind::Help;
  ExperimentConfig config;
  std::vector<double> eps_list;
  /// gen-instance: destination file ("-" for stdout).
  std::string instance_out;
  std::string help;
};

/// Parses `e4bench <run|sweep|gen-instance> [flags]`. Throws UsageError with
/// the usage text on unknown flags, bad values or missing required flags.
inline CliCommand parse_cli(const std::vector<std::string>& args) {
  CLI::App app{"Batched linear bandit benchmark harness", "e4bench"};
  app.require_subcommand(1);
  CliCommand cmd;
  std::vector<std::string> algos;
  std::string schedule = "t1";
  std::string out = "results";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--algo", algos, "Algorithm(s) to run: e4, phaelimd, rsoful (repeatable)")
        ->check(CLI::IsMember({"e4", "phaelimd", "rsoful"}))
        ->required();
    sub->add_option("--horizon", cmd.config.horizon, "Horizon T")->check(CLI::Range(std::int64_t{16}, std::int64_t{1} << 50));
    sub->add_option("--trials", cmd.config.trials, "Number of seeded trials")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cmd.config.base_seed, "Base seed; trial i uses seed + i");
    sub->add_option("--schedule", schedule, "E4 exploration schedule")->check(CLI::IsMember({"t1", "t2"}));
    sub->add_option("--gamma", cmd.config.gamma, "E4 gamma in (0,1)")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--rsoful-c", cmd.config.rsoful_c, "rs-OFUL switching parameter C")->check(CLI::PositiveNumber);
    sub->add_option("--jobs", cmd.config.jobs, "Parallel trials")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "Output directory");
    sub->add_flag("--raw", cmd.config.raw, "Also write per-trial traces under raw/");
    sub->add_flag("--wall-clock", cmd.config.wall_clock, "Fill wall_clock_ms (output no longer reproducible)");
  };

  auto* run = app.add_subcommand("run", "Run algorithms on one instance");
  add_common(run);
  run->add_option("--instance", cmd.config.instance_spec,
                  "endoa:d=<int>,eps=<float> | random:d=<int>,k=<int>,seed=<int> | file:<path>")
      ->required();

  auto* sweep = app.add_subcommand("sweep", "Epsilon ablation on End-of-Optimism instances");
  add_common(sweep);
  sweep->add_option("--instance", cmd.config.instance_spec, "endoa:d=<int>,eps=<ignored> (sets d; default d=2)");
  sweep->add_option("--eps", cmd.eps_list, "Epsilon values (repeatable or comma separated)")
      ->delimiter(',')
      ->required();

  auto* gen = app.add_subcommand("gen-instance", "Write an instance file");
  std::string gen_spec;
  gen->add_option("--instance", gen_spec, "Instance spec")->required();
  gen->add_option("--out", cmd.instance_out, "Destination file ('-' for stdout)")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    cmd.kind = CliCommand::Kind::Help;
    cmd.help = app.help();
    for (auto* sub : {run, sweep, gen})
      if (sub->parsed()) cmd.help = sub->help();
    return cmd;
  } catch (const CLI::ParseError& e) {
    throw UsageError(std::string(e.what()) + "\n\n" + app.help());
  }

  cmd.config.output_dir = out;
  cmd.config.schedule = schedule == "t2" ? Schedule::Kind::T2 : Schedule::Kind::T1;
  for (const auto& a : algos) cmd.config.algorithms.push_back(parse_algorithm(a));
  if (run->parsed()) {
    cmd.kind = CliCommand::Kind::Run;
  } else if (sweep->parsed()) {
    cmd.kind = CliCommand::Kind::Sweep;
  } else {
    cmd.kind = CliCommand::Kind::GenInstance;
    cmd.config.instance_spec = gen_spec;
    return cmd;
  }
  try {
    cmd.config.validate();
    if (cmd.kind == CliCommand::Kind::Run) (void)parse_instance_spec(cmd.config.instance_spec);
  } catch (const BanditError& e) {
    throw UsageError(std::string(e.what()) + "\n\n" + app.help());
  }
  return cmd;
}

}  // namespace e4
