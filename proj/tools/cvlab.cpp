// cvlab command-line front end: runs experiment configs, writes CSV/report
// artifacts, and exposes one-shot decomposition and rate estimation.
// Exit codes: 0 success, 1 runtime failure, 2 invalid usage/config.

#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvlab/analysis.hpp"
#include "cvlab/config.hpp"
#include "cvlab/crossval.hpp"
#include "cvlab/csv.hpp"
#include "cvlab/error.hpp"
#include "cvlab/kernels.hpp"
#include "cvlab/rng.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string sanitize_filename(const std::string& name) {
  std::string out;
  for (const char c : name) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')
               ? c
               : '_';
  }
  return out;
}

void write_file(const fs::path& path, const std::string& content,
                std::vector<std::string>& artifacts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw cvlab::Error(cvlab::Errc::io_error, "cannot write " + path.string());
  out << content;
  artifacts.push_back(path.filename().string());
}

nlohmann::json parse_learner_arg(const std::string& arg) {
  std::string text;
  if (!arg.empty() && arg.front() == '{') {
    text = arg;
  } else {
    std::ifstream in(arg);
    if (!in) {
      throw cvlab::Error(cvlab::Errc::io_error, "cannot open learner config '" + arg + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw cvlab::Error(cvlab::Errc::invalid_config,
                       std::string("learner config: parse error: ") + e.what());
  }
}

struct RunArgs {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::size_t> n;
  std::size_t workers = 0;  // 0 = hardware concurrency
};

int cmd_run(const RunArgs& args) {
  using namespace cvlab;
  RunOverrides overrides;
  overrides.seed = args.seed;
  overrides.reps = args.reps;
  overrides.n = args.n;
  const ResolvedConfig config = load_config(args.config, overrides);
  const ExperimentConfig& exp = config.experiment;

  const std::size_t workers =
      args.workers > 0 ? args.workers : std::max(1u, std::thread::hardware_concurrency());

  fs::create_directories(args.out_dir);
  const fs::path out_dir(args.out_dir);
  std::vector<std::string> artifacts;

  std::cerr << "cvlab run: config '" << config.name << "', digest " << config.digest()
            << ", kernels " << kernels::backend_name(kernels::active_backend()) << ", workers "
            << workers << "\n";
  const auto t0 = std::chrono::steady_clock::now();

  const ReplicationTable table = run_replications(exp, workers, &std::cerr);

  {
    std::ostringstream buf;
    write_table_csv(table, buf);
    write_file(out_dir / "replications.csv", buf.str(), artifacts);
  }
  if (!table.oob_rows.empty()) {
    std::ostringstream buf;
    write_oob_csv(table, buf);
    write_file(out_dir / "oob.csv", buf.str(), artifacts);
  }

  for (const std::string& report : config.reports) {
    if (report == "prop1") {
      for (const Learner& learner : exp.learners) {
        for (const std::size_t n : exp.n_grid) {
          const auto slice = table.filter(learner.name(), n);
          const Prop1Report rep = prop1_check(slice, exp.dgp);
          write_file(out_dir / ("prop1_" + sanitize_filename(learner.name()) + "_n" +
                                std::to_string(n) + ".txt"),
                     rep.to_text(), artifacts);
        }
      }
    } else if (report == "prop2") {
      if (exp.learners.size() != 2) {
        throw Error(Errc::invalid_config, "prop2 report needs exactly two learners");
      }
      const Prop2Report rep = prop2_check(table, exp.learners[0].declared_rate(),
                                          exp.learners[1].declared_rate());
      write_file(out_dir / "prop2.txt", rep.to_text(), artifacts);
    } else if (report == "zscaling") {
      bool any = false;
      for (const Learner& learner : exp.learners) {
        if (!learner.declared_rate()) continue;
        any = true;
        const ZScalingReport rep = z_scaling_check(learner, exp.dgp, exp.n_grid,
                                                   exp.replications, exp.master_seed, exp.k_folds);
        write_file(out_dir / ("zscaling_" + sanitize_filename(learner.name()) + ".txt"),
                   rep.to_text(), artifacts);
      }
      if (!any) {
        throw Error(Errc::invalid_config, "zscaling report requires a declared-rate learner");
      }
    } else if (report == "rates") {
      for (const Learner& learner : exp.learners) {
        const RateReport rep = rate_estimate(learner, exp.dgp, exp.n_grid, config.rates_reps,
                                             exp.master_seed, config.rates_mc_draws);
        write_file(out_dir / ("rates_" + sanitize_filename(learner.name()) + ".txt"),
                   rep.to_text(), artifacts);
        std::ostringstream buf;
        buf << "n,mean_excess_risk\n";
        for (std::size_t i = 0; i < rep.n_grid.size(); ++i) {
          buf << rep.n_grid[i] << ',' << csv::format_double(rep.mean_excess[i]) << '\n';
        }
        write_file(out_dir / ("rates_" + sanitize_filename(learner.name()) + ".csv"), buf.str(),
                   artifacts);
      }
    } else if (report == "paired") {
      if (exp.learners.size() != 2) {
        throw Error(Errc::invalid_config, "paired report needs exactly two learners");
      }
      for (const std::size_t n : exp.n_grid) {
        const auto slice = table.filter(std::nullopt, n);
        const PairedSummary summary = paired_summary(slice);
        const std::string tag = "_n" + std::to_string(n);
        write_file(out_dir / ("paired" + tag + ".txt"), summary.to_text(), artifacts);
        std::ostringstream hist;
        write_paired_hist_csv(summary, hist);
        write_file(out_dir / ("fig2_hist" + tag + ".csv"), hist.str(), artifacts);
        std::ostringstream scatter;
        write_paired_scatter_csv(summary, scatter);
        write_file(out_dir / ("fig2_scatter" + tag + ".csv"), scatter.str(), artifacts);
      }
    } else if (report == "fig1") {
      std::ostringstream buf;
      buf << "replication,n,learner,oracle_excess_risk,cv_total\n";
      for (const auto& row : table.rows) {
        buf << row.replication << ',' << row.n << ',' << row.learner << ','
            << csv::format_double(row.oracle_excess_risk) << ','
            << csv::format_double(row.cv_total) << '\n';
      }
      write_file(out_dir / "fig1.csv", buf.str(), artifacts);
    }
  }

  const auto t1 = std::chrono::steady_clock::now();
  const double seconds = std::chrono::duration<double>(t1 - t0).count();

  nlohmann::json manifest;
  manifest["tool"] = "cvlab";
  manifest["version"] = kVersion;
  manifest["name"] = config.name;
  manifest["config_digest"] = config.digest();
  manifest["master_seed"] = exp.master_seed;
  manifest["kernels"] = kernels::backend_name(kernels::active_backend());
  manifest["workers"] = workers;
  manifest["duration_seconds"] = seconds;
  manifest["artifacts"] = artifacts;
  {
    std::ofstream out(out_dir / "manifest.json", std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot write manifest.json");
    out << manifest.dump(2) << '\n';
  }
  std::cerr << "cvlab run: wrote " << artifacts.size() << " artifacts + manifest.json to "
            << out_dir.string() << " in " << seconds << "s\n";
  return 0;
}

struct DecomposeArgs {
  std::string data_path;
  std::string learner;
  std::size_t k_folds = 0;
  std::uint64_t seed = 1;
  std::string mu_preset = "eq1";
  std::string out_path;
};

int cmd_decompose(const DecomposeArgs& args) {
  using namespace cvlab;
  std::ifstream in(args.data_path);
  if (!in) throw Error(Errc::io_error, "cannot open dataset '" + args.data_path + "'");
  const Dataset data = read_dataset_csv(in);

  const Dgp dgp = dgp_preset(args.mu_preset, data.p(), 1.0);
  const Learner learner = learner_from_json(parse_learner_arg(args.learner), dgp);

  const std::size_t n = data.n();
  const FoldAssignment folds =
      make_folds(n, args.k_folds, rng::derive(args.seed, {rng::stream::folds, 0, n}));
  const CvDecomposition dec =
      decompose(learner, data, folds, dgp.mu, rng::derive(args.seed, {rng::stream::evaluation, 0, n}));

  const std::string header = decomposition_csv_header();
  const std::string row = decomposition_csv_row(0, learner.name(), n, args.k_folds, dec);
  std::cout << header << '\n' << row << '\n';
  if (!args.out_path.empty()) {
    std::ofstream out(args.out_path, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot write '" + args.out_path + "'");
    out << header << '\n' << row << '\n';
  }
  return 0;
}

struct RatesArgs {
  std::string learner;
  std::string dgp_preset_name = "eq1";
  std::size_t p = 10;
  double noise_sd = 1.0;
  std::vector<std::size_t> n_grid;
  std::size_t reps = 5;
  std::size_t mc_draws = 100000;
  std::uint64_t seed = 1;
  std::string out_path;
};

int cmd_rates(const RatesArgs& args) {
  using namespace cvlab;
  const Dgp dgp = dgp_preset(args.dgp_preset_name, args.p, args.noise_sd);
  const Learner learner = learner_from_json(parse_learner_arg(args.learner), dgp);
  const RateReport report =
      rate_estimate(learner, dgp, args.n_grid, args.reps, args.seed, args.mc_draws);
  std::cout << report.to_text();
  std::cout << "gamma_hat +/- se = " << csv::format_double(report.gamma_hat) << " +/- "
            << csv::format_double(report.gamma_se) << '\n';
  if (!args.out_path.empty()) {
    std::ofstream out(args.out_path, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot write '" + args.out_path + "'");
    out << "n,mean_excess_risk\n";
    for (std::size_t i = 0; i < report.n_grid.size(); ++i) {
      out << report.n_grid[i] << ',' << csv::format_double(report.mean_excess[i]) << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cvlab: a k-fold cross-validation laboratory with exact oracle decomposition"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string kernels_choice = "auto";
  app.add_option("--kernels", kernels_choice,
                 "kernel backend: scalar, avx2, or auto (default: auto)");

  RunArgs run_args;
  std::uint64_t run_seed = 0;
  std::size_t run_reps = 0;
  std::size_t run_n = 0;
  auto* run = app.add_subcommand("run", "run an experiment config and write artifacts");
  run->add_option("--config", run_args.config, "config path or built-in preset name")->required();
  run->add_option("--out", run_args.out_dir, "output directory")->required();
  auto* seed_opt = run->add_option("--seed", run_seed, "override master_seed");
  auto* reps_opt = run->add_option("--reps", run_reps, "override replications");
  auto* n_opt = run->add_option("--n", run_n, "override n_grid with a single size");
  run->add_option("--workers", run_args.workers, "worker threads (default: hardware)");

  DecomposeArgs dec_args;
  auto* dec = app.add_subcommand("decompose", "decompose one cross-validation estimate");
  dec->add_option("--data", dec_args.data_path, "dataset csv (header x1,...,xp,y)")->required();
  dec->add_option("--learner", dec_args.learner, "learner config: inline JSON or a path")
      ->required();
  dec->add_option("--k", dec_args.k_folds, "fold count K")->required();
  dec->add_option("--seed", dec_args.seed, "evaluation seed (default 1)");
  dec->add_option("--mu", dec_args.mu_preset, "oracle mean preset: eq1 or zero (default eq1)");
  dec->add_option("--out", dec_args.out_path, "also write the csv row here");

  RatesArgs rates_args;
  auto* rates = app.add_subcommand("rates", "estimate the excess-risk decay exponent");
  rates->add_option("--learner", rates_args.learner, "learner config: inline JSON or a path")
      ->required();
  rates->add_option("--dgp", rates_args.dgp_preset_name, "dgp preset: eq1 or zero (default eq1)");
  rates->add_option("--p", rates_args.p, "feature dimension (default 10)");
  rates->add_option("--noise-sd", rates_args.noise_sd, "noise standard deviation (default 1)");
  rates->add_option("--n-grid", rates_args.n_grid, "sample sizes, e.g. 400,1600,6400")
      ->required()
      ->delimiter(',');
  rates->add_option("--reps", rates_args.reps, "replications per n (default 5)");
  rates->add_option("--mc-draws", rates_args.mc_draws, "oracle draws per fit (default 100000)");
  rates->add_option("--seed", rates_args.seed, "master seed (default 1)");
  rates->add_option("--out", rates_args.out_path, "also write per-n csv here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const auto backend = cvlab::kernels::parse_backend(kernels_choice);
    if (!cvlab::kernels::set_backend(backend)) {
      throw cvlab::Error(cvlab::Errc::invalid_config,
                         "kernel backend '" + kernels_choice + "' is unavailable on this machine");
    }
    if (seed_opt->count() > 0) run_args.seed = run_seed;
    if (reps_opt->count() > 0) run_args.reps = run_reps;
    if (n_opt->count() > 0) run_args.n = run_n;

    if (run->parsed()) return cmd_run(run_args);
    if (dec->parsed()) return cmd_decompose(dec_args);
    if (rates->parsed()) return cmd_rates(rates_args);
    return 2;
  } catch (const cvlab::Error& e) {
    std::cerr << "error (" << cvlab::errc_name(e.code()) << "): " << e.what() << "\n";
    return cvlab::is_usage_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
