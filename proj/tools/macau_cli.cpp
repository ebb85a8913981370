#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "macau/config.hpp"
#include "macau/run.hpp"

namespace {

int do_run(const std::string& config_path, std::optional<std::uint64_t> seed,
           bool quiet) {
  macau::RunConfig config = macau::parse_config(config_path);
  if (seed) config.seed = *seed;
  if (!quiet)
    config.log = [](const std::string& line) { std::cerr << line << '\n'; };

  macau::RunReport report = macau::run(config);
  for (const auto& rep : report.repetitions) {
    std::printf("repetition %d: test rmse %.6f (%d samples", rep.repetition + 1,
                rep.rmse, rep.samples);
    if (rep.solves.cg_nonconverged > 0)
      std::printf(", %ld non-converged CG solves", rep.solves.cg_nonconverged);
    std::printf(")\n");
    for (const auto& rel : rep.relations)
      std::printf("  %s: rmse %.6f over %ld cells -> %s\n", rel.name.c_str(),
                  rel.rmse, static_cast<long>(rel.test_cells),
                  rel.predictions_path.c_str());
  }
  std::printf("rmse mean %.6f std %.6f over %zu repetition(s)\n", report.rmse_mean,
              report.rmse_std, report.repetitions.size());
  std::printf("report: %s\n", report.report_path.c_str());
  return 0;
}

int do_validate(const std::string& config_path) {
  macau::RunConfig config = macau::parse_config(config_path);
  macau::ValidationReport report = macau::validate_config(config);
  std::printf("%s\n", report.to_string().c_str());
  return report.ok ? 0 : 3;
}

int do_split(const std::string& obs_path, double fraction, std::uint64_t seed,
             int degree, std::string train_path, std::string test_path) {
  if (degree == 0) degree = macau::infer_degree(obs_path);
  macau::ObservationData obs = macau::load_observations(obs_path, degree);
  macau::RngStream rng(seed);
  auto [train, test] = macau::split_holdout(obs, fraction, rng);
  if (train_path.empty()) train_path = obs_path + ".train";
  if (test_path.empty()) test_path = obs_path + ".test";
  macau::save_observations(train_path, train);
  macau::save_observations(test_path, test);
  std::printf("%ld train -> %s\n%ld test -> %s\n",
              static_cast<long>(train.count()), train_path.c_str(),
              static_cast<long>(test.count()), test_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"macau: Bayesian factorization of matrices, tensors and "
               "multi-relation data with entity and relation side information"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "worker thread count (default: all cores)");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  auto* cmd_run = app.add_subcommand("run", "run the configured factorization");
  cmd_run->add_option("config", config_path, "run configuration file")->required();
  cmd_run->add_option("--seed", seed, "override [sampler] seed");
  cmd_run->add_flag("--quiet", quiet, "suppress progress output");

  std::string validate_path;
  auto* cmd_validate = app.add_subcommand("validate", "check a model without sampling");
  cmd_validate->add_option("config", validate_path, "run configuration file")->required();

  std::string obs_path, train_out, test_out;
  double fraction = 0.0;
  std::uint64_t split_seed = 0;
  int degree = 0;
  auto* cmd_split = app.add_subcommand("split", "split an observation file");
  cmd_split->add_option("obs-file", obs_path)->required();
  cmd_split->add_option("fraction", fraction, "test fraction in (0, 1)")->required();
  cmd_split->add_option("seed", split_seed)->required();
  cmd_split->add_option("--degree", degree, "index columns (default: inferred)");
  cmd_split->add_option("--train", train_out, "train output path");
  cmd_split->add_option("--test", test_out, "test output path");

  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  try {
    if (cmd_run->parsed()) return do_run(config_path, seed, quiet);
    if (cmd_validate->parsed()) return do_validate(validate_path);
    if (cmd_split->parsed())
      return do_split(obs_path, fraction, split_seed, degree, train_out, test_out);
  } catch (const macau::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const macau::ParseError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const macau::ValidationError& e) {
    std::fprintf(stderr, "validation failed: %s\n", e.what());
    return 3;
  } catch (const macau::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
