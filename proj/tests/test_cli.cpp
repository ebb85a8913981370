#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "macau/config.hpp"
#include "macau/run.hpp"

using Catch::Approx;
using namespace macau;
namespace fs = std::filesystem;

namespace {

fs::path workdir() {
  fs::path dir = fs::temp_directory_path() / "macau_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& content) {
  auto path = (workdir() / name).string();
  std::ofstream out(path);
  out << content;
  return path;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 8 x 6 grid of a rank-1 surface plus deterministic ripple.
std::string small_observations() {
  std::ostringstream os;
  for (int i = 1; i <= 8; ++i)
    for (int j = 1; j <= 6; ++j)
      os << i << ' ' << j << ' ' << 0.25 * i - 0.125 * j + 0.01 * ((i * j) % 3)
         << '\n';
  return os.str();
}

std::string small_config(const std::string& obs_name, const std::string& outdir,
                         const std::string& extra_options = "") {
  std::ostringstream os;
  os << "# test run\n"
     << "[sampler]\n"
     << "latent_dim = 2\n"
     << "total = 20\n"
     << "burnin = 10\n"
     << "seed = 7\n\n"
     << "[entity row]\n"
     << "count = 8\n\n"
     << "[entity col]\n"
     << "count = 6\n\n"
     << "[relation obs]\n"
     << "entities = row, col\n"
     << "observations = " << obs_name << "\n"
     << "alpha = 4.0\n"
     << "test_fraction = 0.25\n\n"
     << "[output]\n"
     << "dir = " << outdir << "\n"
     << "prefix = t\n"
     << extra_options;
  return os.str();
}

int run_cli(const std::string& args) {
#ifdef MACAU_CLI_PATH
  const std::string cmd = std::string(MACAU_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
#else
  (void)args;
  return -1;
#endif
}

}  // namespace

TEST_CASE("parse_config/minimal config gets defaults") {
  write_file("mini_obs.txt", "1 1 1.0\n1 2 2.0\n");
  auto path = write_file("mini.cfg",
                         "[entity row]\ncount = 2\n[entity col]\ncount = 2\n"
                         "[relation obs]\nentities = row, col\n"
                         "observations = mini_obs.txt\nalpha = 1.5\n");
  RunConfig cfg = parse_config(path);
  REQUIRE(cfg.total == 1000);
  REQUIRE(cfg.burnin == 800);
  REQUIRE(cfg.seed == 0);
  REQUIRE(cfg.repetitions == 1);
  REQUIRE(cfg.latent_dim == 30);
  REQUIRE(cfg.vary == VaryMode::Seed);
  REQUIRE_FALSE(cfg.center);
  REQUIRE_FALSE(cfg.clamp.has_value());
  REQUIRE(cfg.relations[0].alpha == 1.5);
  // relative paths resolve against the config location
  REQUIRE(fs::path(cfg.relations[0].observation_path).is_absolute());
}

TEST_CASE("parse_config/burnin >= total names both keys") {
  auto path = write_file("bad_burnin.cfg",
                         "[sampler]\ntotal = 10\nburnin = 10\n"
                         "[entity row]\ncount = 2\n[entity col]\ncount = 2\n"
                         "[relation obs]\nentities = row, col\n"
                         "observations = mini_obs.txt\nalpha = 1.0\n");
  try {
    parse_config(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    REQUIRE(what.find("burnin") != std::string::npos);
    REQUIRE(what.find("total") != std::string::npos);
  }
}

TEST_CASE("parse_config/alpha is mandatory") {
  auto path = write_file("no_alpha.cfg",
                         "[entity row]\ncount = 2\n[entity col]\ncount = 2\n"
                         "[relation obs]\nentities = row, col\n"
                         "observations = mini_obs.txt\n");
  try {
    parse_config(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    REQUIRE(what.find("[relation obs] alpha") != std::string::npos);
  }
}

TEST_CASE("parse_config/unknown keys rejected with their path") {
  auto path = write_file("typo.cfg",
                         "[sampler]\nlatent_dmi = 3\n"
                         "[entity row]\ncount = 2\n[entity col]\ncount = 2\n"
                         "[relation obs]\nentities = row, col\n"
                         "observations = o.txt\nalpha = 1.0\n");
  try {
    parse_config(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    REQUIRE(what.find("[sampler] latent_dmi") != std::string::npos);
    REQUIRE(what.find("unknown key") != std::string::npos);
  }

  auto sect = write_file("badsect.cfg", "[samplerr]\ntotal = 5\n");
  REQUIRE_THROWS_AS(parse_config(sect), ConfigError);
}

TEST_CASE("split_holdout/sizes and determinism") {
  ObservationData obs;
  obs.degree = 2;
  obs.values.resize(10);
  for (int o = 0; o < 10; ++o) {
    obs.indices.push_back(o);
    obs.indices.push_back(0);
    obs.values(o) = o;
  }
  RngStream rng(3);
  auto [train, test] = split_holdout(obs, 0.5, rng);
  REQUIRE(train.count() == 5);
  REQUIRE(test.count() == 5);

  // identical seed, identical split
  RngStream rng2(3);
  auto [train2, test2] = split_holdout(obs, 0.5, rng2);
  REQUIRE(train.indices == train2.indices);
  REQUIRE(test.indices == test2.indices);

  // disjoint and exhaustive
  std::set<int> seen;
  for (Index o = 0; o < train.count(); ++o) seen.insert(train.indices[2 * o]);
  for (Index o = 0; o < test.count(); ++o) seen.insert(test.indices[2 * o]);
  REQUIRE(seen.size() == 10);
}

TEST_CASE("split_holdout/rounded test size at scale") {
  RngStream rng(4);
  auto [train, test] = split_holdout_indices(59280, 0.2, rng);
  REQUIRE(test.size() == 11856);
  REQUIRE(train.size() == 59280 - 11856);

  REQUIRE_THROWS_AS(split_holdout_indices(1, 0.5, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(split_holdout_indices(10, 0.0, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(split_holdout_indices(10, 1.0, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(split_holdout_indices(10, 0.01, rng), std::invalid_argument);
}

TEST_CASE("run/end-to-end on a small matrix") {
  write_file("e2e_obs.txt", small_observations());
  const std::string outdir = (workdir() / "out_a").string();
  auto cfg_path = write_file("e2e.cfg", small_config("e2e_obs.txt", outdir));
  RunConfig cfg = parse_config(cfg_path);
  RunReport report = run(cfg);
  REQUIRE(report.repetitions.size() == 1);
  REQUIRE(report.repetitions[0].samples == 10);
  REQUIRE(report.repetitions[0].relations.size() == 1);
  REQUIRE(report.repetitions[0].relations[0].test_cells == 12);  // 0.25 * 48
  REQUIRE(fs::exists(report.repetitions[0].relations[0].predictions_path));
  REQUIRE(fs::exists(report.report_path));

  // header shape: index_1,index_2,mean,std,truth,error
  std::string csv = read_file(report.repetitions[0].relations[0].predictions_path);
  REQUIRE(csv.rfind("index_1,index_2,mean,std,truth,error\n", 0) == 0);
}

TEST_CASE("run/identical config gives byte-identical predictions") {
  write_file("det_obs.txt", small_observations());
  const std::string out1 = (workdir() / "det1").string();
  const std::string out2 = (workdir() / "det2").string();
  RunConfig a = parse_config(write_file("det1.cfg", small_config("det_obs.txt", out1)));
  RunConfig b = parse_config(write_file("det2.cfg", small_config("det_obs.txt", out2)));
  RunReport ra = run(a);
  RunReport rb = run(b);
  REQUIRE(read_file(ra.repetitions[0].relations[0].predictions_path) ==
          read_file(rb.repetitions[0].relations[0].predictions_path));
}

TEST_CASE("run/report std recomputable from persisted outputs") {
  write_file("reps_obs.txt", small_observations());
  const std::string outdir = (workdir() / "out_reps").string();
  auto cfg_path = write_file(
      "reps.cfg", small_config("reps_obs.txt", outdir,
                               "\n[options]\nrepetitions = 3\nvary = seed\n"));
  RunConfig cfg = parse_config(cfg_path);
  RunReport report = run(cfg);
  REQUIRE(report.repetitions.size() == 3);

  auto j = nlohmann::json::parse(read_file(report.report_path));
  std::vector<double> rmses;
  for (const auto& rep : j["repetitions"]) rmses.push_back(rep["rmse"]);
  REQUIRE(rmses.size() == 3);
  double mean = (rmses[0] + rmses[1] + rmses[2]) / 3.0;
  double var = 0.0;
  for (double r : rmses) var += (r - mean) * (r - mean);
  REQUIRE(j["rmse_mean"].get<double>() == Approx(mean).epsilon(1e-12));
  REQUIRE(j["rmse_std"].get<double>() == Approx(std::sqrt(var / 2.0)).epsilon(1e-12));

  // vary = seed keeps the holdout cells identical across repetitions
  std::string csv1 = read_file(j["repetitions"][0]["relations"][0]["predictions"]);
  std::string csv2 = read_file(j["repetitions"][1]["relations"][0]["predictions"]);
  auto index_cols = [](const std::string& csv) {
    std::vector<std::string> cells;
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line))
      cells.push_back(line.substr(0, line.find(',', line.find(',') + 1)));
    return cells;
  };
  REQUIRE(index_cols(csv1) == index_cols(csv2));
}

TEST_CASE("run/parallel repetitions reproduce the sequential results") {
  write_file("par_obs.txt", small_observations());
  const std::string out_seq = (workdir() / "out_seq").string();
  const std::string out_par = (workdir() / "out_par").string();
  RunConfig seq = parse_config(write_file(
      "seq.cfg", small_config("par_obs.txt", out_seq,
                              "\n[options]\nrepetitions = 2\n")));
  RunConfig par = parse_config(write_file(
      "par.cfg",
      small_config("par_obs.txt", out_par,
                   "\n[options]\nrepetitions = 2\nparallel_repetitions = true\n")));
  RunReport rs = run(seq);
  RunReport rp = run(par);
  for (int rep = 0; rep < 2; ++rep)
    REQUIRE(read_file(rs.repetitions[rep].relations[0].predictions_path) ==
            read_file(rp.repetitions[rep].relations[0].predictions_path));
}

TEST_CASE("run/vary split changes the holdout cells") {
  write_file("vs_obs.txt", small_observations());
  const std::string outdir = (workdir() / "out_vs").string();
  auto cfg_path = write_file(
      "vs.cfg", small_config("vs_obs.txt", outdir,
                             "\n[options]\nrepetitions = 2\nvary = split\n"));
  RunReport report = run(parse_config(cfg_path));
  std::string csv1 = read_file(report.repetitions[0].relations[0].predictions_path);
  std::string csv2 = read_file(report.repetitions[1].relations[0].predictions_path);
  REQUIRE(csv1 != csv2);
}

TEST_CASE("run/relation features stay aligned through the split") {
  // One relation feature column equal to the observed value: the regression
  // weight should soak up the signal and drive the test error far below the
  // value scale, which only happens when train/test feature rows stay aligned.
  std::ostringstream obs, feats;
  RngStream rng(9, 1);
  for (int i = 1; i <= 10; ++i)
    for (int j = 1; j <= 8; ++j) {
      const double value = rng.normal() * 5.0;
      obs << i << ' ' << j << ' ' << value << '\n';
      feats << value << ",1.0\n";
    }
  write_file("rf_obs.txt", obs.str());
  write_file("rf_feats.csv", feats.str());
  const std::string outdir = (workdir() / "out_rf").string();
  auto cfg_path = write_file(
      "rf.cfg",
      "[sampler]\nlatent_dim = 2\ntotal = 40\nburnin = 20\nseed = 3\n"
      "[entity row]\ncount = 10\n[entity col]\ncount = 8\n"
      "[relation obs]\nentities = row, col\nobservations = rf_obs.txt\n"
      "alpha = 10.0\ntest_fraction = 0.25\nfeatures = rf_feats.csv\n"
      "features_format = dense-csv\n"
      "[output]\ndir = " + outdir + "\nprefix = rf\n");
  RunReport report = run(parse_config(cfg_path));
  REQUIRE(report.repetitions[0].rmse < 1.0);  // value scale is ~5
}

TEST_CASE("run/entity features load through the config") {
  std::ostringstream obs;
  for (int i = 1; i <= 6; ++i)
    for (int j = 1; j <= 5; ++j)
      obs << i << ' ' << j << ' ' << 0.1 * i * j << '\n';
  write_file("ef_obs.txt", obs.str());
  write_file("ef_feats.sdm", "%%shape 6 3\n1 1 1.0\n2 2 1.0\n3 3 1.0\n4 1 -1.0\n");
  const std::string outdir = (workdir() / "out_ef").string();
  auto cfg_path = write_file(
      "ef.cfg",
      "[sampler]\nlatent_dim = 2\ntotal = 12\nburnin = 6\nseed = 3\n"
      "[entity row]\ncount = 6\nfeatures = ef_feats.sdm\n"
      "features_format = sparse-triplet\nsolver = cg\n"
      "[entity col]\ncount = 5\n"
      "[relation obs]\nentities = row, col\nobservations = ef_obs.txt\n"
      "alpha = 10.0\ntest_fraction = 0.2\n"
      "[output]\ndir = " + outdir + "\nprefix = ef\n");
  RunReport report = run(parse_config(cfg_path));
  REQUIRE(report.repetitions[0].samples == 6);
  REQUIRE(std::isfinite(report.repetitions[0].rmse));
}

TEST_CASE("run/validation failure aborts before sampling") {
  write_file("v_obs.txt", "1 1 1.0\n2 2 2.0\n");
  auto cfg_path = write_file(
      "invalid.cfg",
      "[sampler]\nlatent_dim = 2\ntotal = 4\nburnin = 2\n"
      "[entity row]\ncount = 2\n[entity col]\ncount = 2\n"
      "[relation first]\nentities = row, col\nobservations = v_obs.txt\nalpha = 1.0\n"
      "[relation second]\nentities = row, col\nobservations = v_obs.txt\nalpha = 1.0\n");
  REQUIRE_THROWS_AS(run(parse_config(cfg_path)), ValidationError);
}

TEST_CASE("run/centering and clamping round-trip") {
  write_file("c_obs.txt", small_observations());
  const std::string outdir = (workdir() / "out_c").string();
  auto cfg_path = write_file(
      "center.cfg",
      small_config("c_obs.txt", outdir,
                   "\n[options]\ncenter = true\nclamp = -10.0, 10.0\n"));
  RunReport report = run(parse_config(cfg_path));
  // centered run still reports predictions on the original scale
  REQUIRE(report.repetitions[0].rmse < 10.0);
  std::string csv = read_file(report.repetitions[0].relations[0].predictions_path);
  REQUIRE(csv.find("truth") != std::string::npos);
}

TEST_CASE("cli/exit codes") {
  if (run_cli("--help") == -1) {
    SKIP("CLI binary path not provided");
  }
  write_file("cli_obs.txt", small_observations());
  const std::string outdir = (workdir() / "out_cli").string();
  auto good = write_file("cli_good.cfg", small_config("cli_obs.txt", outdir));
  REQUIRE(run_cli("validate " + good) == 0);
  REQUIRE(run_cli("run " + good + " --quiet") == 0);

  auto bad = write_file("cli_bad.cfg", "[sampler]\nnope = 1\n");
  REQUIRE(run_cli("run " + bad) == 2);
  REQUIRE(run_cli("run /nonexistent.cfg") == 2);

  write_file("cli_obs_b.txt", "1 1 5.0\n");
  auto invalid = write_file(
      "cli_invalid.cfg",
      "[entity row]\ncount = 8\n[entity col]\ncount = 6\n"
      "[relation a]\nentities = row, col\nobservations = cli_obs.txt\nalpha = 1\n"
      "[relation b]\nentities = row, col\nobservations = cli_obs_b.txt\nalpha = 1\n");
  REQUIRE(run_cli("validate " + invalid) == 3);
  REQUIRE(run_cli("run " + invalid) == 3);

  auto obs = write_file("cli_split_obs.txt", small_observations());
  REQUIRE(run_cli("split " + obs + " 0.25 9") == 0);
  REQUIRE(fs::exists(obs + ".train"));
  REQUIRE(fs::exists(obs + ".test"));
  ObservationData test_part = load_observations(obs + ".test", 2);
  REQUIRE(test_part.count() == 12);
}
