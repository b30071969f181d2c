#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "stratflow/dynamics.hpp"
#include "stratflow/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInstability = 3;
constexpr int kExitIo = 4;

int cmd_run(const std::string& config_path, std::uint64_t seed, bool seed_set, int threads,
            const std::string& out_dir) {
  stratflow::ScenarioConfig cfg = stratflow::parse_config_file(config_path);
  if (seed_set) cfg.seed = seed;
  if (threads > 0) cfg.threads = threads;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  stratflow::ScenarioResult res = stratflow::run_scenario(cfg);
  const auto files = stratflow::emit_report(res.record, cfg);
  for (const auto& f : files) std::cout << "wrote " << f << "\n";
  if (!res.dt_history.empty()) {
    const std::string cp = cfg.out_dir + "/" +
                           (cfg.label.empty() ? cfg.scenario : cfg.label) + "_checkpoint.json";
    stratflow::save_checkpoint({res.final_state, res.dt_history}, cp);
    std::cout << "wrote " << cp << "\n";
  }
  if (res.sigma.ok)
    std::cout << "sigma profile: |sigma|_L2 = " << stratflow::format_double(res.sigma.l2_norm())
              << " (tail error " << stratflow::format_double(res.sigma.tail_error) << ")\n";
  for (const auto& fit : res.record.fits)
    std::cout << "fit " << fit.name << ": slope " << stratflow::format_double(fit.slope)
              << " +- " << stratflow::format_double(fit.stderr_) << " on [" << fit.t_lo << ", "
              << fit.t_hi << "]\n";
  if (res.exit_code != 0) {
    std::cerr << "scenario failed: " << res.message << "\n";
    return res.exit_code;
  }
  return kExitOk;
}

int cmd_eigen_table(const std::string& config_path, const std::string& out_dir) {
  stratflow::ScenarioConfig cfg = stratflow::parse_config_file(config_path);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  const std::string csv = stratflow::eigen_table_csv(cfg.truncation(), cfg.alpha);
  const std::string path = cfg.out_dir + "/" +
                           (cfg.label.empty() ? cfg.scenario : cfg.label) + "_eigen.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw stratflow::IoError("cannot open " + path);
  out << csv;
  if (!out) throw stratflow::IoError("write failed: " + path);
  std::cout << "wrote " << path << "\n";
  return kExitOk;
}

int cmd_report(const std::string& record_path, const std::string& out_dir) {
  std::ifstream in(record_path);
  if (!in) throw stratflow::IoError("cannot open " + record_path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  stratflow::RunRecord rec;
  stratflow::ScenarioConfig cfg;
  try {
    rec = stratflow::record_from_json(text);
    // recover labeling from the config echo stored in the record
    const auto j = nlohmann::json::parse(text);
    if (j.contains("config")) {
      cfg.scenario = j["config"].value("scenario", cfg.scenario);
      cfg.label = j["config"].value("label", std::string());
      cfg.alpha = j["config"].value("alpha", cfg.alpha);
      cfg.m = j["config"].value("m", cfg.m);
    }
  } catch (const stratflow::IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw stratflow::IoError("record file is not a valid run record: " + record_path + " (" +
                             e.what() + ")");
  }
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  cfg.label = (cfg.label.empty() ? cfg.scenario : cfg.label) + "_report";
  const auto files = stratflow::emit_report(rec, cfg);
  for (const auto& f : files) std::cout << "wrote " << f << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stratflow: spectral solver for the damped/viscous stratified Boussinesq strip"};
  app.require_subcommand(1);

  std::string config_path, record_path, out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;

  CLI::App* run = app.add_subcommand("run", "run a scenario from a config file");
  run->add_option("config", config_path, "key = value config file")->required();
  run->add_option("--seed", seed, "override the scenario seed")->each([&](const std::string&) {
    seed_set = true;
  });
  run->add_option("--threads", threads, "worker threads for transforms/propagation");
  run->add_option("--out-dir", out_dir, "output directory");

  CLI::App* eig = app.add_subcommand("eigen-table", "dump the per-mode eigen data as CSV");
  eig->add_option("config", config_path, "key = value config file")->required();
  eig->add_option("--out-dir", out_dir, "output directory");

  CLI::App* rep = app.add_subcommand("report", "re-emit CSV/plot from a saved record JSON");
  rep->add_option("record", record_path, "record .json written by `run`")->required();
  rep->add_option("--out-dir", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, seed, seed_set, threads, out_dir);
    if (eig->parsed()) return cmd_eigen_table(config_path, out_dir);
    if (rep->parsed()) return cmd_report(record_path, out_dir);
  } catch (const stratflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const stratflow::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
