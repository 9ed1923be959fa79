// rfiqkd command-line front end.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rfiqkd/commands.hpp"

namespace {

namespace fs = std::filesystem;
using namespace rfiqkd;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string preset;
  std::optional<bool> finite_key;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "master RNG seed (overrides config)");
  app->add_option("--out-dir", c.out_dir, "output directory (overrides config)");
  app->add_option("--preset", c.preset, "device preset")->check(CLI::IsMember({"ideal", "paper-fig4"}));
  app->add_flag("--finite-key,!--no-finite-key", c.finite_key, "finite-key relaxation of the constraints");
}

config::RunConfig resolve(const Common& c) {
  std::optional<config::Preset> preset;
  if (!c.preset.empty()) preset = config::preset_from_name(c.preset);
  config::RunConfig cfg = c.config_path.empty() ? config::parse_config_json(config::json(), preset)
                                                : config::parse_config(c.config_path, preset);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out_dir.empty()) cfg.out_dir = c.out_dir;
  if (c.finite_key) cfg.security.finite_key = *c.finite_key;
  config::validate(cfg);
  return cfg;
}

void print_summary(const security::Summary& s) { std::cout << io::format_summary(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Receiver self-characterization and RFI-QKD security analysis"};
  app.set_version_flag("--version", std::string(commands::kVersion));
  app.require_subcommand(1);

  Common sim_opts, char_opts, sec_opts, pipe_opts;

  auto* sim_cmd = app.add_subcommand("simulate", "simulate a drifting acquisition run");
  add_common(sim_cmd, sim_opts);

  auto* char_cmd = app.add_subcommand("characterize", "reconstruct receiver POVMs from central-peak counts");
  add_common(char_cmd, char_opts);
  std::string char_counts, char_truth;
  bool no_repair = false;
  char_cmd->add_option("--counts", char_counts, "counts.csv")->required()->check(CLI::ExistingFile);
  char_cmd->add_option("--truth", char_truth, "reference POVM file for a fidelity table")->check(CLI::ExistingFile);
  char_cmd->add_flag("--no-repair", no_repair, "keep the raw reconstruction (no projection onto valid POVMs)");

  auto* sec_cmd = app.add_subcommand("security", "per-window lower bound on C and key fraction");
  add_common(sec_cmd, sec_opts);
  std::string sec_counts, sec_povm, sec_zbasis;
  std::optional<double> sec_ezz;
  sec_cmd->add_option("--counts", sec_counts, "counts.csv")->required()->check(CLI::ExistingFile);
  sec_cmd->add_option("--povm", sec_povm, "POVM file")->required()->check(CLI::ExistingFile);
  sec_cmd->add_option("--zbasis", sec_zbasis, "key-basis sidecar (window_id,z_total,z_errors)")->check(CLI::ExistingFile);
  sec_cmd->add_option("--e-zz", sec_ezz, "fixed key-basis QBER for every window")->check(CLI::Range(0.0, 0.5));

  auto* pipe_cmd = app.add_subcommand("pipeline", "simulate, characterize and analyse in one run");
  add_common(pipe_cmd, pipe_opts);

  auto* fid_cmd = app.add_subcommand("fidelity", "fidelity table of a POVM file against a reference");
  std::string fid_povm, fid_ref;
  fid_cmd->add_option("--povm", fid_povm, "POVM file")->required()->check(CLI::ExistingFile);
  fid_cmd->add_option("--reference", fid_ref, "reference POVM file (default: ideal effects)")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : commands::kConfig;
  }

  try {
    if (*sim_cmd) {
      const auto cfg = resolve(sim_opts);
      const auto run = commands::cmd_simulate(cfg, cfg.out_dir);
      std::cout << "windows=" << run.windows.size() << " out_dir=" << cfg.out_dir
                << " config_hash=" << config::config_hash(cfg) << "\n";
    } else if (*char_cmd) {
      const auto cfg = resolve(char_opts);
      auto opt = cfg.qdsc_options();
      if (no_repair) opt.repair = false;
      const auto res = commands::cmd_characterize(char_counts, opt, cfg.out_dir);
      std::cout << io::format_diagnostics(res.diagnostics);
      std::cout << io::format_fidelity_table(quantum::ideal_povm(), res.povm, "fidelity_vs_ideal");
      if (!char_truth.empty())
        std::cout << io::format_fidelity_table(quantum::gauge_align(io::read_povm(char_truth), opt.gauge), res.povm,
                                               "fidelity_vs_reference");
    } else if (*sec_cmd) {
      const auto cfg = resolve(sec_opts);
      auto ana = cfg.analysis();
      if (sec_ezz) ana.e_zz_override = *sec_ezz;
      std::optional<fs::path> z;
      if (!sec_zbasis.empty()) z = sec_zbasis;
      const auto a = commands::cmd_security(sec_counts, sec_povm, z, ana, cfg.out_dir);
      print_summary(a.summary);
    } else if (*pipe_cmd) {
      const auto cfg = resolve(pipe_opts);
      const auto rep = commands::cmd_pipeline(cfg, cfg.out_dir);
      std::cout << rep.text;
    } else if (*fid_cmd) {
      std::optional<fs::path> ref;
      if (!fid_ref.empty()) ref = fid_ref;
      std::cout << commands::cmd_fidelity(fid_povm, ref);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return commands::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return commands::kInternal;
  }
  return commands::kOk;
}
