#pragma once

// The command layer: simulate, characterize, security, pipeline, fidelity.
// Each command reads/writes files in an output directory and returns the
// in-memory results for callers that want them.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rfiqkd/config.hpp"
#include "rfiqkd/error.hpp"
#include "rfiqkd/io.hpp"
#include "rfiqkd/qdsc.hpp"
#include "rfiqkd/quantum.hpp"
#include "rfiqkd/receiver_sim.hpp"
#include "rfiqkd/security.hpp"

namespace rfiqkd::commands {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kConfig = 2, kData = 3, kGeometry = 4, kSolver = 5, kInternal = 1 };

inline int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigError: return kConfig;
    case ErrorCode::InsufficientPhaseCoverage:
    case ErrorCode::DegenerateHull:
    case ErrorCode::NotAnEllipse:
    case ErrorCode::InconsistentFit:
    case ErrorCode::GramInconsistent:
    case ErrorCode::CoverageTooLow: return kGeometry;
    case ErrorCode::Infeasible:
    case ErrorCode::MaxIterations:
    case ErrorCode::InfeasiblePair: return kSolver;
    default: return kData;
  }
}

/// File names inside an output directory.
namespace files {
inline constexpr const char* kCounts = "counts.csv";
inline constexpr const char* kZBasis = "zbasis.csv";
inline constexpr const char* kEvents = "events.csv";
inline constexpr const char* kPhases = "phases.csv";
inline constexpr const char* kTruth = "truth_povm.txt";
inline constexpr const char* kPovm = "povm.txt";
inline constexpr const char* kDiagnostics = "diagnostics.txt";
inline constexpr const char* kResponseRange = "response_range.txt";
inline constexpr const char* kEllipse = "ellipse_plot.csv";
inline constexpr const char* kResults = "results.txt";
inline constexpr const char* kCrPlot = "cr_plot.csv";
inline constexpr const char* kReport = "report.txt";
inline constexpr const char* kConfig = "config.resolved.json";
}  // namespace files

// ---------------------------------------------------------------------------

inline sim::SimulatedRun simulate(const config::RunConfig& cfg) {
  return sim::simulate_run(cfg.device, cfg.drift_process(), cfg.acquisition.n_windows, cfg.acquisition_model(), cfg.seed);
}

inline sim::EventStream events_for(const config::RunConfig& cfg, const std::vector<sim::WindowCounts>& windows) {
  sim::EventStream all;
  const std::size_t n = std::min(cfg.acquisition.event_windows, windows.size());
  for (std::size_t j = 0; j < n; ++j) {
    const auto ev = sim::emit_timestamps(windows[j], cfg.device, cfg.acquisition.jitter_fwhm_ps,
                                         sim::detail::sub_seed(cfg.seed ^ 0xE7E7E7E7ULL, j));
    all.insert(all.end(), ev.begin(), ev.end());
  }
  if (!std::is_sorted(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.timestamp_ps < b.timestamp_ps; }))
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.timestamp_ps < b.timestamp_ps; });
  return all;
}

inline sim::SimulatedRun cmd_simulate(const config::RunConfig& cfg, const fs::path& out_dir) {
  auto run = simulate(cfg);
  io::write_file(out_dir / files::kCounts, io::format_counts(run.windows));
  io::write_file(out_dir / files::kZBasis, io::format_zbasis(run.windows));
  io::write_file(out_dir / files::kEvents, io::format_events(events_for(cfg, run.windows)));
  io::write_file(out_dir / files::kTruth, io::format_povm(run.truth, "ground truth, preset " + config::preset_name(cfg.preset)));
  std::string ph = "window_id,phi_rad\n";
  for (std::size_t j = 0; j < run.phases.size(); ++j) ph += std::to_string(j) + "," + io::fixed(run.phases[j], 9) + "\n";
  io::write_file(out_dir / files::kPhases, ph);
  io::write_file(out_dir / files::kConfig, config::to_json(cfg).dump(2) + "\n");
  return run;
}

// ---------------------------------------------------------------------------

inline qdsc::QdscResult characterize(const std::vector<sim::WindowCounts>& windows, const qdsc::QdscOptions& opt,
                                     const fs::path& out_dir) {
  auto res = qdsc::run_qdsc(windows, opt);
  io::write_file(out_dir / files::kPovm, io::format_povm(res.povm, "reconstructed"));
  io::write_file(out_dir / files::kDiagnostics, io::format_diagnostics(res.diagnostics));
  io::write_file(out_dir / files::kResponseRange, io::format_response_range(res.range));
  io::write_file(out_dir / files::kEllipse, io::format_ellipse_plot(res));
  return res;
}

inline qdsc::QdscResult cmd_characterize(const fs::path& counts_path, const qdsc::QdscOptions& opt, const fs::path& out_dir) {
  return characterize(io::read_counts(counts_path), opt, out_dir);
}

// ---------------------------------------------------------------------------

inline security::RunAnalysis security_analysis(const std::vector<sim::WindowCounts>& windows, const quantum::Povm& povm,
                                               const security::AnalysisConfig& cfg, const fs::path& out_dir) {
  auto a = security::analyze_run(windows, povm, cfg);
  io::write_file(out_dir / files::kResults, io::format_results(a));
  io::write_file(out_dir / files::kCrPlot, io::format_cr_plot(a));
  if (a.summary.n_ok == 0) {
    const std::string why = a.windows.empty() ? "no windows" : a.windows.front().status;
    fail(ErrorCode::Infeasible, "no window produced a bound (first window: " + why + ")");
  }
  return a;
}

/// Key-basis data come from `zbasis_path` when given, else from a sibling
/// zbasis.csv next to the counts file if one exists.
inline security::RunAnalysis cmd_security(const fs::path& counts_path, const fs::path& povm_path,
                                          const std::optional<fs::path>& zbasis_path,
                                          const security::AnalysisConfig& cfg, const fs::path& out_dir) {
  const quantum::Povm povm = io::read_povm(povm_path);
  auto windows = io::read_counts(counts_path);
  fs::path z = zbasis_path.value_or(counts_path.parent_path() / files::kZBasis);
  if (zbasis_path || fs::exists(z)) io::merge_zbasis(io::read_file(z), windows);
  return security_analysis(windows, povm, cfg, out_dir);
}

// ---------------------------------------------------------------------------

struct Report {
  std::string text;
  security::Summary summary;
  std::array<double, 4> fidelity_truth{};
  std::array<double, 4> fidelity_ideal{};
};

namespace detail {

inline void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) fail(ErrorCode::DomainError, "non-finite value in report: " + what);
}

}  // namespace detail

inline Report cmd_pipeline(const config::RunConfig& cfg, const fs::path& out_dir) {
  const auto run = cmd_simulate(cfg, out_dir);
  const auto q = characterize(run.windows, cfg.qdsc_options(), out_dir);
  const auto a = security_analysis(run.windows, q.povm, cfg.analysis(), out_dir);

  Report rep;
  rep.summary = a.summary;
  rep.fidelity_truth = quantum::fidelities(quantum::gauge_align(run.truth), q.povm);
  rep.fidelity_ideal = quantum::fidelities(quantum::ideal_povm(), q.povm);

  io::KeyValue kv;
  kv.section("provenance")
      .add("tool", "rfiqkd")
      .add("version", kVersion)
      .add("config_hash", config::config_hash(cfg))
      .add("seed", std::uint64_t(cfg.seed))
      .add("drift_seed", std::uint64_t(cfg.drift_process().seed))
      .add("preset", config::preset_name(cfg.preset))
      .add("n_windows", std::uint64_t(cfg.acquisition.n_windows))
      .add("finite_key", cfg.security.finite_key);
  kv.section("qdsc");
  const auto& d = q.diagnostics;
  kv.add("hull_size", std::uint64_t(d.hull_size))
      .add("fit_residual_rms", d.fit_residual_rms, 9)
      .add("coverage_deg", d.coverage_deg, 3)
      .add("completeness_residual", d.completeness_residual, 9)
      .add("repaired", d.repaired);
  kv.section("fidelity_vs_truth");
  for (quantum::Channel c : quantum::kChannels) {
    const double f = rep.fidelity_truth[std::size_t(quantum::index(c))];
    detail::require_finite(f, "fidelity");
    kv.add("F_" + std::string(quantum::label(c)), f);
  }
  kv.section("fidelity_vs_ideal");
  for (quantum::Channel c : quantum::kChannels) {
    const double f = rep.fidelity_ideal[std::size_t(quantum::index(c))];
    detail::require_finite(f, "fidelity");
    kv.add("F_" + std::string(quantum::label(c)), f);
  }
  kv.section("security");
  for (double v : {a.summary.mean_c, a.summary.std_c, a.summary.mean_r, a.summary.std_r, a.summary.mean_e, a.summary.mean_delta})
    detail::require_finite(v, "security summary");
  std::string summary = io::format_summary(a.summary);
  summary.pop_back();
  kv.raw(summary);
  rep.text = kv.str();
  io::write_file(out_dir / files::kReport, rep.text);
  return rep;
}

// ---------------------------------------------------------------------------

inline std::string cmd_fidelity(const fs::path& povm_path, const std::optional<fs::path>& reference_path) {
  const quantum::Povm p = io::read_povm(povm_path);
  const quantum::Povm ref = reference_path ? io::read_povm(*reference_path) : quantum::ideal_povm();
  return io::format_fidelity_table(ref, p, reference_path ? "fidelity_vs_reference" : "fidelity_vs_ideal");
}

}  // namespace rfiqkd::commands
