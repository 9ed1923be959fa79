#pragma once

// Reference-frame-independent key-rate quantities and the minimization of
// the correlation parameter C over two-qubit states compatible with the
// observed statistics under a (reconstructed) receiver POVM.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "rfiqkd/error.hpp"
#include "rfiqkd/quantum.hpp"
#include "rfiqkd/receiver_sim.hpp"
#include "rfiqkd/sdp.hpp"

namespace rfiqkd::security {

using quantum::Channel;
using quantum::Povm;

inline constexpr double kQberBound = 0.159;
inline constexpr double kDefaultEpsilon = 1e-5;

inline double delta_finite_key(std::uint64_t k, double epsilon) {
  if (k < 1) fail(ErrorCode::DomainError, "k must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) fail(ErrorCode::DomainError, "epsilon must lie in (0,1)");
  const double kd = double(k);
  return std::sqrt((std::log(1.0 / epsilon) + 2.0 * std::log(kd + 1.0)) / (2.0 * kd));
}

struct Qber {
  double e = 0.0;
  bool basis_flip = false;  ///< e > 0.5: the key bases are likely relabelled
};

/// Anticorrelated key-basis outcomes count as errors.
inline Qber qber_from_z_counts(std::uint64_t errors, std::uint64_t total) {
  if (total == 0) fail(ErrorCode::EmptyInput, "no key-basis events");
  if (errors > total) fail(ErrorCode::DomainError, "more errors than events");
  Qber q;
  q.e = double(errors) / double(total);
  q.basis_flip = q.e > 0.5;
  return q;
}

struct MuNu {
  double mu = 0.0;
  double nu = 0.0;
  bool nu_clamped = false;  ///< (c, e) beyond the largest C compatible with e; nu held at 1
};

inline MuNu mu_nu(double c, double e) {
  if (!(c >= -1e-12 && c <= 2.0 + 1e-9)) fail(ErrorCode::DomainError, "C must lie in [0,2]");
  if (!(e >= 0.0 && e < 1.0)) fail(ErrorCode::DomainError, "e must lie in [0,1)");
  c = std::clamp(c, 0.0, 2.0);
  MuNu r;
  r.mu = std::min(std::sqrt(c / 2.0) / (1.0 - e), 1.0);
  if (e == 0.0) return r;
  const double radicand = c / 2.0 - (1.0 - e) * (1.0 - e) * r.mu * r.mu;
  if (radicand < -1e-12) fail(ErrorCode::InfeasiblePair, "negative radicand for nu");
  r.nu = std::sqrt(std::max(radicand, 0.0)) / e;
  if (r.nu > 1.0) {
    r.nu = 1.0;
    r.nu_clamped = true;
  }
  return r;
}

struct EveInformation {
  double i_e = 0.0;
  double mu = 0.0;
  double nu = 0.0;
  bool above_qber_bound = false;
  bool nu_clamped = false;
};

inline EveInformation eve_information(double c, double e) {
  const MuNu mn = mu_nu(c, e);
  EveInformation out;
  out.mu = mn.mu;
  out.nu = mn.nu;
  out.nu_clamped = mn.nu_clamped;
  out.above_qber_bound = e > kQberBound;
  out.i_e = (1.0 - e) * quantum::binary_entropy((1.0 + mn.mu) / 2.0) + e * quantum::binary_entropy((1.0 + mn.nu) / 2.0);
  return out;
}

/// Secret-key fraction; negative means no key.
inline double key_rate(double c, double e) { return 1.0 - quantum::binary_entropy(e) - eve_information(c, e).i_e; }

namespace ops {

/// Equatorial correlators entering C: XX, XY, YX, YY.
inline const std::array<Eigen::Matrix4cd, 4>& correlators() {
  using namespace quantum;
  static const std::array<Eigen::Matrix4cd, 4> c = {kron(pauli::x(), pauli::x()), kron(pauli::x(), pauli::y()),
                                                    kron(pauli::y(), pauli::x()), kron(pauli::y(), pauli::y())};
  return c;
}

/// |01><01| + |10><10| = (1 - Z Z)/2.
inline Eigen::Matrix4cd e_zz() {
  return 0.5 * (Eigen::Matrix4cd::Identity() - quantum::kron(quantum::pauli::z(), quantum::pauli::z()));
}

inline Eigen::Matrix2cd p_plus() { return quantum::projector(quantum::kets::d()); }

}  // namespace ops

inline double c_parameter(const Eigen::Matrix4cd& rho) {
  double c = 0.0;
  for (const auto& o : ops::correlators()) {
    const double v = (rho * o).trace().real();
    c += v * v;
  }
  return c;
}

inline double c_parameter(const quantum::TwoQubitState& rho) { return c_parameter(rho.matrix()); }

struct SecurityInput {
  double e_zz = 0.0;
  std::array<double, 4> p_plus{0.25, 0.25, 0.25, 0.25};  ///< channel order D, A, L, R
  std::uint64_t k = 1;
  double epsilon = kDefaultEpsilon;
  Povm povm = quantum::ideal_povm();
  bool finite_key = false;
  bool pin_alice_marginal = true;
};

using SolverStatus = sdp::Status;

struct SecurityResult {
  double c_min = 0.0;
  double e_zz = 0.0;
  double mu = 0.0;
  double nu = 0.0;
  double i_e = 0.0;
  double r = 0.0;
  double delta = 0.0;
  std::uint64_t k = 0;
  SolverStatus solver_status = SolverStatus::MaxIterations;
  Eigen::Matrix4cd witness = Eigen::Matrix4cd::Identity() / 4.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  double constraint_violation = 0.0;  ///< of the witness, beyond the relaxation
  int iterations = 0;
  bool above_qber_bound = false;
  bool nu_clamped = false;

  quantum::TwoQubitState witness_state() const { return quantum::TwoQubitState(witness); }
};

/// One linear constraint lo <= Tr(op rho) <= hi.
struct LinearConstraint {
  Eigen::Matrix4cd op;
  double lo = 0.0;
  double hi = 0.0;
};

inline void validate(const SecurityInput& in) {
  if (!(in.e_zz >= 0.0 && in.e_zz <= 1.0)) fail(ErrorCode::DomainError, "e_zz must lie in [0,1]");
  double s = 0.0;
  for (double p : in.p_plus) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::DomainError, "p_plus entries must lie in [0,1]");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-6) fail(ErrorCode::DomainError, "p_plus must sum to 1");
  if (in.finite_key) (void)delta_finite_key(in.k, in.epsilon);
}

/// Constraint set for the minimization. Bob's conditional frequencies become
/// joint probabilities with Alice's |+> (weight 1/2); under finite-key each
/// measured quantity is relaxed by delta on the scale of the measured
/// frequency. The marginal pin and the trace stay exact.
inline std::vector<LinearConstraint> constraints(const SecurityInput& in, double delta) {
  std::vector<LinearConstraint> out;
  out.push_back({ops::e_zz(), in.e_zz - delta, in.e_zz + delta});
  const Eigen::Matrix2cd pp = ops::p_plus();
  for (Channel c : quantum::kChannels) {
    const double target = 0.5 * in.p_plus[std::size_t(quantum::index(c))];
    out.push_back({quantum::kron(pp, in.povm[c].matrix()), target - 0.5 * delta, target + 0.5 * delta});
  }
  if (in.pin_alice_marginal) out.push_back({quantum::kron(pp, Eigen::Matrix2cd::Identity()), 0.5, 0.5});
  out.push_back({Eigen::Matrix4cd::Identity(), 1.0, 1.0});
  return out;
}

inline double max_violation(const std::vector<LinearConstraint>& cons, const Eigen::Matrix4cd& rho) {
  double v = 0.0;
  for (const auto& c : cons) {
    const double val = (rho * c.op).trace().real();
    v = std::max({v, c.lo - val, val - c.hi});
  }
  return v;
}

inline SecurityResult minimize_c(const SecurityInput& in, const sdp::Settings& settings = {}) {
  validate(in);
  SecurityResult res;
  res.e_zz = in.e_zz;
  res.k = in.k;
  res.delta = in.finite_key ? delta_finite_key(in.k, in.epsilon) : 0.0;

  sdp::Problem prob;
  for (int a = 1; a <= 2; ++a)
    for (int b = 1; b <= 2; ++b) prob.p(sdp::coord(a, b), sdp::coord(a, b)) = 8.0;
  const auto cons = constraints(in, res.delta);
  for (const auto& c : cons) prob.add_constraint(sdp::functional(c.op), c.lo, c.hi);

  const sdp::Solution sol = sdp::solve(prob, settings);
  res.solver_status = sol.status;
  res.primal_residual = sol.primal_residual;
  res.dual_residual = sol.dual_residual;
  res.duality_gap = sol.duality_gap;
  res.iterations = sol.iterations;
  if (sol.status == SolverStatus::Infeasible)
    fail(ErrorCode::Infeasible, "no two-qubit state matches the observed statistics");

  Eigen::Matrix4cd rho = sdp::from_coords(sol.z_psd);
  rho = (0.5 * (rho + rho.adjoint())).eval();
  const double tr = rho.trace().real();
  if (!(tr > 0.0)) fail(ErrorCode::Infeasible, "solver returned a zero operator");
  rho /= tr;
  res.witness = rho;
  res.constraint_violation = max_violation(cons, rho);
  res.c_min = std::clamp(c_parameter(rho), 0.0, 2.0);

  const EveInformation ie = eve_information(res.c_min, std::min(in.e_zz, 1.0 - 1e-12));
  res.mu = ie.mu;
  res.nu = ie.nu;
  res.i_e = ie.i_e;
  res.above_qber_bound = ie.above_qber_bound;
  res.nu_clamped = ie.nu_clamped;
  res.r = 1.0 - quantum::binary_entropy(in.e_zz) - ie.i_e;
  return res;
}

// ---------------------------------------------------------------------------
// Per-window analysis of a run

struct AnalysisConfig {
  double epsilon = kDefaultEpsilon;
  bool finite_key = true;
  std::optional<double> e_zz_override;
  bool pin_alice_marginal = true;
  unsigned threads = 0;  ///< 0: hardware concurrency
  sdp::Settings solver{};
};

struct WindowResult {
  std::int64_t window_id = 0;
  double t_start_s = 0.0;
  SecurityResult result;
  std::string status;  ///< solver status or the error class that skipped the window
  bool ok = false;     ///< minimization produced a result
  bool counted = false;  ///< enters the key-rate summary
};

struct Summary {
  std::size_t n_windows = 0;
  std::size_t n_ok = 0;
  std::size_t n_key = 0;
  double mean_c = 0.0;
  double std_c = 0.0;
  double mean_r = 0.0;
  double std_r = 0.0;
  double mean_e = 0.0;
  double mean_delta = 0.0;
};

struct RunAnalysis {
  std::vector<WindowResult> windows;
  Summary summary;
};

inline SecurityInput window_input(const sim::WindowCounts& w, const Povm& povm, const AnalysisConfig& cfg) {
  SecurityInput in;
  in.povm = povm;
  const std::uint64_t central = w.peak_total(sim::Peak::Central);
  if (central == 0) fail(ErrorCode::EmptyInput, "window has no central-peak counts");
  for (Channel c : quantum::kChannels)
    in.p_plus[std::size_t(quantum::index(c))] = double(w.at(c, sim::Peak::Central)) / double(central);
  if (cfg.e_zz_override) {
    in.e_zz = *cfg.e_zz_override;
  } else if (w.z_total > 0) {
    in.e_zz = qber_from_z_counts(w.z_errors, w.z_total).e;
  }
  in.k = std::max<std::uint64_t>(w.total(), 1);
  in.epsilon = cfg.epsilon;
  in.finite_key = cfg.finite_key;
  in.pin_alice_marginal = cfg.pin_alice_marginal;
  return in;
}

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= double(v.size());
  if (v.size() < 2) return {m, 0.0};
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / double(v.size() - 1))};
}

}  // namespace detail

inline Summary summarize(const std::vector<WindowResult>& results) {
  Summary s;
  s.n_windows = results.size();
  std::vector<double> cs, rs, es, ds;
  for (const auto& w : results) {
    if (!w.ok) continue;
    ++s.n_ok;
    cs.push_back(w.result.c_min);
    es.push_back(w.result.e_zz);
    ds.push_back(w.result.delta);
    if (w.counted) rs.push_back(w.result.r);
  }
  s.n_key = rs.size();
  std::tie(s.mean_c, s.std_c) = detail::mean_std(cs);
  std::tie(s.mean_r, s.std_r) = detail::mean_std(rs);
  s.mean_e = detail::mean_std(es).first;
  s.mean_delta = detail::mean_std(ds).first;
  return s;
}

/// Windows are independent; they are distributed over worker threads and
/// written back by index, so the output does not depend on scheduling.
inline RunAnalysis analyze_run(const std::vector<sim::WindowCounts>& windows, const Povm& povm,
                               const AnalysisConfig& cfg = {}) {
  if (windows.empty()) fail(ErrorCode::EmptyInput, "no windows to analyze");
  RunAnalysis out;
  out.windows.resize(windows.size());

  auto work = [&](std::size_t i) {
    const auto& w = windows[i];
    WindowResult& wr = out.windows[i];
    wr.window_id = w.window_id;
    wr.t_start_s = w.t_start_s;
    try {
      wr.result = minimize_c(window_input(w, povm, cfg), cfg.solver);
      wr.status = std::string(sdp::to_string(wr.result.solver_status));
      wr.ok = true;
      wr.counted = !wr.result.above_qber_bound;
    } catch (const Error& e) {
      wr.status = std::string(to_string(e.code()));
    }
  };

  unsigned n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, unsigned(windows.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < windows.size(); i = next++) work(i);
    });
  for (std::size_t i = next++; i < windows.size(); i = next++) work(i);
  for (auto& th : pool) th.join();

  out.summary = summarize(out.windows);
  return out;
}

}  // namespace rfiqkd::security
