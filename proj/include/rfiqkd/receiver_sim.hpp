#pragma once

// Parametric model of the passive cross-encoded receiver and a Poisson
// photon-counting simulator producing per-window three-peak counts and
// TDC-like event streams.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "rfiqkd/error.hpp"
#include "rfiqkd/quantum.hpp"

namespace rfiqkd::sim {

using quantum::Channel;
using quantum::Povm;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Time offset of the early peak inside a pulse frame.
inline constexpr double kFirstPeakOffsetPs = 1000.0;

struct DeviceModel {
  double bs_ratio = 0.5;  ///< probability of the X-basis arm
  std::array<double, 4> detector_efficiency{1.0, 1.0, 1.0, 1.0};
  std::array<double, 4> dark_rate_hz{0.0, 0.0, 0.0, 0.0};
  double hwp_error_deg = 0.0;
  double qwp_error_deg = 0.0;
  std::array<double, 2> crosstalk{0.0, 0.0};  ///< polarizer leakage in X and Y arms
  double visibility = 1.0;                    ///< scales the central-peak coherence
  double z_flip_probability = 0.0;            ///< intrinsic key-basis error
  double umzi_delay_ns = 2.5;
  double pulse_period_ns = 1000.0 / 76.0;

  void validate() const {
    auto bad = [](const std::string& w) { fail(ErrorCode::ConfigError, "device: " + w); };
    if (!(bs_ratio > 0.0 && bs_ratio < 1.0)) bad("bs_ratio must lie in (0,1)");
    for (double e : detector_efficiency)
      if (!(e > 0.0 && e <= 1.0)) bad("detector_efficiency entries must lie in (0,1]");
    for (double d : dark_rate_hz)
      if (!(d >= 0.0)) bad("dark_rate_hz entries must be >= 0");
    for (double c : crosstalk)
      if (!(c >= 0.0 && c < 0.5)) bad("crosstalk entries must lie in [0,0.5)");
    if (!(visibility >= 0.0 && visibility <= 1.0)) bad("visibility must lie in [0,1]");
    if (!(z_flip_probability >= 0.0 && z_flip_probability <= 1.0)) bad("z_flip_probability must lie in [0,1]");
    if (!(umzi_delay_ns > 0.0)) bad("umzi_delay_ns must be > 0");
    if (!(pulse_period_ns > 3.0 * umzi_delay_ns)) bad("pulse_period_ns must exceed three peak spacings");
  }

  static DeviceModel ideal() { return {}; }

  /// 55:45 basis splitter, L channel 30 % less efficient, small polarizer
  /// leakage, 100 Hz dark counts and a 0.5 % key-basis flip rate.
  static DeviceModel paper_fig4() {
    DeviceModel m;
    m.bs_ratio = 0.55;
    m.detector_efficiency = {1.0, 1.0, 0.7, 1.0};
    m.dark_rate_hz = {100.0, 100.0, 100.0, 100.0};
    m.crosstalk = {0.03, 0.025};
    m.z_flip_probability = 0.005;
    return m;
  }
};

namespace detail {

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

/// exp(-i angle/2 n.sigma): rotates Bloch vectors by `angle` about n.
inline Eigen::Matrix2cd bloch_rotation(const Eigen::Vector3d& axis, double angle) {
  const Eigen::Vector3d n = axis.normalized();
  const Eigen::Matrix2cd ns = n.x() * quantum::pauli::x() + n.y() * quantum::pauli::y() + n.z() * quantum::pauli::z();
  return std::cos(angle / 2) * Eigen::Matrix2cd::Identity() - quantum::cd(0, 1) * std::sin(angle / 2) * ns;
}

}  // namespace detail

/// Unnormalized effects eta_k * w_arm * U^dag P_k U before completeness
/// normalization. A half-wave-plate error rotates the analysis basis about z by
/// four times the angle; a quarter-wave-plate error (Y arm only) tilts it about x.
inline Povm::Elements raw_effects(const DeviceModel& model) {
  using namespace quantum;
  const Eigen::Matrix2cd hwp = detail::bloch_rotation({0, 0, 1}, 4.0 * detail::deg2rad(model.hwp_error_deg));
  const Eigen::Matrix2cd qwp = detail::bloch_rotation({1, 0, 0}, 2.0 * detail::deg2rad(model.qwp_error_deg));
  const Eigen::Matrix2cd ux = hwp;
  const Eigen::Matrix2cd uy = qwp * hwp;

  const double ex = model.crosstalk[0];
  const double ey = model.crosstalk[1];
  const std::array<Eigen::Matrix2cd, 4> proj = {
      (1 - ex) * projector(kets::d()) + ex * projector(kets::a()),
      (1 - ex) * projector(kets::a()) + ex * projector(kets::d()),
      (1 - ey) * projector(kets::l()) + ey * projector(kets::r()),
      (1 - ey) * projector(kets::r()) + ey * projector(kets::l()),
  };
  Povm::Elements raw;
  for (int k = 0; k < 4; ++k) {
    const bool x_arm = k < 2;
    const Eigen::Matrix2cd& u = x_arm ? ux : uy;
    const double weight = (x_arm ? model.bs_ratio : 1.0 - model.bs_ratio) * model.detector_efficiency[k];
    raw[k] = QubitOperator::symmetrized(weight * u.adjoint() * proj[k] * u);
  }
  return raw;
}

/// Ground-truth POVM of the receiver conditioned on a detection:
/// S^{-1/2} raw_k S^{-1/2} with S the sum of the raw effects.
inline Povm ground_truth_povms(const DeviceModel& model) {
  model.validate();
  return quantum::project_to_valid_povm(raw_effects(model));
}

/// Central-peak polarization (|H> + e^{-i phi}|V>)/sqrt(2); the coherence is
/// scaled by `visibility`.
inline quantum::QubitState central_peak_state(double phi, double visibility = 1.0) {
  const quantum::cd c = 0.5 * visibility * std::exp(quantum::cd(0, phi));
  Eigen::Matrix2cd rho;
  rho << 0.5, c, std::conj(c), 0.5;
  return quantum::QubitState(quantum::QubitOperator::symmetrized(rho));
}

enum class Peak : int { Early = 0, Central = 1, Late = 2 };

struct WindowCounts {
  std::int64_t window_id = 0;
  double t_start_s = 0.0;
  double duration_s = 0.0;
  std::array<std::array<std::uint64_t, 3>, 4> counts{};  ///< [channel][peak]
  std::uint64_t z_total = 0;   ///< key-basis (lateral-peak) events
  std::uint64_t z_errors = 0;  ///< of which disagree with the sent bit

  std::uint64_t& at(Channel c, Peak p) { return counts[quantum::index(c)][static_cast<int>(p)]; }
  std::uint64_t at(Channel c, Peak p) const { return counts[quantum::index(c)][static_cast<int>(p)]; }

  std::uint64_t peak_total(Peak p) const {
    std::uint64_t s = 0;
    for (const auto& ch : counts) s += ch[static_cast<int>(p)];
    return s;
  }
  std::uint64_t total() const {
    return peak_total(Peak::Early) + peak_total(Peak::Central) + peak_total(Peak::Late);
  }

  friend bool operator==(const WindowCounts&, const WindowCounts&) = default;
};

/// Acquisition settings shared by all windows of a run.
struct Acquisition {
  double mean_detections = 240000.0;  ///< expected detections per window, all peaks
  double duration_s = 2.0;
  double peak_window_ps = 150.0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x5851F42D4C957F2DULL));
}

inline std::uint64_t poisson(std::mt19937_64& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return static_cast<std::uint64_t>(dist(rng));
}

inline std::uint64_t binomial(std::mt19937_64& rng, std::uint64_t n, double p) {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<std::int64_t> dist(static_cast<std::int64_t>(n), p);
  return static_cast<std::uint64_t>(dist(rng));
}

}  // namespace detail

/// One integration window at fixed interferometer phase. Half of the flux
/// lands in the central peak (polarization state at `phi`); the early and
/// late peaks carry H and V respectively. Dark counts are time-uniform, so
/// each peak window collects rate * duration * window / period of them.
inline WindowCounts simulate_window(double phi, const DeviceModel& model, const Acquisition& acq, std::uint64_t seed,
                                    const Povm* truth = nullptr) {
  if (!(acq.mean_detections >= 0.0)) fail(ErrorCode::DomainError, "mean_detections must be >= 0");
  if (!(acq.duration_s > 0.0)) fail(ErrorCode::DomainError, "duration must be > 0");
  const Povm gt = truth ? *truth : ground_truth_povms(model);
  std::mt19937_64 rng(seed);

  const auto central = central_peak_state(phi, model.visibility);
  const auto early = quantum::QubitState::pure(quantum::kets::h());
  const auto late = quantum::QubitState::pure(quantum::kets::v());
  const double dark_fraction = acq.peak_window_ps / (model.pulse_period_ns * 1000.0);

  WindowCounts w;
  w.duration_s = acq.duration_s;
  std::uint64_t lateral_signal = 0;
  std::uint64_t lateral_dark = 0;
  for (Channel c : quantum::kChannels) {
    const int k = quantum::index(c);
    const double dark_mean = model.dark_rate_hz[k] * acq.duration_s * dark_fraction;
    const std::array<double, 3> mean = {
        0.25 * acq.mean_detections * quantum::born_probability(early, gt[c]),
        0.50 * acq.mean_detections * quantum::born_probability(central, gt[c]),
        0.25 * acq.mean_detections * quantum::born_probability(late, gt[c]),
    };
    for (int p = 0; p < 3; ++p) {
      const std::uint64_t signal = detail::poisson(rng, mean[p]);
      const std::uint64_t dark = detail::poisson(rng, dark_mean);
      w.counts[k][p] = signal + dark;
      if (p != 1) {
        lateral_signal += signal;
        lateral_dark += dark;
      }
    }
  }
  w.z_total = lateral_signal + lateral_dark;
  w.z_errors = detail::binomial(rng, lateral_signal, model.z_flip_probability) + detail::binomial(rng, lateral_dark, 0.5);
  return w;
}

// ---------------------------------------------------------------------------
// Phase drift

struct DriftProcess {
  enum class Kind { WrappedRandomWalk, OrnsteinUhlenbeck, UniformGrid };
  Kind kind = Kind::WrappedRandomWalk;
  double step_std_rad_per_window = 0.05;
  double mean_rate_rad_per_window = kTwoPi * 4.0 / 1800.0;
  double reversion = 0.02;  ///< OU pull towards the drifting centre, per window
  std::uint64_t seed = 1;
};

inline double wrap_phase(double phi) {
  double w = std::fmod(phi, kTwoPi);
  if (w < 0) w += kTwoPi;
  return w >= kTwoPi ? 0.0 : w;
}

inline std::vector<double> generate_phases(const DriftProcess& drift, std::size_t n) {
  std::vector<double> out(n);
  if (drift.kind == DriftProcess::Kind::UniformGrid) {
    for (std::size_t j = 0; j < n; ++j) out[j] = wrap_phase(kTwoPi * double(j) / double(n));
    return out;
  }
  std::mt19937_64 rng(detail::sub_seed(drift.seed, 0xD1F7));
  std::uniform_real_distribution<double> uni(0.0, kTwoPi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double start = uni(rng);
  double phi = start;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = wrap_phase(phi);
    const double xi = gauss(rng);
    if (drift.kind == DriftProcess::Kind::WrappedRandomWalk) {
      phi += drift.mean_rate_rad_per_window + drift.step_std_rad_per_window * xi;
    } else {
      const double centre = start + drift.mean_rate_rad_per_window * double(j + 1);
      phi += drift.mean_rate_rad_per_window + drift.reversion * (centre - phi) + drift.step_std_rad_per_window * xi;
    }
  }
  return out;
}

struct SimulatedRun {
  std::vector<WindowCounts> windows;
  Povm truth;
  std::vector<double> phases;
};

inline SimulatedRun simulate_run(const DeviceModel& model, const DriftProcess& drift, std::size_t n_windows,
                                 const Acquisition& acq, std::uint64_t seed) {
  if (n_windows < 1) fail(ErrorCode::DomainError, "n_windows must be >= 1");
  SimulatedRun run{{}, ground_truth_povms(model), generate_phases(drift, n_windows)};
  run.windows.reserve(n_windows);
  for (std::size_t j = 0; j < n_windows; ++j) {
    WindowCounts w = simulate_window(run.phases[j], model, acq, detail::sub_seed(seed, j), &run.truth);
    w.window_id = static_cast<std::int64_t>(j);
    w.t_start_s = double(j) * acq.duration_s;
    run.windows.push_back(w);
  }
  return run;
}

// ---------------------------------------------------------------------------
// Time tags

struct Event {
  std::uint8_t channel = 0;
  std::uint64_t timestamp_ps = 0;
  friend bool operator==(const Event&, const Event&) = default;
};

using EventStream = std::vector<Event>;

struct Timing {
  double delay_ps = 2500.0;
  double period_ps = 1e6 / 76.0;
  double first_peak_ps = kFirstPeakOffsetPs;

  static Timing from(const DeviceModel& m) { return {m.umzi_delay_ns * 1000.0, m.pulse_period_ns * 1000.0}; }
  double centre(Peak p) const { return first_peak_ps + static_cast<int>(p) * delay_ps; }
};

/// Expands window counts into time tags: a uniformly chosen pulse frame,
/// the peak centre, plus Gaussian jitter given as FWHM.
inline EventStream emit_timestamps(const WindowCounts& counts, const DeviceModel& model, double jitter_fwhm_ps,
                                   std::uint64_t seed) {
  if (!(jitter_fwhm_ps >= 0.0)) fail(ErrorCode::DomainError, "jitter must be >= 0");
  const Timing tm = Timing::from(model);
  const double sigma = jitter_fwhm_ps / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const auto n_frames = static_cast<std::uint64_t>(std::floor(counts.duration_s * 1e12 / tm.period_ps));
  if (n_frames == 0) fail(ErrorCode::DomainError, "window shorter than one pulse period");
  const double t0 = counts.t_start_s * 1e12;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> frame_dist(0, n_frames - 1);
  std::normal_distribution<double> jitter(0.0, 1.0);

  EventStream ev;
  ev.reserve(counts.total());
  for (Channel c : quantum::kChannels) {
    for (int p = 0; p < 3; ++p) {
      const double centre = tm.centre(static_cast<Peak>(p));
      for (std::uint64_t i = 0; i < counts.counts[quantum::index(c)][p]; ++i) {
        const double t = t0 + double(frame_dist(rng)) * tm.period_ps + centre + (sigma > 0 ? sigma * jitter(rng) : 0.0);
        ev.push_back({static_cast<std::uint8_t>(quantum::index(c)), static_cast<std::uint64_t>(std::llround(std::max(t, 0.0)))});
      }
    }
  }
  std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) {
    return a.timestamp_ps != b.timestamp_ps ? a.timestamp_ps < b.timestamp_ps : a.channel < b.channel;
  });
  return ev;
}

struct PeakExtraction {
  WindowCounts counts;
  std::uint64_t discarded = 0;
};

/// Bins events into early/central/late by the nearest peak centre within
/// +-window/2; everything else is discarded.
inline PeakExtraction extract_peak_counts(const EventStream& events, double window_ps, const Timing& timing,
                                          double t_start_s = 0.0, double duration_s = 0.0) {
  if (!(window_ps > 0.0)) fail(ErrorCode::InvalidWindow, "window must be > 0");
  if (window_ps >= timing.delay_ps)
    fail(ErrorCode::InvalidWindow, "peak windows overlap (window " + std::to_string(window_ps) + " ps >= delay " +
                                       std::to_string(timing.delay_ps) + " ps)");
  PeakExtraction out;
  out.counts.t_start_s = t_start_s;
  out.counts.duration_s = duration_s;
  const double t0 = t_start_s * 1e12;
  const double half = 0.5 * window_ps;
  for (const Event& e : events) {
    if (e.channel > 3) fail(ErrorCode::ParseError, "event channel out of range");
    const double rel = double(e.timestamp_ps) - t0;
    const double frame = std::floor(rel / timing.period_ps);
    const double local = rel - frame * timing.period_ps;
    bool hit = false;
    for (int p = 0; p < 3 && !hit; ++p) {
      if (std::abs(local - timing.centre(static_cast<Peak>(p))) <= half) {
        ++out.counts.counts[e.channel][p];
        hit = true;
      }
    }
    if (!hit) ++out.discarded;
  }
  return out;
}

}  // namespace rfiqkd::sim
