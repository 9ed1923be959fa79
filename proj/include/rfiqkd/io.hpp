#pragma once

// Text formats: POVM documents, counts/key-basis/event tables, diagnostics,
// per-window security results and plot data.

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "rfiqkd/error.hpp"
#include "rfiqkd/qdsc.hpp"
#include "rfiqkd/quantum.hpp"
#include "rfiqkd/receiver_sim.hpp"
#include "rfiqkd/security.hpp"

namespace rfiqkd::io {

using quantum::Channel;
using quantum::Povm;

/// Fixed-point with `digits` decimals; negative zero is printed as zero.
inline std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << content;
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string l;
  while (std::getline(ss, l)) {
    l = trim(l);
    if (!l.empty() && l.front() != '#') out.push_back(l);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& what) {
  std::istringstream ss(trim(s));
  T v{};
  ss >> v;
  if (ss.fail() || !ss.eof()) fail(ErrorCode::ParseError, "bad " + what + ": '" + s + "'");
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// POVM document: "povm <label>" followed by two rows "re im re im".

inline std::string format_povm(const Povm& povm, const std::string& comment = {}) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << "\n";
  for (Channel c : quantum::kChannels) {
    const auto& m = povm[c].matrix();
    out << "povm " << quantum::label(c) << "\n";
    for (int i = 0; i < 2; ++i)
      out << fixed(m(i, 0).real()) << " " << fixed(m(i, 0).imag()) << " " << fixed(m(i, 1).real()) << " "
          << fixed(m(i, 1).imag()) << "\n";
  }
  return out.str();
}

/// Elements are matched by label, in any order. Six-decimal rounding leaves
/// completeness residuals of a few 1e-7, so validity is checked at `tol`.
inline Povm parse_povm(const std::string& text, double tol = 1e-5) {
  const auto ls = detail::lines(text);
  std::array<bool, 4> seen{};
  Povm::Elements e;
  for (std::size_t i = 0; i < ls.size();) {
    std::istringstream head(ls[i]);
    std::string kw, lab;
    head >> kw >> lab;
    if (kw != "povm" || lab.empty()) fail(ErrorCode::ParseError, "expected 'povm <label>', got '" + ls[i] + "'");
    const Channel c = quantum::channel_from_label(lab);
    if (seen[std::size_t(quantum::index(c))]) fail(ErrorCode::ParseError, "duplicate element " + lab);
    if (i + 2 >= ls.size()) fail(ErrorCode::ParseError, "truncated element " + lab);
    Eigen::Matrix2cd m;
    for (int r = 0; r < 2; ++r) {
      std::istringstream row(ls[i + 1 + std::size_t(r)]);
      double v[4];
      for (double& x : v)
        if (!(row >> x)) fail(ErrorCode::ParseError, "element " + lab + ": expected four numbers per row");
      std::string extra;
      if (row >> extra) fail(ErrorCode::ParseError, "element " + lab + ": trailing data");
      m(r, 0) = {v[0], v[1]};
      m(r, 1) = {v[2], v[3]};
    }
    e[std::size_t(quantum::index(c))] = quantum::QubitOperator(m);
    seen[std::size_t(quantum::index(c))] = true;
    i += 3;
  }
  for (Channel c : quantum::kChannels)
    if (!seen[std::size_t(quantum::index(c))]) fail(ErrorCode::ParseError, "missing element " + std::string(quantum::label(c)));
  const Povm p = Povm::unchecked(e);
  const auto rep = quantum::validate_povm(p, tol);
  if (!rep.psd_ok) fail(ErrorCode::NonPositiveEffect, "POVM element has eigenvalue " + std::to_string(rep.eigenvalue_floor));
  if (!rep.complete_ok)
    fail(ErrorCode::IncompletePovm, "POVM completeness residual " + std::to_string(rep.completeness_residual));
  return p;
}

inline Povm read_povm(const std::filesystem::path& path) { return parse_povm(read_file(path)); }

// ---------------------------------------------------------------------------
// Counts table

inline constexpr std::array<const char*, 3> kPeakNames = {"early", "central", "late"};

inline std::string counts_header() {
  std::string h = "window_id,t_start_s,duration_s";
  for (Channel c : quantum::kChannels)
    for (const char* p : kPeakNames) h += "," + std::string(quantum::label(c)) + "_" + p;
  return h;
}

inline std::string format_counts(const std::vector<sim::WindowCounts>& windows) {
  std::string out = counts_header() + "\n";
  for (const auto& w : windows) {
    out += std::to_string(w.window_id) + "," + fixed(w.t_start_s) + "," + fixed(w.duration_s);
    for (const auto& ch : w.counts)
      for (std::uint64_t n : ch) out += "," + std::to_string(n);
    out += "\n";
  }
  return out;
}

/// Columns are located by header name; extra columns are ignored.
inline std::vector<sim::WindowCounts> parse_counts(const std::string& text) {
  const auto ls = detail::lines(text);
  if (ls.empty()) fail(ErrorCode::ParseError, "counts file has no header");
  const auto header = detail::split(ls[0], ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[detail::trim(header[i])] = i;
  auto need = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) fail(ErrorCode::ParseError, "counts file lacks column '" + name + "'");
    return it->second;
  };
  const std::size_t c_id = need("window_id"), c_t = need("t_start_s"), c_d = need("duration_s");
  std::array<std::array<std::size_t, 3>, 4> c_n{};
  for (Channel c : quantum::kChannels)
    for (int p = 0; p < 3; ++p)
      c_n[std::size_t(quantum::index(c))][std::size_t(p)] = need(std::string(quantum::label(c)) + "_" + kPeakNames[std::size_t(p)]);

  std::vector<sim::WindowCounts> out;
  for (std::size_t r = 1; r < ls.size(); ++r) {
    const auto f = detail::split(ls[r], ',');
    if (f.size() != header.size())
      fail(ErrorCode::ParseError, "counts row " + std::to_string(r) + " has " + std::to_string(f.size()) + " fields");
    sim::WindowCounts w;
    w.window_id = detail::parse_number<std::int64_t>(f[c_id], "window_id");
    w.t_start_s = detail::parse_number<double>(f[c_t], "t_start_s");
    w.duration_s = detail::parse_number<double>(f[c_d], "duration_s");
    if (!(w.duration_s > 0.0)) fail(ErrorCode::ParseError, "duration_s must be > 0 (row " + std::to_string(r) + ")");
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t p = 0; p < 3; ++p) {
        const std::string& s = f[c_n[k][p]];
        if (detail::trim(s).starts_with('-')) fail(ErrorCode::ParseError, "negative count in row " + std::to_string(r));
        w.counts[k][p] = detail::parse_number<std::uint64_t>(s, "count");
      }
    out.push_back(w);
  }
  if (out.empty()) fail(ErrorCode::EmptyInput, "counts file has no rows");
  return out;
}

inline std::vector<sim::WindowCounts> read_counts(const std::filesystem::path& path) {
  return parse_counts(read_file(path));
}

// Key-basis sidecar: window_id,z_total,z_errors

inline std::string format_zbasis(const std::vector<sim::WindowCounts>& windows) {
  std::string out = "window_id,z_total,z_errors\n";
  for (const auto& w : windows)
    out += std::to_string(w.window_id) + "," + std::to_string(w.z_total) + "," + std::to_string(w.z_errors) + "\n";
  return out;
}

/// Fills z_total/z_errors of matching windows; ids absent from the sidecar keep zeros.
inline void merge_zbasis(const std::string& text, std::vector<sim::WindowCounts>& windows) {
  const auto ls = detail::lines(text);
  if (ls.empty() || detail::trim(ls[0]) != "window_id,z_total,z_errors")
    fail(ErrorCode::ParseError, "key-basis file must start with 'window_id,z_total,z_errors'");
  std::map<std::int64_t, std::pair<std::uint64_t, std::uint64_t>> z;
  for (std::size_t r = 1; r < ls.size(); ++r) {
    const auto f = detail::split(ls[r], ',');
    if (f.size() != 3) fail(ErrorCode::ParseError, "key-basis row " + std::to_string(r) + " malformed");
    const auto total = detail::parse_number<std::uint64_t>(f[1], "z_total");
    const auto errors = detail::parse_number<std::uint64_t>(f[2], "z_errors");
    if (errors > total) fail(ErrorCode::ParseError, "z_errors > z_total in row " + std::to_string(r));
    z[detail::parse_number<std::int64_t>(f[0], "window_id")] = {total, errors};
  }
  for (auto& w : windows) {
    auto it = z.find(w.window_id);
    if (it != z.end()) std::tie(w.z_total, w.z_errors) = it->second;
  }
}

// Events: channel,timestamp_ps

inline std::string format_events(const sim::EventStream& ev) {
  std::string out = "channel,timestamp_ps\n";
  out.reserve(out.size() + ev.size() * 16);
  for (const auto& e : ev) out += std::to_string(int(e.channel)) + "," + std::to_string(e.timestamp_ps) + "\n";
  return out;
}

inline sim::EventStream parse_events(const std::string& text) {
  const auto ls = detail::lines(text);
  if (ls.empty() || ls[0] != "channel,timestamp_ps") fail(ErrorCode::ParseError, "events file must start with 'channel,timestamp_ps'");
  sim::EventStream ev;
  std::uint64_t last = 0;
  for (std::size_t r = 1; r < ls.size(); ++r) {
    const auto f = detail::split(ls[r], ',');
    if (f.size() != 2) fail(ErrorCode::ParseError, "events row " + std::to_string(r) + " malformed");
    const auto ch = detail::parse_number<unsigned>(f[0], "channel");
    if (ch > 3) fail(ErrorCode::ParseError, "channel out of range in events row " + std::to_string(r));
    const auto ts = detail::parse_number<std::uint64_t>(f[1], "timestamp_ps");
    if (ts < last) fail(ErrorCode::ParseError, "timestamps decrease at events row " + std::to_string(r));
    last = ts;
    ev.push_back({static_cast<std::uint8_t>(ch), ts});
  }
  return ev;
}

// ---------------------------------------------------------------------------
// Key/value documents

class KeyValue {
 public:
  KeyValue& section(const std::string& name) {
    if (!text_.empty()) text_ += "\n";
    text_ += "[" + name + "]\n";
    return *this;
  }
  KeyValue& add(const std::string& k, const std::string& v) {
    text_ += k + "=" + v + "\n";
    return *this;
  }
  KeyValue& add(const std::string& k, double v, int digits = 6) { return add(k, fixed(v, digits)); }
  KeyValue& add(const std::string& k, std::int64_t v) { return add(k, std::to_string(v)); }
  KeyValue& add(const std::string& k, std::uint64_t v) { return add(k, std::to_string(v)); }
  KeyValue& add(const std::string& k, bool v) { return add(k, std::string(v ? "true" : "false")); }
  KeyValue& add(const std::string& k, const char* v) { return add(k, std::string(v)); }
  KeyValue& raw(const std::string& line) {
    text_ += line + "\n";
    return *this;
  }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

/// Flat key=value map; sections and comments are skipped, later keys win.
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  for (const auto& l : detail::lines(text)) {
    if (l.front() == '[') continue;
    const auto eq = l.find('=');
    if (eq == std::string::npos) continue;
    out[l.substr(0, eq)] = l.substr(eq + 1);
  }
  return out;
}

inline std::string format_diagnostics(const qdsc::Diagnostics& d) {
  KeyValue kv;
  kv.add("windows_used", std::uint64_t(d.windows_used))
      .add("windows_skipped", std::uint64_t(d.windows_skipped))
      .add("singular_value_1", d.singular_values(0), 9)
      .add("singular_value_2", d.singular_values(1), 9)
      .add("singular_value_3", d.singular_values(2), 9)
      .add("third_row_max", d.third_row_max, 9)
      .add("third_row_noise_scale", d.noise_scale, 9)
      .add("third_row_flag", d.third_row_flag)
      .add("hull_size", std::uint64_t(d.hull_size))
      .add("fit_residual_rms", d.fit_residual_rms, 9)
      .add("coverage_deg", d.coverage_deg, 3)
      .add("positivity_margin", d.positivity_margin, 9)
      .add("completeness_residual", d.completeness_residual, 9)
      .add("eigenvalue_floor", d.eigenvalue_floor, 9)
      .add("repaired", d.repaired);
  for (std::size_t i = 0; i < d.warnings.size(); ++i) kv.add("warning_" + std::to_string(i), d.warnings[i]);
  return kv.str();
}

inline std::string format_response_range(const quantum::ResponseRange& rr) {
  std::ostringstream out;
  out << "# rows/columns in channel order D A L R\n";
  for (int i = 0; i < 4; ++i) {
    out << "q";
    for (int j = 0; j < 4; ++j) out << " " << fixed(rr.q(i, j));
    out << "\n";
  }
  out << "t";
  for (int i = 0; i < 4; ++i) out << " " << fixed(rr.t(i));
  out << "\n";
  return out.str();
}

/// Boundary points followed by samples of the fitted ellipse.
inline std::string format_ellipse_plot(const qdsc::QdscResult& r, int samples = 360) {
  std::string out = "kind,x,y\n";
  for (const auto& p : r.boundary.points) out += "boundary," + fixed(p.x(), 9) + "," + fixed(p.y(), 9) + "\n";
  for (const auto& p : qdsc::sample_ellipse(r.fit, samples)) out += "fit," + fixed(p.x(), 9) + "," + fixed(p.y(), 9) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Security results

inline std::string format_window_result(const security::WindowResult& w) {
  const auto& r = w.result;
  std::string s = "window_id=" + std::to_string(w.window_id);
  if (!w.ok) return s + " solver_status=" + w.status;
  s += " e_zz=" + fixed(r.e_zz) + " c_min=" + fixed(r.c_min) + " mu=" + fixed(r.mu) + " nu=" + fixed(r.nu) +
       " i_e=" + fixed(r.i_e) + " r=" + fixed(r.r) + " delta=" + fixed(r.delta) + " k=" + std::to_string(r.k) +
       " solver_status=" + w.status;
  if (r.above_qber_bound) s += " flag=above_qber_bound";
  return s;
}

inline std::string format_summary(const security::Summary& s) {
  KeyValue kv;
  kv.add("n_windows", std::uint64_t(s.n_windows))
      .add("n_solved", std::uint64_t(s.n_ok))
      .add("n_key_windows", std::uint64_t(s.n_key))
      .add("mean_c", s.mean_c)
      .add("std_c", s.std_c)
      .add("mean_r", s.mean_r)
      .add("std_r", s.std_r)
      .add("mean_e_zz", s.mean_e)
      .add("mean_delta", s.mean_delta);
  return kv.str();
}

inline std::string format_results(const security::RunAnalysis& a) {
  std::string out = "# one record per window\n";
  for (const auto& w : a.windows) out += format_window_result(w) + "\n";
  out += "\n[summary]\n" + format_summary(a.summary);
  return out;
}

inline std::string format_cr_plot(const security::RunAnalysis& a) {
  std::string out = "t_s,c_min,r\n";
  for (const auto& w : a.windows)
    if (w.ok) out += fixed(w.t_start_s) + "," + fixed(w.result.c_min) + "," + fixed(w.result.r) + "\n";
  return out;
}

inline std::string format_fidelity_table(const Povm& reference, const Povm& other, const std::string& title) {
  const auto f = quantum::fidelities(reference, other);
  KeyValue kv;
  kv.section(title);
  for (Channel c : quantum::kChannels) kv.add("F_" + std::string(quantum::label(c)), f[std::size_t(quantum::index(c))]);
  return kv.str();
}

}  // namespace rfiqkd::io
