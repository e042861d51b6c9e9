#pragma once

// Flat `key = value` run configuration. Shapes use constructor syntax:
//   domain = rect(0,0,1,1)
//   oasis  = disk(0.5,0.5,0.25)
//   domain = difference(rect(0,0,2,1), disk(1,0.5,0.2))
// Lists are comma separated or linspace(a,b,n). '#' starts a comment.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oasis/elliptic_operator.hpp"
#include "oasis/error.hpp"
#include "oasis/geometry.hpp"
#include "oasis/blowup.hpp"

namespace oasis::io {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Shape {
  DomainSpec spec;
  Point lo, hi;  // bounding box
  std::string text;
};

enum class MuUnits { Absolute, Lambda, Window };

inline std::string to_string(MuUnits u) {
  switch (u) {
    case MuUnits::Absolute: return "absolute";
    case MuUnits::Lambda: return "lambda";
    case MuUnits::Window: return "window";
  }
  return "?";
}

struct RunConfig {
  int resolution = 65;
  std::optional<Shape> domain;
  std::optional<Shape> oasis;

  OperatorKind op_kind = OperatorKind::Laplacian;
  double lambda = 1.0;
  double Lambda = 1.0;
  int directions = 16;
  double anisotropy = 2.0;  // bellman_sup: turning rate of the principal axis

  std::optional<KKind> kind;  // default K2 with an oasis, else K1
  double p = 2.0;
  double k0 = 1.0;
  double k1 = 1.0;
  double ramp = 0.0;

  std::optional<double> mu;
  std::vector<double> mu_grid;
  MuUnits mu_units = MuUnits::Absolute;
  std::vector<double> eps_seq;  // fractions of the relevant eigenvalue
  std::vector<double> n_seq;
  double n_scale = 1.0;
  int n_top = 12;
  std::vector<double> inflations{8.0, 4.0, 2.0};  // units of h
  double inner_value = 1.0;
  std::vector<double> delta_seq{1e-1, 1e-2, 1e-3, 0.0};
  double collar = 0.0;  // 0 means a tenth of the shorter box side

  double tol_cmp = 1e-8;
  double tol_fix = 1e-10;
  double tol_bracket = 1e-4;
  double sat_tol = 1e-2;
  double d_probe = 0.0;
  int max_iter = 200000;
  int eigen_max_iter = 500;

  // run settings, not part of the hash
  std::string out = "out";
  bool trace = false;
  int workers = 1;
  bool heatmaps = false;

  KKind reaction_kind() const { return kind.value_or(oasis ? KKind::K2 : KKind::K1); }

  OperatorSpec operator_spec() const {
    OperatorSpec s{op_kind, lambda, Lambda, directions, {}};
    if (op_kind == OperatorKind::Laplacian) s.lambda = s.Lambda = 1.0;
    if (op_kind == OperatorKind::BellmanSup)
      s.controls = {rotating_anisotropy(lambda, Lambda, anisotropy),
                    [l = lambda, L = Lambda](Point) { return SymMat2::diag(l, L); }};
    return s;
  }

  Grid2D grid() const {
    const Shape& d = *domain;
    const double w = d.hi.x - d.lo.x, t = d.hi.y - d.lo.y;
    const double h = std::max(w, t) / (resolution - 1);
    const int nx = static_cast<int>(std::ceil(w / h - 1e-9)) + 1;
    const int ny = static_cast<int>(std::ceil(t / h - 1e-9)) + 1;
    return Grid2D(nx, ny, h, d.lo);
  }

  double collar_width() const {
    if (collar > 0.0) return collar;
    const Shape& d = *domain;
    return 0.1 * std::min(d.hi.x - d.lo.x, d.hi.y - d.lo.y);
  }

  std::vector<double> data_sequence() const {
    return n_seq.empty() ? default_n_seq(n_scale, n_top) : n_seq;
  }

  ReactionSpec reaction(double mu_value) const {
    ReactionSpec r;
    r.mu = mu_value;
    r.p = p;
    r.kind = reaction_kind();
    r.k0 = k0;
    r.k1 = k1;
    r.ramp = ramp;
    if (oasis) r.oasis = oasis->spec;
    return r;
  }

  // Canonical text of every field that affects results.
  std::string canonical() const {
    std::ostringstream os;
    auto list = [](const std::vector<double>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt17(v[i]);
      return s;
    };
    os << "resolution=" << resolution << "\n";
    os << "domain=" << (domain ? domain->text : "") << "\n";
    os << "oasis=" << (oasis ? oasis->text : "") << "\n";
    os << "operator=" << to_string(op_kind) << "\n";
    os << "lambda=" << fmt17(lambda) << "\nLambda=" << fmt17(Lambda) << "\n";
    os << "directions=" << directions << "\nanisotropy=" << fmt17(anisotropy) << "\n";
    os << "reaction=" << to_string(reaction_kind()) << "\np=" << fmt17(p) << "\n";
    os << "k0=" << fmt17(k0) << "\nk1=" << fmt17(k1) << "\nramp=" << fmt17(ramp) << "\n";
    os << "mu=" << (mu ? fmt17(*mu) : "") << "\nmu_grid=" << list(mu_grid) << "\n";
    os << "mu_units=" << to_string(mu_units) << "\neps_seq=" << list(eps_seq) << "\n";
    os << "n_seq=" << list(data_sequence()) << "\ninflations=" << list(inflations) << "\n";
    os << "inner_value=" << fmt17(inner_value) << "\ndelta_seq=" << list(delta_seq) << "\n";
    os << "collar=" << fmt17(collar) << "\n";
    os << "tol_cmp=" << fmt17(tol_cmp) << "\n";
    os << "tol_fix=" << fmt17(tol_fix) << "\ntol_bracket=" << fmt17(tol_bracket) << "\n";
    os << "sat_tol=" << fmt17(sat_tol) << "\nd_probe=" << fmt17(d_probe) << "\n";
    os << "max_iter=" << max_iter << "\neigen_max_iter=" << eigen_max_iter << "\n";
    return os.str();
  }
};

// 64-bit FNV-1a, hex.
inline std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : c.canonical()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

[[noreturn]] inline void parse_fail(int line, const std::string& msg) {
  throw Error("cli", "PARSE_ERROR", "line " + std::to_string(line) + ": " + msg);
}

[[noreturn]] inline void invalid(const std::string& field, const std::string& msg) {
  throw Error("cli", "VALIDATION_ERROR", field + ": " + msg);
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline double number(const std::string& raw, int line) {
  const std::string s = trim(raw);
  if (s.empty()) parse_fail(line, "expected a number");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    parse_fail(line, "'" + s + "' is not a number");
  }
  if (used != s.size()) parse_fail(line, "'" + s + "' is not a number");
  return v;
}

inline int integer(const std::string& raw, int line) {
  const double v = number(raw, line);
  if (v != std::floor(v) || std::abs(v) > 1e9) parse_fail(line, "expected an integer");
  return static_cast<int>(v);
}

inline bool boolean(const std::string& raw, int line) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  parse_fail(line, "expected true or false");
}

// Split on top-level commas.
inline std::vector<std::string> split_args(const std::string& s) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

inline bool call(const std::string& s, std::string& name, std::string& args) {
  const auto open = s.find('(');
  if (open == std::string::npos || s.back() != ')') return false;
  name = trim(s.substr(0, open));
  args = s.substr(open + 1, s.size() - open - 2);
  return true;
}

inline Shape shape(const std::string& raw, int line) {
  const std::string s = trim(raw);
  std::string name, args;
  if (!call(s, name, args)) parse_fail(line, "expected rect(...), disk(...) or difference(...)");
  const auto a = split_args(args);
  auto nums = [&](std::size_t n) {
    if (a.size() != n) parse_fail(line, name + " takes " + std::to_string(n) + " arguments");
    std::vector<double> v;
    for (const auto& x : a) v.push_back(number(x, line));
    return v;
  };
  Shape out;
  try {
    if (name == "rect") {
      const auto v = nums(4);
      if (!(v[2] > v[0] && v[3] > v[1])) parse_fail(line, "rect needs x0 < x1 and y0 < y1");
      out.spec = DomainSpec::rect({v[0], v[1]}, {v[2], v[3]});
      out.lo = {v[0], v[1]};
      out.hi = {v[2], v[3]};
    } else if (name == "disk") {
      const auto v = nums(3);
      out.spec = DomainSpec::disk({v[0], v[1]}, v[2]);
      out.lo = {v[0] - v[2], v[1] - v[2]};
      out.hi = {v[0] + v[2], v[1] + v[2]};
    } else if (name == "difference") {
      if (a.size() != 2) parse_fail(line, "difference takes two shapes");
      const Shape o = shape(a[0], line), i = shape(a[1], line);
      out.spec = DomainSpec::difference(o.spec, i.spec);
      out.lo = o.lo;
      out.hi = o.hi;
    } else {
      parse_fail(line, "unknown shape '" + name + "'");
    }
  } catch (const Error& e) {
    if (e.module() == "cli") throw;
    parse_fail(line, e.what());
  }
  out.text = out.spec.describe();
  return out;
}

inline std::vector<double> number_list(const std::string& raw, int line) {
  const std::string s = trim(raw);
  std::string name, args;
  if (call(s, name, args) && name == "linspace") {
    const auto a = split_args(args);
    if (a.size() != 3) parse_fail(line, "linspace takes three arguments");
    const double lo = number(a[0], line), hi = number(a[1], line);
    const int n = integer(a[2], line);
    if (n < 1) parse_fail(line, "linspace needs at least one point");
    std::vector<double> v;
    for (int k = 0; k < n; ++k) v.push_back(n == 1 ? lo : lo + (hi - lo) * k / (n - 1));
    return v;
  }
  std::vector<double> v;
  if (s.empty()) return v;
  for (const auto& x : split_args(s)) v.push_back(number(x, line));
  return v;
}

inline bool increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

}  // namespace detail

inline void validate(const RunConfig& c) {
  using detail::invalid;
  if (c.resolution < 17 || c.resolution > 513) invalid("resolution", "must lie in [17, 513]");
  if (c.domain) {
    const Grid2D g = c.grid();
    if (std::min(g.nx(), g.ny()) < 17 || std::max(g.nx(), g.ny()) > 513)
      invalid("resolution", "each axis needs 17 to 513 nodes");
  }
  if (!(c.lambda > 0.0)) invalid("lambda", "must be positive");
  if (!(c.Lambda >= c.lambda)) invalid("Lambda", "must be >= lambda");
  if (c.directions < 4 || c.directions % 2) invalid("directions", "must be an even integer >= 4");
  if (!(c.p > 1.0)) invalid("p", "must exceed 1");
  if (!(c.k1 > 0.0)) invalid("k1", "must be positive");
  if (c.reaction_kind() == KKind::K1 && !(c.k0 > 0.0 && c.k0 <= c.k1))
    invalid("k0", "need 0 < k0 <= k1");
  if (c.reaction_kind() == KKind::K2 && !c.oasis) invalid("oasis", "K2 reaction needs an oasis");
  if (c.ramp < 0.0) invalid("ramp", "must be nonnegative");
  if (!detail::increasing(c.mu_grid)) invalid("mu_grid", "must be strictly increasing");
  for (double e : c.eps_seq)
    if (!(e > 0.0)) invalid("eps_seq", "entries must be positive");
  if (!detail::increasing(c.data_sequence())) invalid("n_seq", "must be strictly increasing");
  for (std::size_t i = 0; i < c.inflations.size(); ++i)
    if (c.inflations[i] < 0.0 || (i && !(c.inflations[i] < c.inflations[i - 1])))
      invalid("inflations", "must be nonnegative and strictly decreasing");
  for (double d : c.delta_seq)
    if (d < 0.0) invalid("delta_seq", "entries must be nonnegative");
  if (c.n_top < 0 || c.n_top > 40) invalid("n_top", "must lie in [0, 40]");
  if (!(c.n_scale > 0.0)) invalid("n_scale", "must be positive");
  const std::pair<const char*, double> tols[] = {
      {"tol_cmp", c.tol_cmp}, {"tol_fix", c.tol_fix},
      {"tol_bracket", c.tol_bracket}, {"sat_tol", c.sat_tol}};
  for (const auto& [name, v] : tols)
    if (!(v > 0.0)) invalid(name, "must be positive");
  if (c.d_probe < 0.0) invalid("d_probe", "must be nonnegative");
  if (c.collar < 0.0) invalid("collar", "must be nonnegative");
  if (c.max_iter < 1) invalid("max_iter", "must be positive");
  if (c.eigen_max_iter < 1) invalid("eigen_max_iter", "must be positive");
  if (c.workers < 1) invalid("workers", "must be positive");
}

inline RunConfig parse_config_text(const std::string& text) {
  using namespace detail;
  RunConfig c;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) parse_fail(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq)), v = trim(s.substr(eq + 1));
    if (key.empty()) parse_fail(line, "missing key");
    if (seen.count(key))
      parse_fail(line, "duplicate key '" + key + "' (first on line " + std::to_string(seen[key]) + ")");
    seen[key] = line;

    if (key == "resolution") c.resolution = integer(v, line);
    else if (key == "domain") c.domain = shape(v, line);
    else if (key == "oasis") c.oasis = shape(v, line);
    else if (key == "operator") {
      if (v == "laplacian") c.op_kind = OperatorKind::Laplacian;
      else if (v == "pucci_plus") c.op_kind = OperatorKind::PucciPlus;
      else if (v == "pucci_minus") c.op_kind = OperatorKind::PucciMinus;
      else if (v == "bellman_sup") c.op_kind = OperatorKind::BellmanSup;
      else parse_fail(line, "unknown operator '" + v + "'");
    }
    else if (key == "lambda") c.lambda = number(v, line);
    else if (key == "Lambda") c.Lambda = number(v, line);
    else if (key == "directions") c.directions = integer(v, line);
    else if (key == "anisotropy") c.anisotropy = number(v, line);
    else if (key == "reaction") {
      if (v == "K1") c.kind = KKind::K1;
      else if (v == "K2") c.kind = KKind::K2;
      else parse_fail(line, "reaction must be K1 or K2");
    }
    else if (key == "p") c.p = number(v, line);
    else if (key == "k0") c.k0 = number(v, line);
    else if (key == "k1") c.k1 = number(v, line);
    else if (key == "ramp") c.ramp = number(v, line);
    else if (key == "mu") c.mu = number(v, line);
    else if (key == "mu_grid") c.mu_grid = number_list(v, line);
    else if (key == "mu_units") {
      if (v == "absolute") c.mu_units = MuUnits::Absolute;
      else if (v == "lambda") c.mu_units = MuUnits::Lambda;
      else if (v == "window") c.mu_units = MuUnits::Window;
      else parse_fail(line, "mu_units must be absolute, lambda or window");
    }
    else if (key == "eps_seq") c.eps_seq = number_list(v, line);
    else if (key == "n_seq") c.n_seq = number_list(v, line);
    else if (key == "n_scale") c.n_scale = number(v, line);
    else if (key == "n_top") c.n_top = integer(v, line);
    else if (key == "inflations") c.inflations = number_list(v, line);
    else if (key == "inner_value") c.inner_value = number(v, line);
    else if (key == "delta_seq") c.delta_seq = number_list(v, line);
    else if (key == "collar") c.collar = number(v, line);
    else if (key == "tol_cmp") c.tol_cmp = number(v, line);
    else if (key == "tol_fix") c.tol_fix = number(v, line);
    else if (key == "tol_bracket") c.tol_bracket = number(v, line);
    else if (key == "sat_tol") c.sat_tol = number(v, line);
    else if (key == "d_probe") c.d_probe = number(v, line);
    else if (key == "max_iter") c.max_iter = integer(v, line);
    else if (key == "eigen_max_iter") c.eigen_max_iter = integer(v, line);
    else if (key == "out") c.out = v;
    else if (key == "trace") c.trace = boolean(v, line);
    else if (key == "workers") c.workers = integer(v, line);
    else if (key == "heatmaps") c.heatmaps = boolean(v, line);
    else parse_fail(line, "unknown key '" + key + "'");
  }
  validate(c);
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cli", "IO_ERROR", "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace oasis::io
