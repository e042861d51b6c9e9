#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "oasis/elliptic_operator.hpp"
#include "oasis/error.hpp"
#include "oasis/geometry.hpp"

namespace oasis {

// Dirichlet data, evaluated at boundary cut points.
struct BoundaryData {
  double outer = 0.0;
  double inner = 0.0;
  std::function<double(Point, BoundaryComponent)> profile;

  static BoundaryData zero() { return {}; }
  static BoundaryData constant(double v) { return {v, v, {}}; }
  static BoundaryData split(double outer_value, double inner_value) {
    return {outer_value, inner_value, {}};
  }
  static BoundaryData from(std::function<double(Point, BoundaryComponent)> f) {
    return {0.0, 0.0, std::move(f)};
  }

  double at(Point p, BoundaryComponent c) const {
    if (profile) return profile(p, c);
    return c == BoundaryComponent::Inner ? inner : outer;
  }
};

// Orthogonal direction pairs approximating angles k*pi/K, k < K/2: each angle
// maps to the lattice pair {beta, beta + pi/2} nearest to it (ties to the
// smaller beta).
inline std::vector<std::pair<int, int>> stencil_pairs(int K) {
  std::vector<std::pair<int, int>> pairs;
  const double quarter = 0.5 * std::numbers::pi;
  for (int k = 0; k < K / 2; ++k) {
    const double target = k * std::numbers::pi / K;
    int best = 0;
    double err = INFINITY;
    for (int d = 0; d < kBaseDirs; ++d) {
      double e = std::fmod(std::abs(std::atan2(kLattice[d].b, kLattice[d].a) - target), quarter);
      e = std::min(e, quarter - e);
      if (e < err - 1e-12) {
        err = e;
        best = d;
      }
    }
    std::pair<int, int> p{best, perpendicular(best)};
    if (std::find(pairs.begin(), pairs.end(), p) == pairs.end()) pairs.push_back(p);
  }
  return pairs;
}

// A linear branch of Fh at one node: c1*delta(slot1) + c2*delta(slot2).
struct Branch {
  std::uint8_t s1 = 0;
  std::uint8_t s2 = 0;
  double c1 = 0.0;
  double c2 = 0.0;
  bool operator==(const Branch&) const = default;
};
using Policy = std::vector<Branch>;

// Degenerate-elliptic wide-stencil discretization of F on a masked domain.
class DiscreteOperator {
 public:
  DiscreteOperator(const OperatorSpec& spec, std::shared_ptr<const DomainMask> mask)
      : spec_(spec), mask_(std::move(mask)) {
    spec_.validate();
    if (spec_.kind == OperatorKind::BellmanSup) check_controls(spec_, mask_->grid());
    build();
  }

  const OperatorSpec& spec() const { return spec_; }
  const DomainMask& mask() const { return *mask_; }
  std::shared_ptr<const DomainMask> mask_ptr() const { return mask_; }
  const Grid2D& grid() const { return mask_->grid(); }
  int size() const { return mask_->unknowns(); }
  int cuts() const { return static_cast<int>(cut_pos_.size()); }
  Point cut_point(int c) const { return cut_pos_[c]; }
  BoundaryComponent cut_component(int c) const { return cut_comp_[c]; }
  // unknown owning each cut
  int cut_owner(int c) const { return cut_owner_[c]; }

  std::vector<double> boundary_values(const BoundaryData& bc) const {
    std::vector<double> v(cuts());
    for (int c = 0; c < cuts(); ++c) v[c] = bc.at(cut_pos_[c], cut_comp_[c]);
    return v;
  }

  // Second difference along used slot s at unknown i.
  double delta(std::span<const double> u, std::span<const double> bv, int i, int s) const {
    const Diff& d = diff_[i * nslots_ + s];
    const double uf = d.f >= 0 ? u[d.f] : bv[d.cf];
    const double ub = d.b >= 0 ? u[d.b] : bv[d.cb];
    return d.wf * uf + d.wb * ub - (d.wf + d.wb) * u[i];
  }

  // Fh(u) at unknown i; optionally reports the active branch.
  double eval_node(std::span<const double> u, std::span<const double> bv, int i,
                   Branch* active = nullptr) const {
    const double lo = spec_.lambda, hi = spec_.Lambda;
    switch (mode_) {
      case Mode::Axis: {
        const double v = scale_ * (delta(u, bv, i, 0) + delta(u, bv, i, 1));
        if (active) *active = {0, 1, scale_, scale_};
        return v;
      }
      case Mode::Plus:
      case Mode::Minus: {
        const bool plus = mode_ == Mode::Plus;
        double best = plus ? -INFINITY : INFINITY;
        for (const auto& pr : slot_pairs_) {
          const double d1 = delta(u, bv, i, pr.first), d2 = delta(u, bv, i, pr.second);
          const double c1 = plus ? (d1 >= 0.0 ? hi : lo) : (d1 >= 0.0 ? lo : hi);
          const double c2 = plus ? (d2 >= 0.0 ? hi : lo) : (d2 >= 0.0 ? lo : hi);
          const double v = c1 * d1 + c2 * d2;
          if (plus ? v > best : v < best) {
            best = v;
            if (active)
              *active = {static_cast<std::uint8_t>(pr.first), static_cast<std::uint8_t>(pr.second),
                         c1, c2};
          }
        }
        return best;
      }
      case Mode::Bellman: {
        const int nc = static_cast<int>(spec_.controls.size());
        double best = -INFINITY;
        for (int c = 0; c < nc; ++c) {
          const Branch& b = control_branch_[i * nc + c];
          const double v = b.c1 * delta(u, bv, i, b.s1) + b.c2 * delta(u, bv, i, b.s2);
          if (v > best) {
            best = v;
            if (active) *active = b;
          }
        }
        return best;
      }
    }
    return 0.0;
  }

  void apply(std::span<const double> u, std::span<const double> bv, std::span<double> out) const {
    for (int i = 0; i < size(); ++i) out[i] = eval_node(u, bv, i);
  }
  std::vector<double> apply(std::span<const double> u, std::span<const double> bv) const {
    std::vector<double> out(size());
    apply(u, bv, out);
    return out;
  }

  Policy select_policy(std::span<const double> u, std::span<const double> bv) const {
    Policy p(size());
    for (int i = 0; i < size(); ++i) eval_node(u, bv, i, &p[i]);
    return p;
  }

  // Matrix of the frozen branch plus diag(shift), and the constant part
  // contributed by boundary values: L(u) = A u + b.
  void assemble(const Policy& policy, std::span<const double> shift, std::span<const double> bv,
                Eigen::SparseMatrix<double>& A, Eigen::VectorXd& b) const {
    const int n = size();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(n) * 5);
    b.setZero(n);
    for (int i = 0; i < n; ++i) {
      double diag = shift.size() == 1 ? shift[0] : shift[i];
      const Branch& br = policy[i];
      for (int k = 0; k < 2; ++k) {
        const double c = k == 0 ? br.c1 : br.c2;
        const Diff& d = diff_[i * nslots_ + (k == 0 ? br.s1 : br.s2)];
        diag -= c * (d.wf + d.wb);
        if (d.f >= 0)
          t.emplace_back(i, d.f, c * d.wf);
        else
          b[i] += c * d.wf * bv[d.cf];
        if (d.b >= 0)
          t.emplace_back(i, d.b, c * d.wb);
        else
          b[i] += c * d.wb * bv[d.cb];
      }
      t.emplace_back(i, i, diag);
    }
    A.resize(n, n);
    A.setFromTriplets(t.begin(), t.end());
  }

  // Size of the terms entering Fh at unknown i, for roundoff-level tolerances.
  double stencil_magnitude(std::span<const double> u, std::span<const double> bv, int i) const {
    double m = 0.0;
    for (int s = 0; s < nslots_; ++s) {
      const Diff& d = diff_[i * nslots_ + s];
      const double uf = d.f >= 0 ? u[d.f] : bv[d.cf];
      const double ub = d.b >= 0 ? u[d.b] : bv[d.cb];
      m = std::max(m, d.wf * std::abs(uf) + d.wb * std::abs(ub) + (d.wf + d.wb) * std::abs(u[i]));
    }
    return 2.0 * std::max(spec_.Lambda, scale_) * m;
  }

  // Upper bound on the center weight of any branch at unknown i.
  double max_diagonal(int i) const { return diag_bound_[i]; }
  double max_diagonal() const {
    double m = 0.0;
    for (double d : diag_bound_) m = std::max(m, d);
    return m;
  }

 private:
  enum class Mode { Axis, Plus, Minus, Bellman };

  struct Diff {
    int f = -1, b = -1;    // unknown reached, or -1
    int cf = -1, cb = -1;  // cut index when the arm is cut
    double wf = 0.0, wb = 0.0;
  };

  void build() {
    const auto pairs = stencil_pairs(spec_.directions);
    switch (spec_.kind) {
      case OperatorKind::Laplacian:
        mode_ = Mode::Axis;
        scale_ = 1.0;
        break;
      case OperatorKind::PucciPlus:
      case OperatorKind::PucciMinus:
        if (spec_.lambda == spec_.Lambda) {
          mode_ = Mode::Axis;
          scale_ = spec_.Lambda;
        } else {
          mode_ = spec_.kind == OperatorKind::PucciPlus ? Mode::Plus : Mode::Minus;
        }
        break;
      case OperatorKind::BellmanSup:
        mode_ = Mode::Bellman;
        break;
    }
    std::vector<int> dirs;
    auto slot_of = [&](int d) {
      auto it = std::find(dirs.begin(), dirs.end(), d);
      if (it != dirs.end()) return static_cast<int>(it - dirs.begin());
      dirs.push_back(d);
      return static_cast<int>(dirs.size()) - 1;
    };
    if (mode_ == Mode::Axis) {
      slot_pairs_.push_back({slot_of(0), slot_of(8)});
    } else {
      for (auto [d1, d2] : pairs) slot_pairs_.push_back({slot_of(d1), slot_of(d2)});
    }
    nslots_ = static_cast<int>(dirs.size());

    const DomainMask& m = *mask_;
    const double h = m.grid().h();
    const int n = m.unknowns();
    diff_.assign(static_cast<std::size_t>(n) * nslots_, Diff{});
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < nslots_; ++s) {
        const int d = dirs[s];
        const double len = lattice_length(d) * h;
        const Arm& af = m.arm(i, d, 0);
        const Arm& ab = m.arm(i, d, 1);
        if (af.target == Arm::kInvalid || ab.target == Arm::kInvalid)
          throw Error("operator", "BAD_STENCIL",
                      "stencil arm leaves the grid box without meeting the boundary");
        Diff& df = diff_[i * nslots_ + s];
        const double lf = (af.target >= 0 ? 1.0 : af.theta) * len;
        const double lb = (ab.target >= 0 ? 1.0 : ab.theta) * len;
        df.wf = 2.0 / (lf * (lf + lb));
        df.wb = 2.0 / (lb * (lf + lb));
        if (af.target >= 0)
          df.f = m.unknown_of(af.target);
        else
          df.cf = add_cut(af, i);
        if (ab.target >= 0)
          df.b = m.unknown_of(ab.target);
        else
          df.cb = add_cut(ab, i);
      }

    if (mode_ == Mode::Bellman) {
      const int nc = static_cast<int>(spec_.controls.size());
      control_branch_.resize(static_cast<std::size_t>(n) * nc);
      for (int i = 0; i < n; ++i) {
        const Point x = m.grid().node(m.node_of(i));
        for (int c = 0; c < nc; ++c) control_branch_[i * nc + c] = align(spec_.controls[c](x), dirs);
      }
    }

    diag_bound_.assign(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (auto [s1, s2] : slot_pairs_) {
        const Diff& a = diff_[i * nslots_ + s1];
        const Diff& b = diff_[i * nslots_ + s2];
        const double w = (mode_ == Mode::Axis ? scale_ : spec_.Lambda) *
                         (a.wf + a.wb + b.wf + b.wb);
        diag_bound_[i] = std::max(diag_bound_[i], w);
      }
  }

  int add_cut(const Arm& a, int owner) {
    cut_pos_.push_back(a.cut);
    cut_comp_.push_back(a.component);
    cut_owner_.push_back(owner);
    return static_cast<int>(cut_pos_.size()) - 1;
  }

  // Branch for a single control: eigen-directions of A snapped to the best
  // aligned orthogonal pair.
  Branch align(const SymMat2& A, const std::vector<int>& dirs) const {
    auto [e1, e2] = A.eigenvalues();
    // eigenvector angle for e2 (the larger eigenvalue)
    double ang;
    if (std::abs(A.a12) > 0.0)
      ang = std::atan2(e2 - A.a11, A.a12);
    else
      ang = A.a11 >= A.a22 ? 0.0 : 0.5 * std::numbers::pi;
    Branch best;
    double err = INFINITY;
    for (auto [s1, s2] : slot_pairs_) {
      for (int o = 0; o < 2; ++o) {
        const int s = o == 0 ? s1 : s2;
        const double da = std::atan2(kLattice[dirs[s]].b, kLattice[dirs[s]].a);
        double e = std::fmod(std::abs(da - ang), std::numbers::pi);
        e = std::min(e, std::numbers::pi - e);
        if (e < err - 1e-12) {
          err = e;
          best = {static_cast<std::uint8_t>(s), static_cast<std::uint8_t>(o == 0 ? s2 : s1), e2, e1};
        }
      }
    }
    return best;
  }

  OperatorSpec spec_;
  std::shared_ptr<const DomainMask> mask_;
  Mode mode_ = Mode::Axis;
  double scale_ = 1.0;
  int nslots_ = 0;
  std::vector<std::pair<int, int>> slot_pairs_;
  std::vector<Diff> diff_;
  std::vector<Point> cut_pos_;
  std::vector<BoundaryComponent> cut_comp_;
  std::vector<int> cut_owner_;
  std::vector<Branch> control_branch_;
  std::vector<double> diag_bound_;
};

inline DiscreteOperator discretize(const OperatorSpec& spec, const DomainMask& mask) {
  return DiscreteOperator(spec, std::make_shared<const DomainMask>(mask));
}

}  // namespace oasis
