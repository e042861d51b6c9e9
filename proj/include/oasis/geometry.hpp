#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "oasis/error.hpp"

namespace oasis {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Uniform square-cell lattice; node (i,j) sits at origin + h*(i,j).
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(int nx, int ny, double h, Point origin = {})
      : nx_(nx), ny_(ny), h_(h), origin_(origin) {
    if (nx < 8 || ny < 8)
      throw Error("geometry", "INVALID_GRID", "need at least 8 nodes per axis");
    if (!(h > 0.0) || !std::isfinite(h))
      throw Error("geometry", "INVALID_GRID", "spacing must be positive");
  }

  // n x n nodes spanning [lo, lo + extent]^2.
  static Grid2D square(int n, double extent = 1.0, Point lo = {}) {
    return Grid2D(n, n, extent / (n - 1), lo);
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double h() const { return h_; }
  Point origin() const { return origin_; }
  int size() const { return nx_ * ny_; }
  int index(int i, int j) const { return j * nx_ + i; }
  int col(int idx) const { return idx % nx_; }
  int row(int idx) const { return idx / nx_; }
  bool in_box(int i, int j) const { return i >= 0 && j >= 0 && i < nx_ && j < ny_; }
  Point node(int i, int j) const { return {origin_.x + i * h_, origin_.y + j * h_}; }
  Point node(int idx) const { return node(col(idx), row(idx)); }

  bool operator==(const Grid2D& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && h_ == o.h_ && origin_.x == o.origin_.x &&
           origin_.y == o.origin_.y;
  }

 private:
  int nx_ = 0;
  int ny_ = 0;
  double h_ = 0.0;
  Point origin_{};
};

// Node-indexed values over a whole grid. Nodes outside a domain hold 0.
class Field {
 public:
  Field() = default;
  explicit Field(const Grid2D& g, double fill = 0.0) : grid_(g), v_(g.size(), fill) {}

  const Grid2D& grid() const { return grid_; }
  int size() const { return static_cast<int>(v_.size()); }
  double& operator[](int idx) { return v_[idx]; }
  double operator[](int idx) const { return v_[idx]; }
  double& at(int i, int j) { return v_[grid_.index(i, j)]; }
  double at(int i, int j) const { return v_[grid_.index(i, j)]; }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

 private:
  Grid2D grid_;
  std::vector<double> v_;
};

using ScalarField = Field;

enum class BoundaryComponent : std::uint8_t { Outer = 0, Inner = 1 };

// Signed-distance description of a planar domain (negative inside).
class DomainSpec {
 public:
  enum class Shape { Rectangle, Disk, Difference };

  DomainSpec() = default;

  static DomainSpec rectangle(Point center, double half_x, double half_y) {
    if (!(half_x > 0.0 && half_y > 0.0))
      throw Error("geometry", "INVALID_DOMAIN", "rectangle half-widths must be positive");
    auto n = std::make_shared<Node>();
    n->shape = Shape::Rectangle;
    n->c = center;
    n->hx = half_x;
    n->hy = half_y;
    return DomainSpec(n);
  }
  static DomainSpec rect(Point lo, Point hi) {
    return rectangle({0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)}, 0.5 * (hi.x - lo.x),
                     0.5 * (hi.y - lo.y));
  }
  static DomainSpec disk(Point center, double radius) {
    if (!(radius > 0.0)) throw Error("geometry", "INVALID_DOMAIN", "disk radius must be positive");
    auto n = std::make_shared<Node>();
    n->shape = Shape::Disk;
    n->c = center;
    n->r = radius;
    return DomainSpec(n);
  }
  static DomainSpec difference(const DomainSpec& outer, const DomainSpec& inner) {
    if (!outer.node_ || !inner.node_)
      throw Error("geometry", "INVALID_DOMAIN", "difference of empty domains");
    auto n = std::make_shared<Node>();
    n->shape = Shape::Difference;
    n->a = outer.node_;
    n->b = inner.node_;
    return DomainSpec(n);
  }

  // {x : sd(x) < s}; s > 0 grows the domain.
  DomainSpec inflated(double s) const {
    auto n = std::make_shared<Node>(*node_);
    n->offset += s;
    return DomainSpec(n);
  }
  // The image t*Omega under dilation about the coordinate origin.
  DomainSpec scaled(double t) const {
    if (!(t > 0.0)) throw Error("geometry", "INVALID_DOMAIN", "scale factor must be positive");
    auto n = std::make_shared<Node>(*node_);
    n->scale *= t;
    n->offset *= t;
    return DomainSpec(n);
  }

  bool empty() const { return !node_; }
  Shape shape() const { return node_->shape; }
  DomainSpec outer() const { return DomainSpec(node_->a); }
  DomainSpec inner() const { return DomainSpec(node_->b); }

  double signed_distance(Point p) const { return eval(*node_, p); }
  bool contains(Point p) const { return signed_distance(p) < 0.0; }

  // Which part of the boundary is closest to p: the outer boundary, or the
  // removed inner set of a top-level difference.
  BoundaryComponent component_at(Point p) const {
    if (node_->shape != Shape::Difference) return BoundaryComponent::Outer;
    const Point q = unscale(*node_, p);
    double so = std::abs(eval(*node_->a, q));
    double si = std::abs(eval(*node_->b, q));
    return si < so ? BoundaryComponent::Inner : BoundaryComponent::Outer;
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    write(os, *node_);
    return os.str();
  }

 private:
  struct Node {
    Shape shape = Shape::Rectangle;
    Point c{};
    double hx = 0.0, hy = 0.0, r = 0.0;
    double offset = 0.0;
    double scale = 1.0;
    std::shared_ptr<const Node> a, b;
  };

  explicit DomainSpec(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static Point unscale(const Node& n, Point p) { return {p.x / n.scale, p.y / n.scale}; }

  static double eval(const Node& n, Point p) {
    const Point q = unscale(n, p);
    double sd = 0.0;
    switch (n.shape) {
      case Shape::Rectangle: {
        double qx = std::abs(q.x - n.c.x) - n.hx;
        double qy = std::abs(q.y - n.c.y) - n.hy;
        double out = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
        sd = out + std::min(std::max(qx, qy), 0.0);
        break;
      }
      case Shape::Disk:
        sd = std::hypot(q.x - n.c.x, q.y - n.c.y) - n.r;
        break;
      case Shape::Difference:
        sd = std::max(eval(*n.a, q), -eval(*n.b, q));
        break;
    }
    return n.scale * sd - n.offset;
  }

  static void write(std::ostream& os, const Node& n) {
    if (n.offset != 0.0) os << "inflate(";
    if (n.scale != 1.0) os << "scale(";
    switch (n.shape) {
      case Shape::Rectangle:
        os << "rect(" << n.c.x - n.hx << "," << n.c.y - n.hy << "," << n.c.x + n.hx << ","
           << n.c.y + n.hy << ")";
        break;
      case Shape::Disk:
        os << "disk(" << n.c.x << "," << n.c.y << "," << n.r << ")";
        break;
      case Shape::Difference:
        os << "difference(";
        write(os, *n.a);
        os << ",";
        write(os, *n.b);
        os << ")";
        break;
    }
    if (n.scale != 1.0) os << "," << n.scale << ")";
    if (n.offset != 0.0) os << "," << n.offset << ")";
  }

  std::shared_ptr<const Node> node_;
};

// Stencil directions: 8 primitive lattice vectors in [0, pi/2) with max-norm <= 3,
// followed by their rotations by +pi/2 at the same positions + 8.
struct LatticeDir {
  int a;
  int b;
};
inline constexpr int kBaseDirs = 8;
inline constexpr int kDirs = 16;
inline constexpr int kArms = 2 * kDirs;
inline constexpr std::array<LatticeDir, kDirs> kLattice = {{{1, 0},
                                                           {3, 1},
                                                           {2, 1},
                                                           {3, 2},
                                                           {1, 1},
                                                           {2, 3},
                                                           {1, 2},
                                                           {1, 3},
                                                           {0, 1},
                                                           {-1, 3},
                                                           {-1, 2},
                                                           {-2, 3},
                                                           {-1, 1},
                                                           {-3, 2},
                                                           {-2, 1},
                                                           {-3, 1}}};

inline int perpendicular(int d) { return d < kBaseDirs ? d + kBaseDirs : d - kBaseDirs; }
inline double lattice_length(int d) { return std::hypot(kLattice[d].a, kLattice[d].b); }

enum class NodeClass : std::uint8_t { Exterior, Interior, NearBoundary };

// One half-line of a stencil direction: either it reaches another domain node
// or it is cut by the boundary at fraction theta of the lattice step.
struct Arm {
  static constexpr int kCut = -1;
  static constexpr int kInvalid = -2;
  int target = kInvalid;  // grid index of the reached node
  BoundaryComponent component = BoundaryComponent::Outer;
  double theta = 1.0;
  Point cut{};
};

class DomainMask {
 public:
  const Grid2D& grid() const { return grid_; }
  int unknowns() const { return static_cast<int>(nodes_.size()); }
  int node_of(int unknown) const { return nodes_[unknown]; }
  int unknown_of(int node) const { return unknown_[node]; }
  bool inside(int node) const { return unknown_[node] >= 0; }
  NodeClass classify(int node) const { return cls_[node]; }
  // arm for lattice direction d (0..15) with sign s (0: +v, 1: -v)
  const Arm& arm(int unknown, int d, int s) const { return arms_[unknown * kArms + 2 * d + s]; }
  // distance to the boundary, indexed by unknown
  const std::vector<double>& distance() const { return dist_; }
  const std::vector<int>& nodes() const { return nodes_; }
  bool has_domain() const { return !dom_.empty(); }
  const DomainSpec& domain() const { return dom_; }

  int components() const {
    std::vector<int> comp;
    return label_components(comp);
  }

  friend DomainMask build_mask(const Grid2D& grid, const DomainSpec& dom);
  friend DomainMask build_mask_from_nodes(const Grid2D& grid, const std::vector<char>& in);

 private:
  void number(const std::vector<char>& in) {
    unknown_.assign(grid_.size(), -1);
    cls_.assign(grid_.size(), NodeClass::Exterior);
    for (int n = 0; n < grid_.size(); ++n)
      if (in[n]) {
        unknown_[n] = static_cast<int>(nodes_.size());
        nodes_.push_back(n);
      }
    if (nodes_.empty()) throw Error("geometry", "UNRESOLVED_DOMAIN", "no interior node");
    arms_.assign(nodes_.size() * kArms, Arm{});
  }

  void finish() {
    for (int u = 0; u < unknowns(); ++u) {
      bool full = true;
      for (int k = 0; k < kArms; ++k)
        if (arms_[u * kArms + k].target < 0) full = false;
      cls_[nodes_[u]] = full ? NodeClass::Interior : NodeClass::NearBoundary;
    }
    check_resolved();
  }

  int label_components(std::vector<int>& comp) const {
    comp.assign(unknowns(), -1);
    int ncomp = 0;
    for (int s = 0; s < unknowns(); ++s) {
      if (comp[s] >= 0) continue;
      std::vector<int> stack{s};
      comp[s] = ncomp;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        int n = nodes_[u];
        int i = grid_.col(n), j = grid_.row(n);
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          int ii = i + di[k], jj = j + dj[k];
          if (!grid_.in_box(ii, jj)) continue;
          int v = unknown_[grid_.index(ii, jj)];
          if (v >= 0 && comp[v] < 0) {
            comp[v] = ncomp;
            stack.push_back(v);
          }
        }
      }
      ++ncomp;
    }
    return ncomp;
  }

  // Each 4-connected component must hold a 3x3 block of domain nodes.
  void check_resolved() const {
    std::vector<int> comp;
    const int ncomp = label_components(comp);
    std::vector<char> ok(ncomp, 0);
    for (int u = 0; u < unknowns(); ++u) {
      int n = nodes_[u];
      int i = grid_.col(n), j = grid_.row(n);
      bool block = true;
      for (int dj = -1; dj <= 1 && block; ++dj)
        for (int di = -1; di <= 1 && block; ++di)
          block = grid_.in_box(i + di, j + dj) && unknown_[grid_.index(i + di, j + dj)] >= 0;
      if (block) ok[comp[u]] = 1;
    }
    for (int c = 0; c < ncomp; ++c)
      if (!ok[c])
        throw Error("geometry", "UNRESOLVED_DOMAIN",
                    "a domain component is thinner than three grid cells");
  }

  Grid2D grid_;
  DomainSpec dom_;
  std::vector<int> unknown_;
  std::vector<int> nodes_;
  std::vector<NodeClass> cls_;
  std::vector<Arm> arms_;
  std::vector<double> dist_;
};

namespace detail {

// First crossing of sd >= 0 along p + t*v, t in (0, 1]; returns 2 if none.
inline double first_crossing(const DomainSpec& dom, Point p, Point v) {
  const int samples = 12;
  double prev = 0.0;
  for (int k = 1; k <= samples; ++k) {
    double t = static_cast<double>(k) / samples;
    double s = dom.signed_distance({p.x + t * v.x, p.y + t * v.y});
    if (s >= 0.0) {
      if (k == samples && s == 0.0) {
        bool earlier = dom.signed_distance({p.x + (t - 1e-9) * v.x, p.y + (t - 1e-9) * v.y}) >= 0;
        if (!earlier) return 1.0;
      }
      double lo = prev, hi = t;
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if (dom.signed_distance({p.x + mid * v.x, p.y + mid * v.y}) >= 0.0)
          hi = mid;
        else
          lo = mid;
      }
      return hi;
    }
    prev = t;
  }
  return 2.0;
}

}  // namespace detail

inline DomainMask build_mask(const Grid2D& grid, const DomainSpec& dom) {
  DomainMask m;
  m.grid_ = grid;
  m.dom_ = dom;
  std::vector<char> in(grid.size(), 0);
  for (int n = 0; n < grid.size(); ++n) in[n] = dom.signed_distance(grid.node(n)) < 0.0;
  m.number(in);
  m.dist_.resize(m.unknowns());
  for (int u = 0; u < m.unknowns(); ++u) {
    const int n = m.nodes_[u];
    const int i = grid.col(n), j = grid.row(n);
    const Point p = grid.node(n);
    m.dist_[u] = -dom.signed_distance(p);
    for (int d = 0; d < kDirs; ++d)
      for (int s = 0; s < 2; ++s) {
        const int a = s == 0 ? kLattice[d].a : -kLattice[d].a;
        const int b = s == 0 ? kLattice[d].b : -kLattice[d].b;
        Arm& arm = m.arms_[u * kArms + 2 * d + s];
        const int ii = i + a, jj = j + b;
        if (grid.in_box(ii, jj) && in[grid.index(ii, jj)]) {
          arm.target = grid.index(ii, jj);
          continue;
        }
        const Point q = grid.node(ii, jj);
        double t = detail::first_crossing(dom, p, {q.x - p.x, q.y - p.y});
        if (t > 1.0) {
          // the endpoint lattice node is outside even if rounding along the
          // segment says otherwise
          if (dom.signed_distance(q) < 0.0) {
            arm.target = Arm::kInvalid;
            continue;
          }
          t = 1.0;
        }
        arm.target = Arm::kCut;
        arm.theta = t;
        arm.cut = t == 1.0 ? q : Point{p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
        arm.component = dom.component_at(arm.cut);
      }
  }
  m.finish();
  return m;
}

// Staircase mask of an explicit node set: arms leaving the set are cut at the
// first node outside it (theta = 1).
inline DomainMask build_mask_from_nodes(const Grid2D& grid, const std::vector<char>& in) {
  DomainMask m;
  m.grid_ = grid;
  m.number(in);
  const double h = grid.h();
  for (int u = 0; u < m.unknowns(); ++u) {
    const int n = m.nodes_[u];
    const int i = grid.col(n), j = grid.row(n);
    for (int d = 0; d < kDirs; ++d)
      for (int s = 0; s < 2; ++s) {
        const int a = s == 0 ? kLattice[d].a : -kLattice[d].a;
        const int b = s == 0 ? kLattice[d].b : -kLattice[d].b;
        Arm& arm = m.arms_[u * kArms + 2 * d + s];
        const int ii = i + a, jj = j + b;
        if (grid.in_box(ii, jj) && in[grid.index(ii, jj)]) {
          arm.target = grid.index(ii, jj);
        } else {
          arm.target = Arm::kCut;
          arm.theta = 1.0;
          arm.cut = grid.node(ii, jj);
        }
      }
  }
  // graph distance (in h) to the outside of the set
  m.dist_.assign(m.unknowns(), 0.0);
  std::queue<int> q;
  std::vector<int> layer(m.unknowns(), -1);
  for (int u = 0; u < m.unknowns(); ++u) {
    const int n = m.nodes_[u];
    const int i = grid.col(n), j = grid.row(n);
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k)
      if (!grid.in_box(i + di[k], j + dj[k]) || !in[grid.index(i + di[k], j + dj[k])]) {
        layer[u] = 1;
        q.push(u);
        break;
      }
  }
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    const int n = m.nodes_[u];
    const int i = grid.col(n), j = grid.row(n);
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      int ii = i + di[k], jj = j + dj[k];
      if (!grid.in_box(ii, jj)) continue;
      int v = m.unknown_[grid.index(ii, jj)];
      if (v >= 0 && layer[v] < 0) {
        layer[v] = layer[u] + 1;
        q.push(v);
      }
    }
  }
  for (int u = 0; u < m.unknowns(); ++u) m.dist_[u] = layer[u] * h;
  m.finish();
  return m;
}

// d = -sd at nodes inside dom, 0 elsewhere.
inline Field distance_field(const Grid2D& grid, const DomainSpec& dom) {
  Field f(grid);
  for (int n = 0; n < grid.size(); ++n) {
    double s = dom.signed_distance(grid.node(n));
    f[n] = s < 0.0 ? -s : 0.0;
  }
  return f;
}

// Nodes of the mask with d < delta (grid indices, ascending).
inline std::vector<int> collar(const Field& dist, const DomainMask& mask, double delta) {
  if (!(delta > mask.grid().h()))
    throw Error("geometry", "INVALID_ARGUMENT", "collar width must exceed the grid spacing");
  std::vector<int> out;
  for (int n : mask.nodes())
    if (dist[n] < delta) out.push_back(n);
  if (out.empty()) throw Error("geometry", "EMPTY_COLLAR", "no node within the collar");
  return out;
}

// Restriction of a grid field to the mask's unknowns, and back.
inline std::vector<double> gather(const DomainMask& mask, const Field& f) {
  std::vector<double> v(mask.unknowns());
  for (int u = 0; u < mask.unknowns(); ++u) v[u] = f[mask.node_of(u)];
  return v;
}
inline Field scatter(const DomainMask& mask, const std::vector<double>& v) {
  Field f(mask.grid());
  for (int u = 0; u < mask.unknowns(); ++u) f[mask.node_of(u)] = v[u];
  return f;
}

}  // namespace oasis
