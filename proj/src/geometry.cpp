#include "cclf/geometry.hpp"

#include "cclf/common.hpp"
#include "cclf/lp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace cclf::geometry {

namespace {

double point_set_mismatch(const std::vector<Eigen::VectorXd>& a,
                          const std::vector<Eigen::VectorXd>& b) {
  if (a.empty() || b.empty()) return a.empty() && b.empty() ? 0.0 : 1e30;
  double worst = 0.0;
  for (const auto& p : a) {
    double best = 1e30;
    for (const auto& q : b) best = std::min(best, (p - q).norm());
    worst = std::max(worst, best);
  }
  for (const auto& q : b) {
    double best = 1e30;
    for (const auto& p : a) best = std::min(best, (q - p).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

// ---------------------------------------------------------------- 2D hull

std::vector<HullFacet> convex_hull_2d(const std::vector<Eigen::VectorXd>& pts) {
  int n = int(pts.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    if (pts[i][0] != pts[j][0]) return pts[i][0] < pts[j][0];
    return pts[i][1] < pts[j][1];
  });
  auto cross = [&](int o, int a, int b) {
    return (pts[a][0] - pts[o][0]) * (pts[b][1] - pts[o][1]) -
           (pts[a][1] - pts[o][1]) * (pts[b][0] - pts[o][0]);
  };
  double scale = 0.0;
  for (const auto& p : pts) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  double eps = kHullTol * (1.0 + scale * scale);

  std::vector<int> hull;
  for (int pass = 0; pass < 2; ++pass) {
    std::size_t start = hull.size();
    for (int idx : order) {
      while (hull.size() >= start + 2 &&
             cross(hull[hull.size() - 2], hull[hull.size() - 1], idx) <= eps)
        hull.pop_back();
      hull.push_back(idx);
    }
    hull.pop_back();
    std::reverse(order.begin(), order.end());
  }
  if (hull.size() < 3) fail(ErrorCode::Numerical, "degenerate point set");

  std::vector<HullFacet> facets;
  for (std::size_t k = 0; k < hull.size(); ++k) {
    int a = hull[k], b = hull[(k + 1) % hull.size()];
    Eigen::Vector2d d = (pts[b] - pts[a]).head<2>();
    Eigen::VectorXd nrm(2);
    nrm << d[1], -d[0];  // outward for counterclockwise hulls
    double len = nrm.norm();
    if (len < eps) continue;
    nrm /= len;
    HullFacet fctt;
    fctt.normal = nrm;
    fctt.offset = nrm.dot(pts[a]);
    for (int i = 0; i < n; ++i)
      if (std::abs(nrm.dot(pts[i]) - fctt.offset) <= eps) fctt.incident.push_back(i);
    facets.push_back(std::move(fctt));
  }
  // orientation check: all points on the inner side
  for (const auto& fc : facets)
    for (const auto& p : pts)
      if (fc.normal.dot(p) > fc.offset + 1e-6 * (1.0 + scale))
        fail(ErrorCode::Numerical, "hull orientation failure");
  return facets;
}

// ---------------------------------------------------------------- 3D hull

struct Face {
  int a, b, c;
  Eigen::Vector3d n;
  double off;
  std::vector<int> conflicts;
  bool alive = true;
};

std::vector<HullFacet> convex_hull_3d(const std::vector<Eigen::VectorXd>& pts) {
  int np = int(pts.size());
  double scale = 0.0;
  for (const auto& p : pts) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  double eps = kHullTol * (1.0 + scale);

  auto at = [&](int i) { return Eigen::Vector3d(pts[i][0], pts[i][1], pts[i][2]); };

  // initial simplex: spread extremes
  int i0 = 0;
  for (int i = 1; i < np; ++i)
    if (pts[i][0] < pts[i0][0] - 1e-15 ||
        (pts[i][0] == pts[i0][0] && i < i0))
      i0 = i;
  int i1 = -1;
  double best = -1.0;
  for (int i = 0; i < np; ++i) {
    double d = (at(i) - at(i0)).norm();
    if (d > best + 1e-15) { best = d; i1 = i; }
  }
  if (best < eps) fail(ErrorCode::Numerical, "degenerate point set");
  int i2 = -1;
  best = -1.0;
  Eigen::Vector3d u = (at(i1) - at(i0)).normalized();
  for (int i = 0; i < np; ++i) {
    Eigen::Vector3d w = at(i) - at(i0);
    double d = (w - u * u.dot(w)).norm();
    if (d > best + 1e-15) { best = d; i2 = i; }
  }
  if (best < eps) fail(ErrorCode::Numerical, "degenerate point set");
  Eigen::Vector3d nrm0 = (at(i1) - at(i0)).cross(at(i2) - at(i0)).normalized();
  int i3 = -1;
  best = -1.0;
  for (int i = 0; i < np; ++i) {
    double d = std::abs(nrm0.dot(at(i) - at(i0)));
    if (d > best + 1e-15) { best = d; i3 = i; }
  }
  if (best < eps) fail(ErrorCode::Numerical, "degenerate point set");

  Eigen::Vector3d interior = (at(i0) + at(i1) + at(i2) + at(i3)) / 4.0;

  std::vector<Face> faces;
  auto make_face = [&](int a, int b, int c) {
    Face f;
    f.a = a; f.b = b; f.c = c;
    f.n = (at(b) - at(a)).cross(at(c) - at(a));
    double ln = f.n.norm();
    if (ln < eps * eps) fail(ErrorCode::Numerical, "degenerate point set");
    f.n /= ln;
    f.off = f.n.dot(at(a));
    if (f.n.dot(interior) > f.off) {  // flip outward
      std::swap(f.b, f.c);
      f.n = -f.n;
      f.off = -f.off;
    }
    return f;
  };
  faces.push_back(make_face(i0, i1, i2));
  faces.push_back(make_face(i0, i1, i3));
  faces.push_back(make_face(i0, i2, i3));
  faces.push_back(make_face(i1, i2, i3));
  for (int i = 0; i < np; ++i) {
    if (i == i0 || i == i1 || i == i2 || i == i3) continue;
    for (auto& f : faces)
      if (f.n.dot(at(i)) - f.off > eps) { f.conflicts.push_back(i); break; }
  }

  for (;;) {
    int fi = -1;
    for (int k = 0; k < int(faces.size()); ++k)
      if (faces[k].alive && !faces[k].conflicts.empty()) { fi = k; break; }
    if (fi < 0) break;
    // farthest conflict point of that face
    int p = -1;
    double d = -1.0;
    for (int i : faces[fi].conflicts) {
      double di = faces[fi].n.dot(at(i)) - faces[fi].off;
      if (di > d + 1e-15) { d = di; p = i; }
    }
    // visible faces
    std::vector<int> visible;
    std::vector<char> is_visible(faces.size(), 0);
    for (int k = 0; k < int(faces.size()); ++k) {
      if (!faces[k].alive) continue;
      if (faces[k].n.dot(at(p)) - faces[k].off > eps) {
        visible.push_back(k);
        is_visible[k] = 1;
      }
    }
    // horizon: directed edges of visible faces whose reverse is not visible
    std::set<std::pair<int, int>> vis_edges;
    for (int k : visible) {
      const Face& f = faces[k];
      vis_edges.insert({f.a, f.b});
      vis_edges.insert({f.b, f.c});
      vis_edges.insert({f.c, f.a});
    }
    std::vector<std::pair<int, int>> horizon;
    for (const auto& e : vis_edges)
      if (!vis_edges.count({e.second, e.first})) horizon.push_back(e);

    std::vector<int> orphan;
    for (int k : visible) {
      faces[k].alive = false;
      for (int i : faces[k].conflicts)
        if (i != p) orphan.push_back(i);
      faces[k].conflicts.clear();
    }
    std::sort(orphan.begin(), orphan.end());
    orphan.erase(std::unique(orphan.begin(), orphan.end()), orphan.end());

    for (const auto& e : horizon) {
      Face nf = make_face(e.first, e.second, p);
      for (int i : orphan)
        if (nf.n.dot(at(i)) - nf.off > eps) nf.conflicts.push_back(i);
      faces.push_back(std::move(nf));
    }
  }

  std::vector<HullFacet> out;
  for (const auto& f : faces) {
    if (!f.alive) continue;
    HullFacet hf;
    hf.normal = Eigen::VectorXd(3);
    hf.normal << f.n[0], f.n[1], f.n[2];
    hf.offset = f.off;
    for (int i = 0; i < np; ++i)
      if (std::abs(f.n.dot(at(i)) - f.off) <= eps) hf.incident.push_back(i);
    out.push_back(std::move(hf));
  }
  return out;
}

bool positively_spans(const Eigen::MatrixXd& dirs) {
  int d = int(dirs.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dirs);
  if (svd.rank() < d) return false;
  // Stiemke: rows positively span iff some strictly positive combination is zero
  lp::LinearProgram prob;
  prob.num_vars = int(dirs.rows());
  prob.num_rows = d;
  prob.c = Eigen::VectorXd::Zero(prob.num_vars);
  prob.b = Eigen::VectorXd::Zero(d);
  prob.sense.assign(d, lp::RowSense::Equal);
  prob.lo = Eigen::VectorXd::Constant(prob.num_vars, 1.0);
  prob.hi = Eigen::VectorXd::Constant(prob.num_vars, 1e6);
  for (int i = 0; i < int(dirs.rows()); ++i)
    for (int k = 0; k < d; ++k)
      if (dirs(i, k) != 0.0) prob.add_entry(k, i, dirs(i, k));
  auto sol = lp::solve_lp(prob);
  return sol.status == lp::LpStatus::Optimal;
}

}  // namespace

// ------------------------------------------------------------ Template

Eigen::MatrixXd Template::facet_matrix() const {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(f(), n());
  G.topLeftCorner(f1, n_x) = G1;
  G.bottomLeftCorner(f2, n_x) = G2;
  G.bottomRightCorner(f2, 1) = h2;
  return G;
}

Eigen::VectorXd Template::edge_residual(const Eigen::VectorXd& z) const {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(e_rows);
  for (const auto& t : edges) r[t.row] += t.value * z[t.col];
  return r;
}

std::vector<Eigen::VectorXd> Template::vertex_points(const Eigen::VectorXd& z) const {
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(vertex_maps.size());
  for (const auto& vm : vertex_maps) pts.push_back(vm.point(z));
  return pts;
}

void Template::check_invariants() const {
  if (int(G1.rows()) != f1 || int(G2.rows()) != f2 || int(h2.size()) != f2)
    fail(ErrorCode::Numerical, "template: facet dimensions inconsistent");
  for (int j = 0; j < f2; ++j)
    if (h2[j] > -kFacetEps) fail(ErrorCode::Numerical, "template: non-lower facet");
  if (!positively_spans(G1))
    fail(ErrorCode::Numerical, "template: domain directions do not positively span");
  for (const auto& vm : vertex_maps) {
    if (int(vm.active.size()) != n())
      fail(ErrorCode::Numerical, "template: active set size mismatch");
    bool has_lower = false;
    for (int a : vm.active) has_lower = has_lower || a >= f1;
    if (!has_lower) fail(ErrorCode::Numerical, "template: vertex without lower facet");
  }
  if (int(adjacency.size()) != num_vertices())
    fail(ErrorCode::Numerical, "template: adjacency size mismatch");
  for (int i = 0; i < num_vertices(); ++i)
    for (int j : adjacency[i]) {
      if (j < 0 || j >= num_vertices() || j == i)
        fail(ErrorCode::Numerical, "template: adjacency index out of range");
      if (!std::binary_search(adjacency[j].begin(), adjacency[j].end(), i))
        fail(ErrorCode::Numerical, "template: adjacency not symmetric");
    }
}

// ------------------------------------------------------------ operations

Eigen::MatrixXd polygon_directions(int k) {
  if (k < 3) fail(ErrorCode::Usage, "insufficient directions");
  Eigen::MatrixXd d(k, 2);
  for (int j = 0; j < k; ++j) {
    double a = 2.0 * M_PI * double(j) / double(k);
    d(j, 0) = std::cos(a);
    d(j, 1) = std::sin(a);
  }
  return d;
}

std::vector<HullFacet> convex_hull(const std::vector<Eigen::VectorXd>& points) {
  if (points.empty()) fail(ErrorCode::Usage, "degenerate point set");
  int dim = int(points[0].size());
  for (const auto& p : points)
    if (int(p.size()) != dim) fail(ErrorCode::Usage, "mixed point dimensions");
  if (int(points.size()) < dim + 1) fail(ErrorCode::Numerical, "degenerate point set");
  if (dim == 2) return convex_hull_2d(points);
  if (dim == 3) return convex_hull_3d(points);
  fail(ErrorCode::Usage, "convex hull supports dimensions 2 and 3");
}

std::vector<VertexMap> compute_vertex_maps(const Eigen::MatrixXd& facet_matrix,
                                           const std::vector<std::vector<int>>& active_sets) {
  int n = int(facet_matrix.cols());
  std::vector<VertexMap> maps;
  maps.reserve(active_sets.size());
  for (const auto& act : active_sets) {
    if (int(act.size()) != n) fail(ErrorCode::Numerical, "active set size mismatch");
    Eigen::MatrixXd A(n, n);
    for (int k = 0; k < n; ++k) A.row(k) = facet_matrix.row(act[k]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) fail(ErrorCode::Numerical, "degenerate vertex");
    Eigen::MatrixXd inv = lu.inverse();
    double cond = A.cwiseAbs().rowwise().sum().maxCoeff() *
                  inv.cwiseAbs().rowwise().sum().maxCoeff();
    if (!(cond < kCondLimit)) fail(ErrorCode::Numerical, "degenerate vertex");
    VertexMap vm;
    vm.inv = inv;
    vm.active = act;
    maps.push_back(std::move(vm));
  }
  return maps;
}

std::vector<EdgeTriplet> compute_edge_matrix(const Eigen::MatrixXd& facet_matrix,
                                             const std::vector<VertexMap>& vertex_maps,
                                             int* num_rows_out) {
  int n = int(facet_matrix.cols());
  int f = int(facet_matrix.rows());
  int v = int(vertex_maps.size());

  // edge adjacency: vertices sharing n-1 facets
  std::vector<std::vector<std::pair<int, double>>> rows;
  for (int i = 0; i < v; ++i) {
    for (int j = 0; j < v; ++j) {
      if (i == j) continue;
      const auto& ai = vertex_maps[i].active;
      const auto& aj = vertex_maps[j].active;
      std::vector<int> only_j;
      int shared = 0;
      for (int x : aj) {
        if (std::binary_search(ai.begin(), ai.end(), x))
          ++shared;
        else
          only_j.push_back(x);
      }
      if (shared != n - 1 || only_j.size() != 1) continue;
      int d = only_j[0];
      // row(z) = G_d . P_i(z) - z_d over columns active_i and d
      Eigen::RowVectorXd gd = facet_matrix.row(d);
      Eigen::RowVectorXd coef = gd * vertex_maps[i].inv;  // on z[active_i]
      std::vector<std::pair<int, double>> row;
      for (int k = 0; k < n; ++k) {
        int col = vertex_maps[i].active[k];
        double val = coef[k];
        if (col == d) val -= 1.0;
        if (val != 0.0) row.push_back({col, val});
      }
      bool has_d = false;
      for (auto& [c, val] : row) has_d = has_d || c == d;
      if (!has_d) row.push_back({d, -1.0});
      std::sort(row.begin(), row.end());
      double nrm = 0.0;
      for (auto& [c, val] : row) nrm += val * val;
      nrm = std::sqrt(nrm);
      if (nrm < 1e-12) continue;  // identically zero row
      for (auto& [c, val] : row) val /= nrm;
      rows.push_back(std::move(row));
    }
  }

  // dedupe within 1e-12
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k].first != b[k].first) return a[k].first < b[k].first;
      if (a[k].second != b[k].second) return a[k].second < b[k].second;
    }
    return false;
  });
  auto same = [](const std::vector<std::pair<int, double>>& a,
                 const std::vector<std::pair<int, double>>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k].first != b[k].first) return false;
      if (std::abs(a[k].second - b[k].second) > 1e-12) return false;
    }
    return true;
  };
  std::vector<EdgeTriplet> trips;
  int r = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k > 0 && same(rows[k], rows[k - 1])) continue;
    for (auto& [c, val] : rows[k]) {
      if (c < 0 || c >= f) fail(ErrorCode::Numerical, "edge matrix column out of range");
      trips.push_back({r, c, val});
    }
    ++r;
  }
  if (num_rows_out) *num_rows_out = r;
  return trips;
}

std::vector<Eigen::VectorXd> enumerate_hrep_vertices(const Eigen::MatrixXd& facet_matrix,
                                                     const Eigen::VectorXd& z, double tol) {
  int f = int(facet_matrix.rows());
  int n = int(facet_matrix.cols());
  double zscale = 1.0 + z.cwiseAbs().maxCoeff();
  double feas_tol = tol * zscale * 10.0;
  std::vector<Eigen::VectorXd> found;

  auto check_and_add = [&](const Eigen::VectorXd& p) {
    for (int r = 0; r < f; ++r)
      if (facet_matrix.row(r).dot(p) > z[r] + feas_tol) return;
    found.push_back(p);
  };

  if (n == 3) {
    for (int a = 0; a < f; ++a) {
      Eigen::Vector3d ra = facet_matrix.row(a).transpose();
      for (int b = a + 1; b < f; ++b) {
        Eigen::Vector3d rb = facet_matrix.row(b).transpose();
        Eigen::Vector3d cab = ra.cross(rb);
        for (int c = b + 1; c < f; ++c) {
          Eigen::Vector3d rc = facet_matrix.row(c).transpose();
          double det = cab.dot(rc);
          if (std::abs(det) < 1e-9) continue;  // near-dependent normals
          // Cramer: columns of the inverse are scaled cross products
          Eigen::Vector3d p =
              (z[a] * rb.cross(rc) + z[b] * rc.cross(ra) + z[c] * cab) / det;
          check_and_add(p);
        }
      }
    }
  } else if (n == 2) {
    for (int a = 0; a < f; ++a)
      for (int b = a + 1; b < f; ++b) {
        Eigen::Matrix2d M;
        M.row(0) = facet_matrix.row(a);
        M.row(1) = facet_matrix.row(b);
        if (std::abs(M.determinant()) < 1e-9) continue;
        Eigen::Vector2d p = M.inverse() * Eigen::Vector2d(z[a], z[b]);
        check_and_add(Eigen::VectorXd(p));
      }
  } else {
    fail(ErrorCode::Usage, "vertex enumeration supports dimensions 2 and 3");
  }

  // dedupe by distance
  double dtol = 1e-8 * zscale;
  std::sort(found.begin(), found.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (int k = 0; k < a.size(); ++k)
      if (a[k] != b[k]) return a[k] < b[k];
    return false;
  });
  std::vector<Eigen::VectorXd> uniq;
  for (const auto& p : found) {
    bool dup = false;
    for (auto it = uniq.rbegin(); it != uniq.rend(); ++it) {
      if (p[0] - (*it)[0] > dtol) break;
      if ((p - *it).norm() <= dtol) { dup = true; break; }
    }
    if (!dup) uniq.push_back(p);
  }
  return uniq;
}

ValidationReport validate_template(const Template& t, const Eigen::VectorXd& z) {
  ValidationReport rep;
  if (int(z.size()) != t.f()) {
    rep.message = "parameter length mismatch";
    return rep;
  }
  Eigen::VectorXd ez = t.edge_residual(z);
  rep.max_ez = ez.size() > 0 ? ez.maxCoeff() : 0.0;
  double eps = 1e-9 * (1.0 + z.cwiseAbs().maxCoeff());
  rep.ez_ok = rep.max_ez <= eps;
  if (!rep.ez_ok) {
    rep.message = "configuration constraint Ez <= 0 violated";
    return rep;
  }
  auto oracle = enumerate_hrep_vertices(t.facet_matrix(), z);
  auto pts = t.vertex_points(z);
  rep.oracle_vertices = int(oracle.size());
  rep.template_vertices = int(pts.size());
  rep.mismatch = point_set_mismatch(pts, oracle);
  rep.pass = rep.mismatch < 1e-7;
  if (!rep.pass) rep.message = "vertex sets mismatch";
  return rep;
}

// ------------------------------------------------------------ builder

namespace {

// strictly interior configuration parameter via a small LP:
// max t  s.t.  E z + t <= 0, |z - z_ref| <= delta
Eigen::VectorXd interior_parameter(const std::vector<EdgeTriplet>& edges, int e_rows,
                                   const Eigen::VectorXd& z_ref) {
  int f = int(z_ref.size());
  double delta = 0.05 * (1.0 + z_ref.cwiseAbs().maxCoeff());
  lp::LinearProgram prob;
  prob.num_vars = f + 1;
  prob.num_rows = e_rows;
  prob.c = Eigen::VectorXd::Zero(f + 1);
  prob.c[f] = -1.0;  // maximize t
  prob.b = Eigen::VectorXd::Zero(e_rows);
  prob.sense.assign(e_rows, lp::RowSense::LessEqual);
  prob.lo = Eigen::VectorXd(f + 1);
  prob.hi = Eigen::VectorXd(f + 1);
  for (int j = 0; j < f; ++j) {
    prob.lo[j] = z_ref[j] - delta;
    prob.hi[j] = z_ref[j] + delta;
  }
  prob.lo[f] = 0.0;
  prob.hi[f] = delta;
  for (const auto& tr : edges) prob.add_entry(tr.row, tr.col, tr.value);
  for (int r = 0; r < e_rows; ++r) prob.add_entry(r, f, 1.0);
  auto sol = lp::solve_lp(prob);
  if (sol.status != lp::LpStatus::Optimal || sol.x[f] < 1e-10)
    fail(ErrorCode::Numerical, "template configuration region has empty interior");
  return sol.x.head(f);
}

}  // namespace

Template build_template(const Eigen::MatrixXd& domain_dirs,
                        const std::vector<Eigen::Vector2d>& ref_points) {
  if (domain_dirs.cols() != 2)
    fail(ErrorCode::Usage, "bundled template generator targets state dimension 2");
  int f1 = int(domain_dirs.rows());
  if (f1 < 3) fail(ErrorCode::Usage, "insufficient directions");
  if (int(ref_points.size()) < 3) fail(ErrorCode::Usage, "need at least 3 reference points");

  Eigen::MatrixXd dirs = domain_dirs;
  for (int j = 0; j < f1; ++j) {
    double nrm = dirs.row(j).norm();
    if (nrm < 1e-12) fail(ErrorCode::Usage, "zero domain direction");
    dirs.row(j) /= nrm;
  }
  if (!positively_spans(dirs))
    fail(ErrorCode::Numerical, "template: domain directions do not positively span");
  for (const auto& p : ref_points)
    for (int j = 0; j < f1; ++j)
      if (dirs.row(j).dot(p) >= 1.0 - 1e-9)
        fail(ErrorCode::Usage, "reference point outside the unit direction cone");

  // lift onto the paraboloid and take the lower hull
  std::vector<Eigen::VectorXd> lifted;
  for (const auto& p : ref_points) {
    Eigen::VectorXd q(3);
    q << p[0], p[1], p.squaredNorm();
    lifted.push_back(q);
  }

  std::vector<Eigen::VectorXd> lower_normals;
  std::vector<double> lower_offsets;
  if (lifted.size() == 3) {
    // a single triangle has no 3D hull; its plane is the one lower facet
    Eigen::Vector3d q0(lifted[0][0], lifted[0][1], lifted[0][2]);
    Eigen::Vector3d q1(lifted[1][0], lifted[1][1], lifted[1][2]);
    Eigen::Vector3d q2(lifted[2][0], lifted[2][1], lifted[2][2]);
    Eigen::Vector3d nrm = (q1 - q0).cross(q2 - q0);
    if (nrm.norm() < 1e-12) fail(ErrorCode::Numerical, "degenerate point set");
    nrm.normalize();
    if (nrm[2] > 0.0) nrm = -nrm;
    if (nrm[2] > -kFacetEps) fail(ErrorCode::Numerical, "non-lower facet");
    Eigen::VectorXd nv(3);
    nv << nrm[0], nrm[1], nrm[2];
    lower_normals.push_back(nv);
    lower_offsets.push_back(nrm.dot(q0));
  } else {
    auto hull = convex_hull(lifted);
    for (const auto& hf : hull) {
      double h = hf.normal[2];
      if (h >= 0.0) continue;
      if (h > -kFacetEps) fail(ErrorCode::Numerical, "non-lower facet");
      if (int(hf.incident.size()) != 3)
        fail(ErrorCode::Numerical, "degenerate point set: non-simplicial lower facet");
      lower_normals.push_back(hf.normal);
      lower_offsets.push_back(hf.offset);
    }
  }
  int f2 = int(lower_normals.size());
  if (f2 < 1) fail(ErrorCode::Numerical, "degenerate point set");
  for (int a = 0; a < f2; ++a)
    for (int b = a + 1; b < f2; ++b)
      if ((lower_normals[a] - lower_normals[b]).norm() < 1e-9 &&
          std::abs(lower_offsets[a] - lower_offsets[b]) < 1e-9)
        fail(ErrorCode::Numerical, "degenerate point set: coplanar lower facets");

  Template t;
  t.n_x = 2;
  t.f1 = f1;
  t.f2 = f2;
  t.G1 = dirs;
  t.G2.resize(f2, 2);
  t.h2.resize(f2);
  for (int j = 0; j < f2; ++j) {
    t.G2.row(j) = lower_normals[j].head(2);
    t.h2[j] = lower_normals[j][2];
  }
  t.z_ref.resize(t.f());
  for (int j = 0; j < f1; ++j) {
    double sup = -1e30;
    for (const auto& p : ref_points) sup = std::max(sup, dirs.row(j).dot(p));
    t.z_ref[j] = sup;
  }
  for (int j = 0; j < f2; ++j) t.z_ref[f1 + j] = lower_offsets[j];

  Eigen::MatrixXd G = t.facet_matrix();

  // non-redundancy of the walls at the reference parameter: each wall must
  // carry at least two corners of the domain polygon
  {
    Eigen::MatrixXd Gd = t.G1;
    auto corners = enumerate_hrep_vertices(Gd, t.z_ref.head(f1));
    std::vector<int> carried(f1, 0);
    double tol = 1e-7 * (1.0 + t.z_ref.cwiseAbs().maxCoeff());
    for (const auto& c : corners)
      for (int j = 0; j < f1; ++j)
        if (std::abs(Gd.row(j).dot(c) - t.z_ref[j]) <= tol) carried[j]++;
    for (int j = 0; j < f1; ++j)
      if (carried[j] < 2) fail(ErrorCode::Numerical, "redundant domain facet");
  }

  // Reference vertices can be degenerate (more than n active facets, e.g. a
  // lifted point carrying many lower-hull triangles). The template needs
  // simple vertices, so the configuration is read off at a small inward
  // perturbation of z_ref, where every vertex splits generically. The
  // perturbed parameter itself certifies that the configuration region
  // {Ez <= 0} has nonempty interior.
  double zscale = 1.0 + t.z_ref.cwiseAbs().maxCoeff();
  double act_tol = 1e-8 * zscale;
  std::vector<std::vector<int>> active_sets;
  bool simple = false;
  for (std::uint64_t attempt = 1; attempt <= 8 && !simple; ++attempt) {
    double eps_pert = 1e-4 * zscale;
    CounterRng rng(attempt, 17);
    Eigen::VectorXd z_pert = t.z_ref;
    for (int r = 0; r < t.f(); ++r) z_pert[r] -= eps_pert * (0.5 + 0.5 * rng.next_double());
    auto positions = enumerate_hrep_vertices(G, z_pert);
    if (positions.empty()) continue;
    active_sets.clear();
    simple = true;
    for (const auto& q : positions) {
      std::vector<int> act;
      for (int r = 0; r < t.f(); ++r)
        if (std::abs(G.row(r).dot(q) - z_pert[r]) <= act_tol) act.push_back(r);
      if (int(act.size()) != 3) {
        simple = false;
        break;
      }
      bool has_lower = false;
      for (int a : act) has_lower = has_lower || a >= f1;
      if (!has_lower) fail(ErrorCode::Numerical, "reference vertex without lower facet");
      active_sets.push_back(act);
    }
    if (simple) {
      // every facet must stay supporting under the perturbation
      std::vector<int> carried(t.f(), 0);
      for (const auto& act : active_sets)
        for (int a : act) carried[a]++;
      for (int r = 0; r < t.f(); ++r)
        if (carried[r] < 2) simple = false;
    }
  }
  if (!simple)
    fail(ErrorCode::Numerical, "could not resolve the reference configuration into simple vertices");

  t.vertex_maps = compute_vertex_maps(G, active_sets);
  t.edges = compute_edge_matrix(G, t.vertex_maps, &t.e_rows);
  t.z_int = interior_parameter(t.edges, t.e_rows, t.z_ref);

  // lower-facet vertex lists, ordered cyclically at the interior parameter
  int v = t.num_vertices();
  t.facet_vertices.assign(f2, {});
  for (int i = 0; i < v; ++i)
    for (int a : t.vertex_maps[i].active)
      if (a >= f1) t.facet_vertices[a - f1].push_back(i);
  for (int r = 0; r < f2; ++r) {
    auto& vs = t.facet_vertices[r];
    if (int(vs.size()) < 3)
      fail(ErrorCode::Numerical, "lower facet with fewer than 3 template vertices");
    std::vector<Eigen::Vector2d> pos;
    Eigen::Vector2d centroid(0, 0);
    for (int i : vs) {
      Eigen::Vector2d x = t.vertex_maps[i].state(t.z_int);
      pos.push_back(x);
      centroid += x;
    }
    centroid /= double(vs.size());
    std::vector<std::pair<double, int>> ang;
    for (std::size_t k = 0; k < vs.size(); ++k)
      ang.push_back({std::atan2(pos[k][1] - centroid[1], pos[k][0] - centroid[0]), vs[k]});
    std::sort(ang.begin(), ang.end());
    vs.clear();
    for (auto& [a, i] : ang) vs.push_back(i);
  }

  // N_i: vertices sharing a lower facet
  t.adjacency.assign(v, {});
  for (int r = 0; r < f2; ++r)
    for (int i : t.facet_vertices[r])
      for (int j : t.facet_vertices[r])
        if (i != j) t.adjacency[i].push_back(j);
  for (auto& nb : t.adjacency) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }

  t.generator = "custom";
  t.check_invariants();

  auto rep_ref = validate_template(t, t.z_ref);
  if (!rep_ref.pass)
    fail(ErrorCode::Numerical,
         "template validation failed at z_ref: " + rep_ref.message +
             " (mismatch " + std::to_string(rep_ref.mismatch) + ")");
  auto rep_int = validate_template(t, t.z_int);
  if (!rep_int.pass)
    fail(ErrorCode::Numerical,
         "template validation failed at interior parameter: " + rep_int.message +
             " (mismatch " + std::to_string(rep_int.mismatch) + ")");
  return t;
}

std::vector<Eigen::Vector2d> ring_cloud(const RingSpec& spec) {
  if (spec.ring_sizes.empty()) fail(ErrorCode::Usage, "ring spec: no rings");
  if (spec.ring_sizes.back() != spec.f1)
    fail(ErrorCode::Usage, "ring spec: outer ring size must equal f1");
  int R = int(spec.ring_sizes.size());
  std::vector<Eigen::Vector2d> pts;
  if (spec.include_center) pts.push_back(Eigen::Vector2d::Zero());
  for (int r = 0; r < R; ++r) {
    int m = spec.ring_sizes[r];
    if (m < 3) fail(ErrorCode::Usage, "ring spec: ring size below 3");
    double rel =
        spec.ring_radii.empty() ? double(r + 1) / double(R) : spec.ring_radii[std::size_t(r)];
    double rad = spec.radius * rel;
    bool outer = (r == R - 1);
    // outermost ring staggered half a step against the domain directions so
    // that each wall passes through two consecutive ring points
    double phase = outer ? 0.5 : 0.5 * double((R - 1 - r) % 2);
    CounterRng rng(spec.seed, std::uint64_t(r) + 101);
    for (int j = 0; j < m; ++j) {
      double a = 2.0 * M_PI * (double(j) + phase) / double(m);
      double rr = rad;
      if (!outer && spec.jitter > 0.0) {
        a += spec.jitter * (2.0 * M_PI / double(m)) * (2.0 * rng.at(2 * j) * 0x1.0p-64 - 1.0);
        rr *= 1.0 + 0.5 * spec.jitter * (2.0 * rng.at(2 * j + 1) * 0x1.0p-64 - 1.0);
      }
      pts.push_back(Eigen::Vector2d(rr * std::cos(a), rr * std::sin(a)));
    }
  }
  return pts;
}

Template make_ring_template(const RingSpec& spec) {
  Eigen::MatrixXd dirs = polygon_directions(spec.f1);
  auto cloud = ring_cloud(spec);
  // normalize scale: the builder wants points strictly inside {dirs x <= 1}
  double sup = 0.0;
  for (const auto& p : cloud)
    for (int j = 0; j < spec.f1; ++j) sup = std::max(sup, dirs.row(j).dot(p));
  if (sup >= 1.0) {
    double s = 0.98 / sup;
    for (auto& p : cloud) p *= s;
  }
  Template t = build_template(dirs, cloud);
  t.generator = "ring";
  t.ring_sizes = spec.ring_sizes;
  t.seed = spec.seed;
  return t;
}

}  // namespace cclf::geometry
