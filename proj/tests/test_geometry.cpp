#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cclf/common.hpp"
#include "cclf/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <set>
#include <vector>

using namespace cclf;
using namespace cclf::geometry;

namespace {

// random parameter with Ez <= 0, found by shrinking a perturbation toward z_int
Eigen::VectorXd random_feasible_z(const Template& t, CounterRng& rng, double spread = 0.2) {
  Eigen::VectorXd dz(t.f());
  for (int k = 0; k < t.f(); ++k) dz[k] = spread * (2.0 * rng.next_double() - 1.0);
  Eigen::VectorXd z = t.z_int + dz;
  for (int tries = 0; tries < 60; ++tries) {
    Eigen::VectorXd ez = t.edge_residual(z);
    if (ez.size() == 0 || ez.maxCoeff() <= 0.0) return z;
    z = t.z_int + 0.5 * (z - t.z_int);
  }
  return t.z_int;
}

// brute-force hull facet oracle: all point triples that support the set
int brute_force_hull_facets_3d(const std::vector<Eigen::VectorXd>& pts) {
  int n = int(pts.size());
  std::set<std::vector<int>> facets;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int c = b + 1; c < n; ++c) {
        Eigen::Vector3d pa(pts[a][0], pts[a][1], pts[a][2]);
        Eigen::Vector3d pb(pts[b][0], pts[b][1], pts[b][2]);
        Eigen::Vector3d pc(pts[c][0], pts[c][1], pts[c][2]);
        Eigen::Vector3d nrm = (pb - pa).cross(pc - pa);
        if (nrm.norm() < 1e-12) continue;
        nrm.normalize();
        double off = nrm.dot(pa);
        int above = 0, below = 0;
        for (int i = 0; i < n; ++i) {
          Eigen::Vector3d p(pts[i][0], pts[i][1], pts[i][2]);
          double d = nrm.dot(p) - off;
          if (d > 1e-9) ++above;
          if (d < -1e-9) ++below;
        }
        if (above == 0 || below == 0) {
          std::vector<int> key;
          for (int i = 0; i < n; ++i) {
            Eigen::Vector3d p(pts[i][0], pts[i][1], pts[i][2]);
            if (std::abs(nrm.dot(p) - off) <= 1e-9) key.push_back(i);
          }
          if (above == 0) key.push_back(-1);  // orientation marker
          facets.insert(key);
        }
      }
  return int(facets.size());
}

}  // namespace

TEST_CASE("polygon_directions basics") {
  auto d4 = polygon_directions(4);
  CHECK(d4(0, 0) == doctest::Approx(1.0));
  CHECK(d4(0, 1) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(d4(1, 0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(d4(1, 1) == doctest::Approx(1.0));
  CHECK(d4(2, 0) == doctest::Approx(-1.0));
  CHECK(d4(3, 1) == doctest::Approx(-1.0));

  auto d3 = polygon_directions(3);
  CHECK(d3(1, 0) == doctest::Approx(std::cos(2.0 * M_PI / 3.0)));
  CHECK(d3(1, 1) == doctest::Approx(std::sin(2.0 * M_PI / 3.0)));
  Eigen::Vector2d sum = d3.colwise().sum().transpose();
  CHECK(sum.norm() <= 1e-12);

  auto d48 = polygon_directions(48);
  CHECK(d48.rows() == 48);
  for (int j = 0; j < 48; ++j) CHECK(d48.row(j).norm() == doctest::Approx(1.0));

  CHECK_THROWS_AS(polygon_directions(2), Error);
}

TEST_CASE("convex hull: unit square in 2D") {
  std::vector<Eigen::VectorXd> pts;
  for (auto [x, y] : {std::pair{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}}) {
    Eigen::VectorXd p(2);
    p << x, y;
    pts.push_back(p);
  }
  auto facets = convex_hull(pts);
  CHECK(facets.size() == 4);
  for (const auto& fc : facets) {
    CHECK(fc.incident.size() == 2);
    for (const auto& p : pts) CHECK(fc.normal.dot(p) <= fc.offset + 1e-9);
  }
}

TEST_CASE("convex hull: 3D simplex") {
  std::vector<Eigen::VectorXd> pts(4, Eigen::VectorXd::Zero(3));
  pts[1][0] = 1.0;
  pts[2][1] = 1.0;
  pts[3][2] = 1.0;
  auto facets = convex_hull(pts);
  CHECK(facets.size() == 4);
}

TEST_CASE("convex hull: rotation invariance and triple oracle") {
  CounterRng rng(77, 0);
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd p(3);
    for (;;) {
      for (int k = 0; k < 3; ++k) p[k] = 2.0 * rng.next_double() - 1.0;
      if (p.norm() <= 1.0) break;
    }
    pts.push_back(p);
  }
  auto facets = convex_hull(pts);
  int oracle = brute_force_hull_facets_3d(pts);
  CHECK(int(facets.size()) == oracle);

  // random rotation
  double a = 0.83, b = 0.41, c = 1.97;
  Eigen::Matrix3d Rx, Ry, Rz;
  Rx << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  Ry << std::cos(b), 0, std::sin(b), 0, 1, 0, -std::sin(b), 0, std::cos(b);
  Rz << std::cos(c), -std::sin(c), 0, std::sin(c), std::cos(c), 0, 0, 0, 1;
  Eigen::Matrix3d R = Rz * Ry * Rx;
  std::vector<Eigen::VectorXd> rot;
  for (const auto& p : pts) {
    Eigen::Vector3d q = R * Eigen::Vector3d(p[0], p[1], p[2]);
    Eigen::VectorXd v(3);
    v << q[0], q[1], q[2];
    rot.push_back(v);
  }
  auto facets_rot = convex_hull(rot);
  CHECK(facets.size() == facets_rot.size());
}

TEST_CASE("convex hull rejects degenerate input") {
  std::vector<Eigen::VectorXd> pts(3, Eigen::VectorXd::Zero(2));
  pts[1][0] = 1.0;
  pts[2][0] = 2.0;  // collinear
  CHECK_THROWS_AS(convex_hull(pts), Error);
}

TEST_CASE("vertex map on an axis-aligned active set") {
  Eigen::MatrixXd G(3, 3);
  G << 1, 0, 0, 0, 1, 0, 0, 0, -1;
  auto maps = compute_vertex_maps(G, {{0, 1, 2}});
  REQUIRE(maps.size() == 1);
  Eigen::VectorXd z(3);
  z << 0.3, -0.2, 0.7;
  Eigen::VectorXd p = maps[0].point(z);
  CHECK(p[0] == doctest::Approx(0.3));
  CHECK(p[1] == doctest::Approx(-0.2));
  CHECK(p[2] == doctest::Approx(-0.7));
}

TEST_CASE("single-region simplex template") {
  Eigen::MatrixXd dirs = polygon_directions(3);
  std::vector<Eigen::Vector2d> pts;
  for (int j = 0; j < 3; ++j) {
    double ang = 2.0 * M_PI * (double(j) + 0.5) / 3.0;
    pts.push_back(0.9 * Eigen::Vector2d(std::cos(ang), std::sin(ang)));
  }
  Template t = build_template(dirs, pts);
  CHECK(t.f1 == 3);
  CHECK(t.f2 == 1);
  CHECK(t.num_vertices() == 3);
  for (const auto& vm : t.vertex_maps) {
    int walls = 0, lowers = 0;
    for (int a : vm.active) (a < t.f1 ? walls : lowers)++;
    CHECK(walls == 2);
    CHECK(lowers == 1);
  }
  // E encodes the vertex-vs-opposite-facet conditions; for the symmetric
  // triangle all three coincide (row ~ -(z0+z1+z2)) and dedup keeps one
  CHECK(t.e_rows >= 1);
  CHECK(t.e_rows <= 3);
  CHECK(t.edge_residual(t.z_ref).maxCoeff() < 0.0);
  {
    // the lower facet offset does not enter the configuration condition
    Eigen::VectorXd shifted = t.z_ref;
    shifted[3] += 10.0;
    CHECK((t.edge_residual(shifted) - t.edge_residual(t.z_ref)).norm() <= 1e-12);
  }

  auto rep = validate_template(t, t.z_ref);
  CHECK(rep.pass);
  CHECK(rep.mismatch < 1e-9);

  // z violating Ez <= 0: flag false, no vertex comparison
  Eigen::VectorXd bad = t.z_ref;
  bad[0] -= 2.0;  // pull wall 0 inward past the opposite corner
  auto rep_bad = validate_template(t, bad);
  CHECK(!rep_bad.ez_ok);
  CHECK(!rep_bad.pass);
}

TEST_CASE("center + ring of 8") {
  RingSpec spec;
  spec.f1 = 8;
  spec.ring_sizes = {8};
  spec.seed = 3;
  Template t = make_ring_template(spec);
  CHECK(t.f1 == 8);
  CHECK(t.f2 == 8);  // fan triangulation around the center
  auto rep_ref = validate_template(t, t.z_ref);
  CHECK(rep_ref.pass);
  auto rep_int = validate_template(t, t.z_int);
  CHECK(rep_int.pass);
  // at the interior parameter the configuration is simple: counts agree
  CHECK(rep_int.oracle_vertices == t.num_vertices());
}

TEST_CASE("desk-scale template: random feasible parameters validate") {
  RingSpec spec;
  spec.f1 = 16;
  spec.ring_sizes = {16};
  spec.seed = 7;
  Template t = make_ring_template(spec);
  CHECK(t.f() == 32);

  CounterRng rng(123, 5);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd z = random_feasible_z(t, rng);
    auto rep = validate_template(t, z);
    CHECK(rep.pass);
    if (!rep.pass) break;
  }
}

TEST_CASE("positive homogeneity of vertex maps") {
  RingSpec spec;
  spec.f1 = 8;
  spec.ring_sizes = {8};
  Template t = make_ring_template(spec);
  Eigen::VectorXd z = t.z_int;
  auto p1 = t.vertex_points(z);
  auto p2 = t.vertex_points(2.0 * z);
  for (std::size_t i = 0; i < p1.size(); ++i)
    CHECK((2.0 * p1[i] - p2[i]).norm() <= 1e-12 * (1.0 + p1[i].norm()));
}

TEST_CASE("recession direction: epigraph extends upward") {
  RingSpec spec;
  spec.f1 = 8;
  spec.ring_sizes = {8};
  Template t = make_ring_template(spec);
  Eigen::MatrixXd G = t.facet_matrix();
  auto pts = t.vertex_points(t.z_int);
  for (const auto& p : pts) {
    Eigen::VectorXd up = p;
    up[2] += 5.0;
    for (int r = 0; r < t.f(); ++r)
      CHECK(G.row(r).dot(up) <= t.z_int[r] + 1e-7);
  }
}

TEST_CASE("lower facet vertices and adjacency structure") {
  RingSpec spec;
  spec.f1 = 16;
  spec.ring_sizes = {16};
  Template t = make_ring_template(spec);
  REQUIRE(int(t.facet_vertices.size()) == t.f2);
  for (const auto& vs : t.facet_vertices) CHECK(vs.size() >= 3);
  for (int i = 0; i < t.num_vertices(); ++i) {
    CHECK(!t.adjacency[i].empty());
    for (int j : t.adjacency[i]) {
      bool sym = std::binary_search(t.adjacency[j].begin(), t.adjacency[j].end(), i);
      CHECK(sym);
    }
  }
}
