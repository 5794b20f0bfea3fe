#ifndef CCLF_GEOMETRY_HPP_
#define CCLF_GEOMETRY_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace cclf::geometry {

// Tolerances shared across template construction and validation.
constexpr double kFacetEps = 1e-6;  // minimum magnitude of a lower facet's height normal
constexpr double kHullTol = 1e-9;
constexpr double kCondLimit = 1e12;

enum class FacetKind { Domain, Lower };

/// One facet normal of the lifted epigraph polyhedron. Domain facets are
/// vertical (last entry 0), lower facets point downward (last entry <= -eps).
struct Facet {
  Eigen::VectorXd normal;  // length n_x + 1, unit 2-norm
  FacetKind kind = FacetKind::Domain;
};

/// Maps the template parameter z to one vertex of P(z): the active facet
/// normals stacked as A_i give  (x_i; y_i) = A_i^{-1} z[active].
struct VertexMap {
  Eigen::MatrixXd inv;      // (n x n) = A_i^{-1}
  std::vector<int> active;  // n facet indices, ascending

  // lifted vertex (x, y) in R^{n_x+1}
  Eigen::VectorXd point(const Eigen::VectorXd& z) const {
    Eigen::VectorXd za(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) za[k] = z[active[k]];
    return inv * za;
  }
  // state-space projection V_i z
  Eigen::VectorXd state(const Eigen::VectorXd& z) const {
    Eigen::VectorXd p = point(z);
    return p.head(p.size() - 1);
  }
  // epigraph height s_i' z
  double height(const Eigen::VectorXd& z) const {
    Eigen::VectorXd p = point(z);
    return p[p.size() - 1];
  }
};

struct EdgeTriplet {
  int row = 0, col = 0;
  double value = 0.0;
};

/// Fixed combinatorial template: facet directions plus the configuration
/// (vertex maps, edge matrix, adjacency) that stays valid for all Ez <= 0.
struct Template {
  int n_x = 0;
  int f1 = 0, f2 = 0;
  Eigen::MatrixXd G1;  // f1 x n_x
  Eigen::MatrixXd G2;  // f2 x n_x
  Eigen::VectorXd h2;  // f2, all entries <= -kFacetEps
  std::vector<VertexMap> vertex_maps;
  std::vector<EdgeTriplet> edges;  // E as coordinate triplets, e_rows x f
  int e_rows = 0;
  std::vector<std::vector<int>> adjacency;       // N_i: vertices sharing a lower facet
  std::vector<std::vector<int>> facet_vertices;  // per lower facet, cyclic vertex order
  Eigen::VectorXd z_ref;  // offsets realized by the reference configuration
  Eigen::VectorXd z_int;  // strictly interior parameter (Ez < 0)

  // generator metadata for provenance
  std::string generator;
  std::vector<int> ring_sizes;
  std::uint64_t seed = 0;

  int f() const { return f1 + f2; }
  int n() const { return n_x + 1; }
  int num_vertices() const { return int(vertex_maps.size()); }

  /// Full facet matrix [G1 0; G2 h2], one row per facet, in lifted space.
  Eigen::MatrixXd facet_matrix() const;

  /// E z, evaluated from the triplets.
  Eigen::VectorXd edge_residual(const Eigen::VectorXd& z) const;

  /// All lifted vertex positions at parameter z.
  std::vector<Eigen::VectorXd> vertex_points(const Eigen::VectorXd& z) const;

  void check_invariants() const;  // throws on violated structural invariants
};

/// k unit directions (cos 2*pi*j/k, sin 2*pi*j/k); requires k >= 3.
Eigen::MatrixXd polygon_directions(int k);

struct HullFacet {
  Eigen::VectorXd normal;  // outward, unit 2-norm
  double offset = 0.0;     // normal' p <= offset for all points
  std::vector<int> incident;
};

/// Convex hull facets for point sets in R^2 or R^3.
std::vector<HullFacet> convex_hull(const std::vector<Eigen::VectorXd>& points);

/// Template construction from domain directions and reference points in R^2.
/// The points are lifted onto the paraboloid y = |x|^2; the lower hull gives
/// the lower facets, the domain directions the vertical ones, and all vertices
/// of the reference polyhedron are split into simple (3-facet) template
/// vertices so that P(z) keeps a full Minkowski-Weyl description on Ez <= 0.
Template build_template(const Eigen::MatrixXd& domain_dirs,
                        const std::vector<Eigen::Vector2d>& ref_points);

/// Vertex maps from facet normals and per-vertex active sets (square solves).
std::vector<VertexMap> compute_vertex_maps(const Eigen::MatrixXd& facet_matrix,
                                           const std::vector<std::vector<int>>& active_sets);

/// Edge matrix rows: for every pair of edge-adjacent vertices (sharing n-1
/// facets), the condition that vertex i satisfies the one facet of vertex j it
/// does not share. Zero rows dropped, duplicates (to 1e-12) merged.
std::vector<EdgeTriplet> compute_edge_matrix(const Eigen::MatrixXd& facet_matrix,
                                             const std::vector<VertexMap>& vertex_maps,
                                             int* num_rows_out);

/// Brute-force vertex enumeration of {p : G p <= z} over all facet triples.
/// Shared by template validation and the geometry acceptance oracle.
std::vector<Eigen::VectorXd> enumerate_hrep_vertices(const Eigen::MatrixXd& facet_matrix,
                                                     const Eigen::VectorXd& z,
                                                     double tol = kHullTol);

struct ValidationReport {
  bool ez_ok = false;
  bool pass = false;
  double max_ez = 0.0;
  double mismatch = 0.0;  // two-sided vertex-set mismatch
  int oracle_vertices = 0;
  int template_vertices = 0;
  std::string message;
};

/// Checks Ez <= 0 and compares {(V_i z, s_i' z)} against brute-force
/// H-representation vertex enumeration; passes when the mismatch is < 1e-7.
ValidationReport validate_template(const Template& t, const Eigen::VectorXd& z);

/// Ring-structured reference clouds for the bundled n_x = 2 generator.
struct RingSpec {
  int f1 = 16;                     // domain directions; outermost ring has f1 points
  std::vector<int> ring_sizes;     // innermost to outermost; last entry must equal f1
  std::vector<double> ring_radii;  // relative radii in (0,1]; empty = even spacing
  double radius = 1.0;             // absolute radius of the outermost ring
  std::uint64_t seed = 1;          // jitter seed for the inner rings
  double jitter = 0.02;
  bool include_center = true;
};

std::vector<Eigen::Vector2d> ring_cloud(const RingSpec& spec);
Template make_ring_template(const RingSpec& spec);

}  // namespace cclf::geometry

#endif  // CCLF_GEOMETRY_HPP_
