#ifndef CCLF_TESTS_TEST_UTIL_HPP_
#define CCLF_TESTS_TEST_UTIL_HPP_

#include "cclf/geometry.hpp"
#include "cclf/model.hpp"

#include <Eigen/Core>

namespace cclf::testutil {

// Stable discrete-time affine system with zero stage cost: the robust-CLF
// sanity case (gamma = sigma = 0, small W).
inline model::SystemModel affine_demo() {
  using namespace model;
  SystemModel m;
  m.name = "affine-demo";
  m.n_x = 2;
  m.n_u = 1;
  m.tau = 1.0;
  m.continuous = false;
  auto term = [](double c, int p0, int p1, int p2) {
    PolyTerm t;
    t.coef = c;
    t.powers = {p0, p1, p2};
    return t;
  };
  Poly f1;
  f1.num_vars = 3;
  f1.terms = {term(0.6, 1, 0, 0), term(0.2, 0, 1, 0)};
  Poly f2;
  f2.num_vars = 3;
  f2.terms = {term(-0.2, 1, 0, 0), term(0.6, 0, 1, 0), term(0.5, 0, 0, 1)};
  m.field = {f1, f2};
  Poly L;
  L.num_vars = 3;
  L.terms = {};  // identically zero
  m.cost = L;
  m.X.is_ball = true;
  m.X.radius = 2.0;
  m.U.lo = Eigen::VectorXd::Constant(1, -1.0);
  m.U.hi = Eigen::VectorXd::Constant(1, 1.0);
  m.W.lo = Eigen::VectorXd::Constant(2, -1e-8);
  m.W.hi = Eigen::VectorXd::Constant(2, 1e-8);
  m.gamma = 0.0;
  m.alpha = 2.0;
  m.sigma = 0.0;
  m.beta = 2.0;
  m.check_consistency();
  return m;
}

inline geometry::Template small_template(int f1 = 8, std::uint64_t seed = 3) {
  geometry::RingSpec spec;
  spec.f1 = f1;
  spec.ring_sizes = {f1};
  spec.seed = seed;
  return geometry::make_ring_template(spec);
}

inline geometry::Template desk_template(std::uint64_t seed = 7) {
  geometry::RingSpec spec;
  spec.f1 = 16;
  spec.ring_sizes = {16};
  spec.seed = seed;
  return geometry::make_ring_template(spec);
}

}  // namespace cclf::testutil

#endif  // CCLF_TESTS_TEST_UTIL_HPP_
