#include <cmath>
#include <random>

#include <doctest.h>

#include "mpet/error.hpp"
#include "mpet/quadrature.hpp"
#include "mpet/spaces.hpp"
#include "oracle.hpp"

using namespace mpet;

namespace {

double ipow(double x, int k) { return std::pow(x, k); }

/// Exact integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!.
double monomial_integral(int a, int b) {
  return std::tgamma(a + 1) * std::tgamma(b + 1) / std::tgamma(a + b + 3);
}

}  // namespace

TEST_CASE("unsupported order") {
  CHECK_THROWS_AS(SpaceOrder(0), ConfigError);
  CHECK_THROWS_AS(SpaceOrder(4), ConfigError);
  CHECK_THROWS_AS(eval_basis(Space::Pressure, 5, {{0.2, 0.2}}), ConfigError);
}

TEST_CASE("quadrature exactness") {
  for (int d = 0; d <= 10; ++d) {
    const QuadratureRule tri = triangle_rule(d);
    const QuadratureRule seg = segment_rule(d);
    for (int a = 0; a <= d; ++a) {
      double s = 0;
      for (std::size_t q = 0; q < seg.size(); ++q) s += seg.weights[q] * ipow(seg.points[q].x(), a);
      CHECK(s == doctest::Approx(1.0 / (a + 1)).epsilon(1e-13));
      for (int b = 0; a + b <= d; ++b) {
        double t = 0;
        for (std::size_t q = 0; q < tri.size(); ++q)
          t += tri.weights[q] * ipow(tri.points[q].x(), a) * ipow(tri.points[q].y(), b);
        CHECK(t == doctest::Approx(monomial_integral(a, b)).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("P0 basis is one") {
  const BasisTable t = eval_basis(Space::Pressure, 1, {{0.1, 0.3}, {0.7, 0.2}});
  CHECK(t.num_basis == 1);
  for (double v : t.scalar_value) CHECK(v == 1.0);
}

TEST_CASE("BDM1 divergence is constant") {
  const std::vector<Eigen::Vector2d> pts{{0.1, 0.1}, {0.6, 0.2}, {0.2, 0.7}, {1.0 / 3, 1.0 / 3}};
  const BasisTable t = eval_basis(Space::Displacement, 1, pts);
  CHECK(t.num_basis == 6);
  for (int j = 0; j < t.num_basis; ++j)
    for (int q = 1; q < t.num_points; ++q)
      CHECK(t.divergence[t.at(q, j)] == doctest::Approx(t.divergence[t.at(0, j)]).epsilon(1e-13));
}

TEST_CASE("facet moments are dual") {
  // the moment of basis j against P_m on edge k equals delta, for BDM and RT
  for (int l = 1; l <= 3; ++l) {
    const ReferenceElement& ref = ReferenceElement::get(l);
    const QuadratureRule seg = segment_rule(2 * l + 2);
    auto moments = [&](const std::vector<VecPoly>& basis, int per_edge) {
      for (std::size_t j = 0; j < basis.size(); ++j)
        for (int k = 0; k < 3; ++k)
          for (int m = 0; m < per_edge; ++m) {
            double s = 0;
            for (std::size_t q = 0; q < seg.size(); ++q) {
              const double t = seg.points[q].x();
              s += seg.weights[q] * basis[j].value(ReferenceElement::edge_point(k, t)).dot(
                                        ReferenceElement::scaled_normal(k)) *
                   std::legendre(m, 2 * t - 1);
            }
            const double expect = (int(j) == k * per_edge + m) ? 1.0 : 0.0;
            CHECK(s == doctest::Approx(expect).epsilon(1e-12).scale(1.0));
          }
    };
    moments(ref.bdm(), l + 1);
    moments(ref.rt(), l);
    CHECK(ref.bdm().size() == std::size_t((l + 1) * (l + 2)));
    CHECK(ref.rt().size() == std::size_t(l * (l + 2)));
  }
}

TEST_CASE("RT0 edge moments are unit fluxes") {
  // on the reference triangle the RT0 function of edge k has total flux 1 through edge k
  const ReferenceElement& ref = ReferenceElement::get(1);
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector2d mid = ReferenceElement::edge_point(k, 0.5);
    CHECK(ref.rt()[k].value(mid).dot(ReferenceElement::scaled_normal(k)) == doctest::Approx(1.0));
    CHECK(ref.rt()[k].divergence({0.2, 0.2}) == doctest::Approx(2.0));
  }
}

TEST_CASE("Piola transform") {
  AffineMap id;
  const Eigen::Vector2d v(0.3, -1.2);
  CHECK((piola_map(id, v) - v).norm() == 0.0);

  AffineMap scale;
  scale.jacobian = 2 * Eigen::Matrix2d::Identity();
  scale.det = 4;
  scale.inverse = 0.5 * Eigen::Matrix2d::Identity();
  CHECK((piola_map(scale, v) - 0.5 * v).norm() < 1e-15);

  // flux through each edge is invariant under a random affine map
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  const ReferenceElement& ref = ReferenceElement::get(2);
  const QuadratureRule seg = segment_rule(8);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Point> p{{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}};
    const double cross = (p[1] - p[0]).x() * (p[2] - p[0]).y() - (p[1] - p[0]).y() * (p[2] - p[0]).x();
    if (cross < 0.1) continue;  // keep the given orientation
    const Mesh m = Mesh::from_elements(p, {{0, 1, 2}}, [](const Point&) { return "b"; });
    const AffineMap map = build_affine_map(m, 0);
    for (const auto& b : ref.bdm()) {
      for (int k = 0; k < 3; ++k) {
        const auto& ev = Mesh::kEdgeVertices[k];
        const Point a = map.to_physical(ReferenceElement::edge_point(k, 0));
        const Point c = map.to_physical(ReferenceElement::edge_point(k, 1));
        const Eigen::Vector2d t = c - a;
        Eigen::Vector2d n(t.y(), -t.x());  // length-scaled
        const Point opposite = m.vertices()[m.element(0)[3 - ev[0] - ev[1]]];
        if (n.dot(opposite - a) > 0) n = -n;
        double phys = 0, refl = 0;
        for (std::size_t q = 0; q < seg.size(); ++q) {
          const Eigen::Vector2d xi = ReferenceElement::edge_point(k, seg.points[q].x());
          phys += seg.weights[q] * piola_map(map, b.value(xi)).dot(n);
          refl += seg.weights[q] * b.value(xi).dot(ReferenceElement::scaled_normal(k));
        }
        CHECK(phys == doctest::Approx(refl).epsilon(1e-12).scale(1.0));
      }
    }
  }
}

TEST_CASE("dof counts") {
  const Mesh m = generate_unit_square(1);
  const DofCounts c = dof_counts(m, SpaceOrder(1), 1);
  CHECK(c.displacement == 2);
  CHECK(c.displacement_trace == 2);
  CHECK(c.flux == 6);
  CHECK(c.pressure == 2);
  CHECK(c.pressure_trace == 5);
  const DofCounts c2 = dof_counts(m, SpaceOrder(1), 2);
  CHECK(c2.flux == 2 * c.flux);
  CHECK(c2.pressure == 2 * c.pressure);
  CHECK(c2.pressure_trace == 2 * c.pressure_trace);
  CHECK(c2.displacement == c.displacement);

  const SpaceSet s(generate_unit_square(2), SpaceOrder(2), 3);
  CHECK(s.size() == s.num_u() + s.num_uhat() + 3 * (s.num_w_network() + s.num_p_network() + s.num_phat_network()));
}

TEST_CASE("normal components are continuous across facets") {
  const Mesh m = generate_unit_square(2);
  for (int l = 1; l <= 3; ++l) {
    const SpaceSet s(m, SpaceOrder(l), 1);
    for (int f = 0; f < m.num_facets(); ++f) {
      const Facet& fc = m.facet(f);
      if (fc.is_boundary()) continue;
      const oracle::Side side = oracle::side(m, fc.left, f);
      const auto gl = oracle::geometry(m, fc.left), gr = oracle::geometry(m, fc.right);
      for (double t : {0.13, 0.5, 0.91}) {
        const Point x = side.at(t);
        const auto vl = oracle::values(s, gl, fc.left, gl.Ji * (x - gl.a));
        const auto vr = oracle::values(s, gr, fc.right, gr.Ji * (x - gr.a));
        // global DOF -> normal component on each side
        for (std::size_t i = 0; i < vl.u.size(); ++i)
          for (std::size_t j = 0; j < vr.u.size(); ++j)
            if (vl.u_index[i] == vr.u_index[j])
              CHECK(vl.u[i].dot(side.n) == doctest::Approx(vr.u[j].dot(side.n)).epsilon(1e-12).scale(1.0));
        // DOFs present on one side only have zero normal trace on the facet
        double scale = 1.0;
        for (const auto& u : vl.u) scale = std::max(scale, u.norm());
        for (std::size_t i = 0; i < vl.u.size(); ++i) {
          bool shared = false;
          for (int g : vr.u_index) shared |= g == vl.u_index[i];
          if (!shared) CHECK(std::abs(vl.u[i].dot(side.n)) < 1e-13 * scale);
        }
      }
    }
  }
}

TEST_CASE("element kernel agrees with direct evaluation") {
  const Mesh m = oracle::skewed_pair();
  const SpaceSet s(m, SpaceOrder(2), 1);
  const ElementKernel kernel(s, 6);
  CellValues cv;
  for (int e = 0; e < m.num_elements(); ++e) {
    kernel.cell(e, cv);
    const auto g = oracle::geometry(m, e);
    for (int q = 0; q < cv.nq; ++q) {
      const auto v = oracle::values(s, g, e, g.Ji * (cv.x[q] - g.a));
      for (int j = 0; j < s.u_local(); ++j) {
        CHECK((cv.u[q * s.u_local() + j] - v.u[j]).norm() < 1e-12);
        CHECK(cv.u_div[q * s.u_local() + j] == doctest::Approx(v.u_div[j]).epsilon(1e-12).scale(1.0));
      }
    }
  }
}
