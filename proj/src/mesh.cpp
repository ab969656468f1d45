#include "mpet/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mpet/error.hpp"

namespace mpet {

namespace {

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

void Mesh::build_topology() {
  facets_.clear();
  element_facets_.assign(elements_.size(), {-1, -1, -1});

  for (std::size_t e = 0; e < elements_.size(); ++e) {
    auto& el = elements_[e];
    for (int v : el) {
      if (v < 0 || v >= num_vertices()) throw ConfigError("element references unknown vertex");
    }
    double area = signed_area(vertices_[el[0]], vertices_[el[1]], vertices_[el[2]]);
    if (area < 0) {
      std::swap(el[1], el[2]);
      area = -area;
    }
    if (!(area > 0)) throw ConfigError("degenerate element " + std::to_string(e));
  }

  std::map<std::array<int, 2>, int> lookup;
  for (int e = 0; e < num_elements(); ++e) {
    for (int k = 0; k < 3; ++k) {
      int a = elements_[e][kEdgeVertices[k][0]];
      int b = elements_[e][kEdgeVertices[k][1]];
      std::array<int, 2> key{std::min(a, b), std::max(a, b)};
      auto [it, inserted] = lookup.try_emplace(key, static_cast<int>(facets_.size()));
      if (inserted) {
        Facet f;
        f.vertices = key;
        f.left = e;
        f.local_left = k;
        facets_.push_back(f);
      } else {
        Facet& f = facets_[it->second];
        if (f.right >= 0) throw ConfigError("non-manifold edge in mesh");
        f.right = e;
        f.local_right = k;
      }
      element_facets_[e][k] = it->second;
    }
  }

  for (auto& f : facets_) {
    const Point& p0 = vertices_[f.vertices[0]];
    const Point& p1 = vertices_[f.vertices[1]];
    Point d = p1 - p0;
    f.length = d.norm();
    f.tangent = d / f.length;
    Point n(f.tangent.y(), -f.tangent.x());
    // orient outward from the left element: opposite vertex must be behind n
    const auto& el = elements_[f.left];
    Point opposite = vertices_[el[f.local_left]];
    if (n.dot(opposite - p0) > 0) n = -n;
    f.normal = n;
  }
}

int Mesh::num_boundary_facets() const {
  return static_cast<int>(std::count_if(facets_.begin(), facets_.end(),
                                        [](const Facet& f) { return f.is_boundary(); }));
}

double Mesh::facet_sign(int e, int k) const {
  return facets_[element_facets_[e][k]].left == e ? 1.0 : -1.0;
}

bool Mesh::facet_flipped(int e, int k) const {
  int a = elements_[e][kEdgeVertices[k][0]];
  int b = elements_[e][kEdgeVertices[k][1]];
  return a > b;
}

double Mesh::element_area(int e) const {
  const auto& el = elements_[e];
  return signed_area(vertices_[el[0]], vertices_[el[1]], vertices_[el[2]]);
}

double Mesh::element_diameter(int e) const {
  double h = 0;
  for (int k = 0; k < 3; ++k) h = std::max(h, facets_[element_facets_[e][k]].length);
  return h;
}

double Mesh::max_facet_length() const {
  double h = 0;
  for (const auto& f : facets_) h = std::max(h, f.length);
  return h;
}

double Mesh::total_area() const {
  double a = 0;
  for (int e = 0; e < num_elements(); ++e) a += element_area(e);
  return a;
}

double Mesh::characteristic_size() const {
  return num_elements() ? std::sqrt(2.0 * total_area() / num_elements()) : 0.0;
}

int Mesh::locate(const Point& p, double tol) const {
  for (int e = 0; e < num_elements(); ++e) {
    AffineMap map = build_affine_map(*this, e);
    Point r = map.to_reference(p);
    if (r.x() >= -tol && r.y() >= -tol && r.x() + r.y() <= 1 + tol) return e;
  }
  return -1;
}

void Mesh::write(std::ostream& os) const {
  std::ostringstream out;
  out.precision(17);
  out << dim() << ' ' << num_vertices() << ' ' << num_elements() << ' ' << num_facets() << '\n';
  for (const auto& v : vertices_) out << v.x() << ' ' << v.y() << '\n';
  for (const auto& el : elements_) out << el[0] << ' ' << el[1] << ' ' << el[2] << '\n';
  for (const auto& f : facets_) {
    out << f.vertices[0] << ' ' << f.vertices[1] << ' ' << f.left << ' ' << f.right << ' '
        << (f.tag.empty() ? "-" : f.tag) << '\n';
  }
  os << out.str();
}

Mesh Mesh::read(std::istream& is) {
  int dim = 0, nv = 0, ne = 0, nf = 0;
  if (!(is >> dim >> nv >> ne >> nf)) throw ConfigError("mesh file: bad header");
  if (dim != 2) throw ConfigError("mesh file: only dim 2 is supported");
  std::vector<Point> vertices(nv);
  for (auto& v : vertices) {
    if (!(is >> v.x() >> v.y())) throw ConfigError("mesh file: bad vertex record");
  }
  std::vector<std::array<int, 3>> elements(ne);
  for (auto& el : elements) {
    if (!(is >> el[0] >> el[1] >> el[2])) throw ConfigError("mesh file: bad element record");
  }
  std::map<std::array<int, 2>, std::string> tags;
  for (int i = 0; i < nf; ++i) {
    std::array<int, 2> key;
    int left, right;
    std::string tag;
    if (!(is >> key[0] >> key[1] >> left >> right >> tag)) {
      throw ConfigError("mesh file: bad facet record");
    }
    if (key[0] > key[1]) std::swap(key[0], key[1]);
    if (tag != "-") tags[key] = tag;
  }
  Mesh m;
  m.vertices_ = std::move(vertices);
  m.elements_ = std::move(elements);
  m.build_topology();
  if (m.num_facets() != nf) throw ConfigError("mesh file: facet count mismatch");
  for (auto& f : m.facets_) {
    if (!f.is_boundary()) continue;
    auto it = tags.find(f.vertices);
    if (it == tags.end()) throw ConfigError("mesh file: untagged boundary facet");
    f.tag = it->second;
  }
  return m;
}

AffineMap build_affine_map(const Mesh& mesh, int element) {
  if (element < 0 || element >= mesh.num_elements()) throw Error("element index out of range");
  const auto& el = mesh.element(element);
  const auto& v = mesh.vertices();
  AffineMap map;
  map.element = element;
  map.origin = v[el[0]];
  map.jacobian.col(0) = v[el[1]] - v[el[0]];
  map.jacobian.col(1) = v[el[2]] - v[el[0]];
  map.det = map.jacobian.determinant();
  if (!(map.det > 0)) throw Error("degenerate element " + std::to_string(element));
  map.inverse = map.jacobian.inverse();
  map.inverse_transpose = map.inverse.transpose();
  return map;
}

Mesh generate_unit_square(int n) {
  if (n < 1) throw ConfigError("n_per_side must be >= 1");
  std::vector<Point> vertices;
  vertices.reserve((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) vertices.emplace_back(double(i) / n, double(j) / n);
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<std::array<int, 3>> elements;
  elements.reserve(2 * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      elements.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return Mesh::from_elements(std::move(vertices), std::move(elements),
                             [](const Point&) { return std::string("boundary"); });
}

Mesh generate_annulus(double r_inner, double r_outer, int n_radial, int n_angular) {
  if (!(r_inner > 0) || !(r_outer > r_inner) || n_radial < 1 || n_angular < 3) {
    throw ConfigError("invalid geometry");
  }
  std::vector<Point> vertices;
  for (int k = 0; k <= n_radial; ++k) {
    double r = r_inner + (r_outer - r_inner) * k / n_radial;
    for (int j = 0; j < n_angular; ++j) {
      double theta = 2 * std::numbers::pi * j / n_angular;
      vertices.emplace_back(r * std::cos(theta), r * std::sin(theta));
    }
  }
  auto id = [n_angular](int k, int j) { return k * n_angular + (j % n_angular); };
  std::vector<std::array<int, 3>> elements;
  for (int k = 0; k < n_radial; ++k) {
    for (int j = 0; j < n_angular; ++j) {
      elements.push_back({id(k, j), id(k, j + 1), id(k + 1, j + 1)});
      elements.push_back({id(k, j), id(k + 1, j + 1), id(k + 1, j)});
    }
  }
  // chord midpoints of ring r lie at radius r cos(pi / n_angular)
  const double r_mid = 0.5 * (r_inner + r_outer) * std::cos(std::numbers::pi / n_angular);
  return Mesh::from_elements(std::move(vertices), std::move(elements),
                             [r_mid](const Point& mid) {
                               return std::string(mid.norm() < r_mid ? "ventricle" : "skull");
                             });
}

}  // namespace mpet
