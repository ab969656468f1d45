#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mpet {

using Point = Eigen::Vector2d;

/// Edge of the triangulation.
///
/// `vertices` is sorted ascending; the facet parameter runs from vertices[0]
/// to vertices[1]. `left` is the adjacent element with the lower index and the
/// stored normal points out of it. Boundary facets have `right == -1`.
struct Facet {
  std::array<int, 2> vertices{};
  int left = -1;
  int right = -1;
  int local_left = -1;   // local edge index inside `left`
  int local_right = -1;  // local edge index inside `right`
  Point normal = Point::Zero();
  Point tangent = Point::Zero();
  double length = 0.0;
  std::string tag;  // empty for interior facets

  bool is_boundary() const { return right < 0; }
};

/// Conforming simplicial 2D mesh with facet topology.
///
/// Local edge k of an element connects its local vertices kEdgeVertices[k],
/// i.e. e0 = (1,2), e1 = (0,2), e2 = (0,1). Elements are stored counter-
/// clockwise. The mesh is immutable once constructed.
class Mesh {
 public:
  static constexpr std::array<std::array<int, 2>, 3> kEdgeVertices{{{1, 2}, {0, 2}, {0, 1}}};

  Mesh() = default;

  /// Builds facets and adjacency from vertex coordinates and element triples.
  /// `boundary_tag(midpoint)` assigns the tag of each boundary facet.
  template <class TagFn>
  static Mesh from_elements(std::vector<Point> vertices, std::vector<std::array<int, 3>> elements,
                            TagFn&& boundary_tag);

  int dim() const { return 2; }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_elements() const { return static_cast<int>(elements_.size()); }
  int num_facets() const { return static_cast<int>(facets_.size()); }
  int num_boundary_facets() const;

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& elements() const { return elements_; }
  const std::vector<Facet>& facets() const { return facets_; }
  const Facet& facet(int f) const { return facets_[f]; }
  const std::array<int, 3>& element(int e) const { return elements_[e]; }

  /// Global facet index of local edge k of element e.
  int element_facet(int e, int k) const { return element_facets_[e][k]; }
  /// +1 if the stored facet normal is the outward normal of element e.
  double facet_sign(int e, int k) const;
  /// True if local edge k of e runs against the global facet parameter.
  bool facet_flipped(int e, int k) const;

  double element_area(int e) const;
  /// Longest edge of element e.
  double element_diameter(int e) const;
  /// Largest facet length over the mesh.
  double max_facet_length() const;
  double total_area() const;
  /// Side of the square with the mean element area doubled: 1/n on the unit square grid.
  double characteristic_size() const;

  /// Index of the element containing p, or -1.
  int locate(const Point& p, double tol = 1e-12) const;

  void write(std::ostream& os) const;
  static Mesh read(std::istream& is);

 private:
  void build_topology();

  std::vector<Point> vertices_;
  std::vector<std::array<int, 3>> elements_;
  std::vector<Facet> facets_;
  std::vector<std::array<int, 3>> element_facets_;
};

/// Affine map from the reference triangle {(0,0),(1,0),(0,1)} onto an element.
struct AffineMap {
  int element = -1;
  Point origin = Point::Zero();
  Eigen::Matrix2d jacobian = Eigen::Matrix2d::Identity();
  double det = 1.0;
  Eigen::Matrix2d inverse = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d inverse_transpose = Eigen::Matrix2d::Identity();

  Point to_physical(const Point& ref) const { return origin + jacobian * ref; }
  Point to_reference(const Point& x) const { return inverse * (x - origin); }
};

AffineMap build_affine_map(const Mesh& mesh, int element);

/// (0,1)^2 split into n^2 squares, each cut along its lower-left to upper-right
/// diagonal. All boundary facets carry the tag "boundary".
Mesh generate_unit_square(int n_per_side);

/// Annulus r_inner < |x| < r_outer with n_radial rings of n_angular quads,
/// each split in two. Inner facets are tagged "ventricle", outer "skull".
Mesh generate_annulus(double r_inner, double r_outer, int n_radial, int n_angular);

// -- implementation of the template factory ---------------------------------

template <class TagFn>
Mesh Mesh::from_elements(std::vector<Point> vertices, std::vector<std::array<int, 3>> elements,
                         TagFn&& boundary_tag) {
  Mesh m;
  m.vertices_ = std::move(vertices);
  m.elements_ = std::move(elements);
  m.build_topology();
  for (auto& f : m.facets_) {
    if (f.is_boundary()) {
      const Point mid = 0.5 * (m.vertices_[f.vertices[0]] + m.vertices_[f.vertices[1]]);
      f.tag = boundary_tag(mid);
    }
  }
  return m;
}

}  // namespace mpet
