#pragma once

#include <array>
#include <cassert>
#include <vector>

#include <Eigen/Dense>

namespace mpet {

/// Bivariate polynomial of total degree <= degree() in the monomial basis.
///
/// Monomials are ordered by total degree, then by increasing power of y:
/// 1, x, y, x^2, xy, y^2, ...
class Poly {
 public:
  Poly() = default;
  explicit Poly(int degree) : degree_(degree), c_(size(degree), 0.0) {}

  static int size(int degree) { return (degree + 1) * (degree + 2) / 2; }
  static int index(int px, int py) {
    int d = px + py;
    return d * (d + 1) / 2 + py;
  }
  static Poly monomial(int degree, int px, int py) {
    Poly p(degree);
    p.c_[index(px, py)] = 1.0;
    return p;
  }

  int degree() const { return degree_; }
  double& operator[](int i) { return c_[i]; }
  double operator[](int i) const { return c_[i]; }
  const std::vector<double>& coefficients() const { return c_; }

  double value(const Eigen::Vector2d& x) const {
    double v = 0;
    for_each_term([&](int px, int py, double c) { v += c * ipow(x.x(), px) * ipow(x.y(), py); });
    return v;
  }

  Eigen::Vector2d gradient(const Eigen::Vector2d& x) const {
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for_each_term([&](int px, int py, double c) {
      if (px > 0) g.x() += c * px * ipow(x.x(), px - 1) * ipow(x.y(), py);
      if (py > 0) g.y() += c * py * ipow(x.x(), px) * ipow(x.y(), py - 1);
    });
    return g;
  }

  Eigen::Matrix2d hessian(const Eigen::Vector2d& x) const {
    Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
    for_each_term([&](int px, int py, double c) {
      if (px > 1) h(0, 0) += c * px * (px - 1) * ipow(x.x(), px - 2) * ipow(x.y(), py);
      if (py > 1) h(1, 1) += c * py * (py - 1) * ipow(x.x(), px) * ipow(x.y(), py - 2);
      if (px > 0 && py > 0) {
        double v = c * px * py * ipow(x.x(), px - 1) * ipow(x.y(), py - 1);
        h(0, 1) += v;
        h(1, 0) += v;
      }
    });
    return h;
  }

  Poly& operator+=(const Poly& o) {
    assert(o.degree_ <= degree_);
    for (int i = 0; i < size(o.degree_); ++i) c_[i] += o.c_[i];
    return *this;
  }
  Poly& operator*=(double s) {
    for (auto& c : c_) c *= s;
    return *this;
  }

 private:
  template <class F>
  void for_each_term(F&& f) const {
    int i = 0;
    for (int d = 0; d <= degree_; ++d)
      for (int py = 0; py <= d; ++py, ++i)
        if (c_[i] != 0.0) f(d - py, py, c_[i]);
  }

  static double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
  }

  int degree_ = 0;
  std::vector<double> c_ = {0.0};
};

/// Vector field with polynomial components.
struct VecPoly {
  std::array<Poly, 2> comp;

  Eigen::Vector2d value(const Eigen::Vector2d& x) const {
    return {comp[0].value(x), comp[1].value(x)};
  }
  /// Row a holds the gradient of component a.
  Eigen::Matrix2d jacobian(const Eigen::Vector2d& x) const {
    Eigen::Matrix2d g;
    g.row(0) = comp[0].gradient(x).transpose();
    g.row(1) = comp[1].gradient(x).transpose();
    return g;
  }
  double divergence(const Eigen::Vector2d& x) const {
    return comp[0].gradient(x).x() + comp[1].gradient(x).y();
  }
};

}  // namespace mpet
