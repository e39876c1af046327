#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "acx/algebra.hpp"

namespace acx {

struct Box {
  std::vector<double> lo, hi;
  Box() = default;
  Box(std::vector<double> l, std::vector<double> h) : lo(std::move(l)), hi(std::move(h)) {}
  static Box cube(int dim, double half, const std::vector<double>& c = {});
  int dim() const { return (int)lo.size(); }
  bool contains(const double* x, double slack = 0.0) const;
  bool contains(const Box& b) const;
  double volume() const;
  std::vector<double> center() const;
};

struct AlmostComplexStructure {
  int n = 0;
  std::string kind;
  double lambda = 0.0;
  Box domain;
  int smoothness = 3;
  std::function<void(const double*, double*)> eval;  // row-major 2n x 2n
  std::function<void(const Jet*, Jet*)> eval_jet;

  Eigen::MatrixXd J(const double* x) const;
  Eigen::MatrixXd J(const Eigen::VectorXd& x) const { return J(x.data()); }
  std::vector<Jet> J_jet(const Jet* x) const;
  // dJ/dx_a at x, by the chosen engine
  std::vector<Eigen::MatrixXd> dJ(const double* x, const Engine& e = {}) const;
};

template <class F>
AlmostComplexStructure make_structure(int n, std::string kind, Box domain, F f) {
  AlmostComplexStructure s;
  s.n = n;
  s.kind = std::move(kind);
  s.domain = std::move(domain);
  s.eval = [f](const double* x, double* out) { f(x, out); };
  s.eval_jet = [f](const Jet* x, Jet* out) { f(x, out); };
  return s;
}

AlmostComplexStructure make_standard(int n);
AlmostComplexStructure make_twisted(double lambda, double half_width = 0.7);
// Twisted J assembled from its (0,1) span by a dense 4x4 solve; oracle for make_twisted.
Eigen::MatrixXd twisted_by_assembly(double lambda, const Eigen::VectorXd& x);

struct CoordinateChart {
  int n = 0;
  Eigen::VectorXd center;
  Eigen::MatrixXcd A;  // differential at the center: z ~ A (x - center)
  bool linear = true;
  std::string name;
  std::function<void(const double*, cplx*)> z;
  std::function<void(const Jet*, Jet*)> z_jet;

  Eigen::VectorXcd operator()(const Eigen::VectorXd& x) const;
  double norm2(const double* x) const;
  // real 2n x 2n matrix L with [Re z_1, Im z_1, ...] = L (x - c) for the linear part
  Eigen::MatrixXd real_linear() const;
};

CoordinateChart linear_chart(const Eigen::VectorXd& center, const Eigen::MatrixXcd& A, std::string name = "linear");
CoordinateChart adapted_chart(const AlmostComplexStructure& J, const Eigen::VectorXd& center);
CoordinateChart rotated_chart(const CoordinateChart& c, const Eigen::MatrixXcd& U);
// z_j + sum_{k<=l} q[j](k,l) z_k z_l
CoordinateChart perturbed_chart(const CoordinateChart& c, const std::vector<Eigen::MatrixXcd>& q);

struct ChartCheck {
  double dbar_at_center = 0;  // max_j |dbar_J z_j(center)|
  double det_differential = 0;
  bool ok = false;
};
ChartCheck check_chart(const AlmostComplexStructure& J, const CoordinateChart& c);
// max_j |dbar_J z_j(x)| at a point
double dbar_chart(const AlmostComplexStructure& J, const CoordinateChart& c, const Eigen::VectorXd& x);

Eigen::VectorXd nijenhuis(const AlmostComplexStructure& J, const Eigen::VectorXd& x, const Eigen::VectorXd& X,
                          const Eigen::VectorXd& Y, const Engine& e = {});

}  // namespace acx
