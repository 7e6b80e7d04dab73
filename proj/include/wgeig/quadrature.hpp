#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace wgeig {

/// Quadrature on the reference triangle {x, y >= 0, x + y <= 1} (measure 1/2)
/// or on the reference interval [0, 1] (measure 1).
struct TriangleRule {
  int degree = 0;
  std::vector<std::array<double, 2>> points;
  std::vector<double> weights;
};

struct IntervalRule {
  int degree = 0;
  std::vector<double> points;
  std::vector<double> weights;
};

namespace detail {

inline void add_center(TriangleRule& q, double w) {
  q.points.push_back({1.0 / 3.0, 1.0 / 3.0});
  q.weights.push_back(w);
}

inline void add_orbit3(TriangleRule& q, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  for (auto p : {std::array<double, 2>{a, a}, {a, b}, {b, a}}) {
    q.points.push_back(p);
    q.weights.push_back(w);
  }
}

inline void add_orbit6(TriangleRule& q, double a, double b, double w) {
  const double c = 1.0 - a - b;
  for (auto p : {std::array<double, 2>{a, b}, {b, a}, {a, c}, {c, a}, {b, c}, {c, b}}) {
    q.points.push_back(p);
    q.weights.push_back(w);
  }
}

}  // namespace detail

/// Fully symmetric rule exact for polynomials of total degree <= `degree`.
/// Degrees 4-6 are Dunavant's rules with nodes re-solved to full double precision.
inline TriangleRule triangle_rule(int degree) {
  if (degree < 0 || degree > 6)
    throw std::invalid_argument("triangle_rule: unsupported degree " + std::to_string(degree));
  TriangleRule q;
  q.degree = degree;
  switch (degree) {
    case 0:
    case 1:
      detail::add_center(q, 0.5);
      break;
    case 2:
      detail::add_orbit3(q, 1.0 / 6.0, 1.0 / 6.0);
      break;
    case 3:  // the 4-point degree-3 rule has a negative weight; use the degree-4 one
    case 4:
      detail::add_orbit3(q, 0.4459484909159648863183293, 0.1116907948390057328475035);
      detail::add_orbit3(q, 0.09157621350977074345957146, 0.05497587182766093381916316);
      break;
    case 5:
      detail::add_center(q, 0.1125);
      detail::add_orbit3(q, 0.4701420641051150897704412, 0.06619707639425309036882469);
      detail::add_orbit3(q, 0.1012865073234563388009874, 0.06296959027241357629784197);
      break;
    case 6:
      detail::add_orbit3(q, 0.2492867451709104212916386, 0.05839313786318968301264481);
      detail::add_orbit3(q, 0.0630890144915022283403316, 0.0254224531851034084604684);
      detail::add_orbit6(q, 0.05314504984481694735324967, 0.3103524510337844054166077,
                         0.04142553780918678759677673);
      break;
  }
  return q;
}

/// Gauss-Legendre rule on [0, 1], exact to `degree`.
inline IntervalRule edge_rule(int degree) {
  if (degree < 0 || degree > 5)
    throw std::invalid_argument("edge_rule: unsupported degree " + std::to_string(degree));
  IntervalRule q;
  q.degree = degree;
  const int npts = degree / 2 + 1;
  if (npts == 1) {
    q.points = {0.5};
    q.weights = {1.0};
  } else if (npts == 2) {
    const double d = 0.5 / std::sqrt(3.0);
    q.points = {0.5 - d, 0.5 + d};
    q.weights = {0.5, 0.5};
  } else {
    const double d = 0.5 * std::sqrt(0.6);
    q.points = {0.5 - d, 0.5, 0.5 + d};
    q.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  }
  return q;
}

}  // namespace wgeig
