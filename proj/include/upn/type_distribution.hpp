#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace upn {

/// Closed sub-interval [lo, hi] of the type space [0, 1].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi > lo ? hi - lo : 0.0; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

using IntervalList = std::vector<Interval>;

/// Density f(theta) of user types on [0, 1].
///
/// Three families are supported, selected by a short textual spec:
///   "uniform"                    f = 1
///   "beta:A,B"                   Beta(A, B) with A, B >= 1
///   "piecewise:w1,w2,...,wk"     step density on k equal-width bins
///
/// The uniform family is evaluated in closed form. The others use adaptive
/// Gauss-Kronrod quadrature split at the density's breakpoints.
class TypeDistribution {
 public:
  TypeDistribution();  // uniform

  static TypeDistribution uniform();
  static TypeDistribution beta(double a, double b);
  static TypeDistribution piecewise(std::vector<double> densities);

  /// Throws std::invalid_argument on an unknown family or malformed numbers.
  static TypeDistribution parse(std::string_view spec);
  std::string spec() const;

  bool is_uniform() const;

  double pdf(double theta) const;
  double cdf(double theta) const;
  double quantile(double u) const;

  /// Integral of f over an interval / interval list.
  double mass(const Interval& iv) const;
  double mass(const IntervalList& ivs) const;

  /// Integral of theta * f(theta) over an interval / interval list.
  double first_moment(const Interval& iv) const;
  double first_moment(const IntervalList& ivs) const;

  /// Numerical integral of f over [0, 1]; 1 up to quadrature error for valid specs.
  double total_mass() const;

  friend bool operator==(const TypeDistribution&, const TypeDistribution&) = default;

 private:
  struct Uniform {
    friend bool operator==(const Uniform&, const Uniform&) = default;
  };
  struct Beta {
    double a;
    double b;
    double log_norm;
    friend bool operator==(const Beta&, const Beta&) = default;
  };
  struct Piecewise {
    std::vector<double> densities;
    friend bool operator==(const Piecewise&, const Piecewise&) = default;
  };

  explicit TypeDistribution(std::variant<Uniform, Beta, Piecewise> family);

  std::vector<double> breakpoints_in(double lo, double hi) const;
  template <typename F>
  double integrate(F&& integrand, double lo, double hi) const;

  std::variant<Uniform, Beta, Piecewise> family_;
};

}  // namespace upn
