#include "upn/type_distribution.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

namespace upn {

namespace {

// Integrals over [0,1] are at most 1, so this also bounds the absolute error.
constexpr double kQuadratureRelTol = 1e-10;
constexpr unsigned kQuadratureDepth = 10;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double parse_number(std::string_view text, std::string_view spec) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw std::invalid_argument("malformed number in type distribution '" +
                                std::string(spec) + "'");
  }
  return value;
}

std::vector<double> parse_list(std::string_view text, std::string_view spec) {
  std::vector<double> out;
  while (true) {
    auto comma = text.find(',');
    out.push_back(parse_number(text.substr(0, comma), spec));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::string format_number(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

TypeDistribution::TypeDistribution() : family_(Uniform{}) {}

TypeDistribution::TypeDistribution(std::variant<Uniform, Beta, Piecewise> family)
    : family_(std::move(family)) {}

TypeDistribution TypeDistribution::uniform() { return TypeDistribution(); }

TypeDistribution TypeDistribution::beta(double a, double b) {
  if (!(a >= 1.0) || !(b >= 1.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("beta type distribution needs finite shape parameters >= 1");
  }
  double log_norm = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return TypeDistribution(Beta{a, b, log_norm});
}

TypeDistribution TypeDistribution::piecewise(std::vector<double> densities) {
  if (densities.empty()) {
    throw std::invalid_argument("piecewise type distribution needs at least one bin");
  }
  for (double d : densities) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw std::invalid_argument("piecewise densities must be finite and nonnegative");
    }
  }
  TypeDistribution dist(Piecewise{std::move(densities)});
  if (std::abs(dist.total_mass() - 1.0) > 1e-9) {
    throw std::invalid_argument("piecewise densities must integrate to 1 over [0,1]");
  }
  return dist;
}

TypeDistribution TypeDistribution::parse(std::string_view spec) {
  if (spec == "uniform") return uniform();
  auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("unknown type distribution '" + std::string(spec) + "'");
  }
  auto family = spec.substr(0, colon);
  auto args = parse_list(spec.substr(colon + 1), spec);
  if (family == "beta") {
    if (args.size() != 2) {
      throw std::invalid_argument("beta type distribution takes two parameters");
    }
    return beta(args[0], args[1]);
  }
  if (family == "piecewise") return piecewise(std::move(args));
  throw std::invalid_argument("unknown type distribution '" + std::string(spec) + "'");
}

std::string TypeDistribution::spec() const {
  if (std::holds_alternative<Uniform>(family_)) return "uniform";
  if (const auto* b = std::get_if<Beta>(&family_)) {
    return "beta:" + format_number(b->a) + "," + format_number(b->b);
  }
  const auto& pw = std::get<Piecewise>(family_);
  std::string out = "piecewise:";
  for (std::size_t i = 0; i < pw.densities.size(); ++i) {
    if (i) out += ',';
    out += format_number(pw.densities[i]);
  }
  return out;
}

bool TypeDistribution::is_uniform() const { return std::holds_alternative<Uniform>(family_); }

double TypeDistribution::pdf(double theta) const {
  if (theta < 0.0 || theta > 1.0) return 0.0;
  if (std::holds_alternative<Uniform>(family_)) return 1.0;
  if (const auto* b = std::get_if<Beta>(&family_)) {
    if ((theta == 0.0 && b->a > 1.0) || (theta == 1.0 && b->b > 1.0)) return 0.0;
    double log_pdf = (b->a - 1.0) * std::log(theta) + (b->b - 1.0) * std::log1p(-theta);
    return std::exp(log_pdf - b->log_norm);
  }
  const auto& d = std::get<Piecewise>(family_).densities;
  auto bin = static_cast<std::size_t>(theta * static_cast<double>(d.size()));
  return d[std::min(bin, d.size() - 1)];
}

std::vector<double> TypeDistribution::breakpoints_in(double lo, double hi) const {
  std::vector<double> pts{lo};
  if (const auto* pw = std::get_if<Piecewise>(&family_)) {
    const auto k = pw->densities.size();
    for (std::size_t i = 1; i < k; ++i) {
      double edge = static_cast<double>(i) / static_cast<double>(k);
      if (edge > lo && edge < hi) pts.push_back(edge);
    }
  }
  pts.push_back(hi);
  return pts;
}

template <typename F>
double TypeDistribution::integrate(F&& integrand, double lo, double hi) const {
  lo = clamp01(lo);
  hi = clamp01(hi);
  if (!(hi > lo)) return 0.0;
  auto pts = breakpoints_in(lo, hi);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    total += boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
        integrand, pts[i], pts[i + 1], kQuadratureDepth, kQuadratureRelTol);
  }
  return total;
}

double TypeDistribution::mass(const Interval& iv) const {
  if (is_uniform()) return clamp01(iv.hi) > clamp01(iv.lo) ? clamp01(iv.hi) - clamp01(iv.lo) : 0.0;
  return integrate([this](double t) { return pdf(t); }, iv.lo, iv.hi);
}

double TypeDistribution::mass(const IntervalList& ivs) const {
  double total = 0.0;
  for (const auto& iv : ivs) total += mass(iv);
  return total;
}

double TypeDistribution::first_moment(const Interval& iv) const {
  if (is_uniform()) {
    double lo = clamp01(iv.lo), hi = clamp01(iv.hi);
    return hi > lo ? (hi - lo) * 0.5 * (hi + lo) : 0.0;
  }
  return integrate([this](double t) { return t * pdf(t); }, iv.lo, iv.hi);
}

double TypeDistribution::first_moment(const IntervalList& ivs) const {
  double total = 0.0;
  for (const auto& iv : ivs) total += first_moment(iv);
  return total;
}

double TypeDistribution::total_mass() const { return mass(Interval{0.0, 1.0}); }

double TypeDistribution::cdf(double theta) const { return mass(Interval{0.0, clamp01(theta)}); }

double TypeDistribution::quantile(double u) const {
  u = clamp01(u);
  if (is_uniform()) return u;
  if (u == 0.0) return 0.0;
  if (u == 1.0) return 1.0;
  auto gap = [&](double t) { return cdf(t) - u; };
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t max_iter = 200;
  auto [a, b] = boost::math::tools::toms748_solve(gap, 0.0, 1.0, -u, 1.0 - u, tol, max_iter);
  return 0.5 * (a + b);
}

}  // namespace upn
