#include "mmflow/lie_core.hpp"

#include <cmath>

namespace mmflow {

namespace {

// Distance from alpha-value to the nearest integer, used for wall tests.
double wall_distance(double alpha_value) {
  return std::fabs(alpha_value - std::round(alpha_value));
}

}  // namespace

AlcoveProjection alcove_project(double xi) {
  AlcoveProjection out;
  double k = std::floor(xi);
  double frac = xi - k;
  if (frac <= 0.5) {
    out.word.reflect = false;
    out.word.translation = -static_cast<long long>(k);
  } else {
    out.word.reflect = true;
    out.word.translation = static_cast<long long>(k) + 1;
  }
  out.point = out.word.apply(xi);
  // Guard the seam frac ~ 1 where roundoff can land the image a hair outside.
  if (out.point < 0.0) out.point = 0.0;
  if (out.point > 0.5) out.point = 0.5;
  return out;
}

int separating_hyperplane_count(double lam, double mu) {
  if (wall_distance(RootDatum::alpha(lam)) <= RootDatum::wall_tol)
    throw WallPointError("separating_hyperplane_count: first argument lies on an affine wall");
  if (wall_distance(RootDatum::alpha(mu)) <= RootDatum::wall_tol)
    throw WallPointError("separating_hyperplane_count: second argument lies on an affine wall");
  double lo = RootDatum::alpha(std::min(lam, mu));
  double hi = RootDatum::alpha(std::max(lam, mu));
  // Walls are alpha = n; count integers strictly inside (lo, hi).  Endpoints
  // are bounded away from integers by the wall test above, so floor/ceil are
  // unambiguous.
  long long first = static_cast<long long>(std::floor(lo)) + 1;
  long long last = static_cast<long long>(std::ceil(hi)) - 1;
  return last >= first ? static_cast<int>(last - first + 1) : 0;
}

bool is_coweight(double xi) {
  return wall_distance(RootDatum::alpha(xi)) <= RootDatum::wall_tol;
}

std::vector<int> centralizer_roots(double xi) {
  if (is_coweight(xi)) return {+1, -1};
  return {};
}

}  // namespace mmflow
