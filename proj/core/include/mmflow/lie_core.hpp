#pragma once

#include <stdexcept>
#include <string>
#include <vector>

// Rank-1 combinatorics on the Cartan line of SU(2).  The line is normalized
// so that the fundamental alcove is [0, 1/2] and the (highest = simple) root
// takes the value alpha(x) = 2x; the affine wall system is then {x = n/2} and
// the translation lattice is Z.  Everything downstream (stratum indices,
// twisted boundary modes) routes through these conventions.
namespace mmflow {

struct WallPointError : std::runtime_error {
  explicit WallPointError(const std::string& what) : std::runtime_error(what) {}
};

struct RootDatum {
  // alpha(x) = root_scale * x; walls where alpha(x) is an integer.
  static constexpr double root_scale = 2.0;
  static constexpr double alcove_min = 0.0;
  static constexpr double alcove_max = 0.5;
  static constexpr double wall_tol = 1e-12;

  static double alpha(double x) { return root_scale * x; }
};

// Element (r, n) acting by x -> (-1)^r x + n.  The group is the affine Weyl
// group W ⋉ Z of SU(2): all compositions of reflections about the walls.
struct AffineWeylElement {
  bool reflect = false;
  long long translation = 0;

  double apply(double x) const { return (reflect ? -x : x) + static_cast<double>(translation); }

  // (this ∘ other): apply `other` first.
  AffineWeylElement compose(const AffineWeylElement& other) const {
    AffineWeylElement w;
    w.reflect = reflect != other.reflect;
    w.translation = translation + (reflect ? -other.translation : other.translation);
    return w;
  }

  AffineWeylElement inverse() const {
    AffineWeylElement w;
    w.reflect = reflect;
    w.translation = reflect ? translation : -translation;
    return w;
  }

  bool operator==(const AffineWeylElement& o) const {
    return reflect == o.reflect && translation == o.translation;
  }
};

struct AlcoveProjection {
  double point = 0.0;          // in [0, 1/2]
  AffineWeylElement word;      // word.apply(xi) == point
};

// Fold xi into the alcove and report the folding element.
AlcoveProjection alcove_project(double xi);

// Number of affine walls {x = n/2} strictly between lam and mu.  Throws
// WallPointError if either endpoint sits on a wall (within RootDatum::wall_tol).
int separating_hyperplane_count(double lam, double mu);

// Whether alpha(xi) is an integer, i.e. exp(xi) is central in SU(2).
bool is_coweight(double xi);

// Roots vanishing on xi modulo the affine lattice: {+1, -1} (meaning ±alpha)
// when alpha(xi) ∈ Z, so the centralizer of exp(xi) is the whole group;
// empty otherwise (centralizer is the maximal torus).
std::vector<int> centralizer_roots(double xi);

}  // namespace mmflow
