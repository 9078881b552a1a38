#pragma once

#include <vector>

#include "rme/synth.hpp"

namespace rme {

// A 1-D law as a finite sum of point masses and normal components.
struct Law1D {
  struct Atom {
    double loc = 0.0;
    double mass = 0.0;
  };
  struct Normal {
    double weight = 0.0;
    double mean = 0.0;
    double sd = 1.0;
  };
  std::vector<Atom> atoms;
  std::vector<Normal> normals;

  double density(double x) const;    // continuous part only
  double atom_mass(double x) const;  // mass of atoms located exactly at x
  double continuous_mass() const;
  double mean() const;
  double central_moment(int k) const;
  double variance() const { return central_moment(2); }
};

// Errors for multi-dimensional specs and the uniform-ball shape.
Law1D to_law(const DistributionSpec& spec);

struct TvResult {
  double tv = 0.0;
  double overlap = 1.0;  // 1 - tv
  double atom_l1 = 0.0;  // sum |p_a - p_b| over atoms
  double cont_l1 = 0.0;  // integral |f_a - f_b|
};

// Exact on atoms; adaptive Gauss-Kronrod between density crossings otherwise.
TvResult tv_distance(const Law1D& a, const Law1D& b);

double normal_cdf(double x);

}  // namespace rme
