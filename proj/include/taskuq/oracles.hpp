#pragma once

#include "taskuq/testbed.hpp"
#include "taskuq/types.hpp"

#include <span>

namespace taskuq {

// Reference implementations used only for cross-checking. They share no code
// path with the implementations they validate.

// Smallest score q with #{s_i <= q} >= ceil((1-alpha)(n+1)), found by a
// linear scan over the sorted scores; +inf when no such q exists.
double brute_force_conformal_quantile(std::span<const double> scores, double alpha);

// Posterior moments by dense-grid quadrature of prior x likelihood,
// normalized numerically. Practical for dim <= 3. A coarse first pass
// locates the mass; a refined pass integrates it.
PosteriorMoments grid_posterior_moments(const Problem& problem, const Vec& y, int k);

}  // namespace taskuq
