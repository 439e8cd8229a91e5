#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace hdphmm {

using Rng = std::mt19937_64;

/// Gamma draw with shape/rate (inverse scale) parameterization.
double sample_gamma(Rng& rng, double shape, double rate);
double sample_beta(Rng& rng, double a, double b);
bool sample_bernoulli(Rng& rng, double p);
double sample_normal(Rng& rng, double mean, double sd);
double sample_uniform(Rng& rng);

/// Draws an index proportional to non-negative `weights`. The sum must be
/// positive.
std::size_t sample_categorical(Rng& rng, std::span<const double> weights);

/// Symmetric or general Dirichlet draw via normalized gammas.
std::vector<double> sample_dirichlet(Rng& rng, std::span<const double> concentration);

}  // namespace hdphmm
