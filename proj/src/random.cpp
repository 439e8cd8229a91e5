#include "hdphmm/random.hpp"

#include <cassert>
#include <numeric>

namespace hdphmm {

double sample_gamma(Rng& rng, double shape, double rate) {
    std::gamma_distribution<double> dist(shape, 1.0 / rate);
    return dist(rng);
}

double sample_beta(Rng& rng, double a, double b) {
    const double x = sample_gamma(rng, a, 1.0);
    const double y = sample_gamma(rng, b, 1.0);
    if (x + y == 0.0) {
        // Both shapes tiny enough to underflow; fall back on the mean.
        return a / (a + b);
    }
    return x / (x + y);
}

bool sample_bernoulli(Rng& rng, double p) { return sample_uniform(rng) < p; }

double sample_normal(Rng& rng, double mean, double sd) {
    std::normal_distribution<double> dist(mean, sd);
    return dist(rng);
}

double sample_uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

std::size_t sample_categorical(Rng& rng, std::span<const double> weights) {
    assert(!weights.empty());
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    assert(total > 0.0);
    double u = sample_uniform(rng) * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    // Rounding left u just past the end; return the last positive entry.
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0) return i;
    return weights.size() - 1;
}

std::vector<double> sample_dirichlet(Rng& rng, std::span<const double> concentration) {
    std::vector<double> out(concentration.size());
    double total = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = concentration[i] > 0.0 ? sample_gamma(rng, concentration[i], 1.0) : 0.0;
        total += out[i];
    }
    if (total == 0.0) {
        // All gammas underflowed (tiny concentrations): put the mass on one
        // component chosen proportionally to the concentrations.
        const std::size_t pick = sample_categorical(rng, concentration);
        out[pick] = 1.0;
        return out;
    }
    for (double& v : out) v /= total;
    return out;
}

}  // namespace hdphmm
