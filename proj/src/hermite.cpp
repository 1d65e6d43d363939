#include "wickpde/hermite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wickpde/util.hpp"

namespace wickpde {

GaussianSampler::GaussianSampler(const RngConfig& cfg) : rng_(cfg.seed) {
  if (cfg.generator != "mt19937_64")
    throw ValidationError("unknown generator '" + cfg.generator + "' (expected mt19937_64)");
}

void GaussianSampler::fill(std::span<double> out) {
  for (double& x : out) x = normal_(rng_);
}

std::vector<double> GaussianSampler::next(int m) {
  std::vector<double> v(static_cast<std::size_t>(m));
  fill(v);
  return v;
}

double hermite_poly(int k, double x) {
  if (k < 0) throw ValidationError("hermite_poly: degree must be nonnegative");
  if (k == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (int j = 1; j < k; ++j) {
    double next = x * cur - j * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double eval_H(const MultiIndex& gamma, std::span<const double> coords) {
  double prod = 1.0;
  for (const auto& e : gamma.entries()) {
    if (static_cast<std::size_t>(e.coord) > coords.size())
      throw ValidationError("eval_H: index " + gamma.str() + " needs coordinate " +
                            std::to_string(e.coord) + " but the sample has " +
                            std::to_string(coords.size()));
    prod *= hermite_poly(e.exp, coords[static_cast<std::size_t>(e.coord) - 1]);
  }
  return prod;
}

std::function<double(std::span<const double>)> hermite_functional(const MultiIndex& gamma) {
  return [gamma](std::span<const double> coords) { return eval_H(gamma, coords); };
}

namespace {

McEstimate finalize(double sum, double sumsq, std::int64_t n) {
  McEstimate est;
  est.samples = n;
  est.estimate = sum / static_cast<double>(n);
  double var = (sumsq - static_cast<double>(n) * est.estimate * est.estimate) /
               static_cast<double>(n - 1);
  est.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
  return est;
}

}  // namespace

McEstimate mc_inner(int m, const SampleFunctional& f, const SampleFunctional& g,
                    std::int64_t n, const RngConfig& cfg) {
  if (m < 1) throw ValidationError("mc_inner: dimension must be >= 1");
  if (n < 2) throw ValidationError("mc_inner: need at least 2 samples");
  GaussianSampler sampler(cfg);
  std::vector<double> coords(static_cast<std::size_t>(m));
  double sum = 0.0, sumsq = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    sampler.fill(coords);
    double v = f(coords) * g(coords);
    sum += v;
    sumsq += v * v;
  }
  return finalize(sum, sumsq, n);
}

McEstimate mc_project(int m, const SampleFunctional& f, const MultiIndex& gamma,
                      std::int64_t n, const RngConfig& cfg) {
  McEstimate est = mc_inner(m, f, hermite_functional(gamma), n, cfg);
  double fact = gamma.factorial();
  est.estimate /= fact;
  est.std_error /= fact;
  return est;
}

OrthogonalityReport mc_orthogonality(int m, int max_degree, std::int64_t n,
                                     const RngConfig& cfg) {
  if (m < 1) throw ValidationError("mc_orthogonality: dimension must be >= 1");
  if (n < 2) throw ValidationError("mc_orthogonality: need at least 2 samples");
  auto indices = enumerate_indices({m, max_degree, TruncationShape::TotalDegree});
  const std::size_t k = indices.size();
  const std::size_t npairs = k * (k + 1) / 2;
  std::vector<double> sum(npairs, 0.0), sumsq(npairs, 0.0), vals(k);

  GaussianSampler sampler(cfg);
  std::vector<double> coords(static_cast<std::size_t>(m));
  for (std::int64_t it = 0; it < n; ++it) {
    sampler.fill(coords);
    for (std::size_t i = 0; i < k; ++i) vals[i] = eval_H(indices[i], coords);
    std::size_t p = 0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i; j < k; ++j, ++p) {
        double v = vals[i] * vals[j];
        sum[p] += v;
        sumsq[p] += v * v;
      }
    }
  }

  OrthogonalityReport rep;
  rep.samples = n;
  rep.checks.reserve(npairs);
  std::size_t p = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j, ++p) {
      McEstimate est = finalize(sum[p], sumsq[p], n);
      OrthogonalityCheck chk;
      chk.alpha = indices[i];
      chk.beta = indices[j];
      chk.estimate = est.estimate;
      chk.std_error = est.std_error;
      chk.expected = (i == j) ? indices[i].factorial() : 0.0;
      double diff = std::abs(chk.estimate - chk.expected);
      // A zero-variance product (constant integrand) must match exactly.
      chk.sigma = est.std_error > 0 ? diff / est.std_error
                                    : (diff == 0.0 ? 0.0
                                                   : std::numeric_limits<double>::infinity());
      chk.pass = chk.sigma <= 4.0;
      rep.worst_sigma = std::max(rep.worst_sigma, chk.sigma);
      rep.pass = rep.pass && chk.pass;
      rep.checks.push_back(std::move(chk));
    }
  }
  return rep;
}

}  // namespace wickpde
