#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wickpde/multiindex.hpp"

namespace wickpde {

/// Seedable generator configuration; identical config on the same binary
/// yields an identical sample stream.
struct RngConfig {
  std::uint64_t seed = 123456789;
  std::string generator = "mt19937_64";
};

/// Stream of i.i.d. standard normal coordinate vectors.
class GaussianSampler {
 public:
  explicit GaussianSampler(const RngConfig& cfg);

  void fill(std::span<double> out);
  std::vector<double> next(int m);

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

/// Probabilists' Hermite polynomial h_k via the recurrence
/// h_0 = 1, h_1 = x, h_{k+1} = x h_k - k h_{k-1}.
double hermite_poly(int k, double x);

/// H_gamma(x) = prod over the support of h_{gamma_k}(x_k); coordinates are
/// 1-based into the sample vector.  Throws ValidationError when gamma's
/// support exceeds the sample length.
double eval_H(const MultiIndex& gamma, std::span<const double> coords);

/// eval_H as a reusable functional of the sample.
std::function<double(std::span<const double>)> hermite_functional(const MultiIndex& gamma);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::int64_t samples = 0;
};

using SampleFunctional = std::function<double(std::span<const double>)>;

/// Sample mean of f*g over n i.i.d. m-dimensional Gaussian samples, with the
/// standard error of that mean.  Requires n >= 2.
McEstimate mc_inner(int m, const SampleFunctional& f, const SampleFunctional& g,
                    std::int64_t n, const RngConfig& cfg);

/// Chaos coefficient estimate E[f * H_gamma] / gamma!  (convention
/// E[H_gamma^2] = gamma!).  The returned std_error is scaled by 1/gamma! too.
McEstimate mc_project(int m, const SampleFunctional& f, const MultiIndex& gamma,
                      std::int64_t n, const RngConfig& cfg);

struct OrthogonalityCheck {
  MultiIndex alpha;
  MultiIndex beta;
  double estimate = 0.0;
  double std_error = 0.0;
  double expected = 0.0;  // alpha! when alpha == beta, else 0
  double sigma = 0.0;     // |estimate - expected| / std_error
  bool pass = false;
};

struct OrthogonalityReport {
  bool pass = true;
  double worst_sigma = 0.0;
  std::int64_t samples = 0;
  std::vector<OrthogonalityCheck> checks;  // pairs alpha <= beta in canonical order
};

/// Estimates E[H_alpha H_beta] for every unordered pair of indices with
/// support in 1..m and |.| <= max_degree, all on one shared sample stream,
/// and compares against alpha! * delta_{alpha,beta} at 4 standard errors.
OrthogonalityReport mc_orthogonality(int m, int max_degree, std::int64_t n,
                                     const RngConfig& cfg);

}  // namespace wickpde
