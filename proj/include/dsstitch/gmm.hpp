#pragma once

#include <cstdint>
#include <vector>

#include "dsstitch/types.hpp"

namespace dsstitch {

/// One mixture component over positions.
struct GaussianComponent {
  double prior = 1.0;
  Vec mean;
  Mat covariance;

  int dimension() const { return static_cast<int>(mean.size()); }
};

/// Clamps covariance eigenvalues from below; keeps the matrix symmetric
/// positive definite in the presence of collinear data.
Mat floor_covariance(const Mat& cov, double relative_floor = 1e-8);

/// Mixture fit over a point set, with hard assignments (argmax
/// responsibility) for every input point.
struct MixtureFit {
  std::vector<GaussianComponent> components;
  std::vector<int> assignments;

  int component_count() const { return static_cast<int>(components.size()); }
};

struct GmmOptions {
  // Weight of the unit-velocity-direction block in the augmented features.
  // Non-positive means "use the mean spatial scale of the data".
  double direction_weight = -1.0;
  int restarts = 5;
  int max_em_iterations = 200;
  double em_tolerance = 1e-7;
  // Stop expanding K after this many consecutive BIC increases.
  int bic_patience = 2;
};

/// Expectation-maximization over position (+) scaled unit velocity
/// direction, K selected by minimum BIC over 1..k_max, then components
/// re-estimated on positions only from the hard assignments.
/// Deterministic for a fixed seed.
MixtureFit fit_gmm(const std::vector<ReferencePoint>& points, int k_max,
                   std::uint64_t seed, const GmmOptions& opts = {});

double gaussian_log_pdf(const GaussianComponent& c, const Vec& x);
double gaussian_pdf(const GaussianComponent& c, const Vec& x);

/// Mixture with pre-factored covariances for control-rate posterior
/// queries. Not safe for concurrent use of one instance (internal
/// workspace); build one per thread.
class MixtureEvaluator {
 public:
  explicit MixtureEvaluator(std::vector<GaussianComponent> components);

  int size() const { return static_cast<int>(components_.size()); }

  /// Posterior probabilities at x; returns an internal buffer valid until
  /// the next call. Falls back to an indicator on the Mahalanobis-nearest
  /// mean when every weighted density underflows.
  const Vec& posteriors(const Vec& x) const;

 private:
  struct Prepared {
    Vec mean;
    Mat chol_lower;
    double log_norm = 0.0;
    double log_prior = 0.0;
  };
  std::vector<Prepared> components_;
  mutable Vec gamma_, centered_, logw_, mahal_;
};

/// Posterior component probabilities at x. When every weighted density
/// underflows, falls back to an indicator on the Mahalanobis-nearest mean.
Vec posteriors(const std::vector<GaussianComponent>& components, const Vec& x);

/// Overlap of two Gaussians in [0, 1]: 1 for identical, -> 0 for disjoint.
double bhattacharyya_coefficient(const GaussianComponent& a,
                                 const GaussianComponent& b);

}  // namespace dsstitch
