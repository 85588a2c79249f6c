#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsstitch/gmm.hpp"
#include "dsstitch/lbfgs.hpp"
#include "dsstitch/types.hpp"

namespace dsstitch {

/// A globally asymptotically stable blended-linear policy:
///   f(x) = sum_k gamma_k(x) * A_k * (x - attractor)
/// with gamma the mixture posteriors and every A_k satisfying
/// A_k' P + P A_k < 0 for the shared Lyapunov matrix P.
struct StablePolicy {
  std::vector<GaussianComponent> components;
  std::vector<Mat> dynamics;
  Mat lyapunov;
  Vec attractor;

  int dimension() const { return static_cast<int>(attractor.size()); }
  int component_count() const { return static_cast<int>(components.size()); }
};

struct StabilityReport {
  double min_eig_p = 0.0;
  double symmetry_error = 0.0;
  std::vector<double> margins;  // max eigenvalue of A_k'P + PA_k, per k
  bool pass = false;

  double worst_margin() const;
};

struct FitReport {
  double final_objective = 0.0;  // mean squared velocity error
  int iterations = 0;
  StabilityReport stability;
  double wall_seconds = 0.0;
};

struct DsFitOptions {
  double eps_p = 1e-6;
  // Scaled from the data when <= 0 (1e-6 * mean speed / mean radius).
  double delta_stab = -1.0;
  LbfgsOptions optimizer;
};

/// Velocity-matching objective over the stability-by-construction
/// parameterization. Exposed so tests can finite-difference the analytic
/// gradient.
///
/// Parameter vector layout: [lower(L) | per k: vec(B_k), strict_lower(S_k)],
/// with P = L L' + eps_p I, M_k = S_k - (B_k B_k' + delta I), A_k = P^-1 M_k,
/// which makes A_k'P + PA_k = -2 (B_k B_k' + delta I) negative definite for
/// any parameter value.
class DsObjective {
 public:
  DsObjective(const std::vector<ReferencePoint>& points,
              const std::vector<GaussianComponent>& components,
              const Vec& attractor, const DsFitOptions& opts);

  int parameter_count() const;
  Vec initial_parameters() const;
  double value_and_gradient(const Vec& theta, Vec& grad) const;

  struct Extracted {
    Mat lyapunov;
    std::vector<Mat> dynamics;
  };
  Extracted extract(const Vec& theta) const;

  double delta_stab() const { return delta_; }

 private:
  int dim_ = 0;
  int k_ = 0;
  double eps_p_ = 1e-6;
  double delta_ = 1e-8;
  double n_ = 0.0;
  double v_squared_sum_ = 0.0;
  std::vector<Mat> cross_;   // C_kl = sum_i w_ik w_il x_i x_i'
  std::vector<Mat> target_;  // D_k  = sum_i w_ik v_i x_i'
};

/// Fits {A_k} and P to the reference velocities with the mixture fixed
/// (priors renormalized). Deterministic; invariant to point order.
std::pair<StablePolicy, FitReport> fit_ds_given_gmm(
    const MixtureFit& mixture, const std::vector<ReferencePoint>& points,
    const Vec& attractor, const DsFitOptions& opts = {});

struct LpvdsResult {
  StablePolicy policy;
  MixtureFit mixture;
  FitReport report;
};

/// Full pipeline: mixture estimation, then stable dynamics fitting.
LpvdsResult fit_lpvds(const std::vector<ReferencePoint>& points,
                      const Vec& attractor, int k_max, std::uint64_t seed,
                      const GmmOptions& gmm_opts = {},
                      const DsFitOptions& ds_opts = {});

/// Blended velocity at x. Exactly zero at the attractor.
Vec evaluate(const StablePolicy& policy, const Vec& x);

/// Control-rate evaluation of one policy with pre-factored covariances.
/// The referenced policy must outlive the evaluator; one instance per
/// thread (internal workspace).
class PolicyEvaluator {
 public:
  explicit PolicyEvaluator(const StablePolicy& policy);

  const StablePolicy& policy() const { return *policy_; }
  Vec velocity(const Vec& x) const;
  void velocity_into(const Vec& x, Vec& out) const;

 private:
  const StablePolicy* policy_;
  MixtureEvaluator mixture_;
  mutable Vec centered_;
};

/// Eigenvalue margins of the Lyapunov conditions. Pass requires
/// min-eig(P) > 1e-10 and every margin < -1e-10.
StabilityReport verify_stability(const StablePolicy& policy);

}  // namespace dsstitch
