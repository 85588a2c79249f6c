#include "dsstitch/lpvds.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "dsstitch/errors.hpp"

namespace dsstitch {

namespace {

int lower_count(int d) { return d * (d + 1) / 2; }
int strict_lower_count(int d) { return d * (d - 1) / 2; }

Mat unpack_lower(const Vec& v, int offset, int d) {
  Mat m = Mat::Zero(d, d);
  int idx = offset;
  for (int col = 0; col < d; ++col)
    for (int row = col; row < d; ++row) m(row, col) = v[idx++];
  return m;
}

void pack_lower_add(const Mat& g, int offset, int d, Vec& out) {
  int idx = offset;
  for (int col = 0; col < d; ++col)
    for (int row = col; row < d; ++row) out[idx++] = g(row, col);
}

Mat unpack_skew(const Vec& v, int offset, int d) {
  Mat m = Mat::Zero(d, d);
  int idx = offset;
  for (int col = 0; col < d; ++col)
    for (int row = col + 1; row < d; ++row) {
      m(row, col) = v[idx];
      m(col, row) = -v[idx];
      ++idx;
    }
  return m;
}

void pack_strict_lower(const Mat& g, int offset, int d, Vec& out) {
  int idx = offset;
  for (int col = 0; col < d; ++col)
    for (int row = col + 1; row < d; ++row) out[idx++] = g(row, col);
}

// Canonical point order: sorts lexicographically by position, then
// velocity, so accumulation is invariant to the caller's ordering.
std::vector<int> canonical_order(const std::vector<ReferencePoint>& pts) {
  std::vector<int> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& pa = pts[a];
    const auto& pb = pts[b];
    for (int j = 0; j < pa.position.size(); ++j) {
      if (pa.position[j] != pb.position[j]) return pa.position[j] < pb.position[j];
    }
    for (int j = 0; j < pa.velocity.size(); ++j) {
      if (pa.velocity[j] != pb.velocity[j]) return pa.velocity[j] < pb.velocity[j];
    }
    return false;
  });
  return order;
}

}  // namespace

double StabilityReport::worst_margin() const {
  double worst = -std::numeric_limits<double>::infinity();
  for (double m : margins) worst = std::max(worst, m);
  return worst;
}

DsObjective::DsObjective(const std::vector<ReferencePoint>& points,
                         const std::vector<GaussianComponent>& components,
                         const Vec& attractor, const DsFitOptions& opts) {
  dim_ = static_cast<int>(attractor.size());
  k_ = static_cast<int>(components.size());
  eps_p_ = opts.eps_p;
  n_ = static_cast<double>(points.size());
  if (points.empty()) throw TooFewPoints("fit_ds: no points");

  if (opts.delta_stab > 0.0) {
    delta_ = opts.delta_stab;
  } else {
    double speed = 0.0, radius = 0.0;
    for (const auto& p : points) {
      speed += p.velocity.norm();
      radius += (p.position - attractor).norm();
    }
    const double rate = speed / std::max(radius, 1e-12);
    delta_ = std::max(1e-8, 1e-6 * rate);
  }

  cross_.assign(k_ * k_, Mat::Zero(dim_, dim_));
  target_.assign(k_, Mat::Zero(dim_, dim_));
  v_squared_sum_ = 0.0;

  const std::vector<int> order = canonical_order(points);
  const MixtureEvaluator mixture(components);
  for (int idx : order) {
    const auto& p = points[idx];
    const Vec& w = mixture.posteriors(p.position);
    const Vec x = p.position - attractor;
    const Mat outer = x * x.transpose();
    for (int a = 0; a < k_; ++a) {
      target_[a] += w[a] * p.velocity * x.transpose();
      for (int b = a; b < k_; ++b) cross_[a * k_ + b] += (w[a] * w[b]) * outer;
    }
    v_squared_sum_ += p.velocity.squaredNorm();
  }
  for (int a = 0; a < k_; ++a)
    for (int b = 0; b < a; ++b) cross_[a * k_ + b] = cross_[b * k_ + a];
}

int DsObjective::parameter_count() const {
  return lower_count(dim_) + k_ * (dim_ * dim_ + strict_lower_count(dim_));
}

Vec DsObjective::initial_parameters() const {
  Vec theta = Vec::Zero(parameter_count());
  // L = I, B_k = I, S_k = 0 gives P ~ I and A_k ~ -I.
  int idx = 0;
  for (int col = 0; col < dim_; ++col)
    for (int row = col; row < dim_; ++row) theta[idx++] = (row == col) ? 1.0 : 0.0;
  for (int k = 0; k < k_; ++k) {
    const int b0 = lower_count(dim_) + k * (dim_ * dim_ + strict_lower_count(dim_));
    for (int col = 0; col < dim_; ++col)
      for (int row = 0; row < dim_; ++row)
        theta[b0 + col * dim_ + row] = (row == col) ? 1.0 : 0.0;
  }
  return theta;
}

DsObjective::Extracted DsObjective::extract(const Vec& theta) const {
  Extracted out;
  const Mat L = unpack_lower(theta, 0, dim_);
  out.lyapunov = L * L.transpose() + eps_p_ * Mat::Identity(dim_, dim_);
  Eigen::LLT<Mat> llt(out.lyapunov);
  out.dynamics.reserve(k_);
  const int per_k = dim_ * dim_ + strict_lower_count(dim_);
  for (int k = 0; k < k_; ++k) {
    const int b0 = lower_count(dim_) + k * per_k;
    const Mat B = Eigen::Map<const Mat>(theta.data() + b0, dim_, dim_);
    const Mat S = unpack_skew(theta, b0 + dim_ * dim_, dim_);
    const Mat M =
        S - (B * B.transpose() + delta_ * Mat::Identity(dim_, dim_));
    out.dynamics.push_back(llt.solve(M));
  }
  return out;
}

double DsObjective::value_and_gradient(const Vec& theta, Vec& grad) const {
  const int d = dim_;
  const Mat L = unpack_lower(theta, 0, d);
  const Mat P = L * L.transpose() + eps_p_ * Mat::Identity(d, d);
  Eigen::LLT<Mat> llt(P);

  const int per_k = d * d + strict_lower_count(d);
  std::vector<Mat> B(k_), M(k_), A(k_);
  for (int k = 0; k < k_; ++k) {
    const int b0 = lower_count(d) + k * per_k;
    B[k] = Eigen::Map<const Mat>(theta.data() + b0, d, d);
    const Mat S = unpack_skew(theta, b0 + d * d, d);
    M[k] = S - (B[k] * B[k].transpose() + delta_ * Mat::Identity(d, d));
    A[k] = llt.solve(M[k]);
  }

  // J = (1/N) [ sum_kl tr(A_k' A_l C_kl) - 2 sum_k tr(A_k' D_k) + sum |v|^2 ]
  double j = v_squared_sum_;
  std::vector<Mat> g_a(k_);  // dJ/dA_k
  for (int k = 0; k < k_; ++k) {
    Mat acc = Mat::Zero(d, d);
    for (int l = 0; l < k_; ++l) acc += A[l] * cross_[k * k_ + l];
    j += (A[k].transpose() * acc).trace() - 2.0 * (A[k].transpose() * target_[k]).trace();
    g_a[k] = (2.0 / n_) * (acc - target_[k]);
  }
  j /= n_;

  grad = Vec::Zero(parameter_count());
  Mat phi = Mat::Zero(d, d);  // dJ/dP
  for (int k = 0; k < k_; ++k) {
    const Mat n_k = llt.solve(g_a[k]);  // dJ/dM_k
    phi -= n_k * A[k].transpose();
    const int b0 = lower_count(d) + k * per_k;
    const Mat g_b = -(n_k + n_k.transpose()) * B[k];
    Eigen::Map<Mat>(grad.data() + b0, d, d) = g_b;
    pack_strict_lower(n_k - n_k.transpose(), b0 + d * d, d, grad);
  }
  pack_lower_add((phi + phi.transpose()) * L, 0, d, grad);
  return j;
}

namespace {

StablePolicy assemble_policy(const std::vector<GaussianComponent>& components,
                             const DsObjective::Extracted& ext,
                             const Vec& attractor) {
  StablePolicy policy;
  policy.components = components;
  double prior_sum = 0.0;
  for (const auto& c : policy.components) prior_sum += c.prior;
  for (auto& c : policy.components) c.prior /= prior_sum;
  policy.dynamics = ext.dynamics;
  policy.lyapunov = ext.lyapunov;
  policy.attractor = attractor;
  return policy;
}

}  // namespace

std::pair<StablePolicy, FitReport> fit_ds_given_gmm(
    const MixtureFit& mixture, const std::vector<ReferencePoint>& points,
    const Vec& attractor, const DsFitOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  if (mixture.components.empty())
    throw ValidationError("fit_ds_given_gmm: empty mixture");

  std::vector<GaussianComponent> components = mixture.components;
  double prior_sum = 0.0;
  for (const auto& c : components) prior_sum += c.prior;
  if (prior_sum <= 0.0) throw ValidationError("fit_ds_given_gmm: zero priors");
  for (auto& c : components) c.prior /= prior_sum;

  DsObjective objective(points, components, attractor, opts);
  const auto fn = [&objective](const Vec& x, Vec& g) {
    return objective.value_and_gradient(x, g);
  };
  LbfgsResult opt = lbfgs_minimize(fn, objective.initial_parameters(),
                                   opts.optimizer);
  if (!std::isfinite(opt.fx))
    throw OptimizationDiverged("fit_ds_given_gmm: non-finite objective");

  StablePolicy policy =
      assemble_policy(components, objective.extract(opt.x), attractor);

  FitReport report;
  report.final_objective = opt.fx;
  report.iterations = opt.iterations;
  report.stability = verify_stability(policy);
  if (!report.stability.pass)
    throw StabilityUnsatisfied("fit_ds_given_gmm: stability check failed");
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(policy), std::move(report)};
}

LpvdsResult fit_lpvds(const std::vector<ReferencePoint>& points,
                      const Vec& attractor, int k_max, std::uint64_t seed,
                      const GmmOptions& gmm_opts, const DsFitOptions& ds_opts) {
  if (!attractor.allFinite())
    throw ValidationError("fit_lpvds: non-finite attractor");
  LpvdsResult result;
  result.mixture = fit_gmm(points, k_max, seed, gmm_opts);
  auto [policy, report] =
      fit_ds_given_gmm(result.mixture, points, attractor, ds_opts);
  result.policy = std::move(policy);
  result.report = std::move(report);
  return result;
}

Vec evaluate(const StablePolicy& policy, const Vec& x) {
  return PolicyEvaluator(policy).velocity(x);
}

PolicyEvaluator::PolicyEvaluator(const StablePolicy& policy)
    : policy_(&policy),
      mixture_(policy.components),
      centered_(policy.dimension()) {}

Vec PolicyEvaluator::velocity(const Vec& x) const {
  Vec out(policy_->dimension());
  velocity_into(x, out);
  return out;
}

void PolicyEvaluator::velocity_into(const Vec& x, Vec& out) const {
  const Vec& gamma = mixture_.posteriors(x);
  centered_ = x - policy_->attractor;
  out.setZero();
  for (int k = 0; k < policy_->component_count(); ++k)
    out.noalias() += gamma[k] * (policy_->dynamics[k] * centered_);
}

StabilityReport verify_stability(const StablePolicy& policy) {
  StabilityReport report;
  const Mat& p = policy.lyapunov;
  report.symmetry_error = (p - p.transpose()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Mat> eig_p(0.5 * (p + p.transpose()));
  report.min_eig_p = eig_p.eigenvalues().minCoeff();
  report.margins.reserve(policy.dynamics.size());
  for (const auto& a : policy.dynamics) {
    const Mat q = a.transpose() * p + p * a;
    Eigen::SelfAdjointEigenSolver<Mat> eig_q(0.5 * (q + q.transpose()));
    report.margins.push_back(eig_q.eigenvalues().maxCoeff());
  }
  report.pass = report.min_eig_p > 1e-10 && report.symmetry_error <= 1e-10;
  for (double m : report.margins)
    if (!(m < -1e-10)) report.pass = false;
  return report;
}

}  // namespace dsstitch
