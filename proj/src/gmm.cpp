#include "dsstitch/gmm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "dsstitch/errors.hpp"

namespace dsstitch {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;  // ln(2*pi)
constexpr double kUnderflowLog = -690.0;             // ~ln(1e-300)

// Gaussian over general feature vectors, stored via the Cholesky factor of
// the covariance for cheap batched density evaluation.
struct CholGaussian {
  Vec mean;
  Eigen::LLT<Mat> llt;
  double log_det_half = 0.0;  // 0.5 * ln(det cov)

  void set(const Vec& mu, const Mat& cov) {
    mean = mu;
    llt.compute(cov);
    if (llt.info() != Eigen::Success)
      throw SingularCovariance("covariance not positive definite");
    log_det_half = llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }

  // Log densities of all columns of X at once.
  Vec log_pdf_cols(const Mat& X) const {
    const int d = static_cast<int>(mean.size());
    Mat centered = X.colwise() - mean;
    llt.matrixL().solveInPlace(centered);
    return (-0.5 * centered.colwise().squaredNorm().array() - log_det_half -
            0.5 * d * kLogTwoPi)
        .matrix()
        .transpose();
  }
};

struct EmModel {
  std::vector<CholGaussian> comps;
  Vec log_priors;

  int k() const { return static_cast<int>(comps.size()); }
};

// Log-likelihood matrix: log_priors[k] + log N(x_i | comp k), one row per
// component. Returns per-point log evidence and fills responsibilities.
double e_step(const EmModel& model, const Mat& X, Mat& resp) {
  const int k = model.k();
  const int n = static_cast<int>(X.cols());
  Mat logw(k, n);
  for (int j = 0; j < k; ++j)
    logw.row(j) = model.comps[j].log_pdf_cols(X).transpose().array() +
                  model.log_priors[j];
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double mx = logw.col(i).maxCoeff();
    const double lse = mx + std::log((logw.col(i).array() - mx).exp().sum());
    resp.col(i) = (logw.col(i).array() - lse).exp();
    total += lse;
  }
  return total;
}

// Exact M-step over the covariance family {S : S >= lam_abs * I}: the
// per-eigenvalue argmax of the expected log-likelihood is the clamp
// max(c_i, lam_abs), so EM stays monotone with the floor in place.
void m_step(const Mat& X, const Mat& resp, double lam_abs, EmModel& model) {
  const int k = static_cast<int>(resp.rows());
  const int n = static_cast<int>(X.cols());
  for (int j = 0; j < k; ++j) {
    const double nk = std::max(resp.row(j).sum(), 1e-12);
    const Vec mu = (X * resp.row(j).transpose()) / nk;
    Mat centered = X.colwise() - mu;
    Mat cov = (centered * resp.row(j).asDiagonal() * centered.transpose()) / nk;
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (cov + cov.transpose()));
    cov = eig.eigenvectors() *
          eig.eigenvalues().cwiseMax(lam_abs).asDiagonal() *
          eig.eigenvectors().transpose();
    model.comps[j].set(mu, cov);
    model.log_priors[j] = std::log(nk / n);
  }
}

// k-means++ seeding followed by a few Lloyd iterations.
std::vector<int> kmeans(const Mat& X, int k, std::mt19937_64& rng) {
  const int n = static_cast<int>(X.cols());
  std::vector<Vec> centers;
  centers.reserve(k);
  std::uniform_int_distribution<int> uni(0, n - 1);
  centers.push_back(X.col(uni(rng)));
  Vec d2 = (X.colwise() - centers[0]).colwise().squaredNorm().transpose();
  while (static_cast<int>(centers.size()) < k) {
    const double total = d2.sum();
    if (total <= 0.0) {
      centers.push_back(X.col(uni(rng)));
    } else {
      std::uniform_real_distribution<double> ur(0.0, total);
      double r = ur(rng);
      int pick = n - 1;
      for (int i = 0; i < n; ++i) {
        r -= d2[i];
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
      centers.push_back(X.col(pick));
    }
    d2 = d2.cwiseMin(
        (X.colwise() - centers.back()).colwise().squaredNorm().transpose());
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (X.col(i) - centers[0]).squaredNorm();
      for (int j = 1; j < k; ++j) {
        const double dj = (X.col(i) - centers[j]).squaredNorm();
        if (dj < best_d) {
          best_d = dj;
          best = j;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    for (int j = 0; j < k; ++j) {
      Vec acc = Vec::Zero(X.rows());
      int count = 0;
      for (int i = 0; i < n; ++i)
        if (assign[i] == j) {
          acc += X.col(i);
          ++count;
        }
      if (count > 0) centers[j] = acc / count;
    }
  }
  return assign;
}

EmModel init_from_assignment(const Mat& X, int k, const std::vector<int>& assign,
                             double lam_abs) {
  const int n = static_cast<int>(X.cols());
  EmModel model;
  model.comps.resize(k);
  model.log_priors = Vec::Zero(k);
  Mat resp = Mat::Zero(k, n);
  for (int i = 0; i < n; ++i) resp(assign[i], i) = 1.0;
  // Tiny uniform smoothing keeps empty seeds alive for the first E-step.
  resp.array() += 1e-6;
  resp.array().rowwise() /= resp.colwise().sum().array();
  m_step(X, resp, lam_abs, model);
  return model;
}

struct EmRun {
  EmModel model;
  double log_likelihood = -std::numeric_limits<double>::infinity();
};

EmRun run_em(const Mat& X, int k, std::uint64_t seed, const GmmOptions& opts,
             double lam_abs) {
  const int n = static_cast<int>(X.cols());
  EmRun best;
  for (int restart = 0; restart < opts.restarts; ++restart) {
    std::mt19937_64 rng(seed ^ (0xd1342543de82ef95ull * (restart + 1)) ^
                        (0xaf251af3b0f025b5ull * k));
    EmModel model = init_from_assignment(X, k, kmeans(X, k, rng), lam_abs);
    Mat resp(k, n);
    double prev = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opts.max_em_iterations; ++iter) {
      const double ll = e_step(model, X, resp);
      // EM ascent property; tiny slack for round-off.
      assert(ll >= prev - 1e-9 * (1.0 + std::abs(prev)));
      m_step(X, resp, lam_abs, model);
      if (std::abs(ll - prev) <= opts.em_tolerance * (1.0 + std::abs(ll))) {
        prev = ll;
        break;
      }
      prev = ll;
    }
    const double final_ll = e_step(model, X, resp);
    if (final_ll > best.log_likelihood) {
      best.model = std::move(model);
      best.log_likelihood = final_ll;
    }
  }
  return best;
}

double bic(double log_likelihood, int k, int dim, int n) {
  const double params = (k - 1) + k * dim + k * dim * (dim + 1) / 2.0;
  return -2.0 * log_likelihood + params * std::log(static_cast<double>(n));
}

}  // namespace

Mat floor_covariance(const Mat& cov, double relative_floor) {
  Mat sym = 0.5 * (cov + cov.transpose());
  const int d = static_cast<int>(sym.rows());
  const double floor =
      std::max(relative_floor * sym.trace() / d, 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
  Vec vals = eig.eigenvalues().cwiseMax(floor);
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

double gaussian_log_pdf(const GaussianComponent& c, const Vec& x) {
  if (x.size() != c.mean.size())
    throw DimensionMismatch("gaussian_pdf: dimension mismatch");
  const int d = static_cast<int>(x.size());
  Eigen::LLT<Mat> llt(c.covariance);
  if (llt.info() != Eigen::Success)
    throw SingularCovariance("gaussian_pdf: covariance not positive definite");
  const double log_det_half =
      llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  Vec centered = x - c.mean;
  llt.matrixL().solveInPlace(centered);
  return -0.5 * centered.squaredNorm() - log_det_half - 0.5 * d * kLogTwoPi;
}

double gaussian_pdf(const GaussianComponent& c, const Vec& x) {
  return std::exp(gaussian_log_pdf(c, x));
}

MixtureEvaluator::MixtureEvaluator(std::vector<GaussianComponent> components) {
  if (components.empty())
    throw ValidationError("MixtureEvaluator: no components");
  const int d = components.front().dimension();
  components_.reserve(components.size());
  for (auto& c : components) {
    Prepared prep;
    Eigen::LLT<Mat> llt(c.covariance);
    if (llt.info() != Eigen::Success)
      throw SingularCovariance("MixtureEvaluator: covariance not PD");
    prep.chol_lower = llt.matrixL();
    prep.log_norm = -prep.chol_lower.diagonal().array().log().sum() -
                    0.5 * d * kLogTwoPi;
    prep.log_prior = std::log(c.prior);
    prep.mean = std::move(c.mean);
    components_.push_back(std::move(prep));
  }
  const int k = static_cast<int>(components_.size());
  gamma_.resize(k);
  logw_.resize(k);
  mahal_.resize(k);
  centered_.resize(d);
}

const Vec& MixtureEvaluator::posteriors(const Vec& x) const {
  const int k = size();
  for (int j = 0; j < k; ++j) {
    const Prepared& c = components_[j];
    centered_ = x - c.mean;
    c.chol_lower.triangularView<Eigen::Lower>().solveInPlace(centered_);
    mahal_[j] = centered_.squaredNorm();
    logw_[j] = c.log_prior + c.log_norm - 0.5 * mahal_[j];
  }
  const double mx = logw_.maxCoeff();
  if (mx < kUnderflowLog) {
    // Every weighted density underflowed; the posterior limit is an
    // indicator on the Mahalanobis-nearest component.
    int best = 0;
    mahal_.minCoeff(&best);
    gamma_.setZero();
    gamma_[best] = 1.0;
    return gamma_;
  }
  gamma_ = (logw_.array() - mx).exp();
  gamma_ /= gamma_.sum();
  return gamma_;
}

Vec posteriors(const std::vector<GaussianComponent>& components, const Vec& x) {
  return MixtureEvaluator(components).posteriors(x);
}

double bhattacharyya_coefficient(const GaussianComponent& a,
                                 const GaussianComponent& b) {
  if (a.mean.size() != b.mean.size())
    throw DimensionMismatch("bhattacharyya_coefficient: dimension mismatch");
  const Mat avg = 0.5 * (a.covariance + b.covariance);
  Eigen::LLT<Mat> llt_avg(avg), llt_a(a.covariance), llt_b(b.covariance);
  if (llt_avg.info() != Eigen::Success || llt_a.info() != Eigen::Success ||
      llt_b.info() != Eigen::Success)
    throw SingularCovariance("bhattacharyya_coefficient: singular covariance");
  const auto half_log_det = [](const Eigen::LLT<Mat>& llt) {
    return llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };
  Vec diff = a.mean - b.mean;
  llt_avg.matrixL().solveInPlace(diff);
  const double mahal = 0.125 * diff.squaredNorm();
  const double log_det_term =
      half_log_det(llt_avg) - 0.5 * (half_log_det(llt_a) + half_log_det(llt_b));
  return std::exp(-(mahal + log_det_term));
}

MixtureFit fit_gmm(const std::vector<ReferencePoint>& points, int k_max,
                   std::uint64_t seed, const GmmOptions& opts) {
  const int n = static_cast<int>(points.size());
  if (n == 0) throw TooFewPoints("fit_gmm: no points");
  const int d = static_cast<int>(points.front().position.size());
  if (n < 2 * (d + 1))
    throw TooFewPoints("fit_gmm: need at least " + std::to_string(2 * (d + 1)) +
                       " points, got " + std::to_string(n));
  if (k_max < 1) throw ValidationError("fit_gmm: k_max must be >= 1");

  Vec centroid = Vec::Zero(d);
  for (const auto& p : points) centroid += p.position;
  centroid /= n;
  double spatial_scale = 0.0;
  for (const auto& p : points) spatial_scale += (p.position - centroid).norm();
  spatial_scale /= n;
  if (spatial_scale <= 0.0)
    throw DegenerateData("fit_gmm: all points are identical");

  const double beta =
      opts.direction_weight > 0.0 ? opts.direction_weight : spatial_scale;

  // Augmented features: position (+) beta * unit velocity direction, so
  // components do not straddle opposing flows.
  Mat X(2 * d, n);
  for (int i = 0; i < n; ++i) {
    X.col(i).head(d) = points[i].position;
    const double speed = points[i].velocity.norm();
    X.col(i).tail(d) = speed > 1e-12
                           ? Vec(beta * points[i].velocity / speed)
                           : Vec(Vec::Zero(d));
  }

  // Fixed absolute eigenvalue floor for EM, from the global feature
  // scatter; fixed across iterations so the M-step stays an exact argmax.
  double lam_abs;
  {
    const Vec feature_mean = X.rowwise().mean();
    const Mat centered = X.colwise() - feature_mean;
    const double total_trace = centered.squaredNorm() / n;
    lam_abs = std::max(1e-8 * total_trace / (2 * d), 1e-12);
  }
  const double floor_rel = 1e-8;
  struct Candidate {
    EmRun run;
    int k = 0;
    double bic_score = std::numeric_limits<double>::infinity();
  };
  Candidate best;
  int rises = 0;
  double prev_bic = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_max; ++k) {
    if (n < k * (d + 1)) break;  // not enough points for k hard clusters
    EmRun run = run_em(X, k, seed, opts, lam_abs);
    const double score = bic(run.log_likelihood, k, 2 * d, n);
    if (score < best.bic_score) {
      best.run = std::move(run);
      best.k = k;
      best.bic_score = score;
    }
    rises = score > prev_bic ? rises + 1 : 0;
    prev_bic = score;
    if (rises >= opts.bic_patience) break;
  }

  // Hard assignments from the augmented-space responsibilities.
  Mat resp(best.k, n);
  e_step(best.run.model, X, resp);
  std::vector<int> assign(n);
  for (int i = 0; i < n; ++i) {
    int arg = 0;
    resp.col(i).maxCoeff(&arg);
    assign[i] = arg;
  }

  // Components smaller than d+1 points cannot support a covariance
  // estimate; drop the smallest and reassign until all are viable.
  std::vector<int> alive(best.k);
  std::iota(alive.begin(), alive.end(), 0);
  for (;;) {
    std::vector<int> counts(best.k, 0);
    for (int a : assign) ++counts[a];
    int worst = -1, worst_count = n + 1;
    for (int j : alive)
      if (counts[j] < worst_count) {
        worst_count = counts[j];
        worst = j;
      }
    if (worst_count >= d + 1 || alive.size() <= 1) break;
    alive.erase(std::find(alive.begin(), alive.end(), worst));
    for (int i = 0; i < n; ++i) {
      if (assign[i] != worst) continue;
      int arg = alive[0];
      double best_r = resp(alive[0], i);
      for (int j : alive)
        if (resp(j, i) > best_r) {
          best_r = resp(j, i);
          arg = j;
        }
      assign[i] = arg;
    }
  }

  // Re-estimate on positions only from the hard assignments.
  MixtureFit fit;
  std::vector<int> remap(best.k, -1);
  for (int j : alive) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i)
      if (assign[i] == j) members.push_back(i);
    GaussianComponent comp;
    comp.prior = static_cast<double>(members.size()) / n;
    comp.mean = Vec::Zero(d);
    for (int i : members) comp.mean += points[i].position;
    comp.mean /= static_cast<double>(members.size());
    Mat cov = Mat::Zero(d, d);
    for (int i : members) {
      const Vec c = points[i].position - comp.mean;
      cov += c * c.transpose();
    }
    cov /= static_cast<double>(members.size());
    comp.covariance = floor_covariance(cov, floor_rel);
    remap[j] = static_cast<int>(fit.components.size());
    fit.components.push_back(std::move(comp));
  }
  fit.assignments.resize(n);
  for (int i = 0; i < n; ++i) fit.assignments[i] = remap[assign[i]];
  return fit;
}

}  // namespace dsstitch
