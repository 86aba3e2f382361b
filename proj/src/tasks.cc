// Copyright 2026 The GST Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gst/tasks.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gst {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double spd_scale(std::span<const BoundSample> samples) {
  std::vector<double> xs;
  xs.reserve(samples.size());
  double sum = 0.0;
  for (const auto& s : samples) {
    xs.push_back(s.grad_norm_sq);
    sum += s.grad_norm_sq;
  }
  double scale = median_of(xs);
  if (scale <= 0.0) scale = sum / static_cast<double>(samples.size());
  return scale;
}

// Candidate beta^2 values: exact zero plus a log grid over six decades
// below the largest slope any single sample can demand.
std::vector<double> beta_grid(double upper) {
  std::vector<double> grid{0.0};
  if (upper <= 0.0) return grid;
  for (int j = 0; j < kBetaGridSize; ++j) {
    const double e = -6.0 + 6.0 * static_cast<double>(j) / static_cast<double>(kBetaGridSize - 1);
    grid.push_back(upper * std::pow(10.0, e));
  }
  return grid;
}

}  // namespace

QuadraticTask::QuadraticTask(int id, Eigen::MatrixXd hessian, Eigen::VectorXd theta_star, double noise_sigma)
    : id_(id), hessian_(std::move(hessian)), theta_star_(std::move(theta_star)), noise_sigma_(noise_sigma) {
  if (hessian_.rows() != hessian_.cols() || hessian_.rows() != theta_star_.size() || theta_star_.size() == 0) {
    throw StructuralError("QuadraticTask: hessian/minimizer shape mismatch");
  }
  if (!hessian_.allFinite() || !theta_star_.allFinite()) throw NumericError("QuadraticTask: non-finite input");
  if (!(noise_sigma_ >= 0.0)) throw StructuralError("QuadraticTask: noise_sigma must be >= 0");
  const double scale = std::max(1.0, hessian_.cwiseAbs().maxCoeff());
  if ((hessian_ - hessian_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw StructuralError("QuadraticTask: hessian is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw StructuralError("QuadraticTask: hessian is not positive semidefinite");
  }
  smoothness_ = std::max(0.0, es.eigenvalues().maxCoeff());
}

double QuadraticTask::eval(const ParamVector& theta) const {
  const Eigen::VectorXd e = theta.values() - theta_star_;
  return 0.5 * e.dot(hessian_ * e);
}

ParamVector QuadraticTask::grad(const ParamVector& theta) const {
  return ParamVector(hessian_ * (theta.values() - theta_star_));
}

ParamVector QuadraticTask::stoch_grad(const ParamVector& theta, SeededRng& rng) const {
  const double per_coord = noise_sigma_ / std::sqrt(static_cast<double>(dim()));
  return ParamVector(hessian_ * (theta.values() - theta_star_) + per_coord * rng.normal_vector(dim()));
}

TaskList QuadraticFamily::task_list() const {
  TaskList list;
  list.reserve(tasks.size());
  for (const auto& t : tasks) list.push_back(std::make_shared<QuadraticTask>(t));
  return list;
}

Eigen::VectorXd QuadraticFamily::mean_minimizer() const {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(tasks.front().theta_star().size());
  for (const auto& t : tasks) mean += t.theta_star();
  return mean / static_cast<double>(tasks.size());
}

std::uint64_t QuadraticFamily::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : tasks) {
    h = fnv1a(t.hessian().data(), static_cast<std::size_t>(t.hessian().size()) * sizeof(double), h);
    h = hash_vector(t.theta_star(), h);
    const double s = t.noise_sigma();
    h = fnv1a(&s, sizeof(s), h);
  }
  return h;
}

QuadraticFamily generate_quadratic_family(const HeterogeneityRecipe& r) {
  if (r.num_tasks < 1) throw StructuralError("recipe.num_tasks must be >= 1");
  if (r.dim < 1) throw StructuralError("recipe.dim must be >= 1");
  if (r.num_latent_clusters < 1) throw StructuralError("recipe.num_latent_clusters must be >= 1");
  if (r.num_tasks < r.num_latent_clusters) {
    throw StructuralError("recipe.num_tasks (" + std::to_string(r.num_tasks) + ") < num_latent_clusters (" +
                          std::to_string(r.num_latent_clusters) + ")");
  }
  if (r.intra_cluster_spread < 0 || r.inter_cluster_spread < 0 || r.curvature_jitter < 0 || r.noise_sigma < 0) {
    throw StructuralError("recipe spreads, jitter and noise must be >= 0");
  }
  if (!(r.min_curvature > 0) || r.max_curvature < r.min_curvature) {
    throw StructuralError("recipe curvature range must satisfy 0 < min_curvature <= max_curvature");
  }
  if (!r.cluster_intra_spreads.empty() &&
      static_cast<int>(r.cluster_intra_spreads.size()) != r.num_latent_clusters) {
    throw StructuralError("recipe.cluster_intra_spreads must have one entry per latent cluster");
  }
  if (r.center_last_cluster && r.num_latent_clusters < 2) {
    throw StructuralError("recipe.center_last_cluster needs at least two latent clusters");
  }

  const auto d = static_cast<std::size_t>(r.dim);
  const SeededRng root(r.seed, 0);

  SeededRng rot_rng = root.substream(1);
  Eigen::MatrixXd gauss(r.dim, r.dim);
  for (int i = 0; i < r.dim; ++i)
    for (int j = 0; j < r.dim; ++j) gauss(i, j) = rot_rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd rr = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < r.dim; ++j) {
    if (rr(j, j) < 0) q.col(j) *= -1.0;
  }

  SeededRng spec_rng = root.substream(2);
  Eigen::VectorXd base_spectrum(r.dim);
  const double lo = std::log(r.min_curvature), hi = std::log(r.max_curvature);
  for (int i = 0; i < r.dim; ++i) base_spectrum[i] = std::exp(lo + spec_rng.uniform() * (hi - lo));

  SeededRng center_rng = root.substream(3);
  std::vector<Eigen::VectorXd> centers;
  for (int k = 0; k < r.num_latent_clusters; ++k) centers.push_back(r.inter_cluster_spread * center_rng.normal_vector(d));

  QuadraticFamily family;
  family.recipe = r;
  std::vector<Eigen::VectorXd> minimizers;
  std::vector<Eigen::VectorXd> spectra;
  for (int m = 0; m < r.num_tasks; ++m) {
    const int k = static_cast<int>(static_cast<long long>(m) * r.num_latent_clusters / r.num_tasks);
    family.latent_clusters.push_back(k);
    SeededRng task_rng = root.substream(100 + static_cast<std::uint64_t>(m));
    const double spread = r.cluster_intra_spreads.empty() ? r.intra_cluster_spread
                                                          : r.cluster_intra_spreads[static_cast<std::size_t>(k)];
    minimizers.push_back(centers[static_cast<std::size_t>(k)] + spread * task_rng.normal_vector(d));
    const Eigen::VectorXd jitter = task_rng.normal_vector(d);
    spectra.push_back(base_spectrum.array() * (r.curvature_jitter * jitter.array()).exp());
  }

  if (r.center_last_cluster) {
    const int last = r.num_latent_clusters - 1;
    Eigen::VectorXd others = Eigen::VectorXd::Zero(r.dim), own = Eigen::VectorXd::Zero(r.dim);
    int n_others = 0, n_own = 0;
    for (int m = 0; m < r.num_tasks; ++m) {
      if (family.latent_clusters[static_cast<std::size_t>(m)] == last) {
        own += minimizers[static_cast<std::size_t>(m)];
        ++n_own;
      } else {
        others += minimizers[static_cast<std::size_t>(m)];
        ++n_others;
      }
    }
    const Eigen::VectorXd shift = others / n_others - own / n_own;
    for (int m = 0; m < r.num_tasks; ++m) {
      if (family.latent_clusters[static_cast<std::size_t>(m)] == last) minimizers[static_cast<std::size_t>(m)] += shift;
    }
  }

  for (int m = 0; m < r.num_tasks; ++m) {
    Eigen::MatrixXd h = q * spectra[static_cast<std::size_t>(m)].asDiagonal() * q.transpose();
    h = 0.5 * (h + h.transpose()).eval();
    family.tasks.emplace_back(m, std::move(h), minimizers[static_cast<std::size_t>(m)], r.noise_sigma);
  }
  return family;
}

HeterogeneityConstants fit_heterogeneity_bound(std::span<const BoundSample> samples) {
  if (samples.empty()) throw StructuralError("fit_heterogeneity_bound: no samples");
  double y_max = 0.0;
  for (const auto& s : samples) {
    if (!std::isfinite(s.grad_norm_sq) || !std::isfinite(s.deviation)) {
      throw NumericError("fit_heterogeneity_bound: non-finite sample");
    }
    y_max = std::max(y_max, s.deviation);
  }
  if (y_max <= 0.0) return {0.0, 0.0};

  const double scale = spd_scale(samples);
  if (scale <= 0.0) return {std::nullopt, y_max};

  double upper = 0.0;
  for (const auto& s : samples) {
    if (s.grad_norm_sq > 0.0) upper = std::max(upper, s.deviation / s.grad_norm_sq);
  }

  HeterogeneityConstants best{0.0, 0.0};
  double best_obj = std::numeric_limits<double>::infinity();
  for (double b : beta_grid(upper)) {
    double z = 0.0;
    for (const auto& s : samples) z = std::max(z, s.deviation - b * s.grad_norm_sq);
    const double obj = b + z / scale;
    if (obj < best_obj) {
      best_obj = obj;
      best = {b, z};
    }
  }
  return best;
}

double gradient_deviation(std::span<const TaskPtr> tasks, const ParamVector& theta) {
  const Eigen::MatrixXd g = task_gradients(tasks, theta);
  const Eigen::VectorXd mean = g.rowwise().mean();
  return (g.colwise() - mean).colwise().squaredNorm().mean();
}

HeterogeneityConstants closed_form_heterogeneity(std::span<const QuadraticTask> tasks,
                                                 std::span<const ParamVector> probe_points) {
  if (tasks.empty()) throw StructuralError("closed_form_heterogeneity: no tasks");
  if (probe_points.empty()) throw StructuralError("closed_form_heterogeneity: no probe points");
  const Eigen::Index d = tasks.front().theta_star().size();
  for (const auto& t : tasks) {
    if (t.theta_star().size() != d) throw StructuralError("closed_form_heterogeneity: dimension mismatch");
  }
  for (const auto& p : probe_points) {
    if (static_cast<Eigen::Index>(p.dim()) != d) throw StructuralError("closed_form_heterogeneity: probe dimension");
  }
  if (tasks.size() == 1) return {0.0, 0.0};

  const double inv_m = 1.0 / static_cast<double>(tasks.size());
  Eigen::MatrixXd h_mean = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd c_mean = Eigen::VectorXd::Zero(d);
  for (const auto& t : tasks) {
    h_mean += t.hessian();
    c_mean += t.hessian() * t.theta_star();
  }
  h_mean *= inv_m;
  c_mean *= inv_m;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> hes(h_mean);
  const double h_top = hes.eigenvalues().maxCoeff();
  if (hes.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, h_top)) {
    throw NumericError("closed_form_heterogeneity: mean curvature is singular");
  }
  const Eigen::MatrixXd h_inv =
      hes.eigenvectors() * hes.eigenvalues().cwiseInverse().asDiagonal() * hes.eigenvectors().transpose();
  const Eigen::VectorXd theta_hat = h_inv * c_mean;

  // Around the global minimizer, grad F_m - grad F = D_m e + c_m with
  // e = theta - theta_hat; substituting u = H e turns the bound into a
  // quadratic form in u whose supremum is available in closed form.
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(d);
  double z0 = 0.0;
  bool curvature_varies = false;
  for (const auto& t : tasks) {
    const Eigen::MatrixXd dm = t.hessian() - h_mean;
    if (dm.cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, h_top)) curvature_varies = true;
    const Eigen::MatrixXd a = dm * h_inv;
    const Eigen::VectorXd c = t.hessian() * (theta_hat - t.theta_star());
    p += a.transpose() * a;
    q += a.transpose() * c;
    z0 += c.squaredNorm();
  }
  p *= inv_m;
  q *= inv_m;
  z0 *= inv_m;
  if (!curvature_varies) {
    // Rounding residue of identical Hessians; keep beta^2 = 0 reachable.
    p.setZero();
    q.setZero();
  }
  if (curvature_varies && probe_points.size() < 2) {
    throw StructuralError("closed_form_heterogeneity: at least two probe points needed when curvature varies");
  }

  std::vector<BoundSample> samples;
  for (const auto& pt : probe_points) {
    const ParamVector theta = pt;
    const Eigen::VectorXd e = theta.values() - theta_hat;
    double dev = 0.0;
    const Eigen::VectorXd gf = h_mean * e;
    for (const auto& t : tasks) dev += (t.hessian() * (theta.values() - t.theta_star()) - gf).squaredNorm();
    samples.push_back({gf.squaredNorm(), dev * inv_m});
  }
  double y_max = 0.0;
  for (const auto& s : samples) y_max = std::max(y_max, s.deviation);
  const double scale = spd_scale(samples);
  if (scale <= 0.0) {
    if (y_max <= 0.0 && z0 <= 0.0) return {0.0, 0.0};
    return {std::nullopt, y_max};
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pes(p);
  const Eigen::VectorXd mu = pes.eigenvalues();
  const Eigen::VectorXd proj = pes.eigenvectors().transpose() * q;
  const double mu_top = std::max(0.0, mu.maxCoeff());
  const double mu_tol = 1e-12 * std::max(1.0, mu_top);
  const double q_tol = 1e-12 * std::max(1.0, q.norm());

  auto zeta_at = [&](double b) {
    double z = z0;
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
      const double gap = b - mu[j];
      if (std::abs(proj[j]) <= q_tol) continue;
      if (gap <= mu_tol) return std::numeric_limits<double>::infinity();
      z += proj[j] * proj[j] / gap;
    }
    return z;
  };

  std::vector<double> candidates{mu_top};
  const double span = std::max({mu_top, q.norm() / std::sqrt(scale), 1e-300});
  for (int j = 0; j < kBetaGridSize; ++j) {
    const double e = -6.0 + 12.0 * static_cast<double>(j) / static_cast<double>(kBetaGridSize - 1);
    candidates.push_back(mu_top + span * std::pow(10.0, e));
  }
  HeterogeneityConstants best{0.0, 0.0};
  double best_obj = std::numeric_limits<double>::infinity();
  for (double b : candidates) {
    const double z = zeta_at(b);
    if (!std::isfinite(z)) continue;
    const double obj = b + z / scale;
    if (obj < best_obj) {
      best_obj = obj;
      best = {b, z};
    }
  }
  if (!std::isfinite(best_obj)) throw NumericError("closed_form_heterogeneity: no finite constants found");
  return best;
}

std::vector<ParamVector> default_probe_points(const Eigen::VectorXd& center, double radius, int count,
                                              SeededRng& rng) {
  const auto d = static_cast<std::size_t>(center.size());
  const double per_coord = radius / std::sqrt(static_cast<double>(d));
  std::vector<ParamVector> points;
  for (int i = 0; i < count; ++i) points.emplace_back(center + per_coord * rng.normal_vector(d));
  points.push_back(ParamVector::zeros(d));
  return points;
}

std::vector<ParamVector> default_probe_points(const QuadraticFamily& family, int count) {
  const Eigen::VectorXd center = family.mean_minimizer();
  double ms = 0.0;
  for (const auto& t : family.tasks) ms += (t.theta_star() - center).squaredNorm();
  const double radius = std::max(1.0, 2.0 * std::sqrt(ms / static_cast<double>(family.tasks.size())));
  SeededRng rng = SeededRng(family.recipe.seed, 0).substream(7);
  return default_probe_points(center, radius, count, rng);
}

// --- NonlinearTask ---------------------------------------------------------

NonlinearTask::NonlinearTask(int id, int hidden_width, Eigen::MatrixXd inputs, Eigen::VectorXd targets,
                             int batch_size)
    : id_(id), width_(hidden_width), inputs_(std::move(inputs)), targets_(std::move(targets)), batch_size_(batch_size) {
  if (width_ < 1 || width_ > 32) throw StructuralError("NonlinearTask: hidden width must be in [1, 32]");
  if (inputs_.rows() != targets_.size() || inputs_.rows() == 0) throw StructuralError("NonlinearTask: data shape");
  if (batch_size_ < 1) throw StructuralError("NonlinearTask: batch size must be >= 1");
}

std::size_t NonlinearTask::dim() const {
  return static_cast<std::size_t>(width_ * inputs_.cols() + 2 * width_ + 1);
}

double NonlinearTask::predict(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
  const Eigen::Index p = x.size();
  const Eigen::Index w = width_;
  double out = theta[w * p + 2 * w];
  for (Eigen::Index j = 0; j < w; ++j) {
    const double pre = theta.segment(j * p, p).dot(x) + theta[w * p + j];
    out += theta[w * p + w + j] * std::tanh(pre);
  }
  return out;
}

double NonlinearTask::sample_loss_grad(const Eigen::VectorXd& theta, int i, Eigen::VectorXd* grad) const {
  const Eigen::Index p = inputs_.cols();
  const Eigen::Index w = width_;
  const Eigen::VectorXd x = inputs_.row(i).transpose();
  Eigen::VectorXd h(w);
  for (Eigen::Index j = 0; j < w; ++j) h[j] = std::tanh(theta.segment(j * p, p).dot(x) + theta[w * p + j]);
  const double f = theta.segment(w * p + w, w).dot(h) + theta[w * p + 2 * w];
  const double r = f - targets_[i];
  if (grad != nullptr) {
    for (Eigen::Index j = 0; j < w; ++j) {
      const double v = theta[w * p + w + j];
      const double dpre = r * v * (1.0 - h[j] * h[j]);
      (*grad).segment(j * p, p) += dpre * x;
      (*grad)[w * p + j] += dpre;
      (*grad)[w * p + w + j] += r * h[j];
    }
    (*grad)[w * p + 2 * w] += r;
  }
  return 0.5 * r * r;
}

double NonlinearTask::eval(const ParamVector& theta) const {
  if (theta.dim() != dim()) throw StructuralError("NonlinearTask::eval: dimension mismatch");
  double loss = 0.0;
  for (int i = 0; i < num_samples(); ++i) loss += sample_loss_grad(theta.values(), i, nullptr);
  return loss / num_samples();
}

ParamVector NonlinearTask::grad(const ParamVector& theta) const {
  if (theta.dim() != dim()) throw StructuralError("NonlinearTask::grad: dimension mismatch");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
  for (int i = 0; i < num_samples(); ++i) sample_loss_grad(theta.values(), i, &g);
  return ParamVector(g / num_samples());
}

ParamVector NonlinearTask::stoch_grad(const ParamVector& theta, SeededRng& rng) const {
  if (theta.dim() != dim()) throw StructuralError("NonlinearTask::stoch_grad: dimension mismatch");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
  for (int b = 0; b < batch_size_; ++b) {
    const int i = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(num_samples())));
    sample_loss_grad(theta.values(), i, &g);
  }
  return ParamVector(g / batch_size_);
}

void NonlinearTask::calibrate(const Eigen::VectorXd& reference, SeededRng& rng) {
  const auto d = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXd per_sample(d, num_samples());
  for (int i = 0; i < num_samples(); ++i) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    sample_loss_grad(reference, i, &g);
    per_sample.col(i) = g;
  }
  const Eigen::VectorXd mean = per_sample.rowwise().mean();
  const double spread = (per_sample.colwise() - mean).colwise().squaredNorm().mean();
  noise_sigma_ = std::sqrt(spread / batch_size_);

  double ratio = 0.0;
  for (int k = 0; k < 16; ++k) {
    const Eigen::VectorXd a = reference + 0.1 * rng.normal_vector(static_cast<std::size_t>(d));
    const Eigen::VectorXd b = a + 0.01 * rng.normal_vector(static_cast<std::size_t>(d));
    const double num = (grad(ParamVector(a)).values() - grad(ParamVector(b)).values()).norm();
    ratio = std::max(ratio, num / (a - b).norm());
  }
  smoothness_ = 2.0 * ratio;
}

TaskList NonlinearFamily::task_list() const { return TaskList(tasks.begin(), tasks.end()); }

NonlinearFamily generate_nonlinear_family(const NonlinearRecipe& r) {
  if (r.num_tasks < 1 || r.num_latent_clusters < 1) throw StructuralError("nonlinear recipe: counts must be >= 1");
  if (r.num_tasks < r.num_latent_clusters) throw StructuralError("nonlinear recipe: num_tasks < num_latent_clusters");
  if (r.input_dim < 1 || r.samples_per_task < 1) throw StructuralError("nonlinear recipe: sizes must be >= 1");

  const SeededRng root(r.seed, 0);
  const std::size_t d = static_cast<std::size_t>(r.hidden_width * r.input_dim + 2 * r.hidden_width + 1);
  SeededRng center_rng = root.substream(3);
  std::vector<Eigen::VectorXd> teachers;
  for (int k = 0; k < r.num_latent_clusters; ++k) teachers.push_back(r.inter_cluster_spread * center_rng.normal_vector(d));

  NonlinearFamily family;
  family.recipe = r;
  SeededRng ref_rng = root.substream(5);
  family.reference_point = 0.1 * ref_rng.normal_vector(d);
  for (int m = 0; m < r.num_tasks; ++m) {
    const int k = static_cast<int>(static_cast<long long>(m) * r.num_latent_clusters / r.num_tasks);
    family.latent_clusters.push_back(k);
    SeededRng rng = root.substream(100 + static_cast<std::uint64_t>(m));
    const Eigen::VectorXd teacher = teachers[static_cast<std::size_t>(k)] + r.intra_cluster_spread * rng.normal_vector(d);
    Eigen::MatrixXd x(r.samples_per_task, r.input_dim);
    for (int i = 0; i < r.samples_per_task; ++i)
      for (int j = 0; j < r.input_dim; ++j) x(i, j) = rng.normal();
    NonlinearTask probe(m, r.hidden_width, x, Eigen::VectorXd::Zero(r.samples_per_task), r.batch_size);
    Eigen::VectorXd y(r.samples_per_task);
    for (int i = 0; i < r.samples_per_task; ++i) {
      y[i] = probe.predict(teacher, x.row(i).transpose()) + r.label_noise * rng.normal();
    }
    auto task = std::make_shared<NonlinearTask>(m, r.hidden_width, std::move(x), std::move(y), r.batch_size);
    task->calibrate(family.reference_point, rng);
    family.tasks.push_back(std::move(task));
  }
  return family;
}

}  // namespace gst
