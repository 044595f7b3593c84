#include "sfrecon/losses.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <utility>

#include "sfrecon/errors.hpp"
#include "sfrecon/parallel.hpp"

namespace sfr {

namespace {

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void add_params(MlpGrads& dst, const MlpGrads& src) {
  auto& mutable_src = const_cast<MlpGrads&>(src);
  std::vector<std::pair<double*, Eigen::Index>> views;
  visit_tensors(mutable_src, [&](double* data, Eigen::Index count) {
    views.emplace_back(data, count);
  });
  std::size_t k = 0;
  visit_tensors(dst, [&](double* data, Eigen::Index count) {
    Eigen::Map<Eigen::VectorXd>(data, count) +=
        Eigen::Map<const Eigen::VectorXd>(views[k].first, views[k].second);
    ++k;
  });
}

}  // namespace

double FieldGrads::squared_norm() const {
  double total = latents.squaredNorm() + centers.squaredNorm() +
                 extents.squaredNorm();
  visit_tensors(*const_cast<MlpGrads*>(&theta),
                [&](double* data, Eigen::Index count) {
                  total += Eigen::Map<Eigen::VectorXd>(data, count).squaredNorm();
                });
  return total;
}

void FieldGrads::scale(double factor) {
  latents *= factor;
  centers *= factor;
  extents *= factor;
  visit_tensors(theta, [&](double* data, Eigen::Index count) {
    Eigen::Map<Eigen::VectorXd>(data, count) *= factor;
  });
}

double modeling_residual(const MlpParams& params, const Subfield& subfield,
                         const std::vector<QuerySample>& batch, double R,
                         MlpGrads* theta_grad, Eigen::VectorXd* latent_grad,
                         Eigen::Vector3d* center_grad, double* extent_grad) {
  if (batch.empty()) {
    throw Error(ErrorCode::EmptyBatch, "modeling residual over empty batch");
  }
  const double a = subfield.extent;
  const double r = subfield.sphere_radius;
  if (!(a > 0.0)) {
    throw Error(ErrorCode::NonpositiveExtent,
                "modeling residual needs a positive extent");
  }

  const auto b = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd q_tilde(b, 3);
  Eigen::VectorXd targets(b);
  const double scale = R / (r * a);
  for (Eigen::Index k = 0; k < b; ++k) {
    const Eigen::Vector3d local = (batch[k].q - subfield.center) / a;
    q_tilde.row(k) = (R * (local - subfield.sphere_center) / r).transpose();
    targets(k) = batch[k].s_world * scale;
  }

  ForwardTape tape;
  const Eigen::VectorXd f =
      mlp_forward_shared(params, q_tilde, subfield.latent, tape);
  const Eigen::VectorXd err = f.cwiseAbs() - targets;
  const double loss = err.cwiseAbs().sum();

  const bool want_grads = theta_grad || latent_grad || center_grad || extent_grad;
  if (!want_grads) return loss;

  Eigen::VectorXd upstream(b);
  for (Eigen::Index k = 0; k < b; ++k) upstream(k) = sgn(err(k)) * sgn(f(k));

  MlpGrads scratch;
  MlpGrads* sink = theta_grad;
  if (!sink) {
    scratch = zeros_like(params);
    sink = &scratch;
  }
  const BackwardResult back = mlp_backward(params, tape, upstream, *sink);

  if (latent_grad) *latent_grad += back.d_latents.row(0).transpose();
  if (center_grad) {
    *center_grad +=
        (-R / (r * a)) * back.d_points.colwise().sum().transpose();
  }
  if (extent_grad) {
    double da = 0.0;
    const double inv = R / (r * a * a);
    for (Eigen::Index k = 0; k < b; ++k) {
      // d q_tilde / d a = -R (q - c) / (r a^2); the target scales as 1/a.
      da += back.d_points.row(k).dot(
          (-(batch[k].q - subfield.center) * inv).transpose());
      da += sgn(err(k)) * batch[k].s_world * inv;
    }
    *extent_grad += da;
  }
  return loss;
}

double nuclear_norm(const Eigen::MatrixXd& latents, Eigen::MatrixXd* grad) {
  const Eigen::Index n = latents.rows();
  const Eigen::Index d = latents.cols();
  if (n == 0) throw Error(ErrorCode::EmptySet, "nuclear norm of empty matrix");

  Eigen::VectorXd norms(n);
  Eigen::MatrixXd unit(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double nm = latents.row(i).norm();
    if (nm <= 1e-12) {
      throw Error(ErrorCode::ZeroLatent, "latent row has (near) zero norm");
    }
    norms(i) = nm;
    unit.row(i) = latents.row(i) / nm;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      unit, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double value = sv.sum();
  if (!grad) return value;

  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > 1e-10) ++rank;
  const Eigen::MatrixXd sub = svd.matrixU().leftCols(rank) *
                              svd.matrixV().leftCols(rank).transpose();

  grad->resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd u = unit.row(i).transpose();
    const Eigen::VectorXd g = sub.row(i).transpose();
    // Jacobian of z / |z|: (I - u u^T) / |z|.
    grad->row(i) = ((g - u * u.dot(g)) / norms(i)).transpose();
  }
  return value;
}

double volume_loss(const Eigen::VectorXd& extents, Eigen::VectorXd* grad) {
  if (grad) *grad = (extents.array() > 0.0).cast<double>();
  return extents.cwiseMax(0.0).sum();
}

double placing_loss(const Eigen::MatrixXd& centers, const PointCloud& cloud,
                    Eigen::MatrixXd* grad) {
  const Eigen::Index n_centers = centers.rows();
  if (n_centers == 0 || cloud.empty()) {
    throw Error(ErrorCode::EmptySet, "placing loss needs both sets nonempty");
  }
  if (grad) grad->setZero(n_centers, 3);

  double loss = 0.0;
  std::vector<double> center_best(n_centers,
                                  std::numeric_limits<double>::infinity());
  std::vector<int> center_arg(n_centers, -1);

  for (int pi = 0; pi < static_cast<int>(cloud.size()); ++pi) {
    const Eigen::Vector3d& p = cloud.points[pi];
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (Eigen::Index i = 0; i < n_centers; ++i) {
      const double d2 = (p - centers.row(i).transpose()).squaredNorm();
      if (d2 < best) {  // ties keep the lowest center index
        best = d2;
        arg = static_cast<int>(i);
      }
      if (d2 < center_best[i]) {  // ties keep the lowest point index
        center_best[i] = d2;
        center_arg[i] = pi;
      }
    }
    loss += best;
    if (grad) {
      grad->row(arg) += 2.0 * (centers.row(arg) - p.transpose());
    }
  }
  for (Eigen::Index i = 0; i < n_centers; ++i) {
    loss += center_best[i];
    if (grad) {
      grad->row(i) +=
          2.0 * (centers.row(i) - cloud.points[center_arg[i]].transpose());
    }
  }
  return loss;
}

double covering_loss(const Eigen::MatrixXd& centers,
                     const Eigen::VectorXd& extents, const PointCloud& cloud,
                     Eigen::MatrixXd* center_grad,
                     Eigen::VectorXd* extent_grad) {
  const Eigen::Index n_centers = centers.rows();
  if (center_grad) center_grad->setZero(n_centers, 3);
  if (extent_grad) extent_grad->setZero(n_centers);
  if (n_centers == 0) return 0.0;

  double loss = 0.0;
  for (const auto& p : cloud.points) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = 0;
    for (Eigen::Index i = 0; i < n_centers; ++i) {
      const Eigen::Vector3d delta = p - centers.row(i).transpose();
      const double d2 = (delta.cwiseAbs().array() - extents(i))
                            .max(0.0)
                            .square()
                            .sum();
      if (d2 < best) {
        best = d2;
        arg = i;
      }
    }
    if (best <= 0.0) continue;  // covered by some cube
    const double dist = std::sqrt(best);
    loss += dist;
    if (!center_grad && !extent_grad) continue;

    const Eigen::Vector3d delta = p - centers.row(arg).transpose();
    for (int j = 0; j < 3; ++j) {
      const double m = std::max(std::abs(delta(j)) - extents(arg), 0.0);
      if (m <= 0.0) continue;
      if (center_grad) (*center_grad)(arg, j) += -m * sgn(delta(j)) / dist;
      if (extent_grad) (*extent_grad)(arg) += -m / dist;
    }
  }
  return loss;
}

LossBreakdown combined_loss(const MlpParams& params,
                            const std::vector<Subfield>& subfields,
                            const PointCloud& cloud,
                            const std::vector<std::vector<QuerySample>>& batches,
                            const LossWeights& weights, double R,
                            FieldGrads* grads, int workers) {
  const auto n = static_cast<Eigen::Index>(subfields.size());
  if (batches.size() != subfields.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "one query batch required per subfield");
  }

  if (grads) {
    grads->theta = zeros_like(params);
    grads->latents.setZero(n, params.latent_dim());
    grads->centers.setZero(n, 3);
    grads->extents.setZero(n);
  }

  LossBreakdown out;
  Eigen::MatrixXd centers(n, 3);
  Eigen::VectorXd extents(n);
  Eigen::MatrixXd latents(n, params.latent_dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    centers.row(i) = subfields[i].center.transpose();
    extents(i) = subfields[i].extent;
    latents.row(i) = subfields[i].latent.transpose();
  }

  // Per-subfield terms. Latent/center/extent gradients land in disjoint
  // rows; the shared-model gradient accumulates per worker and is reduced
  // in worker order afterwards.
  workers = std::max(1, workers);
  std::vector<MlpGrads> theta_buffers;
  if (grads && workers > 1) {
    theta_buffers.assign(workers, zeros_like(params));
  }
  std::vector<double> term(n, 0.0);
  parallel_chunks(static_cast<std::size_t>(n), workers,
                  [&](std::size_t begin, std::size_t end, int worker) {
    MlpGrads* theta_sink = nullptr;
    if (grads) {
      theta_sink = workers > 1 ? &theta_buffers[worker] : &grads->theta;
    }
    for (std::size_t i = begin; i < end; ++i) {
      if (batches[i].empty()) continue;  // frozen: no modeling term
      Eigen::VectorXd dz = Eigen::VectorXd::Zero(params.latent_dim());
      Eigen::Vector3d dc = Eigen::Vector3d::Zero();
      double da = 0.0;
      term[i] = modeling_residual(params, subfields[i], batches[i], R,
                                  theta_sink, grads ? &dz : nullptr,
                                  grads ? &dc : nullptr, grads ? &da : nullptr);
      if (grads) {
        grads->latents.row(i) += dz.transpose();
        grads->centers.row(i) += dc.transpose();
        grads->extents(i) += da;
      }
    }
  });
  for (Eigen::Index i = 0; i < n; ++i) out.modeling += term[i];
  if (grads && workers > 1) {
    for (int w = 0; w < workers; ++w) add_params(grads->theta, theta_buffers[w]);
  }

  Eigen::MatrixXd nuclear_grad;
  out.nuclear = nuclear_norm(latents, grads ? &nuclear_grad : nullptr);

  Eigen::VectorXd volume_grad;
  out.volume = volume_loss(extents, grads ? &volume_grad : nullptr);

  Eigen::MatrixXd placing_grad;
  out.placing = placing_loss(centers, cloud, grads ? &placing_grad : nullptr);

  Eigen::MatrixXd cover_c_grad;
  Eigen::VectorXd cover_a_grad;
  out.covering = covering_loss(centers, extents, cloud,
                               grads ? &cover_c_grad : nullptr,
                               grads ? &cover_a_grad : nullptr);

  out.total = out.modeling + weights.nuclear * out.nuclear +
              weights.volume * out.volume + weights.placing * out.placing +
              weights.covering * out.covering;

  if (grads) {
    grads->latents += weights.nuclear * nuclear_grad;
    grads->extents += weights.volume * volume_grad;
    grads->centers += weights.placing * placing_grad;
    grads->centers += weights.covering * cover_c_grad;
    grads->extents += weights.covering * cover_a_grad;
  }
  return out;
}

}  // namespace sfr
