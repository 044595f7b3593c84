#pragma once

#include <Eigen/Core>
#include <vector>

#include "sfrecon/mlp.hpp"
#include "sfrecon/point_cloud.hpp"
#include "sfrecon/subfields.hpp"

namespace sfr {

/// Per-term values of one combined-loss evaluation. `modeling` is the data
/// term alone; the nuclear penalty is reported separately and weighted into
/// `total` together with the three field-covering regularizers.
struct LossBreakdown {
  double modeling = 0.0;
  double nuclear = 0.0;
  double volume = 0.0;
  double placing = 0.0;
  double covering = 0.0;
  double total = 0.0;
};

/// Penalty weights: nuclear on the latent matrix, then volume / placing /
/// covering on the subfield layout.
struct LossWeights {
  double nuclear = 1e-2;
  double volume = 3e-4;
  double placing = 1.0;
  double covering = 1.0;
};

/// Gradients of the combined loss with respect to everything that trains.
struct FieldGrads {
  MlpGrads theta;
  Eigen::MatrixXd latents;  // N x d
  Eigen::MatrixXd centers;  // N x 3
  Eigen::VectorXd extents;  // N

  double squared_norm() const;
  void scale(double factor);
};

/// Sign-agnostic data term for one subfield: sum over the batch of
/// | |f(q_tilde, z)| - s(q) R / (r a) |, with q_tilde recomputed from the
/// stored world-frame query under the subfield's current center/extent and
/// sphere frame. Gradients flow through the transform into the center and
/// extent, and through the target's 1/a scaling into the extent.
/// Null gradient outputs skip that gradient.
double modeling_residual(const MlpParams& params, const Subfield& subfield,
                         const std::vector<QuerySample>& batch, double R,
                         MlpGrads* theta_grad, Eigen::VectorXd* latent_grad,
                         Eigen::Vector3d* center_grad, double* extent_grad);

/// Nuclear norm of the row-normalized latent matrix, plus its subgradient
/// mapped back through the normalization. Rows with norm <= 1e-12 raise
/// ZeroLatent; singular values below 1e-10 are dropped from the subgradient.
double nuclear_norm(const Eigen::MatrixXd& latents, Eigen::MatrixXd* grad);

/// Sum of max(a_i, 0); subgradient is 1 where a_i > 0.
double volume_loss(const Eigen::VectorXd& extents, Eigen::VectorXd* grad);

/// Symmetric squared-distance Chamfer between the observed points and the
/// subfield centers. Gradients only through the center argument of each
/// minimizing pair; exact ties resolve to the lowest index.
double placing_loss(const Eigen::MatrixXd& centers, const PointCloud& cloud,
                    Eigen::MatrixXd* grad);

/// Exterior distance of every uncovered point to its nearest cube,
/// sqrt(sum_j max(|pi_j(p - c_i)| - a_i, 0)^2) minimized over i. Points
/// inside any cube contribute zero. Gradients go to the minimizing subfield.
double covering_loss(const Eigen::MatrixXd& centers,
                     const Eigen::VectorXd& extents, const PointCloud& cloud,
                     Eigen::MatrixXd* center_grad,
                     Eigen::VectorXd* extent_grad);

/// Full objective: modeling + nuclear over all subfields plus the weighted
/// layout regularizers. `batches` holds one query batch per subfield; an
/// empty batch skips that subfield's modeling term (frozen subfield).
/// Per-subfield modeling terms fan out over `workers` threads with a fixed
/// reduction order; the regularizers run single-threaded.
LossBreakdown combined_loss(const MlpParams& params,
                            const std::vector<Subfield>& subfields,
                            const PointCloud& cloud,
                            const std::vector<std::vector<QuerySample>>& batches,
                            const LossWeights& weights, double R,
                            FieldGrads* grads, int workers = 1);

}  // namespace sfr
