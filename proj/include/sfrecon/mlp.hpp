#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace sfr {

/// Parameters of the shared implicit model
///   f(p, z) = w^T relu(W_l(... relu(W_p p + W_z z + b_1)) + b_l) + c.
/// The first layer keeps its point block and latent block separate; every
/// hidden layer is a plain affine + ReLU; the head is affine scalar.
struct MlpParams {
  Eigen::MatrixXd w_point;                 // first layer, point block (d1 x 3)
  Eigen::MatrixXd w_latent;                // first layer, latent block (d1 x d)
  Eigen::VectorXd b_first;                 // d1
  std::vector<Eigen::MatrixXd> w_hidden;   // layers 2..l (d_i x d_{i-1})
  std::vector<Eigen::VectorXd> b_hidden;
  Eigen::VectorXd w_head;                  // d_l
  double b_head = 0.0;

  int layer_count() const { return 1 + static_cast<int>(w_hidden.size()); }
  int latent_dim() const { return static_cast<int>(w_latent.cols()); }
  int first_width() const { return static_cast<int>(w_point.rows()); }
  int last_width() const { return static_cast<int>(w_head.size()); }
  std::vector<int> widths() const;
  Eigen::Index parameter_count() const;
};

/// Gradients mirror the parameter layout exactly.
using MlpGrads = MlpParams;

MlpGrads zeros_like(const MlpParams& params);

/// Applies fn to every tensor of the parameter struct, in a fixed order that
/// also defines the flat parameter layout (w_point, w_latent, b_first,
/// hidden pairs, head weights, head bias).
template <typename P, typename Fn>
void visit_tensors(P& params, Fn&& fn) {
  fn(params.w_point.data(), params.w_point.size());
  fn(params.w_latent.data(), params.w_latent.size());
  fn(params.b_first.data(), params.b_first.size());
  for (std::size_t i = 0; i < params.w_hidden.size(); ++i) {
    fn(params.w_hidden[i].data(), params.w_hidden[i].size());
    fn(params.b_hidden[i].data(), params.b_hidden[i].size());
  }
  fn(params.w_head.data(), params.w_head.size());
  fn(&params.b_head, 1);
}

/// Allocates a network with the given per-layer output widths (the head is
/// implied) and placeholder parameter values, deterministic per seed.
/// Requires at least 2 layers, first width >= 3 and latent_dim >= 3.
MlpParams mlp_new(const std::vector<int>& widths, int latent_dim,
                  std::uint64_t seed);

/// Reinitializes the parameters so that f(., z) with small z approximates
/// the signed distance to the sphere of the given radius around `center`:
/// head weights sqrt(pi/d_l), head bias -radius, hidden entries
/// N(0, 2/width), zero hidden biases, latent block = point block on the
/// first three latent components, first bias -W_p * center.
void geometric_init(MlpParams& params, double radius,
                    const Eigen::Vector3d& center, std::uint64_t seed);

/// Cached pre-activations of one forward evaluation (one B x width matrix
/// per layer). Consumed by at most one backward pass.
struct ForwardTape {
  Eigen::MatrixXd points;                  // B x 3
  Eigen::MatrixXd latents;                 // B x d; empty in shared mode
  Eigen::VectorXd shared_latent;           // d; used when latents is empty
  std::vector<Eigen::MatrixXd> preactivations;
  bool shared = false;
  bool consumed = false;
};

/// Batched forward pass with one latent row per point row.
Eigen::VectorXd mlp_forward(const MlpParams& params,
                            const Eigen::MatrixXd& points,
                            const Eigen::MatrixXd& latents, ForwardTape& tape);

/// Batched forward pass where all rows share one latent code.
Eigen::VectorXd mlp_forward_shared(const MlpParams& params,
                                   const Eigen::MatrixXd& points,
                                   const Eigen::VectorXd& latent,
                                   ForwardTape& tape);

/// Inference-only forward; no tape is kept.
Eigen::VectorXd mlp_eval_batch(const MlpParams& params,
                               const Eigen::MatrixXd& points,
                               const Eigen::VectorXd& latent);
double mlp_eval(const MlpParams& params, const Eigen::Vector3d& p,
                const Eigen::VectorXd& z);

struct BackwardResult {
  Eigen::MatrixXd d_points;   // B x 3
  Eigen::MatrixXd d_latents;  // B x d, or 1 x d in shared mode (summed)
};

/// Reverse-mode pass. Adds parameter gradients into `grads` (scaled by the
/// per-row upstream values) and returns input gradients. The ReLU
/// subgradient at exactly zero is zero. Throws TapeConsumed on reuse.
BackwardResult mlp_backward(const MlpParams& params, ForwardTape& tape,
                            const Eigen::VectorXd& upstream, MlpGrads& grads);

/// Adam accumulator for a flat view of `count` scalars.
struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState adam_init(Eigen::Index count);

/// One bias-corrected Adam update over a flat parameter/gradient view.
void adam_step_flat(AdamState& state, double* params, const double* grads,
                    Eigen::Index count, double lr);

/// Adam update over the whole MLP parameter struct.
void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads,
               double lr);

/// Raw tensor serialization used by the model checkpoint format.
void write_params(std::ostream& out, const MlpParams& params);
MlpParams read_params(std::istream& in);

}  // namespace sfr
