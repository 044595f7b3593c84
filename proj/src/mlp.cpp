#include "sfrecon/mlp.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>

#include "sfrecon/errors.hpp"
#include "sfrecon/rng.hpp"

namespace sfr {

namespace {

void fill_normal(Eigen::MatrixXd& m, Rng& rng, double stddev) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = stddev * rng.normal();
  }
}

inline Eigen::MatrixXd relu_mask_mul(const Eigen::MatrixXd& preact,
                                     const Eigen::MatrixXd& upstream) {
  // Subgradient 0 at exactly 0: only strictly positive units pass.
  return (preact.array() > 0.0).cast<double>() * upstream.array();
}

void check(bool ok, ErrorCode code, const char* what) {
  if (!ok) throw Error(code, what);
}

}  // namespace

std::vector<int> MlpParams::widths() const {
  std::vector<int> out;
  out.push_back(first_width());
  for (const auto& w : w_hidden) out.push_back(static_cast<int>(w.rows()));
  return out;
}

Eigen::Index MlpParams::parameter_count() const {
  Eigen::Index n = 0;
  visit_tensors(*const_cast<MlpParams*>(this),
                [&](double*, Eigen::Index count) { n += count; });
  return n;
}

MlpGrads zeros_like(const MlpParams& params) {
  MlpGrads g;
  g.w_point = Eigen::MatrixXd::Zero(params.w_point.rows(), 3);
  g.w_latent =
      Eigen::MatrixXd::Zero(params.w_latent.rows(), params.w_latent.cols());
  g.b_first = Eigen::VectorXd::Zero(params.b_first.size());
  g.w_hidden.reserve(params.w_hidden.size());
  g.b_hidden.reserve(params.b_hidden.size());
  for (std::size_t i = 0; i < params.w_hidden.size(); ++i) {
    g.w_hidden.push_back(Eigen::MatrixXd::Zero(params.w_hidden[i].rows(),
                                               params.w_hidden[i].cols()));
    g.b_hidden.push_back(Eigen::VectorXd::Zero(params.b_hidden[i].size()));
  }
  g.w_head = Eigen::VectorXd::Zero(params.w_head.size());
  g.b_head = 0.0;
  return g;
}

MlpParams mlp_new(const std::vector<int>& widths, int latent_dim,
                  std::uint64_t seed) {
  check(widths.size() >= 2, ErrorCode::BadArchitecture,
        "need at least 2 layers");
  check(widths[0] >= 3, ErrorCode::BadArchitecture,
        "first layer width must be >= 3");
  for (int w : widths) {
    check(w >= 1, ErrorCode::BadArchitecture, "layer width must be >= 1");
  }
  check(latent_dim >= 3, ErrorCode::BadArchitecture,
        "latent dimension must be >= 3");

  Rng rng(derive_seed(seed, 0x31a7));
  MlpParams p;
  p.w_point.resize(widths[0], 3);
  p.w_latent.resize(widths[0], latent_dim);
  p.b_first = Eigen::VectorXd::Zero(widths[0]);
  fill_normal(p.w_point, rng, 1e-2);
  fill_normal(p.w_latent, rng, 1e-2);
  for (std::size_t i = 1; i < widths.size(); ++i) {
    Eigen::MatrixXd w(widths[i], widths[i - 1]);
    fill_normal(w, rng, 1e-2);
    p.w_hidden.push_back(std::move(w));
    p.b_hidden.push_back(Eigen::VectorXd::Zero(widths[i]));
  }
  p.w_head.resize(widths.back());
  for (Eigen::Index i = 0; i < p.w_head.size(); ++i) {
    p.w_head(i) = 1e-2 * rng.normal();
  }
  p.b_head = 0.0;
  return p;
}

void geometric_init(MlpParams& params, double radius,
                    const Eigen::Vector3d& center, std::uint64_t seed) {
  check(radius > 0.0, ErrorCode::BadRadius, "geometric init radius must be > 0");

  Rng rng(derive_seed(seed, 0x6e0c));
  fill_normal(params.w_point, rng, std::sqrt(2.0 / params.first_width()));
  for (std::size_t i = 0; i < params.w_hidden.size(); ++i) {
    // Variance keyed to the layer's output size.
    fill_normal(params.w_hidden[i], rng,
                std::sqrt(2.0 / params.w_hidden[i].rows()));
    params.b_hidden[i].setZero();
  }
  params.w_head.setConstant(std::sqrt(std::numbers::pi / params.last_width()));
  params.b_head = -radius;

  params.w_latent.setZero();
  params.w_latent.leftCols<3>() = params.w_point;
  params.b_first.noalias() = -(params.w_point * center);
}

namespace {

Eigen::VectorXd forward_impl(const MlpParams& params,
                             const Eigen::MatrixXd& points,
                             const Eigen::MatrixXd* latents,
                             const Eigen::VectorXd* shared_latent,
                             ForwardTape* tape) {
  check(points.cols() == 3, ErrorCode::ShapeMismatch, "points must be B x 3");
  const Eigen::Index batch = points.rows();

  Eigen::MatrixXd h = points * params.w_point.transpose();
  if (latents != nullptr) {
    check(latents->rows() == batch && latents->cols() == params.latent_dim(),
          ErrorCode::ShapeMismatch, "latent batch shape mismatch");
    h.noalias() += *latents * params.w_latent.transpose();
  } else {
    check(shared_latent->size() == params.latent_dim(),
          ErrorCode::ShapeMismatch, "latent size mismatch");
    h.rowwise() += (params.w_latent * *shared_latent).transpose();
  }
  h.rowwise() += params.b_first.transpose();

  const int l = params.layer_count();
  if (tape) {
    tape->preactivations.clear();
    tape->preactivations.reserve(l);
    tape->preactivations.push_back(h);
  }
  Eigen::MatrixXd act = h.cwiseMax(0.0);
  for (std::size_t i = 0; i < params.w_hidden.size(); ++i) {
    h.noalias() = act * params.w_hidden[i].transpose();
    h.rowwise() += params.b_hidden[i].transpose();
    if (tape) tape->preactivations.push_back(h);
    act = h.cwiseMax(0.0);
  }
  Eigen::VectorXd out = act * params.w_head;
  out.array() += params.b_head;
  return out;
}

}  // namespace

Eigen::VectorXd mlp_forward(const MlpParams& params,
                            const Eigen::MatrixXd& points,
                            const Eigen::MatrixXd& latents,
                            ForwardTape& tape) {
  tape = ForwardTape{};
  tape.points = points;
  tape.latents = latents;
  tape.shared = false;
  return forward_impl(params, points, &latents, nullptr, &tape);
}

Eigen::VectorXd mlp_forward_shared(const MlpParams& params,
                                   const Eigen::MatrixXd& points,
                                   const Eigen::VectorXd& latent,
                                   ForwardTape& tape) {
  tape = ForwardTape{};
  tape.points = points;
  tape.shared_latent = latent;
  tape.shared = true;
  return forward_impl(params, points, nullptr, &latent, &tape);
}

Eigen::VectorXd mlp_eval_batch(const MlpParams& params,
                               const Eigen::MatrixXd& points,
                               const Eigen::VectorXd& latent) {
  return forward_impl(params, points, nullptr, &latent, nullptr);
}

double mlp_eval(const MlpParams& params, const Eigen::Vector3d& p,
                const Eigen::VectorXd& z) {
  Eigen::MatrixXd pts(1, 3);
  pts.row(0) = p.transpose();
  return mlp_eval_batch(params, pts, z)(0);
}

BackwardResult mlp_backward(const MlpParams& params, ForwardTape& tape,
                            const Eigen::VectorXd& upstream, MlpGrads& grads) {
  check(!tape.consumed, ErrorCode::TapeConsumed,
        "backward called twice on one tape");
  tape.consumed = true;
  const Eigen::Index batch = tape.points.rows();
  check(upstream.size() == batch, ErrorCode::ShapeMismatch,
        "upstream size mismatch");

  const auto& pre = tape.preactivations;
  const int l = params.layer_count();

  grads.w_head.noalias() += pre[l - 1].cwiseMax(0.0).transpose() * upstream;
  grads.b_head += upstream.sum();

  Eigen::MatrixXd dx = upstream * params.w_head.transpose();  // B x d_l
  for (int i = static_cast<int>(params.w_hidden.size()) - 1; i >= 0; --i) {
    const Eigen::MatrixXd dh = relu_mask_mul(pre[i + 1], dx);
    grads.w_hidden[i].noalias() += dh.transpose() * pre[i].cwiseMax(0.0);
    grads.b_hidden[i].noalias() += dh.colwise().sum().transpose();
    dx.noalias() = dh * params.w_hidden[i];
  }

  const Eigen::MatrixXd dh1 = relu_mask_mul(pre[0], dx);
  grads.w_point.noalias() += dh1.transpose() * tape.points;
  grads.b_first.noalias() += dh1.colwise().sum().transpose();

  BackwardResult result;
  result.d_points.noalias() = dh1 * params.w_point;
  if (tape.shared) {
    grads.w_latent.noalias() +=
        dh1.colwise().sum().transpose() * tape.shared_latent.transpose();
    result.d_latents.noalias() =
        dh1.colwise().sum() * params.w_latent;  // 1 x d, summed over the batch
  } else {
    grads.w_latent.noalias() += dh1.transpose() * tape.latents;
    result.d_latents.noalias() = dh1 * params.w_latent;
  }
  return result;
}

AdamState adam_init(Eigen::Index count) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(count);
  s.v = Eigen::VectorXd::Zero(count);
  return s;
}

void adam_step_flat(AdamState& state, double* params, const double* grads,
                    Eigen::Index count, double lr) {
  check(state.m.size() == count, ErrorCode::ShapeMismatch,
        "adam state size mismatch");
  check(lr > 0.0, ErrorCode::ShapeMismatch, "learning rate must be > 0");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  for (Eigen::Index i = 0; i < count; ++i) {
    const double g = grads[i];
    state.m(i) = state.beta1 * state.m(i) + (1.0 - state.beta1) * g;
    state.v(i) = state.beta2 * state.v(i) + (1.0 - state.beta2) * g * g;
    const double mhat = state.m(i) / bc1;
    const double vhat = state.v(i) / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads,
               double lr) {
  check(params.parameter_count() == state.m.size(), ErrorCode::ShapeMismatch,
        "adam state does not match parameter count");
  Eigen::Index offset = 0;
  auto* gptr = const_cast<MlpGrads*>(&grads);
  std::vector<std::pair<const double*, Eigen::Index>> gviews;
  visit_tensors(*gptr, [&](double* data, Eigen::Index count) {
    gviews.emplace_back(data, count);
  });
  std::size_t k = 0;
  visit_tensors(params, [&](double* data, Eigen::Index count) {
    check(gviews[k].second == count, ErrorCode::ShapeMismatch,
          "gradient tensor shape mismatch");
    AdamState view;
    view.m = state.m.segment(offset, count);
    view.v = state.v.segment(offset, count);
    view.step = state.step;
    view.beta1 = state.beta1;
    view.beta2 = state.beta2;
    view.epsilon = state.epsilon;
    adam_step_flat(view, data, gviews[k].first, count, lr);
    state.m.segment(offset, count) = view.m;
    state.v.segment(offset, count) = view.v;
    offset += count;
    ++k;
  });
  state.step += 1;
}

namespace {

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw Error(ErrorCode::ParseError, "truncated checkpoint");
  return v;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  write_u64(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Eigen::MatrixXd read_matrix(std::istream& in) {
  const auto rows = static_cast<Eigen::Index>(read_u64(in));
  const auto cols = static_cast<Eigen::Index>(read_u64(in));
  if (rows < 0 || cols < 0 || rows * cols > (1ll << 32)) {
    throw Error(ErrorCode::ParseError, "corrupt tensor header");
  }
  Eigen::MatrixXd m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw Error(ErrorCode::ParseError, "truncated tensor payload");
  return m;
}

}  // namespace

void write_params(std::ostream& out, const MlpParams& params) {
  write_u64(out, static_cast<std::uint64_t>(params.w_hidden.size()));
  write_matrix(out, params.w_point);
  write_matrix(out, params.w_latent);
  write_matrix(out, params.b_first);
  for (std::size_t i = 0; i < params.w_hidden.size(); ++i) {
    write_matrix(out, params.w_hidden[i]);
    write_matrix(out, params.b_hidden[i]);
  }
  write_matrix(out, params.w_head);
  write_matrix(out, Eigen::MatrixXd::Constant(1, 1, params.b_head));
}

MlpParams read_params(std::istream& in) {
  MlpParams p;
  const auto hidden = read_u64(in);
  p.w_point = read_matrix(in);
  p.w_latent = read_matrix(in);
  p.b_first = read_matrix(in);
  for (std::uint64_t i = 0; i < hidden; ++i) {
    p.w_hidden.push_back(read_matrix(in));
    p.b_hidden.push_back(read_matrix(in));
  }
  p.w_head = read_matrix(in);
  p.b_head = read_matrix(in)(0, 0);
  return p;
}

}  // namespace sfr
