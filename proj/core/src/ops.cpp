#include "taxogate/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace taxogate {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

void check_square(const ParamTensor& w, Eigen::Index d) {
  require(static_cast<Eigen::Index>(w.rows()) == d && static_cast<Eigen::Index>(w.cols()) == d,
          "attention weight " + w.name + " must be " + std::to_string(d) + "x" + std::to_string(d));
}

Eigen::Index head_width(Eigen::Index d, int heads) {
  require(heads >= 1 && d % heads == 0, "model width must be divisible by the head count");
  return d / heads;
}

}  // namespace

std::vector<double> softmax(std::span<const double> x) {
  double peak = kNegInf;
  for (const double v : x) {
    if (!std::isfinite(v)) throw NonFiniteInput("softmax input contains a non-finite entry");
    peak = std::max(peak, v);
  }
  std::vector<double> out(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double peak = row.maxCoeff();
    if (!std::isfinite(peak)) throw NonFiniteInput("softmax row has no finite entry");
    row = (row.array() - peak).exp();
    row /= row.sum();
  }
}

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) noexcept {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

Vector affine(const Vector& x, const ParamTensor& w, const ParamTensor& b) {
  require(static_cast<std::size_t>(x.size()) == w.cols(), "affine: input width mismatch for " + w.name);
  require(b.size() == w.rows(), "affine: bias length mismatch for " + b.name);
  return w.mat() * x + b.vec();
}

Vector affine_backward(const Vector& x, const Vector& grad_y, ParamTensor& w, ParamTensor& b) {
  w.grad_mat().noalias() += grad_y * x.transpose();
  b.grad_vec() += grad_y;
  return w.mat().transpose() * grad_y;
}

Matrix affine_rows(const Matrix& x, const ParamTensor& w, const ParamTensor& b) {
  require(static_cast<std::size_t>(x.cols()) == w.cols(), "affine: input width mismatch for " + w.name);
  require(b.size() == w.rows(), "affine: bias length mismatch for " + b.name);
  Matrix y = x * w.mat().transpose();
  y.rowwise() += b.vec().transpose();
  return y;
}

Matrix affine_rows_backward(const Matrix& x, const Matrix& grad_y, ParamTensor& w, ParamTensor& b) {
  w.grad_mat().noalias() += grad_y.transpose() * x;
  b.grad_vec() += grad_y.colwise().sum().transpose();
  return grad_y * w.mat();
}

Matrix attention_block(const Matrix& h, const AttentionWeights& w, const AttentionOptions& opt,
                       AttentionCache* cache) {
  const Eigen::Index n = h.rows();
  const Eigen::Index d = h.cols();
  require(n >= 1, "attention_block needs at least one row");
  check_square(w.query, d);
  check_square(w.key, d);
  check_square(w.value, d);
  const Eigen::Index dh = head_width(d, opt.heads);

  Matrix q = h * w.query.mat();
  Matrix k = h * w.key.mat();
  Matrix v = h * w.value.mat();
  Matrix out(n, d);
  std::vector<Matrix> probs;
  probs.reserve(static_cast<std::size_t>(opt.heads));
  for (int head = 0; head < opt.heads; ++head) {
    const Eigen::Index c0 = head * dh;
    Matrix scores = q.middleCols(c0, dh) * k.middleCols(c0, dh).transpose();
    if (opt.causal) {
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) scores(i, j) = kNegInf;
      }
    }
    softmax_rows(scores);
    out.middleCols(c0, dh).noalias() = scores * v.middleCols(c0, dh);
    probs.push_back(std::move(scores));
  }
  if (opt.residual) out += h;
  if (cache) {
    cache->input = h;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
  }
  return out;
}

Matrix attention_block_backward(const Matrix& grad_out, const AttentionCache& cache,
                                const AttentionWeights& w, AttentionGrads g,
                                const AttentionOptions& opt) {
  const Eigen::Index n = cache.input.rows();
  const Eigen::Index d = cache.input.cols();
  require(grad_out.rows() == n && grad_out.cols() == d, "attention_block_backward: gradient shape");
  const Eigen::Index dh = head_width(d, opt.heads);

  Matrix dq = Matrix::Zero(n, d);
  Matrix dk = Matrix::Zero(n, d);
  Matrix dv = Matrix::Zero(n, d);
  for (int head = 0; head < opt.heads; ++head) {
    const Eigen::Index c0 = head * dh;
    const Matrix& p = cache.probs[static_cast<std::size_t>(head)];
    const auto d_head = grad_out.middleCols(c0, dh);
    Matrix dp = d_head * cache.v.middleCols(c0, dh).transpose();
    dv.middleCols(c0, dh).noalias() = p.transpose() * d_head;
    const Vector row_dot = (dp.array() * p.array()).rowwise().sum();
    Matrix ds = p.array() * (dp.colwise() - row_dot).array();
    dq.middleCols(c0, dh).noalias() = ds * cache.k.middleCols(c0, dh);
    dk.middleCols(c0, dh).noalias() = ds.transpose() * cache.q.middleCols(c0, dh);
  }
  g.query.grad_mat().noalias() += cache.input.transpose() * dq;
  g.key.grad_mat().noalias() += cache.input.transpose() * dk;
  g.value.grad_mat().noalias() += cache.input.transpose() * dv;

  Matrix dh_in = dq * w.query.mat().transpose();
  dh_in.noalias() += dk * w.key.mat().transpose();
  dh_in.noalias() += dv * w.value.mat().transpose();
  if (opt.residual) dh_in += grad_out;
  return dh_in;
}

Eigen::RowVectorXd attention_step(const Eigen::RowVectorXd& h, const AttentionWeights& w,
                                  const AttentionOptions& opt, KeyValueCache& kv) {
  const Eigen::Index d = h.size();
  check_square(w.query, d);
  const Eigen::Index dh = head_width(d, opt.heads);
  if (kv.keys.rows() <= kv.length) {
    const Eigen::Index cap = std::max<Eigen::Index>(8, 2 * kv.keys.rows());
    kv.keys.conservativeResize(cap, d);
    kv.values.conservativeResize(cap, d);
  }
  const Eigen::RowVectorXd q = h * w.query.mat();
  kv.keys.row(kv.length) = h * w.key.mat();
  kv.values.row(kv.length) = h * w.value.mat();
  ++kv.length;

  Eigen::RowVectorXd out(d);
  for (int head = 0; head < opt.heads; ++head) {
    const Eigen::Index c0 = head * dh;
    Eigen::RowVectorXd scores =
        q.segment(c0, dh) * kv.keys.block(0, c0, kv.length, dh).transpose();
    const double peak = scores.maxCoeff();
    scores = (scores.array() - peak).exp();
    scores /= scores.sum();
    out.segment(c0, dh).noalias() = scores * kv.values.block(0, c0, kv.length, dh);
  }
  if (opt.residual) out += h;
  return out;
}

Matrix feed_forward(const Matrix& h, const ParamTensor& w1, const ParamTensor& b1,
                    const ParamTensor& w2, const ParamTensor& b2, FeedForwardCache* cache) {
  Matrix hidden = affine_rows(h, w1, b1).array().tanh().matrix();
  Matrix out = affine_rows(hidden, w2, b2);
  require(out.cols() == h.cols(), "feed_forward: output width must equal input width");
  out += h;
  if (cache) {
    cache->input = h;
    cache->hidden = std::move(hidden);
  }
  return out;
}

Matrix feed_forward_backward(const Matrix& grad_out, const FeedForwardCache& cache, ParamTensor& w1,
                             ParamTensor& b1, ParamTensor& w2, ParamTensor& b2) {
  Matrix d_hidden = affine_rows_backward(cache.hidden, grad_out, w2, b2);
  d_hidden.array() *= 1.0 - cache.hidden.array().square();
  Matrix dh = affine_rows_backward(cache.input, d_hidden, w1, b1);
  dh += grad_out;
  return dh;
}

LstmState recurrent_step(const Vector& x, const LstmState& state, const ParamTensor& w,
                         const ParamTensor& b, LstmStepCache* cache) {
  const Eigen::Index hidden = state.h.size();
  require(state.c.size() == hidden, "recurrent_step: h and c widths differ");
  require(static_cast<Eigen::Index>(w.rows()) == 4 * hidden &&
              static_cast<Eigen::Index>(w.cols()) == x.size() + hidden,
          "recurrent_step: weight " + w.name + " has the wrong shape");
  require(static_cast<Eigen::Index>(b.size()) == 4 * hidden, "recurrent_step: bias length");

  const auto wm = w.mat();
  Vector z = wm.leftCols(x.size()) * x;
  z.noalias() += wm.rightCols(hidden) * state.h;
  z += b.vec();

  auto sig = [](double v) { return sigmoid(v); };
  Vector i = z.segment(0, hidden).unaryExpr(sig);
  Vector f = z.segment(hidden, hidden).unaryExpr(sig);
  Vector o = z.segment(2 * hidden, hidden).unaryExpr(sig);
  Vector g = z.segment(3 * hidden, hidden).array().tanh().matrix();
  Vector c = f.cwiseProduct(state.c) + i.cwiseProduct(g);
  Vector tanh_c = c.array().tanh().matrix();
  LstmState next{o.cwiseProduct(tanh_c), c};
  if (cache) {
    *cache = {x, state.h, state.c, std::move(i), std::move(f), std::move(o), std::move(g),
              std::move(c), std::move(tanh_c)};
  }
  return next;
}

LstmStepGrad recurrent_step_backward(const Vector& grad_h, const Vector& grad_c,
                                     const LstmStepCache& cache, ParamTensor& w, ParamTensor& b) {
  const Eigen::Index hidden = cache.h_prev.size();
  const Eigen::Index in = cache.x.size();
  const Vector d_o = grad_h.cwiseProduct(cache.tanh_c);
  const Vector dc = grad_c + grad_h.cwiseProduct(cache.o).cwiseProduct(
                                 (1.0 - cache.tanh_c.array().square()).matrix());
  Vector dz(4 * hidden);
  dz.segment(0, hidden) = (dc.array() * cache.g.array() * cache.i.array() * (1.0 - cache.i.array())).matrix();
  dz.segment(hidden, hidden) =
      (dc.array() * cache.c_prev.array() * cache.f.array() * (1.0 - cache.f.array())).matrix();
  dz.segment(2 * hidden, hidden) = (d_o.array() * cache.o.array() * (1.0 - cache.o.array())).matrix();
  dz.segment(3 * hidden, hidden) = (dc.array() * cache.i.array() * (1.0 - cache.g.array().square())).matrix();

  auto gw = w.grad_mat();
  gw.leftCols(in).noalias() += dz * cache.x.transpose();
  gw.rightCols(hidden).noalias() += dz * cache.h_prev.transpose();
  b.grad_vec() += dz;

  const auto wm = w.mat();
  LstmStepGrad out;
  out.x = wm.leftCols(in).transpose() * dz;
  out.h_prev = wm.rightCols(hidden).transpose() * dz;
  out.c_prev = dc.cwiseProduct(cache.f);
  return out;
}

Vector encode_sequence(std::span<const TokenIndex> inputs, const ParamTensor& embed, const ParamTensor& w,
                       const ParamTensor& b, SequenceTrace* trace) {
  const auto hidden = static_cast<Eigen::Index>(b.size() / 4);
  LstmState state = LstmState::zeros(hidden);
  const auto table = embed.mat();
  if (trace) {
    trace->inputs.assign(inputs.begin(), inputs.end());
    trace->steps.assign(inputs.size(), {});
  }
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const TokenIndex tok = inputs[t];
    require(tok >= 0 && static_cast<std::size_t>(tok) < embed.rows(), "encode_sequence: token outside " + embed.name);
    const Vector x = table.row(tok).transpose();
    state = recurrent_step(x, state, w, b, trace ? &trace->steps[t] : nullptr);
  }
  return state.h;
}

void encode_sequence_backward(const Vector& grad_h, const SequenceTrace& trace, ParamTensor& embed,
                              ParamTensor& w, ParamTensor& b) {
  Vector dh = grad_h;
  Vector dc = Vector::Zero(grad_h.size());
  auto g_embed = embed.grad_mat();
  for (std::size_t t = trace.steps.size(); t-- > 0;) {
    const LstmStepGrad g = recurrent_step_backward(dh, dc, trace.steps[t], w, b);
    g_embed.row(trace.inputs[t]) += g.x.transpose();
    dh = g.h_prev;
    dc = g.c_prev;
  }
}

}  // namespace taxogate
