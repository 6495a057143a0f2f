#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "taxogate/param_store.hpp"

namespace taxogate {

/// Row index into an embedding table (the same integer type as token ids).
using TokenIndex = std::int32_t;

class NonFiniteInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// ---------------------------------------------------------------------------
// Elementwise and normalisation helpers.

/// Max-subtracted softmax. Throws NonFiniteInput on NaN/Inf entries.
std::vector<double> softmax(std::span<const double> x);
/// Row-wise softmax in place. Entries equal to -infinity get probability 0.
void softmax_rows(Matrix& m);

double sigmoid(double x) noexcept;
/// log(sigmoid(x)) without overflow for large |x|.
double log_sigmoid(double x) noexcept;

// ---------------------------------------------------------------------------
// Affine map y = W x + b with W of shape (out, in) and b of length out.

Vector affine(const Vector& x, const ParamTensor& w, const ParamTensor& b);
/// Accumulates dW, db and returns dx.
Vector affine_backward(const Vector& x, const Vector& grad_y, ParamTensor& w, ParamTensor& b);

/// Row-batched form: Y = X W^T + b for X of shape (n, in).
Matrix affine_rows(const Matrix& x, const ParamTensor& w, const ParamTensor& b);
Matrix affine_rows_backward(const Matrix& x, const Matrix& grad_y, ParamTensor& w, ParamTensor& b);

// ---------------------------------------------------------------------------
// Self-attention block over a token-state matrix H (n rows, width d).
//
//   Q = H Wq, K = H Wk, V = H Wv      (Wq, Wk, Wv of shape (d, d))
//   out_i = sum_j softmax_j(<q_i, k_j>) v_j   per head on a column slice
//   Y = H + out                        when residual is set
//
// Heads split the d columns into equal slices; the head outputs are
// concatenated back into width d.

struct AttentionOptions {
  int heads = 1;
  bool causal = true;
  bool residual = true;
};

struct AttentionWeights {
  const ParamTensor& query;
  const ParamTensor& key;
  const ParamTensor& value;
};

struct AttentionGrads {
  ParamTensor& query;
  ParamTensor& key;
  ParamTensor& value;
};

struct AttentionCache {
  Matrix input;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, n x n
};

Matrix attention_block(const Matrix& h, const AttentionWeights& w, const AttentionOptions& opt,
                       AttentionCache* cache = nullptr);
/// Returns dH and accumulates weight gradients.
Matrix attention_block_backward(const Matrix& grad_out, const AttentionCache& cache,
                                const AttentionWeights& w, AttentionGrads g,
                                const AttentionOptions& opt);

/// Key/value rows accumulated while decoding one token at a time.
struct KeyValueCache {
  Matrix keys;
  Matrix values;
  Eigen::Index length = 0;
};

/// Causal attention for a single new row given the cache of earlier rows;
/// appends this row's key and value. Matches row n of attention_block.
Eigen::RowVectorXd attention_step(const Eigen::RowVectorXd& h, const AttentionWeights& w,
                                  const AttentionOptions& opt, KeyValueCache& kv);

// ---------------------------------------------------------------------------
// Position-wise feed-forward sublayer: Y = H + tanh(H W1^T + b1) W2^T + b2.

struct FeedForwardCache {
  Matrix input;
  Matrix hidden;  // tanh activations
};

Matrix feed_forward(const Matrix& h, const ParamTensor& w1, const ParamTensor& b1,
                    const ParamTensor& w2, const ParamTensor& b2, FeedForwardCache* cache = nullptr);
Matrix feed_forward_backward(const Matrix& grad_out, const FeedForwardCache& cache, ParamTensor& w1,
                             ParamTensor& b1, ParamTensor& w2, ParamTensor& b2);

// ---------------------------------------------------------------------------
// Gated memory cell. W has shape (4H, in + H), b has length 4H; gate rows are
// ordered input, forget, output, candidate.

struct LstmState {
  Vector h;
  Vector c;
  static LstmState zeros(Eigen::Index hidden) {
    return {Vector::Zero(hidden), Vector::Zero(hidden)};
  }
};

struct LstmStepCache {
  Vector x, h_prev, c_prev;
  Vector i, f, o, g;
  Vector c, tanh_c;
};

struct LstmStepGrad {
  Vector x;
  Vector h_prev;
  Vector c_prev;
};

LstmState recurrent_step(const Vector& x, const LstmState& state, const ParamTensor& w,
                         const ParamTensor& b, LstmStepCache* cache = nullptr);
LstmStepGrad recurrent_step_backward(const Vector& grad_h, const Vector& grad_c,
                                     const LstmStepCache& cache, ParamTensor& w, ParamTensor& b);

/// Runs the cell over embed rows of `inputs` from a zero state and returns
/// the final hidden state. `trace` keeps what the backward pass needs.
struct SequenceTrace {
  std::vector<TokenIndex> inputs;
  std::vector<LstmStepCache> steps;
};

Vector encode_sequence(std::span<const TokenIndex> inputs, const ParamTensor& embed, const ParamTensor& w,
                       const ParamTensor& b, SequenceTrace* trace = nullptr);
/// Backpropagates a gradient on the final hidden state through every step,
/// into the cell weights and the embedding rows.
void encode_sequence_backward(const Vector& grad_h, const SequenceTrace& trace, ParamTensor& embed,
                              ParamTensor& w, ParamTensor& b);

}  // namespace taxogate
