#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "terra/nn/tensor.hpp"

namespace terra::nn {

// Reverse-mode autodiff over a dynamically recorded graph. Ops build nodes
// eagerly; backward() walks the recorded graph once. Parameters are leaf
// nodes that persist across steps; everything else is rebuilt per forward.
struct Node {
    Tensor value;
    Tensor grad;  // allocated on demand; same shape as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // reads own grad, accumulates into parents
    std::string name;

    void ensure_grad() {
        if (grad.data.size() != value.numel()) {
            grad.shape = value.shape;
            grad.data.assign(value.numel(), 0.0);
        }
    }
};

using Value = std::shared_ptr<Node>;

Value make_input(Tensor t);
Value make_param(Tensor t, std::string name);

// Clears gradients of the given leaves (typically model parameters).
void zero_grad(const std::vector<Value>& params);

// Backpropagates from a scalar loss. Gradients of reachable non-leaf nodes
// are freshly zeroed; leaf gradients accumulate until zero_grad.
void backward(const Value& loss);

// ---- elementwise ----
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value scale(const Value& a, double s);
Value neg(const Value& a);
Value exp_of(const Value& a);
Value relu(const Value& a);
Value sigmoid(const Value& a);
Value silu(const Value& a);
Value softplus(const Value& a);

// ---- shape ----
Value reshape(const Value& a, std::vector<int> shape);
Value slice_cols(const Value& a, int c0, int c1);  // 2-d, columns [c0, c1)
Value concat_cols(const Value& a, const Value& b);
Value last_row(const Value& a);  // 2-d, final row as 1 x C

// ---- linear algebra ----
Value matmul(const Value& a, const Value& b);
// y = x W^T (+ b per row); x: N x in, W: out x in, b: out.
Value linear(const Value& x, const Value& weight, const Value& bias = nullptr);

// ---- neural ops ----
// x: N x C_in x H x W, w: C_out x C_in x k x k (k odd, stride 1, no padding).
Value conv2d(const Value& x, const Value& weight, const Value& bias);

// Depthwise causal convolution along rows: x T x C, w C x k, left-padded so
// y[t] depends on x[t-k+1..t] only.
Value causal_conv1d(const Value& x, const Value& weight, const Value& bias);

struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
    bool initialized = false;
    double momentum = 0.1;
    double eps = 1e-5;
};

// Per-channel standardization of an N x C x H x W batch. Training mode uses
// batch statistics (batch of >= 2 required) and updates the running EMA;
// eval mode uses the running statistics and requires them to exist.
Value batch_norm(const Value& x, const Value& gamma, const Value& beta, BatchNormState& state,
                 bool training);

// Mean over the batch of -log softmax(logits)[label]; logits N x K.
Value softmax_cross_entropy(const Value& logits, const std::vector<int>& labels);

// Selective state-space scan. Per inner channel c with state dimension S:
//   h_t = exp(delta_t[c] * A[c]) .* h_{t-1} + delta_t[c] * B_t * x_t[c]
//   y_t[c] = <C_t, h_t> + D[c] * x_t[c]
// delta: T x C, A: C x S, B: T x S, C: T x S, x: T x C, D: C. h_0 = 0.
// parallel=true evaluates the recurrence with an associative prefix scan.
Value selective_scan(const Value& delta, const Value& A, const Value& B, const Value& C,
                     const Value& x, const Value& D, bool parallel = true);

// Plain-tensor reference recurrence; the oracle the scan is tested against.
Tensor selective_scan_sequential(const Tensor& delta, const Tensor& A, const Tensor& B,
                                 const Tensor& C, const Tensor& x, const Tensor& D);

int argmax_row(const Tensor& t, int row);

}  // namespace terra::nn
