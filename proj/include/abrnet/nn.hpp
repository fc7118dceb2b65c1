#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abrnet/common.hpp"
#include "abrnet/rng.hpp"

namespace abrnet::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// A trainable parameter with its gradient accumulator. Vectors are stored as
/// n x 1 matrices so optimizers and checksums can treat everything uniformly.
struct Tensor {
    MatrixXd value;
    MatrixXd grad;
    std::string name;

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
    Eigen::Index count() const { return value.size(); }
};

using ParamRefs = std::vector<Tensor*>;

std::uint64_t checksum(const ParamRefs& params);
Eigen::Index param_count(const ParamRefs& params);

inline MatrixXd sigmoid(const MatrixXd& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

/// Affine layer, y = x W^T + b. Activations are row-major batches (B x dim).
struct Linear {
    Tensor W; // out x in
    Tensor b; // out x 1

    void init(Eigen::Index in, Eigen::Index out, Rng& rng, const std::string& name);
    Eigen::Index in_dim() const { return W.value.cols(); }
    Eigen::Index out_dim() const { return W.value.rows(); }

    MatrixXd forward(const MatrixXd& x) const;

    /// Accumulates parameter gradients from upstream dy (B x out) and the
    /// forward input x, returns the gradient w.r.t. x.
    MatrixXd backward(const MatrixXd& x, const MatrixXd& dy);

    ParamRefs params() { return {&W, &b}; }
};

/// Bidirectional single-layer LSTM over fixed-length windows. The input batch
/// is B x (T * input_dim) with step t occupying the column block
/// [t*input_dim, (t+1)*input_dim). The feature output concatenates the final
/// hidden state of each direction (forward at t = T-1, backward at t = 0),
/// giving B x 2*hidden.
struct BiLstm {
    struct Direction {
        Tensor Wx; // 4h x in, gate row order [input | forget | cell | output]
        Tensor Wh; // 4h x h
        Tensor b;  // 4h x 1
    };

    Eigen::Index input_dim = 0;
    Eigen::Index steps = 0;
    Eigen::Index hidden = 0; // per direction; feature_dim = 2 * hidden
    Direction fw, bw;

    /// Per-direction activations recorded by a training forward pass.
    struct DirCache {
        std::vector<MatrixXd> gate_i, gate_f, gate_g, gate_o; // post-activation, B x h
        std::vector<MatrixXd> cell, tanh_cell, hidden_state;  // B x h
    };
    struct Cache {
        DirCache fw, bw;
    };

    void init(Eigen::Index in, Eigen::Index n_steps, Eigen::Index h, Rng& rng);
    Eigen::Index feature_dim() const { return 2 * hidden; }

    /// cache may be null for inference-only passes.
    MatrixXd forward(const MatrixXd& windows, Cache* cache) const;

    /// Accumulates parameter gradients given the forward cache and the
    /// gradient w.r.t. the feature output (B x 2*hidden).
    void backward(const MatrixXd& windows, const Cache& cache, const MatrixXd& d_features);

    ParamRefs params();

private:
    MatrixXd run_direction(const Direction& dir, const MatrixXd& windows, bool reverse,
                           DirCache* cache) const;
    void backward_direction(Direction& dir, const MatrixXd& windows, bool reverse,
                            const DirCache& cache, const MatrixXd& d_final_hidden);
};

/// Small convolutional encoder for low-resolution image inputs: three blocks
/// of (3x3 conv, pad 1) + ReLU + 2x2 average pool, then global average
/// pooling and a projection to feature_dim. Images are flattened rows in
/// channel-major order (index c*H*W + y*W + x); H and W must be divisible
/// by 8.
struct ConvEncoder {
    struct ConvLayer {
        Tensor W; // out_c x (in_c * 9)
        Tensor b; // out_c x 1
        Eigen::Index in_c = 0, out_c = 0;
    };

    Eigen::Index height = 0, width = 0, channels = 0;
    std::vector<ConvLayer> layers; // widths 16, 32, 64
    Linear proj;                   // 64 -> feature_dim

    struct Cache {
        // Per layer: pre-ReLU responses and pooled outputs for every image.
        std::vector<MatrixXd> pre_relu; // layer -> B x (out_c * H_l * W_l)
        std::vector<MatrixXd> pooled;   // layer -> B x (out_c * H_l/2 * W_l/2)
        MatrixXd gap;                   // B x 64
    };

    void init(Eigen::Index h, Eigen::Index w, Eigen::Index c, Eigen::Index feature,
              Rng& rng);
    Eigen::Index feature_dim() const { return proj.out_dim(); }
    Eigen::Index input_dim() const { return height * width * channels; }

    MatrixXd forward(const MatrixXd& images, Cache* cache) const;
    void backward(const MatrixXd& images, const Cache& cache, const MatrixXd& d_features);

    ParamRefs params();
};

} // namespace abrnet::nn
