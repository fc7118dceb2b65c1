#include "abrnet/nn.hpp"

#include <cmath>

namespace abrnet::nn {

namespace {

void fill_uniform(MatrixXd& m, double bound, Rng& rng) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = rng.uniform(-bound, bound);
        }
    }
}

} // namespace

std::uint64_t checksum(const ParamRefs& params) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const Tensor* t : params) {
        h = fnv1a(t->value.data(),
                  static_cast<std::size_t>(t->value.size()) * sizeof(double), h);
    }
    return h;
}

Eigen::Index param_count(const ParamRefs& params) {
    Eigen::Index n = 0;
    for (const Tensor* t : params) n += t->count();
    return n;
}

// ---------------------------------------------------------------------------
// Linear

void Linear::init(Eigen::Index in, Eigen::Index out, Rng& rng, const std::string& name) {
    if (in < 1 || out < 1) {
        throw ConfigError("Linear " + name + ": dimensions must be >= 1");
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    W.value.resize(out, in);
    b.value.resize(out, 1);
    fill_uniform(W.value, bound, rng);
    fill_uniform(b.value, bound, rng);
    W.name = name + ".W";
    b.name = name + ".b";
    W.zero_grad();
    b.zero_grad();
}

MatrixXd Linear::forward(const MatrixXd& x) const {
    if (x.cols() != W.value.cols()) {
        throw ContractViolation("Linear " + W.name + ": input has " +
                                std::to_string(x.cols()) + " columns, expected " +
                                std::to_string(W.value.cols()));
    }
    MatrixXd y = x * W.value.transpose();
    y.rowwise() += b.value.col(0).transpose();
    return y;
}

MatrixXd Linear::backward(const MatrixXd& x, const MatrixXd& dy) {
    W.grad.noalias() += dy.transpose() * x;
    b.grad.col(0).noalias() += dy.colwise().sum().transpose();
    return dy * W.value;
}

// ---------------------------------------------------------------------------
// BiLstm

void BiLstm::init(Eigen::Index in, Eigen::Index n_steps, Eigen::Index h, Rng& rng) {
    if (in < 1 || n_steps < 1 || h < 1) {
        throw ConfigError("BiLstm: dimensions must be >= 1");
    }
    input_dim = in;
    steps = n_steps;
    hidden = h;
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    auto init_dir = [&](Direction& d, const std::string& name) {
        d.Wx.value.resize(4 * h, in);
        d.Wh.value.resize(4 * h, h);
        d.b.value.resize(4 * h, 1);
        fill_uniform(d.Wx.value, bound, rng);
        fill_uniform(d.Wh.value, bound, rng);
        fill_uniform(d.b.value, bound, rng);
        d.Wx.name = name + ".Wx";
        d.Wh.name = name + ".Wh";
        d.b.name = name + ".b";
        d.Wx.zero_grad();
        d.Wh.zero_grad();
        d.b.zero_grad();
    };
    init_dir(fw, "lstm_fw");
    init_dir(bw, "lstm_bw");
}

MatrixXd BiLstm::run_direction(const Direction& dir, const MatrixXd& windows, bool reverse,
                               DirCache* cache) const {
    const Eigen::Index batch = windows.rows();
    MatrixXd h = MatrixXd::Zero(batch, hidden);
    MatrixXd c = MatrixXd::Zero(batch, hidden);
    if (cache) {
        cache->gate_i.resize(steps);
        cache->gate_f.resize(steps);
        cache->gate_g.resize(steps);
        cache->gate_o.resize(steps);
        cache->cell.resize(steps);
        cache->tanh_cell.resize(steps);
        cache->hidden_state.resize(steps);
    }
    for (Eigen::Index s = 0; s < steps; ++s) {
        const Eigen::Index t = reverse ? steps - 1 - s : s;
        const auto x_t = windows.middleCols(t * input_dim, input_dim);
        MatrixXd z = x_t * dir.Wx.value.transpose();
        z.noalias() += h * dir.Wh.value.transpose();
        z.rowwise() += dir.b.value.col(0).transpose();

        MatrixXd gi = sigmoid(z.middleCols(0, hidden));
        MatrixXd gf = sigmoid(z.middleCols(hidden, hidden));
        MatrixXd gg = z.middleCols(2 * hidden, hidden).array().tanh().matrix();
        MatrixXd go = sigmoid(z.middleCols(3 * hidden, hidden));

        c = (gf.array() * c.array() + gi.array() * gg.array()).matrix();
        MatrixXd tc = c.array().tanh().matrix();
        h = (go.array() * tc.array()).matrix();

        if (cache) {
            cache->gate_i[s] = std::move(gi);
            cache->gate_f[s] = std::move(gf);
            cache->gate_g[s] = std::move(gg);
            cache->gate_o[s] = std::move(go);
            cache->cell[s] = c;
            cache->tanh_cell[s] = std::move(tc);
            cache->hidden_state[s] = h;
        }
    }
    return h;
}

MatrixXd BiLstm::forward(const MatrixXd& windows, Cache* cache) const {
    if (windows.cols() != steps * input_dim) {
        throw ContractViolation("BiLstm: input has " + std::to_string(windows.cols()) +
                                " columns, expected " + std::to_string(steps * input_dim));
    }
    MatrixXd features(windows.rows(), 2 * hidden);
    features.leftCols(hidden) = run_direction(fw, windows, false, cache ? &cache->fw : nullptr);
    features.rightCols(hidden) = run_direction(bw, windows, true, cache ? &cache->bw : nullptr);
    return features;
}

void BiLstm::backward_direction(Direction& dir, const MatrixXd& windows, bool reverse,
                                const DirCache& cache, const MatrixXd& d_final_hidden) {
    const Eigen::Index batch = windows.rows();
    MatrixXd dh = d_final_hidden;
    MatrixXd dc = MatrixXd::Zero(batch, hidden);
    MatrixXd dz(batch, 4 * hidden);
    for (Eigen::Index s = steps - 1; s >= 0; --s) {
        const Eigen::Index t = reverse ? steps - 1 - s : s;
        const MatrixXd& gi = cache.gate_i[s];
        const MatrixXd& gf = cache.gate_f[s];
        const MatrixXd& gg = cache.gate_g[s];
        const MatrixXd& go = cache.gate_o[s];
        const MatrixXd& tc = cache.tanh_cell[s];

        // h_s = o * tanh(c_s); c_s = f * c_{s-1} + i * g
        dc.array() += dh.array() * go.array() * (1.0 - tc.array().square());
        dz.middleCols(3 * hidden, hidden) =
            (dh.array() * tc.array() * go.array() * (1.0 - go.array())).matrix();
        dz.middleCols(0, hidden) =
            (dc.array() * gg.array() * gi.array() * (1.0 - gi.array())).matrix();
        dz.middleCols(2 * hidden, hidden) =
            (dc.array() * gi.array() * (1.0 - gg.array().square())).matrix();
        if (s > 0) {
            dz.middleCols(hidden, hidden) =
                (dc.array() * cache.cell[s - 1].array() * gf.array() * (1.0 - gf.array()))
                    .matrix();
        } else {
            dz.middleCols(hidden, hidden).setZero(); // c_{-1} = 0
        }

        const auto x_t = windows.middleCols(t * input_dim, input_dim);
        dir.Wx.grad.noalias() += dz.transpose() * x_t;
        dir.b.grad.col(0).noalias() += dz.colwise().sum().transpose();
        if (s > 0) {
            dir.Wh.grad.noalias() += dz.transpose() * cache.hidden_state[s - 1];
            dh.noalias() = dz * dir.Wh.value;
            dc = (dc.array() * gf.array()).matrix();
        }
    }
}

void BiLstm::backward(const MatrixXd& windows, const Cache& cache, const MatrixXd& d_features) {
    if (d_features.cols() != 2 * hidden || d_features.rows() != windows.rows()) {
        throw ContractViolation("BiLstm::backward: feature gradient shape mismatch");
    }
    backward_direction(fw, windows, false, cache.fw, d_features.leftCols(hidden));
    backward_direction(bw, windows, true, cache.bw, d_features.rightCols(hidden));
}

ParamRefs BiLstm::params() {
    return {&fw.Wx, &fw.Wh, &fw.b, &bw.Wx, &bw.Wh, &bw.b};
}

// ---------------------------------------------------------------------------
// ConvEncoder

namespace {

// 3x3, pad 1 patch matrix: K((c*3 + ky)*3 + kx, y*W + x) = img[c, y+ky-1, x+kx-1].
void im2col(const double* img, Eigen::Index C, Eigen::Index H, Eigen::Index W,
            MatrixXd& K) {
    K.setZero(C * 9, H * W);
    for (Eigen::Index c = 0; c < C; ++c) {
        const double* plane = img + c * H * W;
        for (Eigen::Index ky = 0; ky < 3; ++ky) {
            for (Eigen::Index kx = 0; kx < 3; ++kx) {
                const Eigen::Index row = (c * 3 + ky) * 3 + kx;
                for (Eigen::Index y = 0; y < H; ++y) {
                    const Eigen::Index sy = y + ky - 1;
                    if (sy < 0 || sy >= H) continue;
                    for (Eigen::Index x = 0; x < W; ++x) {
                        const Eigen::Index sx = x + kx - 1;
                        if (sx < 0 || sx >= W) continue;
                        K(row, y * W + x) = plane[sy * W + sx];
                    }
                }
            }
        }
    }
}

void col2im_add(const MatrixXd& dK, Eigen::Index C, Eigen::Index H, Eigen::Index W,
                double* dimg) {
    for (Eigen::Index c = 0; c < C; ++c) {
        double* plane = dimg + c * H * W;
        for (Eigen::Index ky = 0; ky < 3; ++ky) {
            for (Eigen::Index kx = 0; kx < 3; ++kx) {
                const Eigen::Index row = (c * 3 + ky) * 3 + kx;
                for (Eigen::Index y = 0; y < H; ++y) {
                    const Eigen::Index sy = y + ky - 1;
                    if (sy < 0 || sy >= H) continue;
                    for (Eigen::Index x = 0; x < W; ++x) {
                        const Eigen::Index sx = x + kx - 1;
                        if (sx < 0 || sx >= W) continue;
                        plane[sy * W + sx] += dK(row, y * W + x);
                    }
                }
            }
        }
    }
}

void avg_pool2(const double* in, Eigen::Index C, Eigen::Index H, Eigen::Index W,
               double* out) {
    const Eigen::Index h2 = H / 2, w2 = W / 2;
    for (Eigen::Index c = 0; c < C; ++c) {
        const double* plane = in + c * H * W;
        double* oplane = out + c * h2 * w2;
        for (Eigen::Index y = 0; y < h2; ++y) {
            for (Eigen::Index x = 0; x < w2; ++x) {
                oplane[y * w2 + x] = 0.25 * (plane[(2 * y) * W + 2 * x] +
                                             plane[(2 * y) * W + 2 * x + 1] +
                                             plane[(2 * y + 1) * W + 2 * x] +
                                             plane[(2 * y + 1) * W + 2 * x + 1]);
            }
        }
    }
}

void avg_pool2_backward(const double* dout, Eigen::Index C, Eigen::Index H,
                        Eigen::Index W, double* din) {
    const Eigen::Index h2 = H / 2, w2 = W / 2;
    for (Eigen::Index c = 0; c < C; ++c) {
        const double* dplane = dout + c * h2 * w2;
        double* iplane = din + c * H * W;
        for (Eigen::Index y = 0; y < h2; ++y) {
            for (Eigen::Index x = 0; x < w2; ++x) {
                const double g = 0.25 * dplane[y * w2 + x];
                iplane[(2 * y) * W + 2 * x] = g;
                iplane[(2 * y) * W + 2 * x + 1] = g;
                iplane[(2 * y + 1) * W + 2 * x] = g;
                iplane[(2 * y + 1) * W + 2 * x + 1] = g;
            }
        }
    }
}

} // namespace

void ConvEncoder::init(Eigen::Index h, Eigen::Index w, Eigen::Index c,
                       Eigen::Index feature, Rng& rng) {
    if (h < 8 || w < 8 || h % 8 != 0 || w % 8 != 0) {
        throw ConfigError("ConvEncoder: image sides must be multiples of 8");
    }
    if (c < 1 || feature < 1) {
        throw ConfigError("ConvEncoder: channels and feature_dim must be >= 1");
    }
    height = h;
    width = w;
    channels = c;
    const Eigen::Index widths[3] = {16, 32, 64};
    layers.assign(3, ConvLayer{});
    Eigen::Index in_c = c;
    for (int l = 0; l < 3; ++l) {
        ConvLayer& cl = layers[l];
        cl.in_c = in_c;
        cl.out_c = widths[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_c * 9));
        cl.W.value.resize(cl.out_c, in_c * 9);
        cl.b.value.resize(cl.out_c, 1);
        fill_uniform(cl.W.value, bound, rng);
        fill_uniform(cl.b.value, bound, rng);
        cl.W.name = "conv" + std::to_string(l) + ".W";
        cl.b.name = "conv" + std::to_string(l) + ".b";
        cl.W.zero_grad();
        cl.b.zero_grad();
        in_c = cl.out_c;
    }
    proj.init(64, feature, rng, "conv_proj");
}

MatrixXd ConvEncoder::forward(const MatrixXd& images, Cache* cache) const {
    if (images.cols() != input_dim()) {
        throw ContractViolation("ConvEncoder: input has " + std::to_string(images.cols()) +
                                " columns, expected " + std::to_string(input_dim()));
    }
    const Eigen::Index batch = images.rows();
    if (cache) {
        cache->pre_relu.assign(3, MatrixXd());
        cache->pooled.assign(3, MatrixXd());
    }

    MatrixXd cur = images;
    Eigen::Index H = height, W = width;
    MatrixXd K;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const ConvLayer& cl = layers[l];
        MatrixXd pre(batch, cl.out_c * H * W);
        MatrixXd pooled(batch, cl.out_c * (H / 2) * (W / 2));
        // Row-major per-sample convolution via im2col + GEMM.
        Eigen::VectorXd row(cl.out_c * H * W);
        for (Eigen::Index i = 0; i < batch; ++i) {
            Eigen::VectorXd in_row = cur.row(i);
            im2col(in_row.data(), cl.in_c, H, W, K);
            MatrixXd y = cl.W.value * K;
            y.colwise() += cl.b.value.col(0);
            // y is out_c x (H*W); flatten channel-major
            for (Eigen::Index oc = 0; oc < cl.out_c; ++oc) {
                row.segment(oc * H * W, H * W) = y.row(oc);
            }
            pre.row(i) = row;
            Eigen::VectorXd relu_row = row.cwiseMax(0.0);
            Eigen::VectorXd pooled_row(cl.out_c * (H / 2) * (W / 2));
            avg_pool2(relu_row.data(), cl.out_c, H, W, pooled_row.data());
            pooled.row(i) = pooled_row;
        }
        if (cache) {
            cache->pre_relu[l] = pre;
            cache->pooled[l] = pooled;
        }
        cur = std::move(pooled);
        H /= 2;
        W /= 2;
    }

    // Global average pool over the remaining H x W grid per channel.
    const Eigen::Index spatial = H * W;
    MatrixXd gap(batch, 64);
    for (Eigen::Index i = 0; i < batch; ++i) {
        for (Eigen::Index ch = 0; ch < 64; ++ch) {
            gap(i, ch) = cur.row(i).segment(ch * spatial, spatial).mean();
        }
    }
    if (cache) cache->gap = gap;
    return proj.forward(gap);
}

void ConvEncoder::backward(const MatrixXd& images, const Cache& cache,
                           const MatrixXd& d_features) {
    const Eigen::Index batch = images.rows();
    MatrixXd d_gap = proj.backward(cache.gap, d_features);

    Eigen::Index H = height / 8, W = width / 8;
    const Eigen::Index spatial = H * W;
    MatrixXd d_cur(batch, 64 * spatial);
    for (Eigen::Index i = 0; i < batch; ++i) {
        for (Eigen::Index ch = 0; ch < 64; ++ch) {
            d_cur.row(i).segment(ch * spatial, spatial)
                .setConstant(d_gap(i, ch) / static_cast<double>(spatial));
        }
    }

    MatrixXd K;
    for (int l = 2; l >= 0; --l) {
        ConvLayer& cl = layers[l];
        H = height >> l;
        W = width >> l;
        // d_cur holds the gradient w.r.t. this layer's pooled output.
        const MatrixXd& pre = cache.pre_relu[l];
        const MatrixXd& in_act =
            (l == 0) ? images : cache.pooled[l - 1];
        MatrixXd d_in(batch, cl.in_c * H * W);
        Eigen::VectorXd d_relu_row(cl.out_c * H * W);
        MatrixXd dy(cl.out_c, H * W);
        for (Eigen::Index i = 0; i < batch; ++i) {
            // Rows of column-major matrices are strided; copy before raw access.
            Eigen::VectorXd d_pool_row = d_cur.row(i);
            avg_pool2_backward(d_pool_row.data(), cl.out_c, H, W, d_relu_row.data());
            // ReLU mask from the recorded pre-activation.
            Eigen::VectorXd pre_row = pre.row(i);
            for (Eigen::Index j = 0; j < d_relu_row.size(); ++j) {
                if (pre_row(j) <= 0.0) d_relu_row(j) = 0.0;
            }
            for (Eigen::Index oc = 0; oc < cl.out_c; ++oc) {
                dy.row(oc) = d_relu_row.segment(oc * H * W, H * W);
            }
            Eigen::VectorXd in_row = in_act.row(i);
            im2col(in_row.data(), cl.in_c, H, W, K);
            cl.W.grad.noalias() += dy * K.transpose();
            cl.b.grad.col(0) += dy.rowwise().sum();
            MatrixXd dK = cl.W.value.transpose() * dy;
            Eigen::VectorXd d_in_row = Eigen::VectorXd::Zero(cl.in_c * H * W);
            col2im_add(dK, cl.in_c, H, W, d_in_row.data());
            d_in.row(i) = d_in_row;
        }
        d_cur = std::move(d_in);
    }
    // Gradient w.r.t. the raw images is not needed; inputs are leaves.
}

ParamRefs ConvEncoder::params() {
    ParamRefs out;
    for (ConvLayer& cl : layers) {
        out.push_back(&cl.W);
        out.push_back(&cl.b);
    }
    for (Tensor* t : proj.params()) out.push_back(t);
    return out;
}

} // namespace abrnet::nn
