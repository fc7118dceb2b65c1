#include "abrnet/losses.hpp"

#include <atomic>
#include <cmath>

namespace abrnet::losses {

namespace {

std::atomic<std::uint64_t> g_soft_similarity_calls{0};
std::atomic<std::uint64_t> g_regression_calls{0};
std::atomic<std::uint64_t> g_adversarial_calls{0};

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const char* where) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ContractViolation(std::string(where) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
    }
}

} // namespace

double soft_similarity(const Eigen::MatrixXd& h_hat, const Eigen::MatrixXd& h_tilde,
                       Eigen::MatrixXd* d_h_hat, Eigen::MatrixXd* d_h_tilde) {
    g_soft_similarity_calls.fetch_add(1, std::memory_order_relaxed);
    require_same_shape(h_hat, h_tilde, "soft_similarity");
    if (h_hat.rows() < 1 || h_hat.cols() < 1) {
        throw ContractViolation("soft_similarity: empty batch");
    }

    const Eigen::Index batch = h_hat.rows();
    const double inv_batch = 1.0 / static_cast<double>(batch);

    if (d_h_hat) d_h_hat->setZero(h_hat.rows(), h_hat.cols());
    if (d_h_tilde) d_h_tilde->setZero(h_hat.rows(), h_hat.cols());

    double total = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) {
        const auto a = h_hat.row(i);
        const auto b = h_tilde.row(i);
        const double num = a.dot(b);
        const double den_raw = (a + b).sum() - num;
        const bool clamped = den_raw <= kSimilarityEps;
        const double den = clamped ? kSimilarityEps : den_raw;
        total += num / den;

        if (d_h_hat || d_h_tilde) {
            // d(num)/da_j = b_j, d(den)/da_j = 1 - b_j (zero when clamped).
            const double inv_den = 1.0 / den;
            const double ratio_over_den = num * inv_den * inv_den;
            for (Eigen::Index j = 0; j < h_hat.cols(); ++j) {
                const double aj = a(j), bj = b(j);
                if (d_h_hat) {
                    double g = bj * inv_den;
                    if (!clamped) g -= ratio_over_den * (1.0 - bj);
                    (*d_h_hat)(i, j) = g * inv_batch;
                }
                if (d_h_tilde) {
                    double g = aj * inv_den;
                    if (!clamped) g -= ratio_over_den * (1.0 - aj);
                    (*d_h_tilde)(i, j) = g * inv_batch;
                }
            }
        }
    }
    return total * inv_batch;
}

double regression_loss(const Eigen::MatrixXd& pred_hat, const Eigen::MatrixXd& pred_tilde,
                       const Eigen::MatrixXd& labels,
                       Eigen::MatrixXd* d_hat, Eigen::MatrixXd* d_tilde) {
    g_regression_calls.fetch_add(1, std::memory_order_relaxed);
    require_same_shape(pred_hat, labels, "regression_loss");
    require_same_shape(pred_tilde, labels, "regression_loss");
    if (labels.rows() < 1) {
        throw ContractViolation("regression_loss: empty batch");
    }

    const double inv_n = 1.0 / static_cast<double>(labels.size());
    const Eigen::MatrixXd res_hat = pred_hat - labels;
    const Eigen::MatrixXd res_tilde = pred_tilde - labels;
    if (d_hat) *d_hat = 2.0 * inv_n * res_hat;
    if (d_tilde) *d_tilde = 2.0 * inv_n * res_tilde;
    return (res_hat.squaredNorm() + res_tilde.squaredNorm()) * inv_n;
}

double adversarial_loss(const Eigen::VectorXd& d_source_similar,
                        const Eigen::VectorXd& d_target_similar,
                        Eigen::VectorXd* grad_source, Eigen::VectorXd* grad_target) {
    g_adversarial_calls.fetch_add(1, std::memory_order_relaxed);
    if (d_source_similar.size() < 1 || d_target_similar.size() < 1) {
        throw ContractViolation("adversarial_loss: empty batch");
    }
    auto check_open_unit = [](const Eigen::VectorXd& p, const char* name) {
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            if (!(p(i) > 0.0 && p(i) < 1.0)) {
                throw ContractViolation(std::string("adversarial_loss: ") + name +
                                        "[" + std::to_string(i) + "]=" +
                                        std::to_string(p(i)) + " outside (0,1)");
            }
        }
    };
    check_open_unit(d_source_similar, "d_source_similar");
    check_open_unit(d_target_similar, "d_target_similar");

    const double inv_ns = 1.0 / static_cast<double>(d_source_similar.size());
    const double inv_nt = 1.0 / static_cast<double>(d_target_similar.size());
    const double loss = d_source_similar.array().log().mean() +
                        (1.0 - d_target_similar.array()).log().mean();
    if (grad_source) *grad_source = inv_ns / d_source_similar.array();
    if (grad_target) *grad_target = -inv_nt / (1.0 - d_target_similar.array());
    return loss;
}

CallCounters call_counters() {
    CallCounters c;
    c.soft_similarity = g_soft_similarity_calls.load(std::memory_order_relaxed);
    c.regression_loss = g_regression_calls.load(std::memory_order_relaxed);
    c.adversarial_loss = g_adversarial_calls.load(std::memory_order_relaxed);
    return c;
}

void reset_call_counters() {
    g_soft_similarity_calls.store(0, std::memory_order_relaxed);
    g_regression_calls.store(0, std::memory_order_relaxed);
    g_adversarial_calls.store(0, std::memory_order_relaxed);
}

} // namespace abrnet::losses
