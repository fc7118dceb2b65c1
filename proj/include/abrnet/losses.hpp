#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "abrnet/common.hpp"

namespace abrnet::losses {

/// Denominator guard for the soft similarity: the ratio is 0/0 at the
/// all-zeros vector, so denominators below this are clamped (not an error).
inline constexpr double kSimilarityEps = 1e-8;

/// Producers clamp discriminator outputs into [kProbEps, 1 - kProbEps] before
/// the adversarial loss sees them; log diverges at {0, 1}.
inline constexpr double kProbEps = 1e-7;

/// Differentiable Jaccard-style similarity between two batches of conditional
/// vectors (rows), entries expected in [0, 1]:
///
///   s_i = <a_i, b_i> / sum_d(a_i + b_i - a_i * b_i)
///
/// Returns the batch mean of s_i, a value in [0, 1]. Minimizing it drives the
/// two regressors apart; maximizing it pulls them together.
///
/// If d_h_hat / d_h_tilde are non-null they receive the gradient of the
/// returned scalar with respect to each input entry (same shape as inputs).
/// Throws ContractViolation on shape mismatch or empty batch.
double soft_similarity(const Eigen::MatrixXd& h_hat,
                       const Eigen::MatrixXd& h_tilde,
                       Eigen::MatrixXd* d_h_hat = nullptr,
                       Eigen::MatrixXd* d_h_tilde = nullptr);

/// Supervised bi-regressor loss: MSE(pred_hat, labels) + MSE(pred_tilde,
/// labels), each MSE averaged over both batch and coordinate dimensions.
/// Gradients are written to d_hat / d_tilde when non-null.
double regression_loss(const Eigen::MatrixXd& pred_hat,
                       const Eigen::MatrixXd& pred_tilde,
                       const Eigen::MatrixXd& labels,
                       Eigen::MatrixXd* d_hat = nullptr,
                       Eigen::MatrixXd* d_tilde = nullptr);

/// Adversarial domain loss over the two mixed intermediate domains:
///
///   mean(log d_source_similar) + mean(log(1 - d_target_similar))
///
/// Always <= 0. The discriminator ascends this value, the feature generator
/// descends it; the trainer realizes both by minimizing -L_adv for D and
/// +L_adv for F. Probabilities must lie strictly inside (0, 1) -- producers
/// are responsible for the [kProbEps, 1 - kProbEps] clamp -- otherwise a
/// ContractViolation is thrown.
double adversarial_loss(const Eigen::VectorXd& d_source_similar,
                        const Eigen::VectorXd& d_target_similar,
                        Eigen::VectorXd* grad_source = nullptr,
                        Eigen::VectorXd* grad_target = nullptr);

/// Cumulative invocation counts, used by the ablation wiring tests to prove
/// e.g. that the CBRD-disabled variant never evaluates the soft similarity.
struct CallCounters {
    std::uint64_t soft_similarity = 0;
    std::uint64_t regression_loss = 0;
    std::uint64_t adversarial_loss = 0;
};

CallCounters call_counters();
void reset_call_counters();

} // namespace abrnet::losses
