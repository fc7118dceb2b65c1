#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "abrnet/common.hpp"
#include "abrnet/rng.hpp"

namespace abrnet::augment {

using Eigen::MatrixXd;
using Pairing = std::vector<std::pair<Eigen::Index, Eigen::Index>>;

/// The two mixed intermediate batches plus the (source row, target row)
/// pairing that produced them. For every pair,
/// x_source_similar + x_target_similar == x_s[i] + x_t[j] exactly up to float
/// rounding.
struct MixedBatchPair {
    MatrixXd x_source_similar; // lambda * x_s[i] + (1 - lambda) * x_t[j]
    MatrixXd x_target_similar; // (1 - lambda) * x_s[i] + lambda * x_t[j]
    Pairing pairing;
};

/// Fixed-ratio convex combination of source and target inputs. lambda must
/// lie in (0.5, 1] so the source-similar batch stays source-dominated;
/// batches of different sizes are truncated to the smaller one. Pairing is
/// uniform random over the (truncated) target batch, drawn from rng, so the
/// same seed reproduces the same mixture bitwise.
MixedBatchPair mix_domains(const MatrixXd& x_s, const MatrixXd& x_t, double lambda,
                           Rng& rng);

/// Mixing kernel with an explicit pairing and no dominance guard on lambda.
/// Exists so the lambda <-> (1 - lambda) output-swap symmetry can be checked
/// on both sides of 0.5; mix_domains is the validated entry point.
MixedBatchPair mix_with_pairing(const MatrixXd& x_s, const MatrixXd& x_t, double lambda,
                                const Pairing& pairing);

} // namespace abrnet::augment
