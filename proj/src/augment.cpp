#include "abrnet/augment.hpp"

#include <algorithm>

namespace abrnet::augment {

MixedBatchPair mix_with_pairing(const MatrixXd& x_s, const MatrixXd& x_t, double lambda,
                                const Pairing& pairing) {
    if (x_s.cols() != x_t.cols()) {
        throw ContractViolation("mix_domains: elementwise shape mismatch (" +
                                std::to_string(x_s.cols()) + " vs " +
                                std::to_string(x_t.cols()) + " columns)");
    }
    MixedBatchPair out;
    const auto batch = static_cast<Eigen::Index>(pairing.size());
    out.x_source_similar.resize(batch, x_s.cols());
    out.x_target_similar.resize(batch, x_s.cols());
    out.pairing = pairing;
    for (Eigen::Index r = 0; r < batch; ++r) {
        const auto [i, j] = pairing[static_cast<std::size_t>(r)];
        if (i < 0 || i >= x_s.rows() || j < 0 || j >= x_t.rows()) {
            throw ContractViolation("mix_domains: pairing index out of range");
        }
        out.x_source_similar.row(r) = lambda * x_s.row(i) + (1.0 - lambda) * x_t.row(j);
        out.x_target_similar.row(r) = (1.0 - lambda) * x_s.row(i) + lambda * x_t.row(j);
    }
    return out;
}

MixedBatchPair mix_domains(const MatrixXd& x_s, const MatrixXd& x_t, double lambda,
                           Rng& rng) {
    if (!(lambda > 0.5 && lambda <= 1.0)) {
        throw ConfigError("mix_domains: lambda must be in (0.5, 1], got " +
                          std::to_string(lambda));
    }
    if (x_s.rows() < 1 || x_t.rows() < 1) {
        throw ContractViolation("mix_domains: empty batch");
    }
    const Eigen::Index batch = std::min(x_s.rows(), x_t.rows());
    Pairing pairing;
    pairing.reserve(static_cast<std::size_t>(batch));
    for (Eigen::Index i = 0; i < batch; ++i) {
        pairing.emplace_back(
            i, static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(batch))));
    }
    return mix_with_pairing(x_s, x_t, lambda, pairing);
}

} // namespace abrnet::augment
