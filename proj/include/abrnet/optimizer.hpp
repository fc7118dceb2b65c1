#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "abrnet/models.hpp"
#include "abrnet/nn.hpp"

namespace abrnet::opt {

enum class Kind { Adam, SgdMomentum };

struct Settings {
    Kind kind = Kind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double momentum = 0.95; // SgdMomentum only
};

/// Optimizer state for one parameter group. Buffers are lazily sized on the
/// first apply() so groups can be declared before the bundle exists.
struct GroupState {
    Settings settings;
    long step_count = 0;
    std::vector<Eigen::MatrixXd> m; // first moment / velocity
    std::vector<Eigen::MatrixXd> v; // second moment (Adam only)

    /// Applies one update from the accumulated gradients. Does not clear
    /// them; callers zero gradients at the start of each training step.
    void apply(const nn::ParamRefs& params);
};

/// One independent state per parameter group: updating a group never touches
/// another group's moments, so frozen groups keep their optimizer state
/// bitwise intact through steps that exclude them.
struct Optimizer {
    std::array<GroupState, 6> groups;

    GroupState& state(models::Group g) { return groups[static_cast<std::size_t>(g)]; }
    const GroupState& state(models::Group g) const {
        return groups[static_cast<std::size_t>(g)];
    }

    void apply(models::ModelBundle& bundle, models::Group g) {
        state(g).apply(bundle.group(g));
    }
};

/// All groups share `main` settings except the discriminator, which gets its
/// own learning rate.
Optimizer make_optimizer(const Settings& main, double lr_discriminator);

} // namespace abrnet::opt
