#pragma once

#include "abrnet/datagen.hpp"
#include "abrnet/models.hpp"
#include "abrnet/trainer.hpp"

// Shared desk-size fixtures for the trainer / eval / baseline suites.
namespace testdata {

inline abrnet::datagen::DomainPairSpec tiny_pair_spec() {
    abrnet::datagen::DomainPairSpec spec;
    spec.env.extents = {10.0, 6.0};
    spec.env.wifi_anchors = 4;
    spec.env.uwb_anchors = 1;
    spec.env.rssi_channels = 3;
    spec.env.csi_anchors = 2;
    spec.env.obstacle_count = 6;
    spec.env.movable_obstacles = 3;
    spec.env.shift_region = {3.0, 1.0, 8.0, 5.0};
    spec.env.move_distance = 2.0;
    spec.window_length = 5;
    spec.windows_per_domain = 600;
    spec.trajectories_per_domain = 3;
    spec.source_test_windows = 200;
    spec.seed = 21;
    return spec;
}

inline const abrnet::datagen::DomainPair& tiny_pair() {
    static const abrnet::datagen::DomainPair pair =
        abrnet::datagen::make_domain_pair(tiny_pair_spec());
    return pair;
}

inline abrnet::models::ModelConfig tiny_model_config() {
    const auto spec = tiny_pair_spec();
    abrnet::models::ModelConfig cfg;
    cfg.input_kind = abrnet::models::InputKind::Sequence;
    cfg.window_length = spec.window_length;
    cfg.signal_dim = spec.env.signal_dim();
    cfg.feature_dim = 16;
    cfg.condition_dim = 8;
    cfg.discriminator_hidden = 8;
    cfg.label_extents = spec.env.extents;
    return cfg;
}

inline abrnet::trainer::TrainConfig tiny_train_config(std::uint64_t seed = 0) {
    abrnet::trainer::TrainConfig cfg;
    cfg.batch_size = 24;
    cfg.iterations = 12;
    cfg.eval_every = 6;
    cfg.seed = seed;
    cfg.eval_sample_cap = 128;
    return cfg;
}

} // namespace testdata
