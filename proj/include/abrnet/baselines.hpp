#pragma once

#include <string>

#include "abrnet/eval.hpp"
#include "abrnet/trainer.hpp"

namespace abrnet::baselines {

/// The closed set of trainable methods: the full approach, the two lite
/// comparison baselines, the no-adaptation reference, and the two ablations.
enum class Method {
    SourceOnly,
    DannLite,
    McdLite,
    Abrnet,
    AbrnetWoCbrd,
    AbrnetWoDadg,
};

Method method_from_string(const std::string& name);
const char* to_string(Method m);

/// Step wiring for the methods that share the three-step skeleton.
/// (DannLite has its own loop and is not expressible as a plan.)
trainer::TrainPlan plan_for(Method m);

/// Which head evaluation defaults to: the single-regressor baseline trains
/// only the hat head, everything else averages both.
eval::EvalHead default_eval_head(Method m);

/// Trains the chosen method. All methods share the same data readers,
/// optimizer machinery, and history format, so their metrics are directly
/// comparable. The model config is adjusted where the method requires it
/// (feature-only discriminator for the adversarial-features baseline).
trainer::TrainResult run_method(Method m, const models::ModelConfig& model_config,
                                const trainer::TrainConfig& train_config,
                                const datagen::DomainDataset& source,
                                const datagen::DomainDataset& target,
                                const datagen::DomainDataset* eval_target = nullptr,
                                const trainer::StepObserver& observer = {});

} // namespace abrnet::baselines
