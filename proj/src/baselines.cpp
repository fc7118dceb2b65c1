#include "abrnet/baselines.hpp"

#include <cmath>

#include "abrnet/losses.hpp"

namespace abrnet::baselines {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using models::Group;
using models::Head;
using models::ModelBundle;
using trainer::Batch;
using trainer::TrainConfig;

Method method_from_string(const std::string& name) {
    if (name == "source_only") return Method::SourceOnly;
    if (name == "dann_lite") return Method::DannLite;
    if (name == "mcd_lite") return Method::McdLite;
    if (name == "abrnet") return Method::Abrnet;
    if (name == "abrnet_wo_cbrd") return Method::AbrnetWoCbrd;
    if (name == "abrnet_wo_dadg") return Method::AbrnetWoDadg;
    throw ConfigError("unknown method '" + name + "'");
}

const char* to_string(Method m) {
    switch (m) {
        case Method::SourceOnly: return "source_only";
        case Method::DannLite: return "dann_lite";
        case Method::McdLite: return "mcd_lite";
        case Method::Abrnet: return "abrnet";
        case Method::AbrnetWoCbrd: return "abrnet_wo_cbrd";
        case Method::AbrnetWoDadg: return "abrnet_wo_dadg";
    }
    return "?";
}

trainer::TrainPlan plan_for(Method m) {
    trainer::TrainPlan plan; // full three-step configuration
    switch (m) {
        case Method::Abrnet:
            break;
        case Method::SourceOnly:
            plan.run_step2 = false;
            plan.run_step3 = false;
            break;
        case Method::AbrnetWoCbrd:
            // Keep mixing + discriminator, drop the discrepancy machinery.
            plan.run_step2 = false;
            plan.step3.use_similarity = false;
            break;
        case Method::AbrnetWoDadg:
            // Keep the discrepancy game, drop mixing + discriminator.
            plan.step3.update_discriminator = false;
            plan.step3.use_adversarial = false;
            break;
        case Method::McdLite:
            // Same skeleton, disagreement measured on raw predictions,
            // no intermediate domains and no discriminator.
            plan.discrepancy = trainer::DiscrepancyKind::NegL1;
            plan.step3.update_discriminator = false;
            plan.step3.use_adversarial = false;
            break;
        case Method::DannLite:
            throw ContractViolation("dann_lite does not run on the three-step plan");
    }
    return plan;
}

eval::EvalHead default_eval_head(Method m) {
    return m == Method::DannLite ? eval::EvalHead::Hat : eval::EvalHead::Mean;
}

namespace {

/// Feature-level adversarial baseline: a single regressor head trained on
/// source supervision, a domain discriminator on raw (unmixed) features, and
/// alternating D / F updates with the same sign convention as the main
/// trainer (D minimizes -L_adv, F minimizes +L_adv).
trainer::TrainResult run_dann_lite(const models::ModelConfig& model_config,
                                   const TrainConfig& config,
                                   const datagen::DomainDataset& source,
                                   const datagen::DomainDataset& target,
                                   const datagen::DomainDataset* eval_target,
                                   const trainer::StepObserver& observer) {
    models::ModelConfig cfg = model_config;
    cfg.discriminator_conditional = false;
    cfg.validate();
    config.validate();

    trainer::TrainResult result{models::build_models(cfg, Rng::derive(config.seed, "init")),
                                {}};
    opt::Settings main_settings;
    main_settings.kind = config.optimizer;
    main_settings.lr = config.lr_main;
    main_settings.momentum = config.momentum;
    opt::Optimizer optimizer = opt::make_optimizer(main_settings, config.lr_discriminator);
    Rng batch_rng(Rng::derive(config.seed, "batches"));

    const MatrixXd empty_coords(0, 0);
    for (long iter = 0; iter < config.iterations; ++iter) {
        const Batch source_batch =
            trainer::sample_batch(source, config.batch_size, batch_rng, true);
        const Batch target_batch =
            trainer::sample_batch(target, config.batch_size, batch_rng, false);
        if (observer) observer(iter, 0, result.bundle);

        trainer::IterationRecord record;
        record.iteration = iter;

        // Supervised step, hat head only.
        {
            result.bundle.zero_all_grads();
            models::EncoderCache enc;
            const MatrixXd feats =
                models::encoder_forward(result.bundle, source_batch.x, &enc);
            models::RegressorHead::Cache head_cache;
            const auto out = models::head_forward(result.bundle, Head::Hat, feats,
                                                  &head_cache);
            const MatrixXd res = out.l - source_batch.labels;
            const double inv_n = 1.0 / static_cast<double>(res.size());
            record.loss_r = res.array().square().sum() * inv_n;
            MatrixXd d_l = 2.0 * inv_n * res;
            const MatrixXd d_feat =
                models::head_backward(result.bundle, Head::Hat, head_cache, nullptr, &d_l);
            models::encoder_backward(result.bundle, source_batch.x, enc, d_feat);
            optimizer.apply(result.bundle, Group::F);
            optimizer.apply(result.bundle, Group::GHat);
            optimizer.apply(result.bundle, Group::RHat);
            if (observer) observer(iter, 1, result.bundle);
        }

        // Discriminator ascent on raw domain features.
        {
            result.bundle.zero_all_grads();
            const MatrixXd f_s = models::encoder_forward(result.bundle, source_batch.x,
                                                         nullptr);
            const MatrixXd f_t = models::encoder_forward(result.bundle, target_batch.x,
                                                         nullptr);
            models::Discriminator::Cache ds, dt;
            const VectorXd p_s = models::disc_forward(result.bundle, f_s, empty_coords, &ds);
            const VectorXd p_t = models::disc_forward(result.bundle, f_t, empty_coords, &dt);
            VectorXd g_s, g_t;
            record.loss_adv = losses::adversarial_loss(p_s, p_t, &g_s, &g_t);
            models::disc_backward(result.bundle, ds, -g_s, nullptr, nullptr);
            models::disc_backward(result.bundle, dt, -g_t, nullptr, nullptr);
            optimizer.apply(result.bundle, Group::D);
            if (observer) observer(iter, 2, result.bundle);
        }

        // Feature-generator descent of w_adv * L_adv.
        if (config.w_adv > 0.0) {
            result.bundle.zero_all_grads();
            models::EncoderCache enc_s, enc_t;
            const MatrixXd f_s =
                models::encoder_forward(result.bundle, source_batch.x, &enc_s);
            const MatrixXd f_t =
                models::encoder_forward(result.bundle, target_batch.x, &enc_t);
            models::Discriminator::Cache ds, dt;
            const VectorXd p_s = models::disc_forward(result.bundle, f_s, empty_coords, &ds);
            const VectorXd p_t = models::disc_forward(result.bundle, f_t, empty_coords, &dt);
            VectorXd g_s, g_t;
            record.loss_adv = losses::adversarial_loss(p_s, p_t, &g_s, &g_t);
            MatrixXd d_f_s, d_f_t;
            models::disc_backward(result.bundle, ds, config.w_adv * g_s, &d_f_s, nullptr);
            models::disc_backward(result.bundle, dt, config.w_adv * g_t, &d_f_t, nullptr);
            models::encoder_backward(result.bundle, source_batch.x, enc_s, d_f_s);
            models::encoder_backward(result.bundle, target_batch.x, enc_t, d_f_t);
            optimizer.apply(result.bundle, Group::F);
        }
        if (observer) observer(iter, 3, result.bundle);

        if (!std::isfinite(record.loss_r) || !std::isfinite(record.loss_adv)) {
            throw NumericError("non-finite loss in dann_lite at iteration " +
                               std::to_string(iter));
        }

        const bool at_eval =
            (iter + 1) % config.eval_every == 0 || iter + 1 == config.iterations;
        if (at_eval) {
            if (eval_target) {
                const Eigen::Index cap =
                    std::min<Eigen::Index>(eval_target->size(), config.eval_sample_cap);
                const MatrixXd pred = eval::predict(
                    result.bundle, eval_target->windows().topRows(cap), eval::EvalHead::Hat);
                const MatrixXd res = pred - eval_target->labels_for_eval().topRows(cap);
                record.eval_mse = res.array().square().mean();
                record.eval_mae = res.array().abs().mean();
            }
            result.history.checkpoints.push_back(
                trainer::ChecksumRecord{iter, result.bundle.checksums()});
        }
        result.history.records.push_back(record);
    }
    return result;
}

} // namespace

trainer::TrainResult run_method(Method m, const models::ModelConfig& model_config,
                                const trainer::TrainConfig& train_config,
                                const datagen::DomainDataset& source,
                                const datagen::DomainDataset& target,
                                const datagen::DomainDataset* eval_target,
                                const trainer::StepObserver& observer) {
    if (m == Method::DannLite) {
        return run_dann_lite(model_config, train_config, source, target, eval_target,
                             observer);
    }
    return trainer::train(model_config, train_config, plan_for(m), source, target,
                          eval_target, observer);
}

} // namespace abrnet::baselines
