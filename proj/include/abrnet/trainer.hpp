#pragma once

#include <array>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "abrnet/augment.hpp"
#include "abrnet/datagen.hpp"
#include "abrnet/models.hpp"
#include "abrnet/optimizer.hpp"

namespace abrnet::trainer {

using models::ModelBundle;

struct TrainConfig {
    double lambda = 0.7;          // intermediate-domain mixing ratio
    double lr_main = 1e-3;
    double lr_discriminator = 1e-3;
    int batch_size = 128;
    long iterations = 3000;
    int eval_every = 500;         // history eval + checksum snapshot cadence
    std::uint64_t seed = 0;
    double w_s = 1.0;             // weight of the similarity term
    double w_adv = 1.0;           // weight of the adversarial term
    opt::Kind optimizer = opt::Kind::Adam;
    double momentum = 0.95;       // SgdMomentum only
    long eval_sample_cap = 4096;  // in-training eval subset size

    void validate() const;
};

/// How the two regressor heads' disagreement is measured. Minimizing the term
/// always means increasing agreement; the conditional soft similarity is the
/// default, the negative L1 prediction gap is the reduced variant used by the
/// discrepancy baseline.
enum class DiscrepancyKind { SoftSimilarity, NegL1 };

struct Step3Options {
    bool update_discriminator = true; // sub-step (a)
    bool use_adversarial = true;      // w_adv * L_adv term of the F update
    bool use_similarity = true;       // -w_s * L_s term of the F update
};

/// Which parts of the three-step loop a method runs. The full method runs
/// everything; ablations and reduced baselines switch parts off.
struct TrainPlan {
    bool run_step1 = true;
    bool run_step2 = true;
    bool run_step3 = true;
    Step3Options step3;
    DiscrepancyKind discrepancy = DiscrepancyKind::SoftSimilarity;
};

struct Batch {
    Eigen::MatrixXd x;
    Eigen::MatrixXd labels; // empty when unlabeled
    bool has_labels() const { return labels.rows() > 0; }
};

/// Deterministic with-replacement sample. with_labels routes through the
/// dataset's training-label accessor, so an evaluation-only dataset refuses.
Batch sample_batch(const datagen::DomainDataset& dataset, int batch_size, Rng& rng,
                   bool with_labels);

struct StepLosses {
    double loss_r = std::numeric_limits<double>::quiet_NaN();
    double loss_s = std::numeric_limits<double>::quiet_NaN();
    double loss_adv = std::numeric_limits<double>::quiet_NaN();
};

/// Step 1: supervised descent of L_r on a labeled source batch; updates
/// {F, G_hat, R_hat, G_tilde, R_tilde}, never D.
StepLosses step1(ModelBundle& bundle, opt::Optimizer& optimizer, const Batch& source,
                 const TrainConfig& config);

/// Step 2: descent of L_r(source) + w_s * L_s(target) over the four head
/// groups with F and D frozen. Minimizing L_s maximizes head disagreement.
StepLosses step2(ModelBundle& bundle, opt::Optimizer& optimizer, const Batch& source,
                 const Batch& target, const TrainConfig& config,
                 DiscrepancyKind kind = DiscrepancyKind::SoftSimilarity);

/// Step 3: (a) discriminator ascent of L_adv on the two mixed intermediate
/// batches (source-similar through the hat head, target-similar through
/// tilde), then (b) feature-generator descent of w_adv * L_adv - w_s * L_s
/// with L_s recomputed on the unmixed target batch. Heads stay frozen
/// throughout; mix_rng drives the pairing.
StepLosses step3(ModelBundle& bundle, opt::Optimizer& optimizer, const Batch& source,
                 const Batch& target, const TrainConfig& config, Rng& mix_rng,
                 const Step3Options& options = {},
                 DiscrepancyKind kind = DiscrepancyKind::SoftSimilarity);

struct IterationRecord {
    long iteration = 0;
    double loss_r = std::numeric_limits<double>::quiet_NaN();
    double loss_s = std::numeric_limits<double>::quiet_NaN();
    double loss_adv = std::numeric_limits<double>::quiet_NaN();
    double eval_mse = std::numeric_limits<double>::quiet_NaN();
    double eval_mae = std::numeric_limits<double>::quiet_NaN();
};

struct ChecksumRecord {
    long iteration = 0;
    std::array<std::uint64_t, 6> checksums{};
};

struct TrainHistory {
    std::vector<IterationRecord> records;
    std::vector<ChecksumRecord> checkpoints;
};

/// history CSV: iteration,loss_r,loss_s,loss_adv,eval_mse,eval_mae with
/// full-precision doubles; byte-identical across reruns of the same config.
void save_history_csv(const TrainHistory& history, const std::string& path);
TrainHistory load_history_csv(const std::string& path);

/// Called after every executed step with (iteration, step index 1..3); step
/// index 0 fires once per iteration before step 1. Used by the freeze
/// contract tests to snapshot group checksums around each step.
using StepObserver =
    std::function<void(long iteration, int step, const ModelBundle& bundle)>;

struct TrainResult {
    ModelBundle bundle;
    TrainHistory history;
};

/// The full alternating loop: fresh batches per iteration, steps 1 -> 2 -> 3,
/// per-iteration records, eval + checksum snapshots every eval_every
/// iterations. eval_target (labels used via the eval-only accessor) may be
/// null to skip metric columns. Throws NumericError naming the step and
/// iteration on a non-finite loss.
TrainResult train(const models::ModelConfig& model_config, const TrainConfig& config,
                  const TrainPlan& plan, const datagen::DomainDataset& source,
                  const datagen::DomainDataset& target,
                  const datagen::DomainDataset* eval_target = nullptr,
                  const StepObserver& observer = {});

/// Single-archive checkpoint: config record, per-group parameter blobs with
/// checksums, training history. Round-trips bitwise.
void save_checkpoint(const ModelBundle& bundle, const TrainHistory& history,
                     const std::string& path);

struct Checkpoint {
    ModelBundle bundle;
    TrainHistory history;
};

/// expected_config, when given, must match the stored config exactly
/// (configuration-mismatch error otherwise). Corrupt or truncated files raise
/// ParseError.
Checkpoint load_checkpoint(const std::string& path,
                           const models::ModelConfig* expected_config = nullptr);

} // namespace abrnet::trainer
