#include "abrnet/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "abrnet/config.hpp"
#include "abrnet/losses.hpp"

namespace abrnet::trainer {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using models::Group;
using models::Head;

void TrainConfig::validate() const {
    if (!(lambda > 0.5 && lambda <= 1.0)) {
        throw ConfigError("TrainConfig: lambda must be in (0.5, 1]");
    }
    if (!(lr_main > 0.0) || !(lr_discriminator > 0.0)) {
        throw ConfigError("TrainConfig: learning rates must be > 0");
    }
    if (batch_size < 1 || eval_every < 1 || eval_sample_cap < 1) {
        throw ConfigError("TrainConfig: counts must be >= 1");
    }
    if (iterations < 0) {
        throw ConfigError("TrainConfig: iterations must be >= 0");
    }
    if (w_s < 0.0 || w_adv < 0.0) {
        throw ConfigError("TrainConfig: loss weights must be >= 0");
    }
    if (momentum < 0.0 || momentum >= 1.0) {
        throw ConfigError("TrainConfig: momentum must lie in [0, 1)");
    }
}

Batch sample_batch(const datagen::DomainDataset& dataset, int batch_size, Rng& rng,
                   bool with_labels) {
    if (dataset.size() < 1) throw ContractViolation("sample_batch: empty dataset");
    Batch batch;
    batch.x.resize(batch_size, dataset.windows().cols());
    const MatrixXd* labels = nullptr;
    if (with_labels) {
        labels = &dataset.labels_for_training();
        batch.labels.resize(batch_size, labels->cols());
    }
    for (int i = 0; i < batch_size; ++i) {
        const auto row =
            static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(dataset.size())));
        batch.x.row(i) = dataset.windows().row(row);
        if (labels) batch.labels.row(i) = labels->row(row);
    }
    return batch;
}

namespace {

/// Gradient of the head-disagreement term evaluated on the two regressor
/// outputs. For the soft similarity the gradients live on h; for the
/// negative-L1 variant they live on the raw predictions.
struct SimilarityTerm {
    double value = 0.0;
    MatrixXd d_h_hat, d_h_tilde; // empty unless soft similarity
    MatrixXd d_l_hat, d_l_tilde; // empty unless negative L1
};

SimilarityTerm similarity_term(DiscrepancyKind kind, const models::RegressorResult& hat,
                               const models::RegressorResult& tilde) {
    SimilarityTerm term;
    if (kind == DiscrepancyKind::SoftSimilarity) {
        term.value = losses::soft_similarity(hat.h, tilde.h, &term.d_h_hat, &term.d_h_tilde);
    } else {
        // L_s = -mean |l_hat - l_tilde|: minimizing it still maximizes
        // disagreement, matching the soft-similarity sign convention.
        const MatrixXd diff = hat.l - tilde.l;
        const double inv_n = 1.0 / static_cast<double>(diff.size());
        term.value = -diff.array().abs().mean();
        term.d_l_hat = -inv_n * diff.array().sign().matrix();
        term.d_l_tilde = -term.d_l_hat;
    }
    return term;
}

/// d(coords01)/d(l) for coords01 = clamp01(l ./ extents), evaluated from the
/// pre-clamp scaled values recorded in the head cache.
MatrixXd through_coord_normalize(const MatrixXd& d_coords01,
                                 const models::RegressorHead::Cache& cache,
                                 const VectorXd& extents) {
    const MatrixXd inside =
        (cache.scaled.array() > 0.0 && cache.scaled.array() < 1.0).cast<double>();
    return (d_coords01.array() * inside.array())
        .rowwise() / extents.transpose().array();
}

void require_labels(const Batch& batch, const char* step) {
    if (!batch.has_labels()) {
        throw ContractViolation(std::string(step) + ": source batch has no labels");
    }
}

} // namespace

StepLosses step1(ModelBundle& bundle, opt::Optimizer& optimizer, const Batch& source,
                 const TrainConfig&) {
    require_labels(source, "step1");
    bundle.zero_all_grads();

    models::EncoderCache enc_cache;
    const MatrixXd features = models::encoder_forward(bundle, source.x, &enc_cache);
    models::RegressorHead::Cache hat_cache, tilde_cache;
    const auto hat = models::head_forward(bundle, Head::Hat, features, &hat_cache);
    const auto tilde = models::head_forward(bundle, Head::Tilde, features, &tilde_cache);

    MatrixXd d_hat, d_tilde;
    StepLosses out;
    out.loss_r = losses::regression_loss(hat.l, tilde.l, source.labels, &d_hat, &d_tilde);

    MatrixXd d_features = models::head_backward(bundle, Head::Hat, hat_cache, nullptr, &d_hat);
    d_features += models::head_backward(bundle, Head::Tilde, tilde_cache, nullptr, &d_tilde);
    models::encoder_backward(bundle, source.x, enc_cache, d_features);

    optimizer.apply(bundle, Group::F);
    optimizer.apply(bundle, Group::GHat);
    optimizer.apply(bundle, Group::RHat);
    optimizer.apply(bundle, Group::GTilde);
    optimizer.apply(bundle, Group::RTilde);
    return out;
}

StepLosses step2(ModelBundle& bundle, opt::Optimizer& optimizer, const Batch& source,
                 const Batch& target, const TrainConfig& config, DiscrepancyKind kind) {
    require_labels(source, "step2");
    bundle.zero_all_grads();

    // F is frozen here: plain forwards, no encoder caches.
    const MatrixXd f_source = models::encoder_forward(bundle, source.x, nullptr);
    const MatrixXd f_target = models::encoder_forward(bundle, target.x, nullptr);

    models::RegressorHead::Cache s_hat_c, s_tilde_c, t_hat_c, t_tilde_c;
    const auto s_hat = models::head_forward(bundle, Head::Hat, f_source, &s_hat_c);
    const auto s_tilde = models::head_forward(bundle, Head::Tilde, f_source, &s_tilde_c);
    const auto t_hat = models::head_forward(bundle, Head::Hat, f_target, &t_hat_c);
    const auto t_tilde = models::head_forward(bundle, Head::Tilde, f_target, &t_tilde_c);

    StepLosses out;
    MatrixXd d_s_hat, d_s_tilde;
    out.loss_r =
        losses::regression_loss(s_hat.l, s_tilde.l, source.labels, &d_s_hat, &d_s_tilde);
    SimilarityTerm sim = similarity_term(kind, t_hat, t_tilde);
    out.loss_s = sim.value;

    models::head_backward(bundle, Head::Hat, s_hat_c, nullptr, &d_s_hat);
    models::head_backward(bundle, Head::Tilde, s_tilde_c, nullptr, &d_s_tilde);
    // The similarity term enters as + w_s * L_s.
    if (sim.d_h_hat.size() > 0) {
        MatrixXd dh = config.w_s * sim.d_h_hat;
        MatrixXd dt = config.w_s * sim.d_h_tilde;
        models::head_backward(bundle, Head::Hat, t_hat_c, &dh, nullptr);
        models::head_backward(bundle, Head::Tilde, t_tilde_c, &dt, nullptr);
    } else {
        MatrixXd dh = config.w_s * sim.d_l_hat;
        MatrixXd dt = config.w_s * sim.d_l_tilde;
        models::head_backward(bundle, Head::Hat, t_hat_c, nullptr, &dh);
        models::head_backward(bundle, Head::Tilde, t_tilde_c, nullptr, &dt);
    }

    optimizer.apply(bundle, Group::GHat);
    optimizer.apply(bundle, Group::RHat);
    optimizer.apply(bundle, Group::GTilde);
    optimizer.apply(bundle, Group::RTilde);
    return out;
}

StepLosses step3(ModelBundle& bundle, opt::Optimizer& optimizer, const Batch& source,
                 const Batch& target, const TrainConfig& config, Rng& mix_rng,
                 const Step3Options& options, DiscrepancyKind kind) {
    StepLosses out;
    const VectorXd& extents = bundle.config.label_extents;

    // Mixed-domain plumbing is only spun up when the adversarial term plays.
    augment::MixedBatchPair mixed;
    models::EncoderCache enc_s, enc_t;
    models::RegressorHead::Cache head_s, head_t;
    MatrixXd f_mix_s, f_mix_t, coords_s, coords_t;
    models::RegressorResult out_s, out_t;
    if (options.use_adversarial || options.update_discriminator) {
        mixed = augment::mix_domains(source.x, target.x, config.lambda, mix_rng);
        f_mix_s = models::encoder_forward(bundle, mixed.x_source_similar, &enc_s);
        f_mix_t = models::encoder_forward(bundle, mixed.x_target_similar, &enc_t);
        // Source-similar samples flow through the hat head, target-similar
        // through tilde.
        out_s = models::head_forward(bundle, Head::Hat, f_mix_s, &head_s);
        out_t = models::head_forward(bundle, Head::Tilde, f_mix_t, &head_t);
        coords_s = models::normalize_coords(out_s.l, extents);
        coords_t = models::normalize_coords(out_t.l, extents);
    }

    // (a) Discriminator ascent: minimize -L_adv over D only.
    if (options.update_discriminator) {
        bundle.zero_all_grads();
        models::Discriminator::Cache disc_s, disc_t;
        const VectorXd p_s = models::disc_forward(bundle, f_mix_s, coords_s, &disc_s);
        const VectorXd p_t = models::disc_forward(bundle, f_mix_t, coords_t, &disc_t);
        VectorXd g_s, g_t;
        out.loss_adv = losses::adversarial_loss(p_s, p_t, &g_s, &g_t);
        models::disc_backward(bundle, disc_s, -g_s, nullptr, nullptr);
        models::disc_backward(bundle, disc_t, -g_t, nullptr, nullptr);
        optimizer.apply(bundle, Group::D);
    }

    // (b) Feature-generator descent of w_adv * L_adv - w_s * L_s.
    bundle.zero_all_grads();
    if (options.use_adversarial) {
        // D may just have moved, so its response is recomputed; the encoder
        // and head activations are still valid (their parameters are frozen
        // within this step).
        models::Discriminator::Cache disc_s, disc_t;
        const VectorXd p_s = models::disc_forward(bundle, f_mix_s, coords_s, &disc_s);
        const VectorXd p_t = models::disc_forward(bundle, f_mix_t, coords_t, &disc_t);
        VectorXd g_s, g_t;
        out.loss_adv = losses::adversarial_loss(p_s, p_t, &g_s, &g_t);

        MatrixXd d_feat_s, d_coords_s, d_feat_t, d_coords_t;
        models::disc_backward(bundle, disc_s, config.w_adv * g_s, &d_feat_s, &d_coords_s);
        models::disc_backward(bundle, disc_t, config.w_adv * g_t, &d_feat_t, &d_coords_t);

        // Gradients reach F both directly through the features and through
        // the (frozen) regressor prediction fed to D.
        MatrixXd d_l_s = through_coord_normalize(d_coords_s, head_s, extents);
        MatrixXd d_l_t = through_coord_normalize(d_coords_t, head_t, extents);
        d_feat_s += models::head_backward(bundle, Head::Hat, head_s, nullptr, &d_l_s);
        d_feat_t += models::head_backward(bundle, Head::Tilde, head_t, nullptr, &d_l_t);
        models::encoder_backward(bundle, mixed.x_source_similar, enc_s, d_feat_s);
        models::encoder_backward(bundle, mixed.x_target_similar, enc_t, d_feat_t);
    }
    if (options.use_similarity) {
        // L_s is recomputed on the unmixed target batch through both heads.
        models::EncoderCache enc_target;
        const MatrixXd f_target = models::encoder_forward(bundle, target.x, &enc_target);
        models::RegressorHead::Cache hat_c, tilde_c;
        const auto t_hat = models::head_forward(bundle, Head::Hat, f_target, &hat_c);
        const auto t_tilde = models::head_forward(bundle, Head::Tilde, f_target, &tilde_c);
        SimilarityTerm sim = similarity_term(kind, t_hat, t_tilde);
        out.loss_s = sim.value;

        MatrixXd d_features;
        if (sim.d_h_hat.size() > 0) {
            MatrixXd dh = -config.w_s * sim.d_h_hat;
            MatrixXd dt = -config.w_s * sim.d_h_tilde;
            d_features = models::head_backward(bundle, Head::Hat, hat_c, &dh, nullptr);
            d_features +=
                models::head_backward(bundle, Head::Tilde, tilde_c, &dt, nullptr);
        } else {
            MatrixXd dh = -config.w_s * sim.d_l_hat;
            MatrixXd dt = -config.w_s * sim.d_l_tilde;
            d_features = models::head_backward(bundle, Head::Hat, hat_c, nullptr, &dh);
            d_features +=
                models::head_backward(bundle, Head::Tilde, tilde_c, nullptr, &dt);
        }
        models::encoder_backward(bundle, target.x, enc_target, d_features);
    }
    if (options.use_adversarial || options.use_similarity) {
        optimizer.apply(bundle, Group::F);
    }
    return out;
}

namespace {

/// Mean-head metrics on a row range, used for the in-training eval column.
std::pair<double, double> quick_metrics(const ModelBundle& bundle, const MatrixXd& windows,
                                        const MatrixXd& labels, long cap) {
    const Eigen::Index n = std::min<Eigen::Index>(windows.rows(), cap);
    const Eigen::Index chunk = 512;
    double se = 0.0, ae = 0.0;
    for (Eigen::Index start = 0; start < n; start += chunk) {
        const Eigen::Index len = std::min(chunk, n - start);
        const MatrixXd feats =
            models::extract_features(bundle, windows.middleRows(start, len));
        const MatrixXd pred =
            0.5 * (models::forward_regressor(bundle, Head::Hat, feats).l +
                   models::forward_regressor(bundle, Head::Tilde, feats).l);
        const MatrixXd res = pred - labels.middleRows(start, len);
        se += res.array().square().sum();
        ae += res.array().abs().sum();
    }
    const double denom = static_cast<double>(n) * labels.cols();
    return {se / denom, ae / denom};
}

void check_executed_finite(double value, const char* name, int step, long iteration) {
    if (!std::isfinite(value)) {
        throw NumericError("non-finite " + std::string(name) + " in step " +
                           std::to_string(step) + " at iteration " +
                           std::to_string(iteration));
    }
}

} // namespace

TrainResult train(const models::ModelConfig& model_config, const TrainConfig& config,
                  const TrainPlan& plan, const datagen::DomainDataset& source,
                  const datagen::DomainDataset& target,
                  const datagen::DomainDataset* eval_target, const StepObserver& observer) {
    model_config.validate();
    config.validate();
    if (source.size() < 1 || target.size() < 1) {
        throw ContractViolation("train: datasets must be nonempty");
    }
    if (source.windows().cols() != model_config.input_dim() ||
        target.windows().cols() != model_config.input_dim()) {
        throw ContractViolation("train: dataset input width does not match model config");
    }

    TrainResult result{models::build_models(model_config, Rng::derive(config.seed, "init")),
                       {}};
    opt::Settings main_settings;
    main_settings.kind = config.optimizer;
    main_settings.lr = config.lr_main;
    main_settings.momentum = config.momentum;
    opt::Optimizer optimizer = opt::make_optimizer(main_settings, config.lr_discriminator);

    Rng batch_rng(Rng::derive(config.seed, "batches"));
    Rng mix_rng(Rng::derive(config.seed, "mixing"));

    for (long iter = 0; iter < config.iterations; ++iter) {
        const Batch source_batch = sample_batch(source, config.batch_size, batch_rng, true);
        const Batch target_batch = sample_batch(target, config.batch_size, batch_rng, false);

        if (observer) observer(iter, 0, result.bundle);
        IterationRecord record;
        record.iteration = iter;
        if (plan.run_step1) {
            const StepLosses s1 = step1(result.bundle, optimizer, source_batch, config);
            check_executed_finite(s1.loss_r, "L_r", 1, iter);
            record.loss_r = s1.loss_r;
            if (observer) observer(iter, 1, result.bundle);
        }
        if (plan.run_step2) {
            const StepLosses s2 = step2(result.bundle, optimizer, source_batch,
                                        target_batch, config, plan.discrepancy);
            check_executed_finite(s2.loss_r, "L_r", 2, iter);
            check_executed_finite(s2.loss_s, "L_s", 2, iter);
            record.loss_s = s2.loss_s;
            if (observer) observer(iter, 2, result.bundle);
        }
        if (plan.run_step3) {
            const StepLosses s3 = step3(result.bundle, optimizer, source_batch,
                                        target_batch, config, mix_rng, plan.step3,
                                        plan.discrepancy);
            if (plan.step3.use_adversarial || plan.step3.update_discriminator) {
                check_executed_finite(s3.loss_adv, "L_adv", 3, iter);
                record.loss_adv = s3.loss_adv;
            }
            if (plan.step3.use_similarity) {
                check_executed_finite(s3.loss_s, "L_s", 3, iter);
                if (!plan.run_step2) record.loss_s = s3.loss_s;
            }
            if (observer) observer(iter, 3, result.bundle);
        }

        const bool at_eval =
            (iter + 1) % config.eval_every == 0 || iter + 1 == config.iterations;
        if (at_eval) {
            if (eval_target) {
                const auto [mse, mae] =
                    quick_metrics(result.bundle, eval_target->windows(),
                                  eval_target->labels_for_eval(), config.eval_sample_cap);
                record.eval_mse = mse;
                record.eval_mae = mae;
            }
            result.history.checkpoints.push_back(
                ChecksumRecord{iter, result.bundle.checksums()});
        }
        result.history.records.push_back(record);
    }
    return result;
}

// ---------------------------------------------------------------------------
// History CSV

void save_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "iteration,loss_r,loss_s,loss_adv,eval_mse,eval_mae\n";
    out << std::setprecision(17);
    auto cell = [&](double v) {
        if (std::isnan(v)) return std::string();
        std::ostringstream s;
        s << std::setprecision(17) << v;
        return s.str();
    };
    for (const IterationRecord& r : history.records) {
        out << r.iteration << ',' << cell(r.loss_r) << ',' << cell(r.loss_s) << ','
            << cell(r.loss_adv) << ',' << cell(r.eval_mse) << ',' << cell(r.eval_mae)
            << '\n';
    }
    if (!out) throw IoError("failed writing history to '" + path + "'");
}

TrainHistory load_history_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open history '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("history '" + path + "' is empty");
    if (line != "iteration,loss_r,loss_s,loss_adv,eval_mse,eval_mae") {
        throw ParseError("history '" + path + "': unexpected header");
    }
    TrainHistory history;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        IterationRecord r;
        auto next = [&]() -> std::string {
            if (!std::getline(row, field, ',')) field.clear();
            return field;
        };
        try {
            r.iteration = std::stol(next());
        } catch (const std::exception&) {
            throw ParseError("history '" + path + "': bad iteration field");
        }
        auto parse = [&](const std::string& s) {
            return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
        };
        r.loss_r = parse(next());
        r.loss_s = parse(next());
        r.loss_adv = parse(next());
        r.eval_mse = parse(next());
        r.eval_mae = parse(next());
        history.records.push_back(r);
    }
    return history;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCkptMagic[4] = {'A', 'B', 'R', 'C'};
constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const char* what) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw ParseError(std::string("checkpoint truncated reading ") + what);
    return value;
}

} // namespace

void save_checkpoint(const ModelBundle& bundle, const TrainHistory& history,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(kCkptMagic, 4);
    write_pod(out, kCkptVersion);
    const std::string config_json = config::to_json(bundle.config).dump();
    write_pod<std::uint64_t>(out, config_json.size());
    out.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));

    auto& mutable_bundle = const_cast<ModelBundle&>(bundle);
    for (Group g : models::kAllGroups) {
        const nn::ParamRefs params = mutable_bundle.group(g);
        write_pod<std::uint64_t>(out, params.size());
        for (const nn::Tensor* t : params) {
            write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t->value.rows()));
            write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t->value.cols()));
            out.write(reinterpret_cast<const char*>(t->value.data()),
                      static_cast<std::streamsize>(sizeof(double) * t->value.size()));
        }
        write_pod<std::uint64_t>(out, nn::checksum(params));
    }

    write_pod<std::uint64_t>(out, history.records.size());
    for (const IterationRecord& r : history.records) {
        write_pod<std::int64_t>(out, r.iteration);
        write_pod(out, r.loss_r);
        write_pod(out, r.loss_s);
        write_pod(out, r.loss_adv);
        write_pod(out, r.eval_mse);
        write_pod(out, r.eval_mae);
    }
    write_pod<std::uint64_t>(out, history.checkpoints.size());
    for (const ChecksumRecord& c : history.checkpoints) {
        write_pod<std::int64_t>(out, c.iteration);
        for (std::uint64_t h : c.checksums) write_pod(out, h);
    }
    if (!out) throw IoError("failed writing checkpoint to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path,
                           const models::ModelConfig* expected_config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCkptMagic, 4) != 0) {
        throw ParseError("'" + path + "' is not a checkpoint file (bad magic)");
    }
    const auto version = read_pod<std::uint32_t>(in, "version");
    if (version != kCkptVersion) {
        throw ParseError("checkpoint '" + path + "': unsupported format version " +
                         std::to_string(version));
    }
    const auto config_len = read_pod<std::uint64_t>(in, "config length");
    if (config_len > (1ULL << 20)) {
        throw ParseError("checkpoint '" + path + "': implausible config length");
    }
    std::string config_json(config_len, '\0');
    in.read(config_json.data(), static_cast<std::streamsize>(config_len));
    if (!in) throw ParseError("checkpoint truncated reading config");
    models::ModelConfig stored;
    try {
        stored = config::model_config_from_json(config::json::parse(config_json),
                                                "checkpoint.config");
    } catch (const config::json::parse_error& e) {
        throw ParseError("checkpoint '" + path + "': config block unparsable: " + e.what());
    }
    if (expected_config && !(stored == *expected_config)) {
        throw ConfigError("checkpoint '" + path +
                          "' was built with a different model configuration");
    }

    Checkpoint ckpt{models::build_models(stored, 0), {}};
    for (Group g : models::kAllGroups) {
        const nn::ParamRefs params = ckpt.bundle.group(g);
        const auto count = read_pod<std::uint64_t>(in, "tensor count");
        if (count != params.size()) {
            throw ParseError("checkpoint '" + path + "': group " +
                             models::group_name(g) + " has unexpected tensor count");
        }
        for (nn::Tensor* t : params) {
            const auto rows = read_pod<std::uint64_t>(in, "tensor rows");
            const auto cols = read_pod<std::uint64_t>(in, "tensor cols");
            if (rows != static_cast<std::uint64_t>(t->value.rows()) ||
                cols != static_cast<std::uint64_t>(t->value.cols())) {
                throw ParseError("checkpoint '" + path + "': tensor " + t->name +
                                 " has unexpected shape");
            }
            in.read(reinterpret_cast<char*>(t->value.data()),
                    static_cast<std::streamsize>(sizeof(double) * t->value.size()));
            if (!in) throw ParseError("checkpoint truncated reading " + t->name);
        }
        const auto stored_hash = read_pod<std::uint64_t>(in, "group checksum");
        if (stored_hash != nn::checksum(params)) {
            throw ParseError("checkpoint '" + path + "': group " +
                             models::group_name(g) + " checksum mismatch (corrupt file)");
        }
    }

    const auto n_records = read_pod<std::uint64_t>(in, "history size");
    if (n_records > (1ULL << 32)) {
        throw ParseError("checkpoint '" + path + "': implausible history size");
    }
    ckpt.history.records.resize(n_records);
    for (IterationRecord& r : ckpt.history.records) {
        r.iteration = read_pod<std::int64_t>(in, "record iteration");
        r.loss_r = read_pod<double>(in, "record loss");
        r.loss_s = read_pod<double>(in, "record loss");
        r.loss_adv = read_pod<double>(in, "record loss");
        r.eval_mse = read_pod<double>(in, "record metric");
        r.eval_mae = read_pod<double>(in, "record metric");
    }
    const auto n_checkpoints = read_pod<std::uint64_t>(in, "checkpoint list size");
    if (n_checkpoints > (1ULL << 32)) {
        throw ParseError("checkpoint '" + path + "': implausible checkpoint list");
    }
    ckpt.history.checkpoints.resize(n_checkpoints);
    for (ChecksumRecord& c : ckpt.history.checkpoints) {
        c.iteration = read_pod<std::int64_t>(in, "checkpoint iteration");
        for (std::uint64_t& h : c.checksums) {
            h = read_pod<std::uint64_t>(in, "checkpoint checksum");
        }
    }
    return ckpt;
}

} // namespace abrnet::trainer
