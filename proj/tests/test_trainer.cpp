#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "abrnet/losses.hpp"
#include "abrnet/trainer.hpp"
#include "test_data.hpp"

using namespace abrnet;
using namespace abrnet::trainer;
using models::Group;
using models::Head;
using models::ModelBundle;
using Eigen::MatrixXd;

namespace {

opt::Optimizer make_opt(double lr_main, double lr_disc,
                        opt::Kind kind = opt::Kind::Adam) {
    opt::Settings s;
    s.kind = kind;
    s.lr = lr_main;
    return opt::make_optimizer(s, lr_disc);
}

double eval_loss_r(const ModelBundle& bundle, const Batch& batch) {
    const MatrixXd f = models::extract_features(bundle, batch.x);
    const auto hat = models::forward_regressor(bundle, Head::Hat, f);
    const auto tilde = models::forward_regressor(bundle, Head::Tilde, f);
    return losses::regression_loss(hat.l, tilde.l, batch.labels);
}

double eval_loss_s(const ModelBundle& bundle, const Batch& target) {
    const MatrixXd f = models::extract_features(bundle, target.x);
    const auto hat = models::forward_regressor(bundle, Head::Hat, f);
    const auto tilde = models::forward_regressor(bundle, Head::Tilde, f);
    return losses::soft_similarity(hat.h, tilde.h);
}

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("sample_batch honors the label-access contract") {
    const auto& pair = testdata::tiny_pair();
    Rng rng(1);
    Batch labeled = sample_batch(pair.source_train, 8, rng, true);
    CHECK(labeled.has_labels());
    CHECK(labeled.x.rows() == 8);
    Batch unlabeled = sample_batch(pair.target, 8, rng, false);
    CHECK(!unlabeled.has_labels());
    // The adaptation path cannot read target labels.
    CHECK_THROWS_AS(sample_batch(pair.target, 8, rng, true), ContractViolation);
}

TEST_CASE("step1 descends L_r and never touches D") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    const TrainConfig cfg = testdata::tiny_train_config();

    int failures = 0;
    for (int seed = 0; seed < 20; ++seed) {
        ModelBundle bundle = models::build_models(mc, seed);
        opt::Optimizer optimizer = make_opt(1e-4, 1e-4);
        Rng rng(seed + 100);
        Batch batch = sample_batch(pair.source_train, 32, rng, true);
        const double before = eval_loss_r(bundle, batch);
        const auto d_before = bundle.group_checksum(Group::D);
        step1(bundle, optimizer, batch, cfg);
        const double after = eval_loss_r(bundle, batch);
        CHECK(bundle.group_checksum(Group::D) == d_before);
        if (!(after < before)) ++failures;
    }
    CHECK(failures <= 2);
}

TEST_CASE("step1 with zero learning rate changes nothing") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    ModelBundle bundle = models::build_models(mc, 3);
    const auto before = bundle.checksums();
    opt::Optimizer optimizer = make_opt(0.0, 0.0);
    Rng rng(5);
    Batch batch = sample_batch(pair.source_train, 16, rng, true);
    step1(bundle, optimizer, batch, testdata::tiny_train_config());
    CHECK(bundle.checksums() == before);
}

TEST_CASE("step1 requires labels") {
    const auto& pair = testdata::tiny_pair();
    ModelBundle bundle = models::build_models(testdata::tiny_model_config(), 0);
    opt::Optimizer optimizer = make_opt(1e-3, 1e-3);
    Rng rng(0);
    Batch unlabeled = sample_batch(pair.target, 8, rng, false);
    CHECK_THROWS_AS(step1(bundle, optimizer, unlabeled, testdata::tiny_train_config()),
                    ContractViolation);
}

TEST_CASE("step2 freezes F and D; with w_s = 0 it matches step1 on the heads") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    TrainConfig cfg = testdata::tiny_train_config();

    ModelBundle a = models::build_models(mc, 7);
    ModelBundle b = a; // value semantics: byte-identical clone
    opt::Optimizer opt_a = make_opt(1e-3, 1e-3);
    opt::Optimizer opt_b = make_opt(1e-3, 1e-3);

    Rng rng(11);
    Batch source = sample_batch(pair.source_train, 24, rng, true);
    Batch target = sample_batch(pair.target, 24, rng, false);

    const auto f_before = b.group_checksum(Group::F);
    const auto d_before = b.group_checksum(Group::D);

    step1(a, opt_a, source, cfg);
    TrainConfig degenerate = cfg;
    degenerate.w_s = 0.0;
    step2(b, opt_b, source, target, degenerate);

    CHECK(b.group_checksum(Group::F) == f_before);
    CHECK(b.group_checksum(Group::D) == d_before);
    // Identical head updates on identical batches and optimizer state.
    CHECK(a.group_checksum(Group::GHat) == b.group_checksum(Group::GHat));
    CHECK(a.group_checksum(Group::RHat) == b.group_checksum(Group::RHat));
    CHECK(a.group_checksum(Group::GTilde) == b.group_checksum(Group::GTilde));
    CHECK(a.group_checksum(Group::RTilde) == b.group_checksum(Group::RTilde));
    // step1 did move F.
    CHECK(a.group_checksum(Group::F) != f_before);
}

TEST_CASE("repeated step2 on frozen F drives the soft similarity down") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    TrainConfig cfg = testdata::tiny_train_config();

    ModelBundle bundle = models::build_models(mc, 1);
    opt::Optimizer optimizer = make_opt(1e-3, 1e-3);
    Rng rng(2);
    Batch source = sample_batch(pair.source_train, 32, rng, true);
    Batch target = sample_batch(pair.target, 32, rng, false);

    const double initial = eval_loss_s(bundle, target);
    for (int i = 0; i < 50; ++i) step2(bundle, optimizer, source, target, cfg);
    const double final = eval_loss_s(bundle, target);
    CHECK(final < initial);
}

TEST_CASE("step3 freezes the four regressor groups") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    TrainConfig cfg = testdata::tiny_train_config();

    ModelBundle bundle = models::build_models(mc, 4);
    opt::Optimizer optimizer = make_opt(1e-3, 1e-3);
    Rng rng(6), mix_rng(7);
    Batch source = sample_batch(pair.source_train, 24, rng, true);
    Batch target = sample_batch(pair.target, 24, rng, false);

    const auto before = bundle.checksums();
    const StepLosses out = step3(bundle, optimizer, source, target, cfg, mix_rng);
    CHECK(bundle.group_checksum(Group::GHat) ==
          before[static_cast<std::size_t>(Group::GHat)]);
    CHECK(bundle.group_checksum(Group::RHat) ==
          before[static_cast<std::size_t>(Group::RHat)]);
    CHECK(bundle.group_checksum(Group::GTilde) ==
          before[static_cast<std::size_t>(Group::GTilde)]);
    CHECK(bundle.group_checksum(Group::RTilde) ==
          before[static_cast<std::size_t>(Group::RTilde)]);
    // F and D did move.
    CHECK(bundle.group_checksum(Group::F) != before[static_cast<std::size_t>(Group::F)]);
    CHECK(bundle.group_checksum(Group::D) != before[static_cast<std::size_t>(Group::D)]);
    CHECK(std::isfinite(out.loss_adv));
    CHECK(std::isfinite(out.loss_s));
}

TEST_CASE("step3 discriminator sub-step ascends L_adv on the same mixed batches") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    TrainConfig cfg = testdata::tiny_train_config();

    int failures = 0;
    for (int seed = 0; seed < 20; ++seed) {
        ModelBundle bundle = models::build_models(mc, seed);
        // F frozen through a zero main learning rate; D moves slowly.
        opt::Optimizer optimizer = make_opt(0.0, 1e-3);
        Rng rng(seed + 50);
        Batch source = sample_batch(pair.source_train, 32, rng, true);
        Batch target = sample_batch(pair.target, 32, rng, false);

        // Reproduce the exact mixed batches step3 will draw.
        Rng mix_probe(Rng::derive(seed, "mix"));
        Rng mix_step(Rng::derive(seed, "mix"));
        auto mixed = augment::mix_domains(source.x, target.x, cfg.lambda, mix_probe);

        auto eval_adv = [&](const ModelBundle& b) {
            const MatrixXd fs = models::extract_features(b, mixed.x_source_similar);
            const MatrixXd ft = models::extract_features(b, mixed.x_target_similar);
            const auto hat = models::forward_regressor(b, Head::Hat, fs);
            const auto tilde = models::forward_regressor(b, Head::Tilde, ft);
            const auto ps = models::forward_discriminator(
                b, fs, models::normalize_coords(hat.l, b.config.label_extents));
            const auto pt = models::forward_discriminator(
                b, ft, models::normalize_coords(tilde.l, b.config.label_extents));
            return losses::adversarial_loss(ps, pt);
        };

        const double before = eval_adv(bundle);
        Step3Options options;
        options.use_similarity = false;
        step3(bundle, optimizer, source, target, cfg, mix_step, options);
        const double after = eval_adv(bundle);
        if (!(after > before)) ++failures;
    }
    CHECK(failures <= 2);
}

TEST_CASE("step3 F sub-step with w_adv = 0 raises the soft similarity") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    TrainConfig cfg = testdata::tiny_train_config();

    ModelBundle bundle = models::build_models(mc, 9);
    opt::Optimizer optimizer = make_opt(1e-3, 1e-3);
    Rng rng(10), mix_rng(11);
    Batch source = sample_batch(pair.source_train, 32, rng, true);
    Batch target = sample_batch(pair.target, 32, rng, false);

    Step3Options options;
    options.update_discriminator = false;
    options.use_adversarial = false; // pure -w_s * L_s descent

    const double initial = eval_loss_s(bundle, target);
    const auto head_checksums = [&] {
        return std::array{bundle.group_checksum(Group::GHat),
                          bundle.group_checksum(Group::RHat),
                          bundle.group_checksum(Group::GTilde),
                          bundle.group_checksum(Group::RTilde),
                          bundle.group_checksum(Group::D)};
    };
    const auto frozen_before = head_checksums();
    for (int i = 0; i < 50; ++i) {
        step3(bundle, optimizer, source, target, cfg, mix_rng, options);
    }
    CHECK(head_checksums() == frozen_before);
    CHECK(eval_loss_s(bundle, target) >= initial);
}

TEST_CASE("train: zero iterations returns the freshly built bundle") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    TrainConfig cfg = testdata::tiny_train_config(5);
    cfg.iterations = 0;
    TrainResult result = train(mc, cfg, TrainPlan{}, pair.source_train, pair.target);
    ModelBundle fresh = models::build_models(mc, Rng::derive(cfg.seed, "init"));
    CHECK(result.bundle.checksums() == fresh.checksums());
    CHECK(result.history.records.empty());
}

TEST_CASE("train is deterministic per seed") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    const TrainConfig cfg = testdata::tiny_train_config(17);

    TrainResult a = train(mc, cfg, TrainPlan{}, pair.source_train, pair.target, &pair.target);
    TrainResult b = train(mc, cfg, TrainPlan{}, pair.source_train, pair.target, &pair.target);
    REQUIRE(a.history.records.size() == b.history.records.size());
    for (std::size_t i = 0; i < a.history.records.size(); ++i) {
        CHECK(a.history.records[i].loss_r == b.history.records[i].loss_r);
        CHECK(a.history.records[i].loss_s == b.history.records[i].loss_s);
        CHECK(a.history.records[i].loss_adv == b.history.records[i].loss_adv);
    }
    CHECK(a.bundle.checksums() == b.bundle.checksums());

    TrainConfig other = cfg;
    other.seed = 18;
    TrainResult c = train(mc, other, TrainPlan{}, pair.source_train, pair.target);
    CHECK(a.bundle.checksums() != c.bundle.checksums());
}

TEST_CASE("train keeps the freeze contracts every iteration") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    TrainConfig cfg = testdata::tiny_train_config(3);
    cfg.iterations = 10;

    std::array<std::uint64_t, 6> snapshot{};
    int violations = 0;
    const StepObserver observer = [&](long, int step, const ModelBundle& bundle) {
        const auto now = bundle.checksums();
        auto same = [&](Group g) {
            return now[static_cast<std::size_t>(g)] == snapshot[static_cast<std::size_t>(g)];
        };
        switch (step) {
            case 1: // step1 must not touch D
                if (!same(Group::D)) ++violations;
                break;
            case 2: // step2 must not touch F or D
                if (!same(Group::F) || !same(Group::D)) ++violations;
                break;
            case 3: // step3 must not touch the regressor groups
                if (!same(Group::GHat) || !same(Group::RHat) || !same(Group::GTilde) ||
                    !same(Group::RTilde)) {
                    ++violations;
                }
                break;
            default: break;
        }
        snapshot = now;
    };
    train(mc, cfg, TrainPlan{}, pair.source_train, pair.target, nullptr, observer);
    CHECK(violations == 0);
}

TEST_CASE("train aborts with a diagnostic on non-finite data") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    TrainConfig cfg = testdata::tiny_train_config();
    cfg.iterations = 2;

    MatrixXd windows = pair.source_train.windows();
    windows.col(0).setConstant(std::nan(""));
    datagen::DomainDataset poisoned(windows, pair.source_train.labels_for_eval(),
                                    datagen::LabelMode::Training,
                                    pair.source_train.meta());
    try {
        train(mc, cfg, TrainPlan{}, poisoned, pair.target);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        const std::string what = e.what();
        CHECK(what.find("step 1") != std::string::npos);
        CHECK(what.find("iteration") != std::string::npos);
    }
}

TEST_CASE("history CSV round-trips and reruns are byte-identical") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    const TrainConfig cfg = testdata::tiny_train_config(23);

    TrainResult a = train(mc, cfg, TrainPlan{}, pair.source_train, pair.target, &pair.target);
    const auto path1 = temp_file("abrnet_history_a.csv");
    const auto path2 = temp_file("abrnet_history_b.csv");
    save_history_csv(a.history, path1.string());

    TrainResult b = train(mc, cfg, TrainPlan{}, pair.source_train, pair.target, &pair.target);
    save_history_csv(b.history, path2.string());

    std::ifstream f1(path1, std::ios::binary), f2(path2, std::ios::binary);
    const std::string c1((std::istreambuf_iterator<char>(f1)),
                         std::istreambuf_iterator<char>());
    const std::string c2((std::istreambuf_iterator<char>(f2)),
                         std::istreambuf_iterator<char>());
    CHECK(c1 == c2);
    CHECK(!c1.empty());

    TrainHistory loaded = load_history_csv(path1.string());
    REQUIRE(loaded.records.size() == a.history.records.size());
    for (std::size_t i = 0; i < loaded.records.size(); ++i) {
        CHECK(loaded.records[i].loss_r == a.history.records[i].loss_r);
        const bool both_nan = std::isnan(loaded.records[i].loss_adv) &&
                              std::isnan(a.history.records[i].loss_adv);
        CHECK((both_nan || loaded.records[i].loss_adv == a.history.records[i].loss_adv));
    }
    std::filesystem::remove(path1);
    std::filesystem::remove(path2);
}

TEST_CASE("checkpoint round trip, corruption, and config mismatch") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    TrainConfig cfg = testdata::tiny_train_config(31);
    cfg.iterations = 4;

    TrainResult run = train(mc, cfg, TrainPlan{}, pair.source_train, pair.target, &pair.target);
    const auto path = temp_file("abrnet_ckpt.bin");
    save_checkpoint(run.bundle, run.history, path.string());

    Checkpoint loaded = load_checkpoint(path.string());
    CHECK(loaded.bundle.checksums() == run.bundle.checksums());
    REQUIRE(loaded.history.records.size() == run.history.records.size());
    CHECK(loaded.history.checkpoints.size() == run.history.checkpoints.size());

    // Mismatched config is a configuration error.
    models::ModelConfig other = mc;
    other.feature_dim = 32;
    CHECK_THROWS_AS(load_checkpoint(path.string(), &other), ConfigError);
    CHECK_NOTHROW(load_checkpoint(path.string(), &mc));

    // Truncation is a parse error, not a crash.
    const auto truncated = temp_file("abrnet_ckpt_trunc.bin");
    {
        std::ifstream in(path, std::ios::binary);
        std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
        std::ofstream out(truncated, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint(truncated.string()), ParseError);

    // Flipping a parameter byte breaks the stored group checksum.
    const auto corrupt = temp_file("abrnet_ckpt_corrupt.bin");
    {
        std::ifstream in(path, std::ios::binary);
        std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
        content[content.size() / 2] ^= 0x40;
        std::ofstream out(corrupt, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
    }
    CHECK_THROWS_AS(load_checkpoint(corrupt.string()), ParseError);

    // Not a checkpoint at all.
    const auto garbage = temp_file("abrnet_ckpt_garbage.bin");
    {
        std::ofstream out(garbage, std::ios::binary | std::ios::trunc);
        out << "definitely not a checkpoint";
    }
    CHECK_THROWS_AS(load_checkpoint(garbage.string()), ParseError);

    for (const auto& p : {path, truncated, corrupt, garbage}) std::filesystem::remove(p);
}

TEST_CASE("optimizer state of frozen groups never mutates") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    TrainConfig cfg = testdata::tiny_train_config();

    ModelBundle bundle = models::build_models(mc, 12);
    opt::Optimizer optimizer = make_opt(1e-3, 1e-3);
    Rng rng(13), mix_rng(14);
    Batch source = sample_batch(pair.source_train, 16, rng, true);
    Batch target = sample_batch(pair.target, 16, rng, false);

    step1(bundle, optimizer, source, cfg);
    CHECK(optimizer.state(Group::D).step_count == 0);
    CHECK(optimizer.state(Group::F).step_count == 1);

    step2(bundle, optimizer, source, target, cfg);
    CHECK(optimizer.state(Group::F).step_count == 1); // frozen in step 2
    CHECK(optimizer.state(Group::GHat).step_count == 2);

    step3(bundle, optimizer, source, target, cfg, mix_rng);
    CHECK(optimizer.state(Group::GHat).step_count == 2); // frozen in step 3
    CHECK(optimizer.state(Group::F).step_count == 2);
    CHECK(optimizer.state(Group::D).step_count == 1);
}

TEST_CASE("sgd-momentum optimizer variant also trains") {
    const auto& pair = testdata::tiny_pair();
    const auto mc = testdata::tiny_model_config();
    TrainConfig cfg = testdata::tiny_train_config(2);
    cfg.optimizer = opt::Kind::SgdMomentum;
    cfg.lr_main = 1e-4;
    cfg.lr_discriminator = 1e-4;
    cfg.iterations = 5;
    TrainResult result = train(mc, cfg, TrainPlan{}, pair.source_train, pair.target);
    for (const auto& r : result.history.records) CHECK(std::isfinite(r.loss_r));
}
