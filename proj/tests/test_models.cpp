#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "abrnet/models.hpp"
#include "gradcheck.hpp"

using namespace abrnet;
using namespace abrnet::models;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ModelConfig small_sequence_config() {
    ModelConfig cfg;
    cfg.input_kind = InputKind::Sequence;
    cfg.window_length = 10;
    cfg.signal_dim = 63;
    cfg.feature_dim = 32;
    cfg.condition_dim = 16;
    cfg.discriminator_hidden = 16;
    return cfg;
}

MatrixXd random_inputs(Rng& rng, Eigen::Index batch, Eigen::Index dim, double scale = 1.0) {
    MatrixXd m(batch, dim);
    for (Eigen::Index i = 0; i < batch; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = scale * rng.normal();
    }
    return m;
}

} // namespace

TEST_CASE("build_models produces six disjoint covering groups") {
    ModelConfig cfg = small_sequence_config();
    ModelBundle bundle = build_models(cfg, 0);

    std::set<const nn::Tensor*> seen;
    Eigen::Index total = 0;
    for (Group g : kAllGroups) {
        for (nn::Tensor* t : bundle.group(g)) {
            CHECK(seen.insert(t).second); // disjoint
            total += t->count();
        }
    }
    // Union covers every trainable tensor: recount through the structures.
    Eigen::Index direct = 0;
    direct += nn::param_count(std::get<nn::BiLstm>(bundle.encoder).params());
    direct += nn::param_count(bundle.hat.condition.params());
    direct += nn::param_count(bundle.hat.output.params());
    direct += nn::param_count(bundle.tilde.condition.params());
    direct += nn::param_count(bundle.tilde.output.params());
    direct += nn::param_count(bundle.disc.fc1.params());
    direct += nn::param_count(bundle.disc.fc2.params());
    CHECK(total == direct);

    // Heads share an architecture, so parameter counts match.
    CHECK(nn::param_count(bundle.group(Group::GHat)) ==
          nn::param_count(bundle.group(Group::GTilde)));
    CHECK(nn::param_count(bundle.group(Group::RHat)) ==
          nn::param_count(bundle.group(Group::RTilde)));
}

TEST_CASE("same seed gives byte-identical parameters, different seeds differ") {
    ModelConfig cfg = small_sequence_config();
    ModelBundle a = build_models(cfg, 7);
    ModelBundle b = build_models(cfg, 7);
    ModelBundle c = build_models(cfg, 8);
    CHECK(a.checksums() == b.checksums());
    CHECK(a.checksums() != c.checksums());
}

TEST_CASE("config validation") {
    ModelConfig cfg = small_sequence_config();
    cfg.feature_dim = 0;
    CHECK_THROWS_AS(build_models(cfg, 0), ConfigError);
    cfg = small_sequence_config();
    cfg.feature_dim = 33; // odd: cannot split across directions
    CHECK_THROWS_AS(build_models(cfg, 0), ConfigError);
    cfg = small_sequence_config();
    cfg.label_extents = VectorXd::Zero(2);
    CHECK_THROWS_AS(build_models(cfg, 0), ConfigError);
}

TEST_CASE("extract_features: finiteness, batch independence, equivariance") {
    ModelConfig cfg = small_sequence_config();
    ModelBundle bundle = build_models(cfg, 1);
    Rng rng(10);

    MatrixXd zeros = MatrixXd::Zero(4, cfg.input_dim());
    CHECK(extract_features(bundle, zeros).allFinite());

    MatrixXd batch = random_inputs(rng, 8, cfg.input_dim());
    MatrixXd feats = extract_features(bundle, batch);
    CHECK(feats.rows() == 8);
    CHECK(feats.cols() == cfg.feature_dim);

    // Row 3 alone reproduces row 3 of the batch result.
    MatrixXd single = batch.row(3);
    MatrixXd fs = extract_features(bundle, single);
    CHECK((fs.row(0) - feats.row(3)).cwiseAbs().maxCoeff() < 1e-5);

    // Permuting input rows permutes output rows identically.
    std::vector<int> perm = {5, 2, 7, 0, 4, 1, 6, 3};
    MatrixXd shuffled(8, cfg.input_dim());
    for (int i = 0; i < 8; ++i) shuffled.row(i) = batch.row(perm[i]);
    MatrixXd f_shuffled = extract_features(bundle, shuffled);
    for (int i = 0; i < 8; ++i) {
        CHECK((f_shuffled.row(i) - feats.row(perm[i])).cwiseAbs().maxCoeff() < 1e-12);
    }

    CHECK_THROWS_AS(extract_features(bundle, random_inputs(rng, 2, 10)),
                    ContractViolation);
}

TEST_CASE("image encoder variant") {
    ModelConfig cfg;
    cfg.input_kind = InputKind::Image;
    cfg.image_height = 32;
    cfg.image_width = 32;
    cfg.image_channels = 3;
    cfg.feature_dim = 128;
    cfg.condition_dim = 16;
    cfg.label_dim = 3;
    cfg.label_extents = VectorXd::Ones(3);
    ModelBundle bundle = build_models(cfg, 3);
    Rng rng(4);
    MatrixXd batch = random_inputs(rng, 4, cfg.input_dim(), 0.3);
    MatrixXd feats = extract_features(bundle, batch);
    CHECK(feats.rows() == 4);
    CHECK(feats.cols() == 128);
}

TEST_CASE("forward_regressor output contracts") {
    ModelConfig cfg = small_sequence_config();
    ModelBundle bundle = build_models(cfg, 2);
    Rng rng(20);
    MatrixXd feats = random_inputs(rng, 6, cfg.feature_dim);

    RegressorResult hat = forward_regressor(bundle, Head::Hat, feats);
    RegressorResult tilde = forward_regressor(bundle, Head::Tilde, feats);
    CHECK(hat.g.cols() == cfg.condition_dim);
    CHECK(hat.l.cols() == 2);
    CHECK(hat.h.cols() == cfg.condition_dim + 2);
    // Independently initialized heads disagree on the same features.
    CHECK((hat.h - tilde.h).cwiseAbs().maxCoeff() > 1e-8);
    // Conditional vector range invariant.
    CHECK(hat.h.minCoeff() >= 0.0);
    CHECK(hat.h.maxCoeff() <= 1.0);
    CHECK(tilde.h.minCoeff() >= 0.0);
    CHECK(tilde.h.maxCoeff() <= 1.0);
}

TEST_CASE("h assembly: sigmoid at zero and coordinate clamp") {
    ModelConfig cfg = small_sequence_config();
    ModelBundle bundle = build_models(cfg, 2);

    // Zero the condition layer so g == 0 -> sigmoid part all 0.5.
    bundle.hat.condition.W.value.setZero();
    bundle.hat.condition.b.value.setZero();
    // Force the output layer to a constant far outside the floor.
    bundle.hat.output.W.value.setZero();
    bundle.hat.output.b.value << 100.0, -5.0;

    Rng rng(30);
    MatrixXd feats = random_inputs(rng, 3, cfg.feature_dim);
    RegressorResult out = forward_regressor(bundle, Head::Hat, feats);
    CHECK((out.h.leftCols(cfg.condition_dim).array() == 0.5).all());
    // Raw l is unclamped; h's coordinate entries are clamped into [0,1].
    CHECK(out.l(0, 0) == doctest::Approx(100.0));
    CHECK(out.l(0, 1) == doctest::Approx(-5.0));
    CHECK(out.h(0, cfg.condition_dim) == 1.0);
    CHECK(out.h(0, cfg.condition_dim + 1) == 0.0);
}

TEST_CASE("forward_discriminator initial spread and saturation") {
    ModelConfig cfg = small_sequence_config();
    ModelBundle bundle = build_models(cfg, 5);
    Rng rng(40);

    const int n = 1000;
    MatrixXd feats = random_inputs(rng, n, cfg.feature_dim, 0.5);
    MatrixXd coords(n, 2);
    for (int i = 0; i < n; ++i) {
        coords(i, 0) = rng.uniform();
        coords(i, 1) = rng.uniform();
    }
    VectorXd probs = forward_discriminator(bundle, feats, coords);
    CHECK(probs.minCoeff() > 0.2);
    CHECK(probs.maxCoeff() < 0.8);
    CHECK(probs.mean() == doctest::Approx(0.5).epsilon(0.2));

    // +10 on the output bias saturates the sigmoid.
    bundle.disc.fc2.b.value(0, 0) += 10.0;
    VectorXd high = forward_discriminator(bundle, feats, coords);
    CHECK(high.minCoeff() > 0.99);
    CHECK(high.maxCoeff() < 1.0); // clamp keeps it strictly inside (0,1)

    // Batch permutation equivariance.
    bundle.disc.fc2.b.value(0, 0) -= 10.0;
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = (i * 7 + 3) % n;
    MatrixXd pf(n, cfg.feature_dim), pc(n, 2);
    for (int i = 0; i < n; ++i) {
        pf.row(i) = feats.row(perm[i]);
        pc.row(i) = coords.row(perm[i]);
    }
    VectorXd pp = forward_discriminator(bundle, pf, pc);
    for (int i = 0; i < n; ++i) CHECK(std::abs(pp(i) - probs(perm[i])) < 1e-12);

    CHECK_THROWS_AS(forward_discriminator(bundle, feats, coords.topRows(5)),
                    ContractViolation);
}

TEST_CASE("head and discriminator backward match finite differences") {
    ModelConfig cfg = small_sequence_config();
    cfg.feature_dim = 8;
    cfg.condition_dim = 5;
    cfg.discriminator_hidden = 6;
    ModelBundle bundle = build_models(cfg, 9);
    Rng rng(50);
    MatrixXd feats = random_inputs(rng, 3, cfg.feature_dim);
    MatrixXd wh = random_inputs(rng, 3, cfg.condition_dim + 2);
    MatrixXd wl = random_inputs(rng, 3, 2);

    // Scalar probe: sum(wh .* h) + sum(wl .* l).
    auto loss = [&] {
        RegressorResult r = forward_regressor(bundle, Head::Hat, feats);
        return (r.h.array() * wh.array()).sum() + (r.l.array() * wl.array()).sum();
    };
    RegressorHead::Cache cache;
    head_forward(bundle, Head::Hat, feats, &cache);
    bundle.zero_all_grads();
    MatrixXd dfeat = head_backward(bundle, Head::Hat, cache, &wh, &wl);
    for (nn::Tensor* t : bundle.group(Group::GHat)) {
        MatrixXd numeric = gradcheck::numeric_grad(loss, t->value);
        CHECK(gradcheck::max_rel_error(t->grad, numeric) < 1e-4);
    }
    for (nn::Tensor* t : bundle.group(Group::RHat)) {
        MatrixXd numeric = gradcheck::numeric_grad(loss, t->value);
        CHECK(gradcheck::max_rel_error(t->grad, numeric) < 1e-4);
    }
    MatrixXd numeric_feat = gradcheck::numeric_grad(loss, feats);
    CHECK(gradcheck::max_rel_error(dfeat, numeric_feat) < 1e-4);

    // Discriminator: probe sum(wd .* p) and check input gradients too.
    MatrixXd coords(3, 2);
    for (int i = 0; i < 3; ++i) {
        coords(i, 0) = rng.uniform();
        coords(i, 1) = rng.uniform();
    }
    VectorXd wd(3);
    for (int i = 0; i < 3; ++i) wd(i) = rng.normal();
    auto dloss = [&] {
        return (forward_discriminator(bundle, feats, coords).array() * wd.array()).sum();
    };
    Discriminator::Cache dc;
    disc_forward(bundle, feats, coords, &dc);
    bundle.zero_all_grads();
    MatrixXd d_feat, d_coords;
    disc_backward(bundle, dc, wd, &d_feat, &d_coords);
    for (nn::Tensor* t : bundle.group(Group::D)) {
        MatrixXd numeric = gradcheck::numeric_grad(dloss, t->value);
        CHECK(gradcheck::max_rel_error(t->grad, numeric) < 1e-4);
    }
    CHECK(gradcheck::max_rel_error(d_feat, gradcheck::numeric_grad(dloss, feats)) < 1e-4);
    CHECK(gradcheck::max_rel_error(d_coords, gradcheck::numeric_grad(dloss, coords)) < 1e-4);
}
