#include "abrnet/models.hpp"

#include "abrnet/losses.hpp"

namespace abrnet::models {

const char* group_name(Group g) {
    switch (g) {
        case Group::F: return "F";
        case Group::GHat: return "G_hat";
        case Group::RHat: return "R_hat";
        case Group::GTilde: return "G_tilde";
        case Group::RTilde: return "R_tilde";
        case Group::D: return "D";
    }
    return "?";
}

const char* to_string(InputKind k) {
    return k == InputKind::Sequence ? "sequence" : "image";
}

InputKind input_kind_from_string(const std::string& s) {
    if (s == "sequence") return InputKind::Sequence;
    if (s == "image") return InputKind::Image;
    throw ConfigError("unknown input_kind '" + s + "' (expected sequence|image)");
}

Head head_from_string(const std::string& s) {
    if (s == "hat") return Head::Hat;
    if (s == "tilde") return Head::Tilde;
    throw ContractViolation("unknown regressor head '" + s + "' (expected hat|tilde)");
}

void ModelConfig::validate() const {
    if (window_length < 1 || signal_dim < 1 || feature_dim < 1 || condition_dim < 1 ||
        label_dim < 1 || discriminator_hidden < 1) {
        throw ConfigError("ModelConfig: all dimensions must be >= 1");
    }
    if (input_kind == InputKind::Sequence && feature_dim % 2 != 0) {
        throw ConfigError("ModelConfig: sequence feature_dim must be even "
                          "(two concatenated directions)");
    }
    if (label_extents.size() != label_dim) {
        throw ConfigError("ModelConfig: label_extents must have label_dim entries");
    }
    for (Eigen::Index i = 0; i < label_extents.size(); ++i) {
        if (!(label_extents(i) > 0.0)) {
            throw ConfigError("ModelConfig: label_extents entries must be > 0");
        }
    }
    if (input_kind == InputKind::Image &&
        (image_height < 8 || image_width < 8 || image_channels < 1)) {
        throw ConfigError("ModelConfig: invalid image dimensions");
    }
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
    return a.input_kind == b.input_kind && a.window_length == b.window_length &&
           a.signal_dim == b.signal_dim && a.image_height == b.image_height &&
           a.image_width == b.image_width && a.image_channels == b.image_channels &&
           a.feature_dim == b.feature_dim && a.condition_dim == b.condition_dim &&
           a.label_dim == b.label_dim &&
           a.discriminator_hidden == b.discriminator_hidden &&
           a.discriminator_conditional == b.discriminator_conditional &&
           a.label_extents.size() == b.label_extents.size() &&
           (a.label_extents.array() == b.label_extents.array()).all();
}

Eigen::Index ModelConfig::input_dim() const {
    return input_kind == InputKind::Sequence
               ? Eigen::Index(window_length) * signal_dim
               : Eigen::Index(image_height) * image_width * image_channels;
}

ModelBundle build_models(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ModelBundle bundle;
    bundle.config = config;

    if (config.input_kind == InputKind::Sequence) {
        nn::BiLstm lstm;
        Rng rng(Rng::derive(seed, "F"));
        lstm.init(config.signal_dim, config.window_length, config.feature_dim / 2, rng);
        bundle.encoder = std::move(lstm);
    } else {
        nn::ConvEncoder conv;
        Rng rng(Rng::derive(seed, "F"));
        conv.init(config.image_height, config.image_width, config.image_channels,
                  config.feature_dim, rng);
        bundle.encoder = std::move(conv);
    }

    auto init_head = [&](RegressorHead& head, const char* g_tag, const char* r_tag) {
        Rng rng_g(Rng::derive(seed, g_tag));
        Rng rng_r(Rng::derive(seed, r_tag));
        head.condition.init(config.feature_dim, config.condition_dim, rng_g,
                            std::string(g_tag));
        head.output.init(config.condition_dim, config.label_dim, rng_r,
                         std::string(r_tag));
    };
    init_head(bundle.hat, "G_hat", "R_hat");
    init_head(bundle.tilde, "G_tilde", "R_tilde");

    const Eigen::Index disc_in =
        config.discriminator_conditional ? config.feature_dim + config.label_dim
                                         : config.feature_dim;
    Rng rng_d(Rng::derive(seed, "D"));
    bundle.disc.conditional = config.discriminator_conditional;
    bundle.disc.fc1.init(disc_in, config.discriminator_hidden, rng_d, "D.fc1");
    bundle.disc.fc2.init(config.discriminator_hidden, 1, rng_d, "D.fc2");
    return bundle;
}

nn::ParamRefs ModelBundle::group(Group g) {
    switch (g) {
        case Group::F:
            return std::visit([](auto& enc) { return enc.params(); }, encoder);
        case Group::GHat: return hat.condition.params();
        case Group::RHat: return hat.output.params();
        case Group::GTilde: return tilde.condition.params();
        case Group::RTilde: return tilde.output.params();
        case Group::D: {
            nn::ParamRefs out = disc.fc1.params();
            for (nn::Tensor* t : disc.fc2.params()) out.push_back(t);
            return out;
        }
    }
    return {};
}

std::uint64_t ModelBundle::group_checksum(Group g) const {
    // Parameter enumeration does not mutate; the non-const group() is reused.
    return nn::checksum(const_cast<ModelBundle*>(this)->group(g));
}

std::array<std::uint64_t, 6> ModelBundle::checksums() const {
    std::array<std::uint64_t, 6> out{};
    for (std::size_t i = 0; i < kAllGroups.size(); ++i) {
        out[i] = group_checksum(kAllGroups[i]);
    }
    return out;
}

void ModelBundle::zero_all_grads() {
    for (Group g : kAllGroups) {
        for (nn::Tensor* t : group(g)) t->zero_grad();
    }
}

MatrixXd normalize_coords(const MatrixXd& l, const VectorXd& extents) {
    if (l.cols() != extents.size()) {
        throw ContractViolation("normalize_coords: prediction width " +
                                std::to_string(l.cols()) + " vs " +
                                std::to_string(extents.size()) + " extents");
    }
    MatrixXd scaled = l.array().rowwise() / extents.transpose().array();
    return scaled.cwiseMax(0.0).cwiseMin(1.0);
}

MatrixXd encoder_forward(const ModelBundle& bundle, const MatrixXd& inputs,
                         EncoderCache* cache) {
    if (std::holds_alternative<nn::BiLstm>(bundle.encoder)) {
        const auto& lstm = std::get<nn::BiLstm>(bundle.encoder);
        if (cache) {
            cache->emplace<nn::BiLstm::Cache>();
            return lstm.forward(inputs, &std::get<nn::BiLstm::Cache>(*cache));
        }
        return lstm.forward(inputs, nullptr);
    }
    const auto& conv = std::get<nn::ConvEncoder>(bundle.encoder);
    if (cache) {
        cache->emplace<nn::ConvEncoder::Cache>();
        return conv.forward(inputs, &std::get<nn::ConvEncoder::Cache>(*cache));
    }
    return conv.forward(inputs, nullptr);
}

void encoder_backward(ModelBundle& bundle, const MatrixXd& inputs,
                      const EncoderCache& cache, const MatrixXd& d_features) {
    if (std::holds_alternative<nn::BiLstm>(bundle.encoder)) {
        std::get<nn::BiLstm>(bundle.encoder)
            .backward(inputs, std::get<nn::BiLstm::Cache>(cache), d_features);
    } else {
        std::get<nn::ConvEncoder>(bundle.encoder)
            .backward(inputs, std::get<nn::ConvEncoder::Cache>(cache), d_features);
    }
}

MatrixXd extract_features(const ModelBundle& bundle, const MatrixXd& inputs) {
    return encoder_forward(bundle, inputs, nullptr);
}

RegressorResult head_forward(const ModelBundle& bundle, Head head,
                             const MatrixXd& features, RegressorHead::Cache* cache) {
    const RegressorHead& h = head == Head::Hat ? bundle.hat : bundle.tilde;
    RegressorResult out;
    out.g = h.condition.forward(features);
    MatrixXd act = out.g.cwiseMax(0.0);
    out.l = h.output.forward(act);

    MatrixXd scaled =
        out.l.array().rowwise() / bundle.config.label_extents.transpose().array();
    out.h.resize(features.rows(), out.g.cols() + out.l.cols());
    out.h.leftCols(out.g.cols()) = nn::sigmoid(out.g);
    out.h.rightCols(out.l.cols()) = scaled.cwiseMax(0.0).cwiseMin(1.0);

    if (cache) {
        cache->features = features;
        cache->g = out.g;
        cache->act = std::move(act);
        cache->scaled = std::move(scaled);
    }
    return out;
}

RegressorResult forward_regressor(const ModelBundle& bundle, Head head,
                                  const MatrixXd& features) {
    return head_forward(bundle, head, features, nullptr);
}

MatrixXd head_backward(ModelBundle& bundle, Head head, const RegressorHead::Cache& cache,
                       const MatrixXd* d_h, const MatrixXd* d_l) {
    RegressorHead& h = head == Head::Hat ? bundle.hat : bundle.tilde;
    const Eigen::Index k = cache.g.cols();
    const Eigen::Index ld = cache.scaled.cols();
    const Eigen::Index batch = cache.g.rows();

    MatrixXd d_l_total = MatrixXd::Zero(batch, ld);
    if (d_l) d_l_total = *d_l;
    MatrixXd d_g_from_h = MatrixXd::Zero(batch, k);
    if (d_h) {
        // h = [sigmoid(g), clamp01(l / extents)]
        MatrixXd sig = nn::sigmoid(cache.g);
        d_g_from_h = (d_h->leftCols(k).array() * sig.array() * (1.0 - sig.array())).matrix();
        MatrixXd inside =
            (cache.scaled.array() > 0.0 && cache.scaled.array() < 1.0).cast<double>();
        d_l_total.array() += d_h->rightCols(ld).array() * inside.array() /
                             bundle.config.label_extents.transpose().array().replicate(batch, 1);
    }

    MatrixXd d_act = h.output.backward(cache.act, d_l_total);
    MatrixXd d_g = (d_act.array() * (cache.g.array() > 0.0).cast<double>()).matrix();
    d_g += d_g_from_h;
    return h.condition.backward(cache.features, d_g);
}

VectorXd disc_forward(const ModelBundle& bundle, const MatrixXd& features,
                      const MatrixXd& coords01, Discriminator::Cache* cache) {
    const Discriminator& d = bundle.disc;
    MatrixXd input;
    if (d.conditional) {
        if (features.rows() != coords01.rows()) {
            throw ContractViolation("forward_discriminator: batch size mismatch");
        }
        input.resize(features.rows(), features.cols() + coords01.cols());
        input.leftCols(features.cols()) = features;
        input.rightCols(coords01.cols()) = coords01;
    } else {
        input = features;
    }
    MatrixXd z1 = d.fc1.forward(input);
    MatrixXd a1 = z1.cwiseMax(0.0);
    MatrixXd z2 = d.fc2.forward(a1);
    VectorXd sig = nn::sigmoid(z2).col(0);
    VectorXd prob = sig.cwiseMax(losses::kProbEps).cwiseMin(1.0 - losses::kProbEps);
    if (cache) {
        cache->input = std::move(input);
        cache->z1 = std::move(z1);
        cache->a1 = std::move(a1);
        cache->sig = std::move(sig);
    }
    return prob;
}

VectorXd forward_discriminator(const ModelBundle& bundle, const MatrixXd& features,
                               const MatrixXd& coords01) {
    return disc_forward(bundle, features, coords01, nullptr);
}

void disc_backward(ModelBundle& bundle, const Discriminator::Cache& cache,
                   const VectorXd& d_prob, MatrixXd* d_features, MatrixXd* d_coords01) {
    Discriminator& d = bundle.disc;
    const Eigen::Index batch = cache.sig.size();
    MatrixXd d_z2(batch, 1);
    for (Eigen::Index i = 0; i < batch; ++i) {
        const double s = cache.sig(i);
        // The [eps, 1-eps] clamp is flat outside its band.
        const bool clamped = s < losses::kProbEps || s > 1.0 - losses::kProbEps;
        d_z2(i, 0) = clamped ? 0.0 : d_prob(i) * s * (1.0 - s);
    }
    MatrixXd d_a1 = d.fc2.backward(cache.a1, d_z2);
    MatrixXd d_z1 = (d_a1.array() * (cache.z1.array() > 0.0).cast<double>()).matrix();
    MatrixXd d_input = d.fc1.backward(cache.input, d_z1);
    const Eigen::Index feat = d.conditional
                                  ? d_input.cols() - bundle.config.label_dim
                                  : d_input.cols();
    if (d_features) *d_features = d_input.leftCols(feat);
    if (d_coords01) {
        if (d.conditional) {
            *d_coords01 = d_input.rightCols(bundle.config.label_dim);
        } else {
            d_coords01->setZero(batch, bundle.config.label_dim);
        }
    }
}

} // namespace abrnet::models
