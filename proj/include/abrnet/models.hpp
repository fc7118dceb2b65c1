#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "abrnet/nn.hpp"

namespace abrnet::models {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class InputKind { Sequence, Image };
enum class Head { Hat, Tilde };

/// The six named parameter groups. F is the feature encoder; G/R are the two
/// affine layers of each regressor head (condition layer and output layer);
/// D is the domain discriminator.
enum class Group { F = 0, GHat, RHat, GTilde, RTilde, D };

inline constexpr std::array<Group, 6> kAllGroups = {
    Group::F, Group::GHat, Group::RHat, Group::GTilde, Group::RTilde, Group::D};

const char* group_name(Group g);

struct ModelConfig {
    InputKind input_kind = InputKind::Sequence;

    // Sequence (RF window) input.
    int window_length = 10;
    int signal_dim = 63;

    // Image input.
    int image_height = 32;
    int image_width = 32;
    int image_channels = 3;

    int feature_dim = 512;    // encoder output width (must be even for sequence)
    int condition_dim = 64;   // k, width of the condition vector g
    int label_dim = 2;        // regression output width
    int discriminator_hidden = 64;

    /// Per-dimension label upper bounds used to normalize predictions into
    /// [0, 1] for the conditional vector and the discriminator input. For the
    /// floor task this is (L, W) in meters; image labels are already unit
    /// scaled.
    VectorXd label_extents = (VectorXd(2) << 20.0, 10.0).finished();

    /// When false the discriminator sees features only (used by the
    /// feature-level adversarial baseline).
    bool discriminator_conditional = true;

    void validate() const; // throws ConfigError
    Eigen::Index input_dim() const;
};

bool operator==(const ModelConfig& a, const ModelConfig& b);
inline bool operator!=(const ModelConfig& a, const ModelConfig& b) { return !(a == b); }

/// One regressor head: condition layer G (feature -> k) and output layer R
/// (k -> label_dim) with a ReLU between them.
struct RegressorHead {
    nn::Linear condition;
    nn::Linear output;

    struct Cache {
        MatrixXd features;  // forward input
        MatrixXd g;         // pre-activation condition, B x k
        MatrixXd act;       // relu(g)
        MatrixXd scaled;    // l ./ extents, pre-clamp
    };
};

/// Domain discriminator: two affine layers with ReLU between and a sigmoid
/// output clamped into [kProbEps, 1 - kProbEps].
struct Discriminator {
    nn::Linear fc1;
    nn::Linear fc2;
    bool conditional = true;

    struct Cache {
        MatrixXd input; // concatenated (features, coords01) or features alone
        MatrixXd z1;    // pre-ReLU
        MatrixXd a1;
        VectorXd sig;   // unclamped sigmoid output
    };
};

/// Batch form of the per-sample (g, l, h) triple: g is the pre-activation
/// condition vector, l the raw coordinate prediction (floor units), and h the
/// conditional vector [sigmoid(g), clamp01(l / extents)] used by the soft
/// similarity.
struct RegressorResult {
    MatrixXd g; // B x k
    MatrixXd l; // B x label_dim
    MatrixXd h; // B x (k + label_dim), entries in [0, 1]
};

using EncoderCache = std::variant<nn::BiLstm::Cache, nn::ConvEncoder::Cache>;

struct ModelBundle {
    ModelConfig config;
    std::variant<nn::BiLstm, nn::ConvEncoder> encoder;
    RegressorHead hat;
    RegressorHead tilde;
    Discriminator disc;

    nn::ParamRefs group(Group g);
    std::uint64_t group_checksum(Group g) const;
    std::array<std::uint64_t, 6> checksums() const;
    void zero_all_grads();
};

/// Deterministic construction: the same (config, seed) yields byte-identical
/// parameters. Each group draws from its own derived stream, so the two heads
/// start different even though they share an architecture.
ModelBundle build_models(const ModelConfig& config, std::uint64_t seed);

// --- Inference-style entry points (no caches) ------------------------------

MatrixXd extract_features(const ModelBundle& bundle, const MatrixXd& inputs);
RegressorResult forward_regressor(const ModelBundle& bundle, Head head,
                                  const MatrixXd& features);
/// coords01 must already be normalized into [0,1] (ignored for a
/// non-conditional discriminator). Returns probabilities strictly in (0,1).
VectorXd forward_discriminator(const ModelBundle& bundle, const MatrixXd& features,
                               const MatrixXd& coords01);

// --- Training-path helpers (caches + gradient accumulation) ----------------

MatrixXd encoder_forward(const ModelBundle& bundle, const MatrixXd& inputs,
                         EncoderCache* cache);
void encoder_backward(ModelBundle& bundle, const MatrixXd& inputs,
                      const EncoderCache& cache, const MatrixXd& d_features);

RegressorResult head_forward(const ModelBundle& bundle, Head head,
                             const MatrixXd& features, RegressorHead::Cache* cache);
/// Backpropagates the (optional) gradients w.r.t. h and w.r.t. raw l through
/// a head, accumulating its parameter gradients; returns the gradient w.r.t.
/// the input features.
MatrixXd head_backward(ModelBundle& bundle, Head head, const RegressorHead::Cache& cache,
                       const MatrixXd* d_h, const MatrixXd* d_l);

VectorXd disc_forward(const ModelBundle& bundle, const MatrixXd& features,
                      const MatrixXd& coords01, Discriminator::Cache* cache);
/// d_prob is the gradient w.r.t. the clamped probability output. Gradients
/// w.r.t. the inputs are written to d_features / d_coords01 when non-null.
void disc_backward(ModelBundle& bundle, const Discriminator::Cache& cache,
                   const VectorXd& d_prob, MatrixXd* d_features, MatrixXd* d_coords01);

/// clamp01(l ./ extents): the coordinate normalization used for both the
/// conditional vector and the discriminator input.
MatrixXd normalize_coords(const MatrixXd& l, const VectorXd& extents);

const char* to_string(InputKind k);
InputKind input_kind_from_string(const std::string& s);
Head head_from_string(const std::string& s);

} // namespace abrnet::models
