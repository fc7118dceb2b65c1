#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abrnet/common.hpp"
#include "abrnet/rng.hpp"

namespace abrnet::datagen {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Environment

enum class AnchorKind { Wifi, Uwb };

struct Anchor {
    Vector2d position;
    AnchorKind kind;
};

/// Axis-aligned attenuating rectangle. Movable obstacles are the ones the
/// target environment translates (the "furniture was moved" shift).
struct Obstacle {
    Vector2d lo;
    Vector2d hi;
    double attenuation_db = 0.0;
    double phase_shift[2] = {0.0, 0.0}; // per synthetic subcarrier
    bool movable = false;
};

struct EnvironmentSpec {
    Vector2d extents{20.0, 10.0}; // (L, W) meters
    int wifi_anchors = 11;
    int uwb_anchors = 3;
    int obstacle_count = 12;
    int movable_obstacles = 6;
    /// Rectangle (x0, y0, x1, y1) containing the movable obstacles; they are
    /// re-placed inside it for the target environment.
    Eigen::Vector4d shift_region{6.0, 1.0, 17.0, 9.0};
    double move_distance = 3.0; // target translation magnitude per obstacle
    double obstacle_min_side = 0.6;
    double obstacle_max_side = 2.4;
    double attenuation_min_db = 3.0;
    double attenuation_max_db = 8.0;

    // Signal model.
    double tx_power_dbm = -30.0;       // P0: RSSI at the reference distance
    double path_loss_exponent = 2.2;   // eta
    double reference_distance_m = 0.1; // d0
    int rssi_channels = 8;             // leading wifi anchors with an RSSI dim
    int csi_anchors = 10;              // leading wifi anchors with CSI features
    double csi_wavelengths_m[2] = {2.3, 5.1}; // synthetic subcarrier scales
    double csi_amplitude_falloff_m = 10.0;
    double noise_rssi_db = 0.8;
    double noise_csi = 0.03;
    double noise_uwb_range_m = 0.08;
    double noise_uwb_power_db = 0.8;
    double noise_imu = 0.02;

    void validate() const;
    /// 8 + 40 + 6 + 9 = 63 with the default anchor layout.
    int signal_dim() const { return rssi_channels + 4 * csi_anchors + 2 * uwb_anchors + 9; }
};

struct FloorEnvironment {
    EnvironmentSpec spec;
    std::vector<Anchor> anchors;
    std::vector<Obstacle> obstacles;
    std::uint64_t seed = 0;
};

/// Deterministic layout: anchors around the floor perimeter plus interior
/// fill, obstacles inside the extents (movable ones inside the shift region).
FloorEnvironment generate_environment(const EnvironmentSpec& spec, std::uint64_t seed);

/// The paired changed environment: every movable obstacle is translated by
/// spec.move_distance in a random direction, clipped to the shift region.
/// Anchors and immovable obstacles stay put.
FloorEnvironment shift_environment(const FloorEnvironment& source, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectorySpec {
    double dt = 0.1;        // seconds
    double max_speed = 1.0; // m/s
    double turn_smoothing = 0.85;
    double margin = 0.3; // waypoints keep this distance from walls
};

struct Trajectory {
    std::vector<Vector2d> points;
    double dt = 0.1;
};

/// Random-waypoint walk with velocity smoothing; every consecutive step is at
/// most max_speed * dt long and stays inside the extents.
Trajectory simulate_trajectory(const FloorEnvironment& env, const TrajectorySpec& spec,
                               long n_steps, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Signals

/// Per-step raw signal matrix (n_steps x signal_dim). Layout:
///   [rssi_channels] RSSI dBm via log-distance path loss minus obstacle
///                   attenuation, [4*csi_anchors] CSI-like sin/cos features of
///                   distance with obstacle-dependent phase, [2*uwb_anchors]
///                   noisy range + power per UWB anchor, [9] finite-difference
///                   IMU features (velocity, speed, heading, turn rate,
///                   acceleration).
/// Noise is drawn from noise_seed, so identical (env, trajectory, seed)
/// reproduce identical signals.
MatrixXd compute_step_signals(const FloorEnvironment& env, const Trajectory& traj,
                              std::uint64_t noise_seed);

/// Number of obstacles whose rectangle intersects the segment a-b.
int count_obstacle_crossings(const FloorEnvironment& env, const Vector2d& a,
                             const Vector2d& b);
double total_attenuation_db(const FloorEnvironment& env, const Vector2d& a,
                            const Vector2d& b);

// ---------------------------------------------------------------------------
// Datasets

/// Whether a dataset's labels may feed training. Target-domain labels are
/// held out for evaluation only; the training-path accessor enforces it.
enum class LabelMode { Training, EvalOnly };

struct DatasetMeta {
    std::string name;
    VectorXd extents;    // label-space upper bounds (L, W) or unit for images
    int window_length = 10;
    int signal_dim = 63;
    int label_dim = 2;
    std::uint64_t seed = 0;
    VectorXd norm_mean; // per-signal-dim standardization (source statistics)
    VectorXd norm_std;
};

class DomainDataset {
public:
    DomainDataset() = default;
    DomainDataset(MatrixXd windows, MatrixXd labels, LabelMode mode, DatasetMeta meta);

    Eigen::Index size() const { return windows_.rows(); }
    const MatrixXd& windows() const { return windows_; }
    const DatasetMeta& meta() const { return meta_; }
    LabelMode label_mode() const { return mode_; }

    /// Supervision path: throws ContractViolation when the labels are
    /// evaluation-only (the unsupervised-adaptation contract).
    const MatrixXd& labels_for_training() const;

    /// Metric path: always available.
    const MatrixXd& labels_for_eval() const;

private:
    MatrixXd windows_;
    MatrixXd labels_;
    LabelMode mode_ = LabelMode::Training;
    DatasetMeta meta_;
};

/// Sliding windows (length window_length, stride 1) over the step signals;
/// each window's label is its last step's coordinate.
DomainDataset make_windows(const MatrixXd& step_signals, const Trajectory& traj,
                           int window_length, LabelMode mode, DatasetMeta meta);

// ---------------------------------------------------------------------------
// Domain pairs

struct DomainPairSpec {
    EnvironmentSpec env;
    TrajectorySpec traj;
    long windows_per_domain = 20000;
    int trajectories_per_domain = 10; // independent segments per domain
    long source_test_windows = 4000;  // held-out source segments
    int window_length = 10;
    bool null_shift = false; // target uses the unchanged source environment
    std::uint64_t seed = 7;

    void validate() const;
};

struct DomainPair {
    DomainDataset source_train; // labeled
    DomainDataset source_test;  // labeled, fresh trajectories, same environment
    DomainDataset target;       // labels held out (EvalOnly)
    FloorEnvironment source_env;
    FloorEnvironment target_env;
};

/// The synthetic source -> target benchmark. Signals are standardized with
/// source-domain statistics (same affine map applied to every split, recorded
/// in the metadata); labels stay in meters.
DomainPair make_domain_pair(const DomainPairSpec& spec);

// ---------------------------------------------------------------------------
// Image regression task

struct ImageTaskSpec {
    int size = 32; // square images, must be a multiple of 8
    long images_per_domain = 2000;
    double radius_min_px = 3.0;
    double radius_max_px = 8.0;
    double foreground = 0.9;
    double source_background = 0.2; // flat
    double target_noise_amplitude = 0.5; // procedural value noise
    std::uint64_t seed = 11;

    void validate() const;
};

struct ImagePair {
    DomainDataset source; // labeled
    DomainDataset target; // labels held out
};

/// Filled-disc renders with labels (scale, x, y) in [0,1]^3. Both domains use
/// the same label sampler stream (identical label marginals); only the
/// background generation differs (flat vs procedural noise).
ImagePair generate_image_task(const ImageTaskSpec& spec);

// ---------------------------------------------------------------------------
// Files

/// Binary dataset archive: fixed header, row-major window block, label block,
/// trailing content checksum. Round-trips bitwise.
void save_dataset(const DomainDataset& dataset, const std::string& path);
DomainDataset load_dataset(const std::string& path);

/// Full-precision CSV (windows then labels per row) for inspection.
void export_dataset_csv(const DomainDataset& dataset, const std::string& path);

} // namespace abrnet::datagen
