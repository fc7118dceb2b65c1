#include "abrnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>

namespace abrnet::datagen {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool inside(const Vector2d& p, const Vector2d& extents) {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= extents.x() && p.y() <= extents.y();
}

/// Slab test: does segment a-b intersect the axis-aligned box [lo, hi]?
bool segment_hits_box(const Vector2d& a, const Vector2d& b, const Vector2d& lo,
                      const Vector2d& hi) {
    double t0 = 0.0, t1 = 1.0;
    const Vector2d d = b - a;
    for (int axis = 0; axis < 2; ++axis) {
        if (std::abs(d(axis)) < 1e-12) {
            if (a(axis) < lo(axis) || a(axis) > hi(axis)) return false;
        } else {
            double u = (lo(axis) - a(axis)) / d(axis);
            double v = (hi(axis) - a(axis)) / d(axis);
            if (u > v) std::swap(u, v);
            t0 = std::max(t0, u);
            t1 = std::min(t1, v);
            if (t0 > t1) return false;
        }
    }
    return true;
}

} // namespace

// ---------------------------------------------------------------------------
// Environment

void EnvironmentSpec::validate() const {
    if (!(extents.x() > 0.0 && extents.y() > 0.0)) {
        throw ConfigError("EnvironmentSpec: extents must be positive");
    }
    if (wifi_anchors < 1 || uwb_anchors < 0 || obstacle_count < 0 ||
        movable_obstacles < 0) {
        throw ConfigError("EnvironmentSpec: negative counts");
    }
    if (movable_obstacles > obstacle_count) {
        throw ConfigError("EnvironmentSpec: movable_obstacles exceeds obstacle_count");
    }
    if (rssi_channels < 1 || rssi_channels > wifi_anchors) {
        throw ConfigError("EnvironmentSpec: rssi_channels must be in [1, wifi_anchors]");
    }
    if (csi_anchors < 0 || csi_anchors > wifi_anchors) {
        throw ConfigError("EnvironmentSpec: csi_anchors must be in [0, wifi_anchors]");
    }
    if (attenuation_min_db < 0.0 || attenuation_max_db < attenuation_min_db) {
        throw ConfigError("EnvironmentSpec: attenuation range invalid");
    }
    if (shift_region(0) < 0.0 || shift_region(1) < 0.0 ||
        shift_region(2) > extents.x() || shift_region(3) > extents.y() ||
        shift_region(0) >= shift_region(2) || shift_region(1) >= shift_region(3)) {
        throw ConfigError("EnvironmentSpec: shift_region must be a nonempty box inside "
                          "the extents");
    }
    if (!(reference_distance_m > 0.0) || !(path_loss_exponent > 0.0)) {
        throw ConfigError("EnvironmentSpec: path loss parameters must be positive");
    }
    if (obstacle_min_side <= 0.0 || obstacle_max_side < obstacle_min_side) {
        throw ConfigError("EnvironmentSpec: obstacle side range invalid");
    }
}

FloorEnvironment generate_environment(const EnvironmentSpec& spec, std::uint64_t seed) {
    spec.validate();
    FloorEnvironment env;
    env.spec = spec;
    env.seed = seed;

    Rng rng(Rng::derive(seed, "environment"));
    const double L = spec.extents.x(), W = spec.extents.y();

    // Wi-Fi anchors spread along the perimeter with jitter; they mimic
    // wall-mounted access points.
    for (int i = 0; i < spec.wifi_anchors; ++i) {
        const double u = (i + 0.5) / spec.wifi_anchors; // position along perimeter
        const double per = 2.0 * (L + W) * u;
        Vector2d p;
        if (per < L) {
            p = {per, 0.3};
        } else if (per < L + W) {
            p = {L - 0.3, per - L};
        } else if (per < 2 * L + W) {
            p = {L - (per - L - W), W - 0.3};
        } else {
            p = {0.3, W - (per - 2 * L - W)};
        }
        p.x() = std::clamp(p.x() + rng.uniform(-0.4, 0.4), 0.1, L - 0.1);
        p.y() = std::clamp(p.y() + rng.uniform(-0.4, 0.4), 0.1, W - 0.1);
        env.anchors.push_back({p, AnchorKind::Wifi});
    }
    // UWB anchors favor interior coverage.
    for (int i = 0; i < spec.uwb_anchors; ++i) {
        const double u = (i + 0.5) / spec.uwb_anchors;
        Vector2d p{L * (0.2 + 0.6 * u), W * (i % 2 == 0 ? 0.3 : 0.7)};
        p.x() = std::clamp(p.x() + rng.uniform(-0.5, 0.5), 0.1, L - 0.1);
        p.y() = std::clamp(p.y() + rng.uniform(-0.5, 0.5), 0.1, W - 0.1);
        env.anchors.push_back({p, AnchorKind::Uwb});
    }

    auto place_box = [&](double x0, double y0, double x1, double y1) {
        Obstacle ob;
        const double sw = rng.uniform(spec.obstacle_min_side, spec.obstacle_max_side);
        const double sh = rng.uniform(spec.obstacle_min_side, spec.obstacle_max_side);
        const double cx = rng.uniform(x0 + sw / 2, x1 - sw / 2);
        const double cy = rng.uniform(y0 + sh / 2, y1 - sh / 2);
        ob.lo = {cx - sw / 2, cy - sh / 2};
        ob.hi = {cx + sw / 2, cy + sh / 2};
        ob.attenuation_db = rng.uniform(spec.attenuation_min_db, spec.attenuation_max_db);
        ob.phase_shift[0] = rng.uniform(0.5, kPi);
        ob.phase_shift[1] = rng.uniform(0.5, kPi);
        return ob;
    };

    for (int i = 0; i < spec.obstacle_count; ++i) {
        Obstacle ob;
        if (i < spec.movable_obstacles) {
            ob = place_box(spec.shift_region(0), spec.shift_region(1),
                           spec.shift_region(2), spec.shift_region(3));
            ob.movable = true;
        } else {
            ob = place_box(0.0, 0.0, L, W);
        }
        if (!inside(ob.lo, spec.extents) || !inside(ob.hi, spec.extents)) {
            throw ConfigError("generate_environment: obstacle outside extents");
        }
        env.obstacles.push_back(ob);
    }
    return env;
}

FloorEnvironment shift_environment(const FloorEnvironment& source, std::uint64_t seed) {
    FloorEnvironment target = source;
    Rng rng(Rng::derive(seed, "shift"));
    const auto& region = source.spec.shift_region;
    for (Obstacle& ob : target.obstacles) {
        if (!ob.movable) continue;
        const double angle = rng.uniform(0.0, 2.0 * kPi);
        const Vector2d delta{source.spec.move_distance * std::cos(angle),
                             source.spec.move_distance * std::sin(angle)};
        const Vector2d size = ob.hi - ob.lo;
        Vector2d lo = ob.lo + delta;
        lo.x() = std::clamp(lo.x(), region(0), region(2) - size.x());
        lo.y() = std::clamp(lo.y(), region(1), region(3) - size.y());
        ob.lo = lo;
        ob.hi = lo + size;
    }
    return target;
}

// ---------------------------------------------------------------------------
// Trajectories

Trajectory simulate_trajectory(const FloorEnvironment& env, const TrajectorySpec& spec,
                               long n_steps, std::uint64_t seed) {
    if (n_steps < 1) {
        throw ConfigError("simulate_trajectory: n_steps must be >= 1");
    }
    if (!(spec.dt > 0.0) || !(spec.max_speed > 0.0)) {
        throw ConfigError("simulate_trajectory: dt and max_speed must be positive");
    }
    Rng rng(Rng::derive(seed, "trajectory"));
    const Vector2d extents = env.spec.extents;
    const double m = std::min({spec.margin, extents.x() / 4, extents.y() / 4});

    auto pick_waypoint = [&] {
        return Vector2d{rng.uniform(m, extents.x() - m), rng.uniform(m, extents.y() - m)};
    };

    Trajectory traj;
    traj.dt = spec.dt;
    traj.points.reserve(static_cast<std::size_t>(n_steps));

    Vector2d p = pick_waypoint();
    Vector2d wp = pick_waypoint();
    Vector2d v = Vector2d::Zero();
    for (long step = 0; step < n_steps; ++step) {
        if ((wp - p).norm() < 0.4) wp = pick_waypoint();
        const Vector2d dir = (wp - p).normalized();
        v = spec.turn_smoothing * v + (1.0 - spec.turn_smoothing) * spec.max_speed * dir;
        const double speed = v.norm();
        if (speed > spec.max_speed) v *= spec.max_speed / speed;
        p += v * spec.dt;
        for (int axis = 0; axis < 2; ++axis) {
            if (p(axis) < 0.05) {
                p(axis) = 0.05;
                v(axis) = std::abs(v(axis));
            } else if (p(axis) > extents(axis) - 0.05) {
                p(axis) = extents(axis) - 0.05;
                v(axis) = -std::abs(v(axis));
            }
        }
        traj.points.push_back(p);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Signals

int count_obstacle_crossings(const FloorEnvironment& env, const Vector2d& a,
                             const Vector2d& b) {
    int n = 0;
    for (const Obstacle& ob : env.obstacles) {
        if (segment_hits_box(a, b, ob.lo, ob.hi)) ++n;
    }
    return n;
}

double total_attenuation_db(const FloorEnvironment& env, const Vector2d& a,
                            const Vector2d& b) {
    double att = 0.0;
    for (const Obstacle& ob : env.obstacles) {
        if (segment_hits_box(a, b, ob.lo, ob.hi)) att += ob.attenuation_db;
    }
    return att;
}

MatrixXd compute_step_signals(const FloorEnvironment& env, const Trajectory& traj,
                              std::uint64_t noise_seed) {
    const EnvironmentSpec& spec = env.spec;
    const auto n = static_cast<Eigen::Index>(traj.points.size());
    for (const Vector2d& p : traj.points) {
        if (!inside(p, spec.extents)) {
            throw ContractViolation("compute_step_signals: trajectory leaves the floor");
        }
    }

    std::vector<const Anchor*> wifi, uwb;
    for (const Anchor& a : env.anchors) {
        (a.kind == AnchorKind::Wifi ? wifi : uwb).push_back(&a);
    }
    if (static_cast<int>(wifi.size()) < spec.rssi_channels ||
        static_cast<int>(wifi.size()) < spec.csi_anchors ||
        static_cast<int>(uwb.size()) != spec.uwb_anchors) {
        throw ContractViolation("compute_step_signals: anchor layout does not match spec");
    }

    Rng noise(Rng::derive(noise_seed, "signal_noise"));
    MatrixXd out(n, spec.signal_dim());

    auto path_loss_dbm = [&](double dist, double attenuation) {
        const double d = std::max(dist, spec.reference_distance_m);
        return spec.tx_power_dbm -
               10.0 * spec.path_loss_exponent *
                   std::log10(d / spec.reference_distance_m) -
               attenuation;
    };

    Vector2d prev_v = Vector2d::Zero();
    double prev_heading = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector2d p = traj.points[static_cast<std::size_t>(i)];
        Eigen::Index col = 0;

        for (int a = 0; a < spec.rssi_channels; ++a) {
            const Vector2d q = wifi[static_cast<std::size_t>(a)]->position;
            const double att = total_attenuation_db(env, p, q);
            out(i, col++) = path_loss_dbm((p - q).norm(), att) +
                            noise.normal(0.0, spec.noise_rssi_db);
        }

        for (int a = 0; a < spec.csi_anchors; ++a) {
            const Vector2d q = wifi[static_cast<std::size_t>(a)]->position;
            const double dist = (p - q).norm();
            const double amp = 1.0 / (1.0 + dist / spec.csi_amplitude_falloff_m);
            double phase_offset[2] = {0.0, 0.0};
            for (const Obstacle& ob : env.obstacles) {
                if (segment_hits_box(p, q, ob.lo, ob.hi)) {
                    phase_offset[0] += ob.phase_shift[0];
                    phase_offset[1] += ob.phase_shift[1];
                }
            }
            for (int s = 0; s < 2; ++s) {
                const double phase =
                    2.0 * kPi * dist / spec.csi_wavelengths_m[s] + phase_offset[s];
                out(i, col++) = amp * std::cos(phase) + noise.normal(0.0, spec.noise_csi);
                out(i, col++) = amp * std::sin(phase) + noise.normal(0.0, spec.noise_csi);
            }
        }

        for (int a = 0; a < spec.uwb_anchors; ++a) {
            const Vector2d q = uwb[static_cast<std::size_t>(a)]->position;
            const double dist = (p - q).norm();
            out(i, col++) = dist + noise.normal(0.0, spec.noise_uwb_range_m);
            out(i, col++) = path_loss_dbm(dist, total_attenuation_db(env, p, q)) +
                            noise.normal(0.0, spec.noise_uwb_power_db);
        }

        // IMU block: finite differences of the trajectory itself.
        const Vector2d prev_p =
            i > 0 ? traj.points[static_cast<std::size_t>(i - 1)] : p;
        const Vector2d v = (p - prev_p) / traj.dt;
        const double speed = v.norm();
        const double heading = speed > 1e-9 ? std::atan2(v.y(), v.x()) : prev_heading;
        double turn = heading - prev_heading;
        while (turn > kPi) turn -= 2.0 * kPi;
        while (turn < -kPi) turn += 2.0 * kPi;
        const Vector2d acc = (v - prev_v) / traj.dt;
        const double imu[9] = {v.x(),
                               v.y(),
                               speed,
                               std::cos(heading),
                               std::sin(heading),
                               turn / traj.dt,
                               acc.x(),
                               acc.y(),
                               acc.norm()};
        for (double feature : imu) {
            out(i, col++) = feature + noise.normal(0.0, spec.noise_imu);
        }
        prev_v = v;
        prev_heading = heading;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Datasets

DomainDataset::DomainDataset(MatrixXd windows, MatrixXd labels, LabelMode mode,
                             DatasetMeta meta)
    : windows_(std::move(windows)), labels_(std::move(labels)), mode_(mode),
      meta_(std::move(meta)) {
    if (windows_.rows() != labels_.rows()) {
        throw ContractViolation("DomainDataset: window/label count mismatch");
    }
}

const MatrixXd& DomainDataset::labels_for_training() const {
    if (mode_ == LabelMode::EvalOnly) {
        throw ContractViolation("DomainDataset '" + meta_.name +
                                "': labels are evaluation-only and cannot feed training");
    }
    return labels_;
}

const MatrixXd& DomainDataset::labels_for_eval() const { return labels_; }

DomainDataset make_windows(const MatrixXd& step_signals, const Trajectory& traj,
                           int window_length, LabelMode mode, DatasetMeta meta) {
    const Eigen::Index n_steps = step_signals.rows();
    const Eigen::Index dim = step_signals.cols();
    if (n_steps < window_length) {
        throw ConfigError("make_windows: trajectory shorter than one window");
    }
    const Eigen::Index count = n_steps - window_length + 1;
    MatrixXd windows(count, window_length * dim);
    MatrixXd labels(count, 2);
    for (Eigen::Index w = 0; w < count; ++w) {
        for (int t = 0; t < window_length; ++t) {
            windows.row(w).segment(t * dim, dim) = step_signals.row(w + t);
        }
        labels.row(w) = traj.points[static_cast<std::size_t>(w + window_length - 1)];
    }
    meta.window_length = window_length;
    meta.signal_dim = static_cast<int>(dim);
    meta.label_dim = 2;
    return DomainDataset(std::move(windows), std::move(labels), mode, std::move(meta));
}

void DomainPairSpec::validate() const {
    env.validate();
    if (windows_per_domain < 1 || source_test_windows < 1) {
        throw ConfigError("DomainPairSpec: window counts must be >= 1");
    }
    if (trajectories_per_domain < 1) {
        throw ConfigError("DomainPairSpec: trajectories_per_domain must be >= 1");
    }
    if (window_length < 1) {
        throw ConfigError("DomainPairSpec: window_length must be >= 1");
    }
}

namespace {

/// Concatenated windows from several independent trajectory segments.
DomainDataset build_split(const FloorEnvironment& env, const DomainPairSpec& spec,
                          long total_windows, int segments, const std::string& tag,
                          LabelMode mode, const std::string& name) {
    const long per = total_windows / segments;
    std::vector<DomainDataset> parts;
    long produced = 0;
    for (int k = 0; k < segments; ++k) {
        const long want = (k == segments - 1) ? total_windows - produced : per;
        if (want <= 0) continue;
        const long steps = want + spec.window_length - 1;
        const std::uint64_t traj_seed =
            Rng::derive(spec.seed, tag + "_traj_" + std::to_string(k));
        const std::uint64_t noise_seed =
            Rng::derive(spec.seed, tag + "_noise_" + std::to_string(k));
        Trajectory traj = simulate_trajectory(env, spec.traj, steps, traj_seed);
        MatrixXd signals = compute_step_signals(env, traj, noise_seed);
        DatasetMeta meta;
        meta.name = name;
        meta.extents = env.spec.extents;
        meta.seed = spec.seed;
        parts.push_back(make_windows(signals, traj, spec.window_length, mode, meta));
        produced += parts.back().size();
    }

    Eigen::Index total = 0;
    for (const auto& p : parts) total += p.size();
    MatrixXd windows(total, parts.front().windows().cols());
    MatrixXd labels(total, 2);
    Eigen::Index row = 0;
    for (const auto& p : parts) {
        windows.middleRows(row, p.size()) = p.windows();
        labels.middleRows(row, p.size()) = p.labels_for_eval();
        row += p.size();
    }
    DatasetMeta meta = parts.front().meta();
    return DomainDataset(std::move(windows), std::move(labels), mode, std::move(meta));
}

void standardize(DomainDataset& ds, const VectorXd& mean, const VectorXd& std,
                 int window_length, int signal_dim) {
    MatrixXd windows = ds.windows();
    for (int t = 0; t < window_length; ++t) {
        auto block = windows.middleCols(t * signal_dim, signal_dim);
        block.rowwise() -= mean.transpose();
        block.array().rowwise() /= std.transpose().array();
    }
    DatasetMeta meta = ds.meta();
    meta.norm_mean = mean;
    meta.norm_std = std;
    ds = DomainDataset(std::move(windows), ds.labels_for_eval(), ds.label_mode(),
                       std::move(meta));
}

} // namespace

DomainPair make_domain_pair(const DomainPairSpec& spec) {
    spec.validate();
    DomainPair pair;
    pair.source_env = generate_environment(spec.env, Rng::derive(spec.seed, "env"));
    pair.target_env = spec.null_shift
                          ? pair.source_env
                          : shift_environment(pair.source_env,
                                              Rng::derive(spec.seed, "env_shift"));

    const int test_segments = std::max(1, spec.trajectories_per_domain / 5);
    pair.source_train =
        build_split(pair.source_env, spec, spec.windows_per_domain,
                    spec.trajectories_per_domain, "src", LabelMode::Training,
                    "source_train");
    pair.source_test = build_split(pair.source_env, spec, spec.source_test_windows,
                                   test_segments, "srctest", LabelMode::Training,
                                   "source_test");
    pair.target = build_split(pair.target_env, spec, spec.windows_per_domain,
                              spec.trajectories_per_domain, "tgt", LabelMode::EvalOnly,
                              "target");

    // Source-domain standardization, shared by every split: the target
    // transform must not peek at target statistics.
    const int dim = spec.env.signal_dim();
    const Eigen::Index rows = pair.source_train.size();
    VectorXd mean = VectorXd::Zero(dim), var = VectorXd::Zero(dim);
    for (int t = 0; t < spec.window_length; ++t) {
        const auto block = pair.source_train.windows().middleCols(t * dim, dim);
        mean += block.colwise().sum().transpose();
    }
    mean /= static_cast<double>(rows * spec.window_length);
    for (int t = 0; t < spec.window_length; ++t) {
        const auto block = pair.source_train.windows().middleCols(t * dim, dim);
        var += (block.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
    }
    var /= static_cast<double>(rows * spec.window_length);
    VectorXd stddev = var.array().sqrt().max(1e-6).matrix();

    standardize(pair.source_train, mean, stddev, spec.window_length, dim);
    standardize(pair.source_test, mean, stddev, spec.window_length, dim);
    standardize(pair.target, mean, stddev, spec.window_length, dim);
    return pair;
}

// ---------------------------------------------------------------------------
// Image task

void ImageTaskSpec::validate() const {
    if (size < 8 || size % 8 != 0) {
        throw ConfigError("ImageTaskSpec: size must be a positive multiple of 8");
    }
    if (images_per_domain < 1) {
        throw ConfigError("ImageTaskSpec: images_per_domain must be >= 1");
    }
    if (!(radius_min_px > 0.0) || radius_max_px < radius_min_px) {
        throw ConfigError("ImageTaskSpec: radius range invalid");
    }
    if (radius_max_px * 2.0 + 4.0 >= size) {
        throw ConfigError("ImageTaskSpec: shapes do not fit in the image");
    }
}

namespace {

/// Smooth value noise: bilinear interpolation of an 8x8 lattice of uniforms.
void fill_value_noise(Eigen::Ref<Eigen::VectorXd> plane, int size, double amplitude,
                      Rng& rng) {
    constexpr int kGrid = 8;
    double lattice[kGrid + 1][kGrid + 1];
    for (int gy = 0; gy <= kGrid; ++gy) {
        for (int gx = 0; gx <= kGrid; ++gx) {
            lattice[gy][gx] = rng.uniform(0.0, amplitude);
        }
    }
    const double scale = static_cast<double>(kGrid) / size;
    for (int y = 0; y < size; ++y) {
        const double fy = y * scale;
        const int gy = std::min(static_cast<int>(fy), kGrid - 1);
        const double ty = fy - gy;
        for (int x = 0; x < size; ++x) {
            const double fx = x * scale;
            const int gx = std::min(static_cast<int>(fx), kGrid - 1);
            const double tx = fx - gx;
            const double top = lattice[gy][gx] * (1 - tx) + lattice[gy][gx + 1] * tx;
            const double bot = lattice[gy + 1][gx] * (1 - tx) + lattice[gy + 1][gx + 1] * tx;
            plane(y * size + x) = top * (1 - ty) + bot * ty;
        }
    }
}

} // namespace

ImagePair generate_image_task(const ImageTaskSpec& spec) {
    spec.validate();
    const int size = spec.size;
    const Eigen::Index n = spec.images_per_domain;
    const Eigen::Index plane = Eigen::Index(size) * size;

    // One shared label stream: both domains get identical label marginals.
    Rng label_rng(Rng::derive(spec.seed, "labels"));
    MatrixXd labels(n, 3);
    std::vector<double> radii(static_cast<std::size_t>(n));
    std::vector<Vector2d> centers(static_cast<std::size_t>(n));
    const double margin = spec.radius_max_px + 1.5;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = label_rng.uniform(spec.radius_min_px, spec.radius_max_px);
        const double cx = label_rng.uniform(margin, size - margin);
        const double cy = label_rng.uniform(margin, size - margin);
        radii[static_cast<std::size_t>(i)] = r;
        centers[static_cast<std::size_t>(i)] = {cx, cy};
        labels(i, 0) = (r - spec.radius_min_px) /
                       (spec.radius_max_px - spec.radius_min_px);
        labels(i, 1) = cx / size;
        labels(i, 2) = cy / size;
    }

    auto render_domain = [&](bool noisy_background, const char* tag) {
        Rng bg_rng(Rng::derive(spec.seed, tag));
        MatrixXd images(n, 3 * plane);
        Eigen::VectorXd channel(plane);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double r2 = radii[static_cast<std::size_t>(i)] *
                              radii[static_cast<std::size_t>(i)];
            const Vector2d c = centers[static_cast<std::size_t>(i)];
            for (int ch = 0; ch < 3; ++ch) {
                if (noisy_background) {
                    fill_value_noise(channel, size, spec.target_noise_amplitude, bg_rng);
                } else {
                    channel.setConstant(spec.source_background);
                }
                const double fg = spec.foreground * (1.0 - 0.15 * ch);
                for (int y = 0; y < size; ++y) {
                    for (int x = 0; x < size; ++x) {
                        const double dx = x + 0.5 - c.x();
                        const double dy = y + 0.5 - c.y();
                        if (dx * dx + dy * dy <= r2) channel(y * size + x) = fg;
                    }
                }
                images.row(i).segment(ch * plane, plane) = channel;
            }
        }
        return images;
    };

    DatasetMeta meta;
    meta.extents = VectorXd::Ones(3);
    meta.window_length = 1;
    meta.signal_dim = static_cast<int>(3 * plane);
    meta.label_dim = 3;
    meta.seed = spec.seed;

    ImagePair pair;
    DatasetMeta src_meta = meta;
    src_meta.name = "image_source";
    pair.source = DomainDataset(render_domain(false, "bg_source"), labels,
                                LabelMode::Training, std::move(src_meta));
    DatasetMeta tgt_meta = meta;
    tgt_meta.name = "image_target";
    pair.target = DomainDataset(render_domain(true, "bg_target"), labels,
                                LabelMode::EvalOnly, std::move(tgt_meta));
    return pair;
}

// ---------------------------------------------------------------------------
// Files

namespace {

constexpr char kMagic[4] = {'A', 'B', 'R', 'D'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const char* what) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw ParseError(std::string("dataset file truncated reading ") + what);
    return value;
}

void write_matrix(std::ofstream& out, const MatrixXd& m, std::uint64_t& hash) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row[static_cast<std::size_t>(c)] = m(r, c);
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(double)));
        hash = fnv1a(row.data(), row.size() * sizeof(double), hash);
    }
}

MatrixXd read_matrix(std::ifstream& in, Eigen::Index rows, Eigen::Index cols,
                     std::uint64_t& hash, const char* what) {
    MatrixXd m(rows, cols);
    std::vector<double> row(static_cast<std::size_t>(cols));
    for (Eigen::Index r = 0; r < rows; ++r) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
        if (!in) throw ParseError(std::string("dataset file truncated reading ") + what);
        hash = fnv1a(row.data(), row.size() * sizeof(double), hash);
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

void write_vector(std::ofstream& out, const VectorXd& v) {
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

VectorXd read_vector(std::ifstream& in, const char* what) {
    const auto size = read_pod<std::uint64_t>(in, what);
    if (size > (1ULL << 32)) throw ParseError("dataset file: implausible vector size");
    VectorXd v(static_cast<Eigen::Index>(size));
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(size * sizeof(double)));
    if (!in) throw ParseError(std::string("dataset file truncated reading ") + what);
    return v;
}

} // namespace

void save_dataset(const DomainDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_pod<std::uint32_t>(out, dataset.label_mode() == LabelMode::EvalOnly ? 1 : 0);
    const DatasetMeta& meta = dataset.meta();
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(meta.window_length));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(meta.signal_dim));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(meta.label_dim));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(dataset.size()));
    write_pod<std::uint64_t>(out, meta.seed);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(meta.name.size()));
    out.write(meta.name.data(), static_cast<std::streamsize>(meta.name.size()));
    write_vector(out, meta.extents);
    write_vector(out, meta.norm_mean);
    write_vector(out, meta.norm_std);

    std::uint64_t hash = 1469598103934665603ULL;
    write_matrix(out, dataset.windows(), hash);
    write_matrix(out, dataset.labels_for_eval(), hash);
    write_pod(out, hash);
    if (!out) throw IoError("failed writing dataset to '" + path + "'");
}

DomainDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw ParseError("'" + path + "' is not a dataset file (bad magic)");
    }
    const auto version = read_pod<std::uint32_t>(in, "version");
    if (version != kVersion) {
        throw ParseError("dataset '" + path + "': unsupported format version " +
                         std::to_string(version));
    }
    const auto mode_raw = read_pod<std::uint32_t>(in, "mode");
    DatasetMeta meta;
    meta.window_length = static_cast<int>(read_pod<std::uint32_t>(in, "window_length"));
    meta.signal_dim = static_cast<int>(read_pod<std::uint32_t>(in, "signal_dim"));
    meta.label_dim = static_cast<int>(read_pod<std::uint32_t>(in, "label_dim"));
    const auto count = read_pod<std::uint64_t>(in, "count");
    meta.seed = read_pod<std::uint64_t>(in, "seed");
    const auto name_len = read_pod<std::uint32_t>(in, "name length");
    if (name_len > 4096) throw ParseError("dataset file: implausible name length");
    meta.name.resize(name_len);
    in.read(meta.name.data(), name_len);
    if (!in) throw ParseError("dataset file truncated reading name");
    meta.extents = read_vector(in, "extents");
    meta.norm_mean = read_vector(in, "norm_mean");
    meta.norm_std = read_vector(in, "norm_std");

    if (meta.window_length < 1 || meta.signal_dim < 1 || meta.label_dim < 1 ||
        count > (1ULL << 40)) {
        throw ParseError("dataset '" + path + "': implausible header fields");
    }

    std::uint64_t hash = 1469598103934665603ULL;
    const auto rows = static_cast<Eigen::Index>(count);
    MatrixXd windows = read_matrix(
        in, rows, Eigen::Index(meta.window_length) * meta.signal_dim, hash, "windows");
    MatrixXd labels = read_matrix(in, rows, meta.label_dim, hash, "labels");
    const auto stored_hash = read_pod<std::uint64_t>(in, "checksum");
    if (stored_hash != hash) {
        throw ParseError("dataset '" + path + "': content checksum mismatch");
    }
    return DomainDataset(std::move(windows), std::move(labels),
                         mode_raw == 1 ? LabelMode::EvalOnly : LabelMode::Training,
                         std::move(meta));
}

void export_dataset_csv(const DomainDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << std::setprecision(17);
    const Eigen::Index in_dim = dataset.windows().cols();
    for (Eigen::Index c = 0; c < in_dim; ++c) out << "x" << c << ",";
    for (Eigen::Index c = 0; c < dataset.labels_for_eval().cols(); ++c) {
        out << "label" << c << (c + 1 < dataset.labels_for_eval().cols() ? "," : "");
    }
    out << "\n";
    for (Eigen::Index r = 0; r < dataset.size(); ++r) {
        for (Eigen::Index c = 0; c < in_dim; ++c) out << dataset.windows()(r, c) << ",";
        const auto& labels = dataset.labels_for_eval();
        for (Eigen::Index c = 0; c < labels.cols(); ++c) {
            out << labels(r, c) << (c + 1 < labels.cols() ? "," : "");
        }
        out << "\n";
    }
    if (!out) throw IoError("failed writing CSV to '" + path + "'");
}

} // namespace abrnet::datagen
