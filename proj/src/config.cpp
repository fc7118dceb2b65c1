#include "abrnet/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace abrnet::config {

namespace {

[[noreturn]] void field_error(const std::string& path, const std::string& key,
                              const std::string& expected) {
    const std::string at = path.empty() ? key : path + "." + key;
    throw ConfigError("config error at " + at + ": expected " + expected);
}

void check_unknown(const json& j, const std::string& path,
                   const std::set<std::string>& allowed) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.contains(key)) {
            const std::string at = path.empty() ? key : path + "." + key;
            throw ConfigError("config error at " + at + ": unknown field");
        }
    }
}

void read(const json& j, const std::string& path, const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) field_error(path, key, "number");
    out = j[key].get<double>();
}

void read(const json& j, const std::string& path, const char* key, int& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) field_error(path, key, "integer");
    out = j[key].get<int>();
}

void read(const json& j, const std::string& path, const char* key, long& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) field_error(path, key, "integer");
    out = j[key].get<long>();
}

void read(const json& j, const std::string& path, const char* key, std::uint64_t& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_unsigned() && !j[key].is_number_integer()) {
        field_error(path, key, "non-negative integer");
    }
    out = j[key].get<std::uint64_t>();
}

void read(const json& j, const std::string& path, const char* key, bool& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_boolean()) field_error(path, key, "boolean");
    out = j[key].get<bool>();
}

void read(const json& j, const std::string& path, const char* key, std::string& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_string()) field_error(path, key, "string");
    out = j[key].get<std::string>();
}

void read(const json& j, const std::string& path, const char* key,
          std::vector<double>& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_array()) field_error(path, key, "array of numbers");
    std::vector<double> parsed;
    for (const auto& v : j[key]) {
        if (!v.is_number()) field_error(path, key, "array of numbers");
        parsed.push_back(v.get<double>());
    }
    out = std::move(parsed);
}

void read(const json& j, const std::string& path, const char* key,
          std::vector<std::uint64_t>& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_array()) field_error(path, key, "array of non-negative integers");
    std::vector<std::uint64_t> parsed;
    for (const auto& v : j[key]) {
        if (!v.is_number_integer() && !v.is_number_unsigned()) {
            field_error(path, key, "array of non-negative integers");
        }
        parsed.push_back(v.get<std::uint64_t>());
    }
    out = std::move(parsed);
}

void read_fixed(const json& j, const std::string& path, const char* key, double* out,
                std::size_t n) {
    if (!j.contains(key)) return;
    if (!j[key].is_array() || j[key].size() != n) {
        field_error(path, key, "array of " + std::to_string(n) + " numbers");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!j[key][i].is_number()) {
            field_error(path, key, "array of " + std::to_string(n) + " numbers");
        }
        out[i] = j[key][i].get<double>();
    }
}

json vector_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

} // namespace

// ---------------------------------------------------------------------------
// ModelConfig

json to_json(const models::ModelConfig& c) {
    return json{{"input_kind", models::to_string(c.input_kind)},
                {"window_length", c.window_length},
                {"signal_dim", c.signal_dim},
                {"image_height", c.image_height},
                {"image_width", c.image_width},
                {"image_channels", c.image_channels},
                {"feature_dim", c.feature_dim},
                {"condition_dim", c.condition_dim},
                {"label_dim", c.label_dim},
                {"discriminator_hidden", c.discriminator_hidden},
                {"label_extents", vector_json(c.label_extents)},
                {"discriminator_conditional", c.discriminator_conditional}};
}

models::ModelConfig model_config_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config error at " + path + ": expected object");
    check_unknown(j, path,
                  {"input_kind", "window_length", "signal_dim", "image_height",
                   "image_width", "image_channels", "feature_dim", "condition_dim",
                   "label_dim", "discriminator_hidden", "label_extents",
                   "discriminator_conditional"});
    models::ModelConfig c;
    std::string kind = models::to_string(c.input_kind);
    read(j, path, "input_kind", kind);
    c.input_kind = models::input_kind_from_string(kind);
    read(j, path, "window_length", c.window_length);
    read(j, path, "signal_dim", c.signal_dim);
    read(j, path, "image_height", c.image_height);
    read(j, path, "image_width", c.image_width);
    read(j, path, "image_channels", c.image_channels);
    read(j, path, "feature_dim", c.feature_dim);
    read(j, path, "condition_dim", c.condition_dim);
    read(j, path, "label_dim", c.label_dim);
    read(j, path, "discriminator_hidden", c.discriminator_hidden);
    std::vector<double> extents;
    read(j, path, "label_extents", extents);
    if (!extents.empty()) {
        c.label_extents = Eigen::Map<Eigen::VectorXd>(extents.data(),
                                                      static_cast<long>(extents.size()));
    }
    read(j, path, "discriminator_conditional", c.discriminator_conditional);
    return c;
}

// ---------------------------------------------------------------------------
// TrainConfig

json to_json(const trainer::TrainConfig& c) {
    return json{{"lambda", c.lambda},
                {"lr_main", c.lr_main},
                {"lr_discriminator", c.lr_discriminator},
                {"batch_size", c.batch_size},
                {"iterations", c.iterations},
                {"eval_every", c.eval_every},
                {"seed", c.seed},
                {"w_s", c.w_s},
                {"w_adv", c.w_adv},
                {"optimizer", c.optimizer == opt::Kind::Adam ? "adam" : "sgd_momentum"},
                {"momentum", c.momentum},
                {"eval_sample_cap", c.eval_sample_cap}};
}

trainer::TrainConfig train_config_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config error at " + path + ": expected object");
    check_unknown(j, path,
                  {"lambda", "lr_main", "lr_discriminator", "batch_size", "iterations",
                   "eval_every", "seed", "w_s", "w_adv", "optimizer", "momentum",
                   "eval_sample_cap"});
    trainer::TrainConfig c;
    read(j, path, "lambda", c.lambda);
    read(j, path, "lr_main", c.lr_main);
    read(j, path, "lr_discriminator", c.lr_discriminator);
    read(j, path, "batch_size", c.batch_size);
    read(j, path, "iterations", c.iterations);
    read(j, path, "eval_every", c.eval_every);
    read(j, path, "seed", c.seed);
    read(j, path, "w_s", c.w_s);
    read(j, path, "w_adv", c.w_adv);
    std::string optimizer = c.optimizer == opt::Kind::Adam ? "adam" : "sgd_momentum";
    read(j, path, "optimizer", optimizer);
    if (optimizer == "adam") {
        c.optimizer = opt::Kind::Adam;
    } else if (optimizer == "sgd_momentum") {
        c.optimizer = opt::Kind::SgdMomentum;
    } else {
        field_error(path, "optimizer", "\"adam\" or \"sgd_momentum\"");
    }
    read(j, path, "momentum", c.momentum);
    read(j, path, "eval_sample_cap", c.eval_sample_cap);
    return c;
}

// ---------------------------------------------------------------------------
// Datagen specs

json to_json(const datagen::DomainPairSpec& c) {
    const datagen::EnvironmentSpec& e = c.env;
    json env{{"extents", json::array({e.extents.x(), e.extents.y()})},
             {"wifi_anchors", e.wifi_anchors},
             {"uwb_anchors", e.uwb_anchors},
             {"obstacle_count", e.obstacle_count},
             {"movable_obstacles", e.movable_obstacles},
             {"shift_region",
              json::array({e.shift_region(0), e.shift_region(1), e.shift_region(2),
                           e.shift_region(3)})},
             {"move_distance", e.move_distance},
             {"obstacle_min_side", e.obstacle_min_side},
             {"obstacle_max_side", e.obstacle_max_side},
             {"attenuation_min_db", e.attenuation_min_db},
             {"attenuation_max_db", e.attenuation_max_db},
             {"tx_power_dbm", e.tx_power_dbm},
             {"path_loss_exponent", e.path_loss_exponent},
             {"reference_distance_m", e.reference_distance_m},
             {"rssi_channels", e.rssi_channels},
             {"csi_anchors", e.csi_anchors},
             {"csi_wavelengths_m",
              json::array({e.csi_wavelengths_m[0], e.csi_wavelengths_m[1]})},
             {"csi_amplitude_falloff_m", e.csi_amplitude_falloff_m},
             {"noise_rssi_db", e.noise_rssi_db},
             {"noise_csi", e.noise_csi},
             {"noise_uwb_range_m", e.noise_uwb_range_m},
             {"noise_uwb_power_db", e.noise_uwb_power_db},
             {"noise_imu", e.noise_imu}};
    json traj{{"dt", c.traj.dt},
              {"max_speed", c.traj.max_speed},
              {"turn_smoothing", c.traj.turn_smoothing},
              {"margin", c.traj.margin}};
    return json{{"env", env},
                {"traj", traj},
                {"windows_per_domain", c.windows_per_domain},
                {"trajectories_per_domain", c.trajectories_per_domain},
                {"source_test_windows", c.source_test_windows},
                {"window_length", c.window_length},
                {"null_shift", c.null_shift},
                {"seed", c.seed}};
}

datagen::DomainPairSpec domain_pair_spec_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config error at " + path + ": expected object");
    check_unknown(j, path,
                  {"env", "traj", "windows_per_domain", "trajectories_per_domain",
                   "source_test_windows", "window_length", "null_shift", "seed"});
    datagen::DomainPairSpec c;
    if (j.contains("env")) {
        const json& je = j["env"];
        const std::string ep = path + ".env";
        if (!je.is_object()) throw ConfigError("config error at " + ep + ": expected object");
        check_unknown(je, ep,
                      {"extents", "wifi_anchors", "uwb_anchors", "obstacle_count",
                       "movable_obstacles", "shift_region", "move_distance",
                       "obstacle_min_side", "obstacle_max_side", "attenuation_min_db",
                       "attenuation_max_db", "tx_power_dbm", "path_loss_exponent",
                       "reference_distance_m", "rssi_channels", "csi_anchors",
                       "csi_wavelengths_m", "csi_amplitude_falloff_m", "noise_rssi_db",
                       "noise_csi", "noise_uwb_range_m", "noise_uwb_power_db",
                       "noise_imu"});
        datagen::EnvironmentSpec& e = c.env;
        double extents[2] = {e.extents.x(), e.extents.y()};
        read_fixed(je, ep, "extents", extents, 2);
        e.extents = {extents[0], extents[1]};
        read(je, ep, "wifi_anchors", e.wifi_anchors);
        read(je, ep, "uwb_anchors", e.uwb_anchors);
        read(je, ep, "obstacle_count", e.obstacle_count);
        read(je, ep, "movable_obstacles", e.movable_obstacles);
        double region[4] = {e.shift_region(0), e.shift_region(1), e.shift_region(2),
                            e.shift_region(3)};
        read_fixed(je, ep, "shift_region", region, 4);
        e.shift_region = {region[0], region[1], region[2], region[3]};
        read(je, ep, "move_distance", e.move_distance);
        read(je, ep, "obstacle_min_side", e.obstacle_min_side);
        read(je, ep, "obstacle_max_side", e.obstacle_max_side);
        read(je, ep, "attenuation_min_db", e.attenuation_min_db);
        read(je, ep, "attenuation_max_db", e.attenuation_max_db);
        read(je, ep, "tx_power_dbm", e.tx_power_dbm);
        read(je, ep, "path_loss_exponent", e.path_loss_exponent);
        read(je, ep, "reference_distance_m", e.reference_distance_m);
        read(je, ep, "rssi_channels", e.rssi_channels);
        read(je, ep, "csi_anchors", e.csi_anchors);
        read_fixed(je, ep, "csi_wavelengths_m", e.csi_wavelengths_m, 2);
        read(je, ep, "csi_amplitude_falloff_m", e.csi_amplitude_falloff_m);
        read(je, ep, "noise_rssi_db", e.noise_rssi_db);
        read(je, ep, "noise_csi", e.noise_csi);
        read(je, ep, "noise_uwb_range_m", e.noise_uwb_range_m);
        read(je, ep, "noise_uwb_power_db", e.noise_uwb_power_db);
        read(je, ep, "noise_imu", e.noise_imu);
    }
    if (j.contains("traj")) {
        const json& jt = j["traj"];
        const std::string tp = path + ".traj";
        if (!jt.is_object()) throw ConfigError("config error at " + tp + ": expected object");
        check_unknown(jt, tp, {"dt", "max_speed", "turn_smoothing", "margin"});
        read(jt, tp, "dt", c.traj.dt);
        read(jt, tp, "max_speed", c.traj.max_speed);
        read(jt, tp, "turn_smoothing", c.traj.turn_smoothing);
        read(jt, tp, "margin", c.traj.margin);
    }
    read(j, path, "windows_per_domain", c.windows_per_domain);
    read(j, path, "trajectories_per_domain", c.trajectories_per_domain);
    read(j, path, "source_test_windows", c.source_test_windows);
    read(j, path, "window_length", c.window_length);
    read(j, path, "null_shift", c.null_shift);
    read(j, path, "seed", c.seed);
    return c;
}

json to_json(const datagen::ImageTaskSpec& c) {
    return json{{"size", c.size},
                {"images_per_domain", c.images_per_domain},
                {"radius_min_px", c.radius_min_px},
                {"radius_max_px", c.radius_max_px},
                {"foreground", c.foreground},
                {"source_background", c.source_background},
                {"target_noise_amplitude", c.target_noise_amplitude},
                {"seed", c.seed}};
}

datagen::ImageTaskSpec image_task_spec_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config error at " + path + ": expected object");
    check_unknown(j, path,
                  {"size", "images_per_domain", "radius_min_px", "radius_max_px",
                   "foreground", "source_background", "target_noise_amplitude", "seed"});
    datagen::ImageTaskSpec c;
    read(j, path, "size", c.size);
    read(j, path, "images_per_domain", c.images_per_domain);
    read(j, path, "radius_min_px", c.radius_min_px);
    read(j, path, "radius_max_px", c.radius_max_px);
    read(j, path, "foreground", c.foreground);
    read(j, path, "source_background", c.source_background);
    read(j, path, "target_noise_amplitude", c.target_noise_amplitude);
    read(j, path, "seed", c.seed);
    return c;
}

// ---------------------------------------------------------------------------
// ExperimentConfig

namespace {

/// The model record derives its data-facing fields from the data config; only
/// capacity knobs are user-facing in experiment files.
void reconcile(ExperimentConfig& c) {
    if (c.data.kind == "rf") {
        c.model.input_kind = models::InputKind::Sequence;
        c.model.window_length = c.data.rf.window_length;
        c.model.signal_dim = c.data.rf.env.signal_dim();
        c.model.label_dim = 2;
        c.model.label_extents = c.data.rf.env.extents;
    } else if (c.data.kind == "image") {
        c.model.input_kind = models::InputKind::Image;
        c.model.image_height = c.data.image.size;
        c.model.image_width = c.data.image.size;
        c.model.image_channels = 3;
        c.model.label_dim = 3;
        c.model.label_extents = Eigen::VectorXd::Ones(3);
    }
}

const std::set<std::string> kMethods = {"source_only",     "dann_lite",
                                        "mcd_lite",        "abrnet",
                                        "abrnet_wo_cbrd",  "abrnet_wo_dadg"};

} // namespace

void ExperimentConfig::validate() const {
    if (version != 1) throw ConfigError("config error at version: unsupported value");
    if (!kMethods.contains(method)) {
        throw ConfigError("config error at method: unknown method '" + method + "'");
    }
    if (seeds.empty()) throw ConfigError("config error at seeds: must be nonempty");
    if (output_dir.empty()) {
        throw ConfigError("config error at output_dir: must be nonempty");
    }
    if (data.kind != "rf" && data.kind != "image") {
        throw ConfigError("config error at data.kind: expected \"rf\" or \"image\"");
    }
    if (evaluation.head != "hat" && evaluation.head != "tilde" &&
        evaluation.head != "mean") {
        throw ConfigError("config error at evaluation.head: expected hat|tilde|mean");
    }
    if (!(evaluation.grid_cell_m > 0.0)) {
        throw ConfigError("config error at evaluation.grid_cell_m: must be > 0");
    }
    for (double l : sweep_lambdas) {
        if (!(l > 0.5 && l <= 1.0)) {
            throw ConfigError(
                "config error at sweep_lambdas: values must lie in (0.5, 1]");
        }
    }
    model.validate();
    train.validate();
    if (data.kind == "rf" && data.manifest.empty()) data.rf.validate();
    if (data.kind == "image" && data.manifest.empty()) data.image.validate();
}

json to_json(const ExperimentConfig& c) {
    json model{{"feature_dim", c.model.feature_dim},
               {"condition_dim", c.model.condition_dim},
               {"discriminator_hidden", c.model.discriminator_hidden},
               {"discriminator_conditional", c.model.discriminator_conditional}};
    json data{{"kind", c.data.kind},
              {"rf", to_json(c.data.rf)},
              {"image", to_json(c.data.image)}};
    if (!c.data.manifest.empty()) data["manifest"] = c.data.manifest;
    return json{{"version", c.version},
                {"method", c.method},
                {"seeds", c.seeds},
                {"output_dir", c.output_dir},
                {"model", model},
                {"train", to_json(c.train)},
                {"data", data},
                {"evaluation",
                 json{{"head", c.evaluation.head}, {"grid_cell_m", c.evaluation.grid_cell_m}}},
                {"sweep_lambdas", c.sweep_lambdas}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config error: top level must be an object");
    check_unknown(j, "",
                  {"version", "method", "seeds", "output_dir", "model", "train", "data",
                   "evaluation", "sweep_lambdas"});
    ExperimentConfig c;
    read(j, "", "version", c.version);
    read(j, "", "method", c.method);
    read(j, "", "seeds", c.seeds);
    read(j, "", "output_dir", c.output_dir);
    if (j.contains("model")) {
        const json& jm = j["model"];
        if (!jm.is_object()) throw ConfigError("config error at model: expected object");
        check_unknown(jm, "model",
                      {"feature_dim", "condition_dim", "discriminator_hidden",
                       "discriminator_conditional"});
        read(jm, "model", "feature_dim", c.model.feature_dim);
        read(jm, "model", "condition_dim", c.model.condition_dim);
        read(jm, "model", "discriminator_hidden", c.model.discriminator_hidden);
        read(jm, "model", "discriminator_conditional", c.model.discriminator_conditional);
    }
    if (j.contains("train")) c.train = train_config_from_json(j["train"], "train");
    if (j.contains("data")) {
        const json& jd = j["data"];
        if (!jd.is_object()) throw ConfigError("config error at data: expected object");
        check_unknown(jd, "data", {"kind", "rf", "image", "manifest"});
        read(jd, "data", "kind", c.data.kind);
        if (jd.contains("rf")) c.data.rf = domain_pair_spec_from_json(jd["rf"], "data.rf");
        if (jd.contains("image")) {
            c.data.image = image_task_spec_from_json(jd["image"], "data.image");
        }
        read(jd, "data", "manifest", c.data.manifest);
    }
    if (j.contains("evaluation")) {
        const json& je = j["evaluation"];
        if (!je.is_object()) {
            throw ConfigError("config error at evaluation: expected object");
        }
        check_unknown(je, "evaluation", {"head", "grid_cell_m"});
        read(je, "evaluation", "head", c.evaluation.head);
        read(je, "evaluation", "grid_cell_m", c.evaluation.grid_cell_m);
    }
    read(j, "", "sweep_lambdas", c.sweep_lambdas);
    reconcile(c);
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in '" + path + "': " + e.what());
    }
    return experiment_config_from_json(j);
}

void save_experiment_config(const ExperimentConfig& c, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << to_json(c).dump(2) << "\n";
    if (!out) throw IoError("failed writing config to '" + path + "'");
}

void apply_env_overrides(ExperimentConfig& c) {
    if (const char* seed = std::getenv("ABRNET_SEED")) {
        try {
            c.seeds = {std::stoull(seed)};
        } catch (const std::exception&) {
            throw ConfigError("config error at ABRNET_SEED: expected integer, got '" +
                              std::string(seed) + "'");
        }
    }
    if (const char* out = std::getenv("ABRNET_OUT")) {
        if (*out == '\0') {
            throw ConfigError("config error at ABRNET_OUT: empty value");
        }
        c.output_dir = out;
    }
}

void apply_flag_overrides(ExperimentConfig& c, const std::optional<std::uint64_t>& seed,
                          const std::optional<std::string>& output_dir) {
    if (seed) c.seeds = {*seed};
    if (output_dir) c.output_dir = *output_dir;
}

// ---------------------------------------------------------------------------
// Manifest

void save_manifest(const Manifest& m, const std::string& path) {
    json j{{"version", m.version},
           {"kind", m.kind},
           {"source_train", m.source_train},
           {"source_test", m.source_test},
           {"target", m.target},
           {"spec", m.spec}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing manifest to '" + path + "'");
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("manifest parse error in '" + path + "': " + e.what());
    }
    Manifest m;
    read(j, "manifest", "version", m.version);
    if (m.version != 1) throw ParseError("manifest '" + path + "': unsupported version");
    read(j, "manifest", "kind", m.kind);
    read(j, "manifest", "source_train", m.source_train);
    read(j, "manifest", "source_test", m.source_test);
    read(j, "manifest", "target", m.target);
    if (j.contains("spec")) m.spec = j["spec"];
    if (m.source_train.empty() || m.target.empty()) {
        throw ParseError("manifest '" + path + "': missing dataset paths");
    }
    return m;
}

} // namespace abrnet::config
