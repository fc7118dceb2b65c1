#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "abrnet/datagen.hpp"
#include "abrnet/models.hpp"
#include "abrnet/trainer.hpp"

namespace abrnet::eval {

using Eigen::MatrixXd;
using Eigen::Vector2d;

enum class EvalHead { Hat, Tilde, Mean };

EvalHead eval_head_from_string(const std::string& s);
const char* to_string(EvalHead h);

struct Metrics {
    double mse = 0.0; // squared meters (mean over samples and coordinates)
    double mae = 0.0; // meters
};

/// Chunked forward pass; head Mean averages the two regressors' predictions.
MatrixXd predict(const models::ModelBundle& bundle, const MatrixXd& windows,
                 EvalHead head, Eigen::Index chunk = 512);

Metrics evaluate(const models::ModelBundle& bundle, const datagen::DomainDataset& dataset,
                 EvalHead head = EvalHead::Mean);

/// Spatial error map over the floor: samples are binned by their true label,
/// each cell holds the mean per-sample squared error (same per-coordinate
/// mean convention as the global MSE) and its sample count. Cells with zero
/// count are empty, not zero-error.
struct GridErrorMap {
    double cell_size = 0.5;
    Vector2d extents{0.0, 0.0};
    MatrixXd mse;          // ny x nx, 0 where count == 0
    Eigen::MatrixXi count; // ny x nx
    long outside_labels = 0; // labels clamped into boundary cells

    Eigen::Index nx() const { return mse.cols(); }
    Eigen::Index ny() const { return mse.rows(); }
    bool empty_cell(Eigen::Index iy, Eigen::Index ix) const { return count(iy, ix) == 0; }
    /// Count-weighted mean of cell MSEs == global MSE (within accumulation
    /// rounding).
    double weighted_mean() const;
};

GridErrorMap grid_error_map(const MatrixXd& predictions, const MatrixXd& labels,
                            const Vector2d& extents, double cell_size);

// ---------------------------------------------------------------------------
// Lambda sweep

struct LambdaSweepRow {
    double lambda = 0.0;
    double target_mse = 0.0;
    double target_mae = 0.0;
};

/// Full training run per lambda value on the given domain pair; everything
/// else (seeds included) held fixed.
std::vector<LambdaSweepRow> lambda_sweep(const models::ModelConfig& model_config,
                                         const trainer::TrainConfig& train_config,
                                         const std::vector<double>& lambdas,
                                         const datagen::DomainDataset& source,
                                         const datagen::DomainDataset& target,
                                         EvalHead head = EvalHead::Mean);

void save_sweep_csv(const std::vector<LambdaSweepRow>& rows, const std::string& path);

// ---------------------------------------------------------------------------
// Reports

struct ReportTableRow {
    std::string method;
    std::vector<double> seed_mse;
    std::vector<double> seed_mae;
    double mean_mse = 0.0;
    double std_mse = 0.0;
};

struct Report {
    int version = 1;
    std::vector<std::pair<std::string, trainer::TrainHistory>> histories;
    std::vector<std::pair<std::string, GridErrorMap>> grids;
    std::vector<ReportTableRow> table;
};

nlohmann::json report_json(const Report& report);
/// Schema check; throws ParseError naming the violated field.
void validate_report_json(const nlohmann::json& j);
Report report_from_json(const nlohmann::json& j);

/// Writes report.json (schema-validated), per-history CSVs, a comparison
/// table CSV, loss-curve PNGs and grid-map PNGs into the directory.
void emit_report(const Report& report, const std::string& directory);

} // namespace abrnet::eval
