#include "abrnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "abrnet/plot.hpp"

namespace abrnet::eval {

using models::Head;
using nlohmann::json;

EvalHead eval_head_from_string(const std::string& s) {
    if (s == "hat") return EvalHead::Hat;
    if (s == "tilde") return EvalHead::Tilde;
    if (s == "mean") return EvalHead::Mean;
    throw ContractViolation("unknown evaluation head '" + s + "' (expected hat|tilde|mean)");
}

const char* to_string(EvalHead h) {
    switch (h) {
        case EvalHead::Hat: return "hat";
        case EvalHead::Tilde: return "tilde";
        case EvalHead::Mean: return "mean";
    }
    return "?";
}

MatrixXd predict(const models::ModelBundle& bundle, const MatrixXd& windows, EvalHead head,
                 Eigen::Index chunk) {
    MatrixXd out(windows.rows(), bundle.config.label_dim);
    for (Eigen::Index start = 0; start < windows.rows(); start += chunk) {
        const Eigen::Index len = std::min(chunk, windows.rows() - start);
        const MatrixXd features =
            models::extract_features(bundle, windows.middleRows(start, len));
        switch (head) {
            case EvalHead::Hat:
                out.middleRows(start, len) =
                    models::forward_regressor(bundle, Head::Hat, features).l;
                break;
            case EvalHead::Tilde:
                out.middleRows(start, len) =
                    models::forward_regressor(bundle, Head::Tilde, features).l;
                break;
            case EvalHead::Mean:
                out.middleRows(start, len) =
                    0.5 * (models::forward_regressor(bundle, Head::Hat, features).l +
                           models::forward_regressor(bundle, Head::Tilde, features).l);
                break;
        }
    }
    return out;
}

Metrics evaluate(const models::ModelBundle& bundle, const datagen::DomainDataset& dataset,
                 EvalHead head) {
    if (dataset.size() < 1) throw ContractViolation("evaluate: empty dataset");
    const MatrixXd& labels = dataset.labels_for_eval();
    const MatrixXd pred = predict(bundle, dataset.windows(), head);
    const MatrixXd res = pred - labels;
    Metrics m;
    m.mse = res.array().square().mean();
    m.mae = res.array().abs().mean();
    return m;
}

// ---------------------------------------------------------------------------
// Grid map

double GridErrorMap::weighted_mean() const {
    double acc = 0.0;
    long total = 0;
    for (Eigen::Index r = 0; r < mse.rows(); ++r) {
        for (Eigen::Index c = 0; c < mse.cols(); ++c) {
            acc += mse(r, c) * count(r, c);
            total += count(r, c);
        }
    }
    return total > 0 ? acc / static_cast<double>(total) : 0.0;
}

GridErrorMap grid_error_map(const MatrixXd& predictions, const MatrixXd& labels,
                            const Vector2d& extents, double cell_size) {
    if (predictions.rows() != labels.rows() || predictions.cols() != labels.cols()) {
        throw ContractViolation("grid_error_map: prediction/label shape mismatch");
    }
    if (labels.cols() != 2) {
        throw ContractViolation("grid_error_map: expects 2-D coordinate labels");
    }
    if (!(cell_size > 0.0) || !(extents.x() > 0.0) || !(extents.y() > 0.0)) {
        throw ConfigError("grid_error_map: cell size and extents must be positive");
    }

    GridErrorMap map;
    map.cell_size = cell_size;
    map.extents = extents;
    const auto nx = static_cast<Eigen::Index>(std::ceil(extents.x() / cell_size));
    const auto ny = static_cast<Eigen::Index>(std::ceil(extents.y() / cell_size));
    map.mse = MatrixXd::Zero(ny, nx);
    map.count = Eigen::MatrixXi::Zero(ny, nx);

    for (Eigen::Index i = 0; i < labels.rows(); ++i) {
        const double x = labels(i, 0), y = labels(i, 1);
        auto ix = static_cast<Eigen::Index>(std::floor(x / cell_size));
        auto iy = static_cast<Eigen::Index>(std::floor(y / cell_size));
        if (ix < 0 || ix >= nx || iy < 0 || iy >= ny) {
            ++map.outside_labels; // clamped into the boundary cell below
            ix = std::clamp<Eigen::Index>(ix, 0, nx - 1);
            iy = std::clamp<Eigen::Index>(iy, 0, ny - 1);
        }
        const double dx = predictions(i, 0) - labels(i, 0);
        const double dy = predictions(i, 1) - labels(i, 1);
        const double sq = 0.5 * (dx * dx + dy * dy); // per-coordinate mean
        map.mse(iy, ix) += sq;
        map.count(iy, ix) += 1;
    }
    for (Eigen::Index r = 0; r < ny; ++r) {
        for (Eigen::Index c = 0; c < nx; ++c) {
            if (map.count(r, c) > 0) map.mse(r, c) /= map.count(r, c);
        }
    }
    return map;
}

// ---------------------------------------------------------------------------
// Lambda sweep

std::vector<LambdaSweepRow> lambda_sweep(const models::ModelConfig& model_config,
                                         const trainer::TrainConfig& train_config,
                                         const std::vector<double>& lambdas,
                                         const datagen::DomainDataset& source,
                                         const datagen::DomainDataset& target,
                                         EvalHead head) {
    std::vector<LambdaSweepRow> rows;
    rows.reserve(lambdas.size());
    for (double lambda : lambdas) {
        trainer::TrainConfig cfg = train_config;
        cfg.lambda = lambda;
        trainer::TrainResult run = trainer::train(model_config, cfg, trainer::TrainPlan{},
                                                  source, target, &target);
        const Metrics m = evaluate(run.bundle, target, head);
        rows.push_back({lambda, m.mse, m.mae});
    }
    return rows;
}

void save_sweep_csv(const std::vector<LambdaSweepRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "lambda,target_mse,target_mae\n" << std::setprecision(17);
    for (const LambdaSweepRow& r : rows) {
        out << r.lambda << ',' << r.target_mse << ',' << r.target_mae << '\n';
    }
    if (!out) throw IoError("failed writing sweep to '" + path + "'");
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json history_json(const trainer::TrainHistory& h) {
    json records = json::array();
    for (const auto& r : h.records) {
        json rec{{"iteration", r.iteration}};
        auto put = [&](const char* key, double v) {
            if (!std::isnan(v)) rec[key] = v;
        };
        put("loss_r", r.loss_r);
        put("loss_s", r.loss_s);
        put("loss_adv", r.loss_adv);
        put("eval_mse", r.eval_mse);
        put("eval_mae", r.eval_mae);
        records.push_back(std::move(rec));
    }
    return records;
}

trainer::TrainHistory history_from_json(const json& j) {
    trainer::TrainHistory h;
    for (const auto& rec : j) {
        trainer::IterationRecord r;
        r.iteration = rec.at("iteration").get<long>();
        auto get = [&](const char* key) {
            return rec.contains(key) ? rec[key].get<double>()
                                     : std::numeric_limits<double>::quiet_NaN();
        };
        r.loss_r = get("loss_r");
        r.loss_s = get("loss_s");
        r.loss_adv = get("loss_adv");
        r.eval_mse = get("eval_mse");
        r.eval_mae = get("eval_mae");
        h.records.push_back(r);
    }
    return h;
}

json grid_json(const GridErrorMap& g) {
    json cells = json::array();
    for (Eigen::Index r = 0; r < g.ny(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < g.nx(); ++c) {
            row.push_back(json{{"mse", g.mse(r, c)}, {"count", g.count(r, c)}});
        }
        cells.push_back(std::move(row));
    }
    return json{{"cell_size", g.cell_size},
                {"extents", json::array({g.extents.x(), g.extents.y()})},
                {"outside_labels", g.outside_labels},
                {"cells", cells}};
}

GridErrorMap grid_from_json(const json& j) {
    GridErrorMap g;
    g.cell_size = j.at("cell_size").get<double>();
    g.extents = {j.at("extents")[0].get<double>(), j.at("extents")[1].get<double>()};
    g.outside_labels = j.at("outside_labels").get<long>();
    const json& cells = j.at("cells");
    const auto ny = static_cast<Eigen::Index>(cells.size());
    const auto nx = ny > 0 ? static_cast<Eigen::Index>(cells[0].size()) : 0;
    g.mse = MatrixXd::Zero(ny, nx);
    g.count = Eigen::MatrixXi::Zero(ny, nx);
    for (Eigen::Index r = 0; r < ny; ++r) {
        for (Eigen::Index c = 0; c < nx; ++c) {
            g.mse(r, c) = cells[r][c].at("mse").get<double>();
            g.count(r, c) = cells[r][c].at("count").get<int>();
        }
    }
    return g;
}

[[noreturn]] void schema_error(const std::string& where) {
    throw ParseError("report schema violation at " + where);
}

void require_key(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) schema_error(where + "." + key);
}

std::string sanitize(const std::string& name) {
    std::string out = name;
    for (char& c : out) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    }
    return out;
}

} // namespace

json report_json(const Report& report) {
    json histories = json::array();
    for (const auto& [name, history] : report.histories) {
        histories.push_back(json{{"name", name}, {"records", history_json(history)}});
    }
    json grids = json::array();
    for (const auto& [name, grid] : report.grids) {
        grids.push_back(json{{"name", name}, {"grid", grid_json(grid)}});
    }
    json table = json::array();
    for (const ReportTableRow& row : report.table) {
        table.push_back(json{{"method", row.method},
                             {"seed_mse", row.seed_mse},
                             {"seed_mae", row.seed_mae},
                             {"mean_mse", row.mean_mse},
                             {"std_mse", row.std_mse}});
    }
    return json{{"version", report.version},
                {"histories", histories},
                {"grids", grids},
                {"table", table}};
}

void validate_report_json(const json& j) {
    if (!j.is_object()) schema_error("(root)");
    require_key(j, "version", "(root)");
    if (!j["version"].is_number_integer() || j["version"].get<int>() != 1) {
        schema_error("version");
    }
    for (const char* key : {"histories", "grids", "table"}) {
        require_key(j, key, "(root)");
        if (!j[key].is_array()) schema_error(key);
    }
    for (const auto& h : j["histories"]) {
        require_key(h, "name", "histories[]");
        require_key(h, "records", "histories[]");
        for (const auto& r : h["records"]) {
            require_key(r, "iteration", "histories[].records[]");
        }
    }
    for (const auto& g : j["grids"]) {
        require_key(g, "name", "grids[]");
        require_key(g, "grid", "grids[]");
        for (const char* key : {"cell_size", "extents", "outside_labels", "cells"}) {
            require_key(g["grid"], key, "grids[].grid");
        }
    }
    for (const auto& t : j["table"]) {
        for (const char* key : {"method", "seed_mse", "seed_mae", "mean_mse", "std_mse"}) {
            require_key(t, key, "table[]");
        }
    }
}

Report report_from_json(const json& j) {
    validate_report_json(j);
    Report report;
    report.version = j["version"].get<int>();
    for (const auto& h : j["histories"]) {
        report.histories.emplace_back(h["name"].get<std::string>(),
                                      history_from_json(h["records"]));
    }
    for (const auto& g : j["grids"]) {
        report.grids.emplace_back(g["name"].get<std::string>(), grid_from_json(g["grid"]));
    }
    for (const auto& t : j["table"]) {
        ReportTableRow row;
        row.method = t["method"].get<std::string>();
        row.seed_mse = t["seed_mse"].get<std::vector<double>>();
        row.seed_mae = t["seed_mae"].get<std::vector<double>>();
        row.mean_mse = t["mean_mse"].get<double>();
        row.std_mse = t["std_mse"].get<double>();
        report.table.push_back(std::move(row));
    }
    return report;
}

void emit_report(const Report& report, const std::string& directory) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) throw IoError("cannot create report directory '" + directory + "'");

    const json j = report_json(report);
    validate_report_json(j);
    {
        std::ofstream out(directory + "/report.json", std::ios::trunc);
        if (!out) throw IoError("cannot write report.json");
        out << j.dump(2) << "\n";
    }

    // Comparison table, Tables-style mean +/- std rows.
    {
        std::ofstream out(directory + "/table.csv", std::ios::trunc);
        if (!out) throw IoError("cannot write table.csv");
        out << "method,mean_mse,std_mse,seed_mse\n" << std::setprecision(17);
        for (const ReportTableRow& row : report.table) {
            out << row.method << ',' << row.mean_mse << ',' << row.std_mse << ',';
            for (std::size_t i = 0; i < row.seed_mse.size(); ++i) {
                out << row.seed_mse[i] << (i + 1 < row.seed_mse.size() ? ';' : '\n');
            }
            if (row.seed_mse.empty()) out << '\n';
        }
    }

    for (const auto& [name, history] : report.histories) {
        const std::string base = directory + "/history_" + sanitize(name);
        trainer::save_history_csv(history, base + ".csv");
        std::vector<plot::Series> series;
        plot::Series r{"loss_r", {}}, s{"loss_s", {}}, adv{"loss_adv", {}};
        for (const auto& rec : history.records) {
            r.values.push_back(rec.loss_r);
            s.values.push_back(rec.loss_s);
            adv.values.push_back(rec.loss_adv);
        }
        series.push_back(std::move(r));
        series.push_back(std::move(s));
        series.push_back(std::move(adv));
        plot::write_png(plot::line_plot(series), base + ".png");
    }

    for (const auto& [name, grid] : report.grids) {
        const std::string base = directory + "/grid_" + sanitize(name);
        std::ofstream out(base + ".csv", std::ios::trunc);
        if (!out) throw IoError("cannot write grid CSV");
        out << "iy,ix,mse,count\n" << std::setprecision(17);
        for (Eigen::Index r = 0; r < grid.ny(); ++r) {
            for (Eigen::Index c = 0; c < grid.nx(); ++c) {
                out << r << ',' << c << ',' << grid.mse(r, c) << ',' << grid.count(r, c)
                    << '\n';
            }
        }
        plot::write_png(plot::heatmap(grid.mse, grid.count), base + ".png");
    }
}

} // namespace abrnet::eval
