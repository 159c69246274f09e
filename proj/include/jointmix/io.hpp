#pragma once

// File formats.
//
// Ordinal CSV (long format, one row per observed response):
//   subject_id,time_index,item,level        item and level are 1-based
// Survival CSV (one row per subject):
//   subject_id,time,event,covariate
//
// Parameters, designs, configs and results are JSON documents. Numeric CSV
// cells are written with 17 significant digits so files round-trip exactly.

#include "jointmix/em_engine.hpp"
#include "jointmix/inference.hpp"
#include "jointmix/simulation.hpp"
#include "jointmix/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace jointmix::io {

using json = nlohmann::json;

// Subjects follow the survival file order. A subject listed only in the
// survival file has every ordinal cell missing; a subject listed only in the
// ordinal file is an error naming the IDs. L and J default to the largest
// level and item seen.
Dataset read_dataset(const std::filesystem::path& ordinal_csv,
                     const std::filesystem::path& survival_csv,
                     std::optional<int> levels = std::nullopt,
                     std::optional<int> items = std::nullopt);
void write_dataset(const Dataset& data, const std::filesystem::path& ordinal_csv,
                   const std::filesystem::path& survival_csv);

std::string format_double(double value);

json to_json(const ModelParams& params);
ModelParams params_from_json(const json& j);

json to_json(const SimDesign& design);
// "censoring": {"kind": "uniform", "target_fraction": 0.25} tunes c_max.
SimDesign design_from_json(const json& j);

json to_json(const EMConfig& config);
// Applies the keys present in j on top of base.
EMConfig config_from_json(const json& j, EMConfig base = {});

json to_json(const FitResult& fit);
json to_json(const MCReport& report);

json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const json& j);

// Writes fit.json, estimates.csv, info_matrix.csv, posterior.csv, hazard.csv
// and loglik_trace.csv into dir.
void write_fit(const std::filesystem::path& dir, const Dataset& data, const FitResult& fit);
// Writes mc_report.json, mc_summary.csv and mc_replications.csv into dir.
void write_mc(const std::filesystem::path& dir, const MCReport& report);

}  // namespace jointmix::io
