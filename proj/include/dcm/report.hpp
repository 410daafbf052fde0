#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcm/eval.hpp"
#include "dcm/trainer.hpp"

namespace dcm {

inline constexpr const char* kToolVersion = "1.0.0";

/// Provenance stamped into every output file.
struct RunMeta {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string tool_version = kToolVersion;
    nlohmann::json config;  ///< resolved run configuration, echoed into JSON outputs
};

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);
RunMeta make_run_meta(std::uint64_t seed, const nlohmann::json& config);

/// Formats with 17 significant digits.
std::string format_double(double x);

/// One row per query: query_id,direction,bin,value (preceded by a '#' provenance line).
void write_report_csv(const EvalReport& report, const RunMeta& meta, const std::filesystem::path& path);
/// Aggregates, notes and the configuration echo.
void write_report_summary(const EvalReport& report, const RunMeta& meta, const std::filesystem::path& path);
/// month,size,i2t,t2i,avg
void write_bin_series_csv(const std::vector<BinScore>& series, const RunMeta& meta, const std::filesystem::path& path);
/// month,value,neighbours,short_of_k (value empty for gaps)
void write_dispersion_csv(const std::vector<DispersionPoint>& series, const RunMeta& meta,
                          const std::filesystem::path& path);
/// epoch,train_loss,val_loss
void write_train_report_csv(const TrainReport& report, const RunMeta& meta, const std::filesystem::path& path);

} // namespace dcm
