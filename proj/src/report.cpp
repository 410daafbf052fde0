#include "dcm/report.hpp"

#include <cstdio>
#include <fstream>

#include "dcm/error.hpp"

namespace dcm {

using json = nlohmann::json;

std::string config_hash(const json& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunMeta make_run_meta(std::uint64_t seed, const json& config) {
    RunMeta meta;
    meta.seed = seed;
    meta.config = config;
    meta.config_hash = config_hash(config);
    return meta;
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

std::string provenance(const RunMeta& meta) {
    return "# tool=dcm version=" + meta.tool_version + " seed=" + std::to_string(meta.seed) +
           " config_hash=" + meta.config_hash + "\n";
}

} // namespace

void write_report_csv(const EvalReport& report, const RunMeta& meta, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << provenance(meta);
    out << "query_id,direction,bin,value\n";
    for (const auto& q : report.queries) {
        out << q.query_id << ',' << to_string(q.direction) << ',' << q.bin << ',' << format_double(q.value) << '\n';
    }
}

void write_report_summary(const EvalReport& report, const RunMeta& meta, const std::filesystem::path& path) {
    auto out = open_output(path);
    json j{{"tool", "dcm"},
           {"version", meta.tool_version},
           {"seed", meta.seed},
           {"config_hash", meta.config_hash},
           {"config", meta.config},
           {"metric", report.metric},
           {"queries", report.queries.size()},
           {"I2T", report.image_to_text},
           {"T2I", report.text_to_image},
           {"avg", report.average},
           {"notes", report.notes}};
    out << j.dump(2) << '\n';
}

void write_bin_series_csv(const std::vector<BinScore>& series, const RunMeta& meta, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << provenance(meta);
    out << "month,size,i2t,t2i,avg\n";
    for (const auto& b : series) {
        out << b.bin << ',' << b.size << ',' << format_double(b.image_to_text) << ',' << format_double(b.text_to_image)
            << ',' << format_double(b.average) << '\n';
    }
}

void write_dispersion_csv(const std::vector<DispersionPoint>& series, const RunMeta& meta,
                          const std::filesystem::path& path) {
    auto out = open_output(path);
    out << provenance(meta);
    out << "month,value,neighbours,short_of_k\n";
    for (const auto& p : series) {
        out << p.bin << ',' << (p.value ? format_double(*p.value) : std::string()) << ',' << p.neighbours << ','
            << (p.short_of_k ? 1 : 0) << '\n';
    }
}

void write_train_report_csv(const TrainReport& report, const RunMeta& meta, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << provenance(meta);
    out << "epoch,train_loss,val_loss,selected\n";
    for (const auto& e : report.epochs) {
        out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << ','
            << (e.epoch == report.selected_epoch ? 1 : 0) << '\n';
    }
}

} // namespace dcm
