#include "dcm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "dcm/error.hpp"

namespace dcm {

using json = nlohmann::json;

Modality parse_modality(const std::string& name) {
    if (name == "visual" || name == "image") return Modality::Visual;
    if (name == "text") return Modality::Text;
    throw UsageError("unknown modality '" + name + "' (expected visual or text)");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.timespan = timespan;
    out.categories = categories;
    out.d_v = d_v;
    out.d_t = d_t;
    out.instances.reserve(indices.size());
    for (std::size_t i : indices) out.instances.push_back(instances.at(i));
    return out;
}

std::size_t Dataset::find(const std::string& id) const {
    for (std::size_t i = 0; i < instances.size(); ++i)
        if (instances[i].id == id) return i;
    return instances.size();
}

Dataset make_dataset(std::vector<Instance> instances, std::vector<std::string> categories) {
    if (instances.empty()) throw DataError("dataset has no instances");
    Dataset ds;
    ds.d_v = instances.front().visual.size();
    ds.d_t = instances.front().text.size();
    EpochSeconds lo = instances.front().ts;
    EpochSeconds hi = lo;
    for (const auto& inst : instances) {
        if (inst.visual.size() != ds.d_v || inst.text.size() != ds.d_t) {
            throw DataError("instance '" + inst.id + "' has dims (" + std::to_string(inst.visual.size()) +
                            ", " + std::to_string(inst.text.size()) + "), expected (" +
                            std::to_string(ds.d_v) + ", " + std::to_string(ds.d_t) + ")");
        }
        if (!all_finite(inst.visual.span()) || !all_finite(inst.text.span())) {
            throw DataError("instance '" + inst.id + "' has non-finite features");
        }
        if (inst.category >= categories.size()) {
            throw DataError("instance '" + inst.id + "' has unknown category index");
        }
        lo = std::min(lo, inst.ts);
        hi = std::max(hi, inst.ts);
    }
    ds.timespan = Timespan{lo, std::max(hi, lo + 1)};
    ds.instances = std::move(instances);
    ds.categories = std::move(categories);
    return ds;
}

Timespan span_union(const Timespan& a, const Timespan& b) {
    return Timespan{std::min(a.start, b.start), std::max(a.end, b.end)};
}

TfidfResult tfidf_featurize(const std::vector<std::vector<std::string>>& docs, std::size_t vocab_size) {
    std::map<std::string, std::size_t> df;
    bool any_tokens = false;
    for (const auto& doc : docs) {
        std::vector<std::string> uniq(doc.begin(), doc.end());
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (const auto& term : uniq) ++df[term];
        any_tokens = any_tokens || !doc.empty();
    }
    if (!any_tokens) throw DataError("tfidf: every document is empty");

    // std::map iterates lexicographically, so a stable sort on df gives lexicographic ties.
    std::vector<std::pair<std::string, std::size_t>> ranked(df.begin(), df.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (vocab_size > 0 && ranked.size() > vocab_size) ranked.resize(vocab_size);

    TfidfResult out;
    std::unordered_map<std::string, std::size_t> column;
    std::vector<double> idf;
    const double n_docs = static_cast<double>(docs.size());
    for (const auto& [term, count] : ranked) {
        column.emplace(term, out.vocabulary.size());
        out.vocabulary.push_back(term);
        idf.push_back(std::log(n_docs / static_cast<double>(count)));
    }
    out.vectors.reserve(docs.size());
    for (const auto& doc : docs) {
        Vector v(out.vocabulary.size());
        for (const auto& term : doc) {
            auto it = column.find(term);
            if (it != column.end()) v[it->second] += 1.0;
        }
        for (std::size_t j = 0; j < v.size(); ++j) v[j] *= idf[j];
        out.vectors.push_back(std::move(v));
    }
    return out;
}

namespace {

Vector parse_vector(const json& arr, const std::string& field, std::size_t line_no) {
    if (!arr.is_array()) {
        throw DataError("line " + std::to_string(line_no) + ": field '" + field + "' must be an array");
    }
    std::vector<double> values;
    values.reserve(arr.size());
    for (const auto& x : arr) {
        if (!x.is_number()) {
            throw DataError("line " + std::to_string(line_no) + ": field '" + field + "' has a non-numeric entry");
        }
        values.push_back(x.get<double>());
    }
    return Vector(std::move(values));
}

template <typename T>
T required(const json& obj, const char* key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end()) throw DataError("line " + std::to_string(line_no) + ": missing field '" + key + "'");
    try {
        return it->template get<T>();
    } catch (const json::exception&) {
        throw DataError("line " + std::to_string(line_no) + ": field '" + key + "' has the wrong type");
    }
}

} // namespace

Dataset load_jsonl(const std::filesystem::path& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file " + path.string());

    std::vector<Instance> instances;
    std::vector<std::size_t> line_of;
    std::vector<std::vector<std::string>> token_docs;
    std::vector<std::string> categories;
    std::unordered_map<std::string, std::size_t> category_index;
    enum class TextKind { Unknown, Tokens, Vectors } kind = TextKind::Unknown;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("line " + std::to_string(line_no) + ": JSON parse error: " + e.what());
        }
        if (!obj.is_object()) throw DataError("line " + std::to_string(line_no) + ": expected a JSON object");

        Instance inst;
        inst.id = required<std::string>(obj, "id", line_no);
        inst.visual = parse_vector(obj.contains("visual") ? obj["visual"] : json(), "visual", line_no);
        try {
            inst.ts = parse_iso8601(required<std::string>(obj, "ts", line_no));
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
        const auto cat = required<std::string>(obj, "category", line_no);
        auto [it, inserted] = category_index.emplace(cat, categories.size());
        if (inserted) categories.push_back(cat);
        inst.category = it->second;

        const bool has_tokens = obj.contains("text_tokens");
        const bool has_vector = obj.contains("text");
        if (has_tokens == has_vector) {
            throw DataError("line " + std::to_string(line_no) + ": exactly one of 'text_tokens' or 'text' is required");
        }
        const TextKind line_kind = has_tokens ? TextKind::Tokens : TextKind::Vectors;
        if (kind != TextKind::Unknown && kind != line_kind) {
            throw DataError("line " + std::to_string(line_no) + ": mixes 'text_tokens' and 'text' within one file");
        }
        kind = line_kind;
        if (has_tokens) {
            token_docs.push_back(required<std::vector<std::string>>(obj, "text_tokens", line_no));
        } else {
            inst.text = parse_vector(obj["text"], "text", line_no);
        }

        if (!instances.empty()) {
            const auto& first = instances.front();
            if (inst.visual.size() != first.visual.size()) {
                throw DataError("line " + std::to_string(line_no) + ": visual dimension " +
                                std::to_string(inst.visual.size()) + " differs from " +
                                std::to_string(first.visual.size()));
            }
            if (kind == TextKind::Vectors && inst.text.size() != first.text.size()) {
                throw DataError("line " + std::to_string(line_no) + ": text dimension " +
                                std::to_string(inst.text.size()) + " differs from " +
                                std::to_string(first.text.size()));
            }
        }
        if (!all_finite(inst.visual.span()) || !all_finite(inst.text.span())) {
            throw DataError("line " + std::to_string(line_no) + ": non-finite feature value");
        }
        instances.push_back(std::move(inst));
        line_of.push_back(line_no);
    }
    if (instances.empty()) throw DataError("dataset file " + path.string() + " contains no instances");

    if (kind == TextKind::Tokens) {
        auto tfidf = tfidf_featurize(token_docs, options.vocab_size);
        for (std::size_t i = 0; i < instances.size(); ++i) instances[i].text = std::move(tfidf.vectors[i]);
    }
    return make_dataset(std::move(instances), std::move(categories));
}

namespace {

void append_number(std::string& out, double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out += buf;
}

void append_array(std::string& out, const Vector& v) {
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        append_number(out, v[i]);
    }
    out += ']';
}

} // namespace

void save_jsonl(const Dataset& ds, const std::filesystem::path& path, const std::string& header) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset file " + path.string());
    if (!header.empty()) out << "# " << header << '\n';
    std::string line;
    for (const auto& inst : ds.instances) {
        line.clear();
        line += "{\"id\":" + json(inst.id).dump();
        line += ",\"visual\":";
        append_array(line, inst.visual);
        line += ",\"text\":";
        append_array(line, inst.text);
        line += ",\"ts\":\"" + format_iso8601(inst.ts) + "\"";
        line += ",\"category\":" + json(ds.categories.at(inst.category)).dump();
        line += "}\n";
        out << line;
    }
    if (!out) throw DataError("failed writing dataset file " + path.string());
}

Binning bin_monthly(const Dataset& ds, std::size_t min_bin_size) {
    Binning out;
    if (ds.empty()) return out;
    std::map<std::int64_t, std::vector<std::size_t>> by_month;
    for (std::size_t i = 0; i < ds.size(); ++i) by_month[month_index(ds.instances[i].ts)].push_back(i);
    for (auto& [month, members] : by_month) {
        if (members.size() < min_bin_size) {
            for (std::size_t i : members) out.excluded.push_back(ds.instances[i].id);
            continue;
        }
        Bin bin;
        bin.index = out.bins.size();
        bin.month = month;
        bin.month_start = month_start(month);
        bin.month_end = month_start(month + 1);
        for (std::size_t i : members) bin.members.push_back(ds.instances[i].id);
        bin.member_indices = std::move(members);
        out.bins.push_back(std::move(bin));
    }
    return out;
}

std::size_t nearest_bin(const std::vector<Bin>& bins, EpochSeconds ts) {
    if (bins.empty()) throw DataError("no bins to choose from");
    const std::int64_t m = month_index(ts);
    std::size_t best = 0;
    std::int64_t best_gap = -1;
    for (std::size_t b = 0; b < bins.size(); ++b) {
        const std::int64_t gap = std::abs(bins[b].month - m);
        if (best_gap < 0 || gap < best_gap) {
            best = b;
            best_gap = gap;
        }
    }
    return best;
}

SplitSizes split_sizes(std::size_t n) {
    SplitSizes s;
    s.test = n / 10;
    s.val = (n - s.test) / 10;
    s.train = n - s.test - s.val;
    return s;
}

namespace {

// Largest-remainder apportionment of `total` across groups proportionally to `weights`.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& weights, std::size_t total) {
    const std::size_t sum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
    std::vector<std::size_t> quota(weights.size(), 0);
    if (sum == 0) return quota;
    std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder numerator, group)
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < weights.size(); ++g) {
        const std::size_t num = weights[g] * total;
        quota[g] = num / sum;
        assigned += quota[g];
        remainders.emplace_back(num % sum, g);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k) {
        const std::size_t g = remainders[k].second;
        if (quota[g] < weights[g]) {
            ++quota[g];
            ++assigned;
        }
    }
    return quota;
}

} // namespace

Split split(const Dataset& ds, Rng& rng, SplitMode mode) {
    if (ds.size() < 10) {
        throw DataError("dataset too small to split: " + std::to_string(ds.size()) + " instances (need >= 10)");
    }
    const SplitSizes sizes = split_sizes(ds.size());

    std::vector<std::vector<std::size_t>> groups;
    if (mode == SplitMode::Stratified) {
        groups.resize(ds.categories.size());
        for (std::size_t i = 0; i < ds.size(); ++i) groups[ds.instances[i].category].push_back(i);
    } else {
        groups.resize(1);
        groups[0].resize(ds.size());
        std::iota(groups[0].begin(), groups[0].end(), 0);
    }
    std::vector<std::size_t> weights;
    for (auto& g : groups) {
        rng.shuffle(std::span<std::size_t>(g));
        weights.push_back(g.size());
    }
    const auto test_quota = apportion(weights, sizes.test);
    std::vector<std::size_t> remaining(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) remaining[g] = weights[g] - test_quota[g];
    const auto val_quota = apportion(remaining, sizes.val);

    std::vector<std::size_t> train_idx, val_idx, test_idx;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& members = groups[g];
        std::size_t k = 0;
        for (; k < test_quota[g]; ++k) test_idx.push_back(members[k]);
        for (std::size_t j = 0; j < val_quota[g]; ++j, ++k) val_idx.push_back(members[k]);
        for (; k < members.size(); ++k) train_idx.push_back(members[k]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return Split{ds.subset(train_idx), ds.subset(val_idx), ds.subset(test_idx)};
}

} // namespace dcm
