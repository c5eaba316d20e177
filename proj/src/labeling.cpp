#include "dhsa/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dhsa {

AttentionMatrix::AttentionMatrix(Matrix values, double tolerance) : values_(std::move(values)) {
    const std::size_t L = values_.rows();
    if (L == 0 || values_.cols() != L) throw std::invalid_argument("attention matrix must be square and non-empty");
    if (!values_.all_finite()) throw std::invalid_argument("attention matrix has non-finite entries");
    for (std::size_t u = 0; u < L; ++u) {
        double sum = 0.0;
        for (std::size_t v = 0; v < L; ++v) {
            const double a = values_(u, v);
            if (v > u && a != 0.0) throw std::invalid_argument("attention matrix is not causal");
            if (a < -tolerance) throw std::invalid_argument("attention matrix has negative entries");
            sum += a;
        }
        if (std::abs(sum - 1.0) > tolerance) {
            throw std::invalid_argument("attention row " + std::to_string(u) + " sums to " + std::to_string(sum));
        }
    }
}

bool has_full_windows(std::size_t length, std::size_t i, std::size_t window) {
    return window >= 1 && i + 1 >= window && i + window + 2 <= length;
}

namespace {

void require_windows(const AttentionMatrix& attention, std::size_t i, std::size_t window) {
    if (!has_full_windows(attention.length(), i, window)) {
        throw std::out_of_range("position " + std::to_string(i) + " has no full windows");
    }
}

// Mean over future rows u in [i + w + 1, L - 1] of the mass on columns [lo, hi].
double window_mass(const AttentionMatrix& attention, std::size_t i, std::size_t window, std::size_t lo,
                   std::size_t hi) {
    const std::size_t L = attention.length();
    double total = 0.0;
    for (std::size_t u = i + window + 1; u < L; ++u) {
        for (std::size_t v = lo; v <= hi; ++v) total += attention(u, v);
    }
    return total / static_cast<double>(L - 1 - i - window);
}

}  // namespace

double past_mass(const AttentionMatrix& attention, std::size_t i, std::size_t window) {
    require_windows(attention, i, window);
    return window_mass(attention, i, window, i + 1 - window, i);
}

double future_mass(const AttentionMatrix& attention, std::size_t i, std::size_t window) {
    require_windows(attention, i, window);
    return window_mass(attention, i, window, i + 1, i + window);
}

double attention_ratio(double future, double past, double epsilon) {
    if (future < 0.0 || past < 0.0) throw std::invalid_argument("attention masses must be non-negative");
    return (std::max(future, past) + epsilon) / (std::min(future, past) + epsilon);
}

std::vector<std::size_t> hard_boundaries(std::span<const double> ratios, std::size_t max_chunks, double theta) {
    std::vector<std::size_t> picks;
    if (max_chunks <= 1) return picks;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (ratios[i] > theta) picks.push_back(i);  // NaN compares false
    }
    std::stable_sort(picks.begin(), picks.end(), [&](std::size_t a, std::size_t b) { return ratios[a] > ratios[b]; });
    if (picks.size() > max_chunks - 1) picks.resize(max_chunks - 1);
    std::sort(picks.begin(), picks.end());
    return picks;
}

double soft_label(double ratio, const LabelConfig& config) {
    if (ratio < 0.0) throw std::invalid_argument("soft_label: ratio must be non-negative");
    const bool ten = config.log_base == LogBase::kTen;
    const double lg = ten ? std::log10(ratio + config.zeta) : std::log(ratio + config.zeta);
    const double beta = ten ? std::log10(2.0) : std::log(2.0);
    return 1.0 / (1.0 + std::exp(-config.alpha * (lg - beta)));
}

std::vector<std::size_t> LabelSet::candidate_positions() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (!std::isnan(ratios[i])) out.push_back(i);
    }
    return out;
}

LabelSet label_sequence(const AttentionMatrix& attention, const LabelConfig& config) {
    const std::size_t L = attention.length();
    if (config.window == 0) throw std::invalid_argument("label window must be >= 1");
    if (L <= 2 * config.window + 2) {
        throw std::invalid_argument("sequence too short for labelling: L=" + std::to_string(L) + " needs > " +
                                    std::to_string(2 * config.window + 2));
    }
    LabelSet out;
    out.ratios.assign(L, std::numeric_limits<double>::quiet_NaN());
    out.soft.assign(L, 0.0);
    for (std::size_t i = config.window - 1; i + config.window + 2 <= L; ++i) {
        const double r = attention_ratio(future_mass(attention, i, config.window),
                                         past_mass(attention, i, config.window), config.epsilon);
        out.ratios[i] = r;
        out.soft[i] = soft_label(r, config);
    }
    out.hard = hard_boundaries(out.ratios, config.max_chunks, config.theta);
    return out;
}

LabelRecord make_label_record(std::size_t sequence_id, std::size_t layer, const LabelSet& labels) {
    LabelRecord r{sequence_id, layer, labels.candidate_positions(), {}, labels.hard};
    r.soft.reserve(r.positions.size());
    for (auto p : r.positions) r.soft.push_back(labels.soft[p]);
    return r;
}

std::vector<double> dense_soft_labels(const LabelRecord& record, std::size_t length) {
    if (record.positions.size() != record.soft.size()) throw std::invalid_argument("label record is inconsistent");
    std::vector<double> out(length, 0.0);
    for (std::size_t n = 0; n < record.positions.size(); ++n) {
        if (record.positions[n] >= length) throw std::out_of_range("label position beyond sequence");
        out[record.positions[n]] = record.soft[n];
    }
    return out;
}

void to_json(nlohmann::json& j, const LabelRecord& record) {
    j = {{"sequence_id", record.sequence_id},
         {"layer", record.layer},
         {"positions", record.positions},
         {"soft", record.soft},
         {"hard", record.hard}};
}

void from_json(const nlohmann::json& j, LabelRecord& record) {
    j.at("sequence_id").get_to(record.sequence_id);
    j.at("layer").get_to(record.layer);
    j.at("positions").get_to(record.positions);
    j.at("soft").get_to(record.soft);
    j.at("hard").get_to(record.hard);
    if (record.positions.size() != record.soft.size()) throw std::runtime_error("label record: positions/soft mismatch");
}

void write_label_file(const std::string& path, std::span<const LabelRecord> records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& r : records) out << nlohmann::json(r).dump() << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<LabelRecord> read_label_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<LabelRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(nlohmann::json::parse(line).get<LabelRecord>());
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

}  // namespace dhsa
