#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhsa/tensor.hpp"

namespace dhsa {

/// Row-stochastic causal attention matrix (A[u][v] = 0 for v > u).
class AttentionMatrix {
public:
    explicit AttentionMatrix(Matrix values, double tolerance = 1e-6);

    std::size_t length() const { return values_.rows(); }
    double operator()(std::size_t u, std::size_t v) const { return values_(u, v); }
    const Matrix& values() const { return values_; }

private:
    Matrix values_;
};

enum class LogBase { kNatural, kTen };

struct LabelConfig {
    std::size_t window = 4;
    std::size_t max_chunks = 16;
    double epsilon = 0.001;
    double theta = 1.1;
    double zeta = 1e-6;
    double alpha = 2.0;
    /// Base used both for beta = log(2) and the log in the soft label.
    LogBase log_base = LogBase::kNatural;
};

/// Positions with a complete past window, a complete future window and at
/// least one future row: i in [w - 1, L - w - 2].
bool has_full_windows(std::size_t length, std::size_t i, std::size_t window);

/// Mean over rows u > i + w of the attention mass on [i - w + 1, i].
double past_mass(const AttentionMatrix& attention, std::size_t i, std::size_t window);
/// Mean over rows u > i + w of the attention mass on [i + 1, i + w].
double future_mass(const AttentionMatrix& attention, std::size_t i, std::size_t window);

double attention_ratio(double future, double past, double epsilon = 0.001);

/// Top (max_chunks - 1) positions whose ratio exceeds theta, ties to the lower
/// index; NaN entries (positions without full windows) never qualify.
/// Returned ascending.
std::vector<std::size_t> hard_boundaries(std::span<const double> ratios, std::size_t max_chunks,
                                         double theta = 1.1);

double soft_label(double ratio, const LabelConfig& config = {});

struct LabelSet {
    /// Per-position ratio; NaN where windows are incomplete.
    std::vector<double> ratios;
    /// Per-position soft label; 0 where windows are incomplete.
    std::vector<double> soft;
    /// Positions i labelled as chunk ends (boundary index i + 1).
    std::vector<std::size_t> hard;

    std::vector<std::size_t> candidate_positions() const;
};

LabelSet label_sequence(const AttentionMatrix& attention, const LabelConfig& config = {});

/// One line of the label file. Only candidate positions are stored.
struct LabelRecord {
    std::size_t sequence_id = 0;
    std::size_t layer = 0;
    std::vector<std::size_t> positions;
    std::vector<double> soft;
    std::vector<std::size_t> hard;
};

LabelRecord make_label_record(std::size_t sequence_id, std::size_t layer, const LabelSet& labels);
/// Dense per-position soft labels of length L rebuilt from a record.
std::vector<double> dense_soft_labels(const LabelRecord& record, std::size_t length);

void to_json(nlohmann::json& j, const LabelRecord& record);
void from_json(const nlohmann::json& j, LabelRecord& record);

void write_label_file(const std::string& path, std::span<const LabelRecord> records);
std::vector<LabelRecord> read_label_file(const std::string& path);

}  // namespace dhsa
