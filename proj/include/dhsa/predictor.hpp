#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dhsa/tensor.hpp"

namespace dhsa {

struct PredictorShape {
    std::size_t dim = 32;      ///< key dimension d
    std::size_t heads = 8;     ///< encoder attention heads, must divide dim
    std::size_t window = 4;    ///< w, tokens per side
    std::size_t hidden = 256;  ///< MLP hidden width
    bool position_bias = false;

    std::size_t feature_dim() const { return 4 * dim + 1; }
    friend bool operator==(const PredictorShape&, const PredictorShape&) = default;
};

/// Named slice of the flat parameter vector.
struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
};

/// All learnable weights of the boundary predictor, stored flat in the
/// declared (checkpoint) order:
///   wq bq wk bk wv bv wo bo [pos] w1 b1 w2 b2
/// Linear layers are (out x in) row-major, y = W x + b.
class PredictorParams {
public:
    explicit PredictorParams(PredictorShape shape);

    /// Glorot-uniform weights, zero biases.
    static PredictorParams xavier(PredictorShape shape, std::uint64_t seed);

    const PredictorShape& shape() const { return shape_; }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }
    const ParamBlock& block(const std::string& name) const;

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    std::span<double> view(const std::string& name);
    std::span<const double> view(const std::string& name) const;

    friend bool operator==(const PredictorParams& a, const PredictorParams& b) {
        return a.shape_ == b.shape_ && a.values_ == b.values_;
    }

private:
    PredictorShape shape_;
    std::vector<ParamBlock> blocks_;
    std::vector<double> values_;
};

/// "DHSAPRD1" + u32 header length + JSON header + little-endian f32 weights.
void save_checkpoint(const std::string& path, const PredictorParams& params);
PredictorParams load_checkpoint(const std::string& path);

/// Window encoder: single-layer bidirectional MHA over exactly `window` key
/// vectors (rows of `keys` starting at `first`), average-pooled.
std::vector<double> encode_window(const Matrix& keys, std::size_t first, const PredictorParams& params);

/// [l, r, |l - r|, l * r, cos(l, r)], length 4d + 1.
std::vector<double> fuse(std::span<const double> left, std::span<const double> right);

/// Boundary probability at position i (token i is the last of a chunk).
/// Requires i - w + 1 >= 0 and i + w < L.
double predict(std::size_t position, const Matrix& keys, const PredictorParams& params);

/// Positions the predictor is trained and evaluated on; identical to the
/// labelling edge rule.
std::vector<std::size_t> candidate_positions(std::size_t length, std::size_t window);

/// Probabilities for every candidate position; other positions are 0.
/// Shares token projections and window encodings across positions.
std::vector<double> predict_sequence(const Matrix& keys, const PredictorParams& params);

enum class FocalForm {
    kVerbatim,   ///< (1-p)^g [-w y log p - (1-y) log(1-p)]
    kCanonical,  ///< -w y (1-p)^g log p - (1-y) p^g log(1-p)
};

struct LossConfig {
    double positive_weight = 1.3;
    double gamma = 2.0;
    FocalForm form = FocalForm::kCanonical;
};

inline constexpr double kProbabilityClamp = 1e-7;

double focal_bce(double p, double y, const LossConfig& config = {});
/// d loss / d logit where p = sigmoid(logit). Zero where p is clamped.
double focal_bce_logit_grad(double logit, double y, const LossConfig& config = {});

struct TrainingExample {
    Matrix keys;
    /// Dense soft labels, length L; only candidate positions are used.
    std::vector<double> soft;
};

/// Mean focal loss over all candidate positions of `batch`. When `gradient`
/// is non-null it receives d loss / d params (same layout as params.values()).
double loss_and_gradient(const PredictorParams& params, std::span<const TrainingExample> batch,
                         const LossConfig& loss, std::vector<double>* gradient);

struct BoundaryMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double topk_overlap = 0.0;
};

/// Precision/recall/F1 of (prediction >= threshold) against (label >= threshold),
/// pooled over candidate positions. Top-K overlap is averaged per sequence
/// with K = min(topk_max, number of label positives); sequences without
/// positives are skipped.
BoundaryMetrics boundary_metrics(std::span<const std::vector<double>> predictions,
                                 std::span<const std::vector<double>> labels, std::size_t window,
                                 double threshold = 0.5, std::size_t topk_max = 500);

BoundaryMetrics evaluate(const PredictorParams& params, std::span<const TrainingExample> examples,
                         double threshold = 0.5, std::size_t topk_max = 500);

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 4;  ///< examples per optimizer step
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    LossConfig loss;
    double threshold = 0.5;
    std::size_t topk_max = 500;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;
    BoundaryMetrics train;
    std::optional<BoundaryMetrics> validation;
};

struct TrainResult {
    PredictorParams params;
    std::vector<EpochRecord> history;
};

/// Adam on the mean focal loss. Throws std::runtime_error when the loss
/// becomes non-finite.
TrainResult train(std::span<const TrainingExample> corpus, PredictorParams params, const TrainConfig& config,
                  std::span<const TrainingExample> validation = {});

struct GradCheckConfig {
    std::size_t samples_per_block = 12;
    double step = 1e-4;
    double absolute_floor = 1e-8;
    /// Multiplies the analytic gradient before comparison (mutation testing).
    double analytic_scale = 1.0;
    LossConfig loss;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    /// Samples dropped because the finite difference straddled a ReLU or |x| kink.
    std::size_t skipped_kinks = 0;
};

GradCheckResult grad_check(const PredictorParams& params, std::span<const TrainingExample> batch,
                           const GradCheckConfig& config = {});

}  // namespace dhsa
