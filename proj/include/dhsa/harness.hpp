#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dhsa/chunking.hpp"
#include "dhsa/labeling.hpp"
#include "dhsa/mask.hpp"
#include "dhsa/predictor.hpp"
#include "dhsa/tensor.hpp"

namespace dhsa {

struct PlantedCorpusSpec {
    std::size_t num_sequences = 8;
    std::size_t length = 256;
    std::size_t dim = 32;
    std::size_t heads = 4;
    std::size_t num_segments = 4;
    double leakage = 0.05;
    std::uint64_t seed = 0;
    double noise = 0.3;
    /// 0 selects max(2w + 2, L / (3 * num_segments)).
    std::size_t min_segment_length = 0;

    void validate() const;
};

struct PlantedSequence {
    std::vector<TokenSequence> heads;
    BoundarySet truth;
    /// Mean over heads of the causal softmax attention.
    AttentionMatrix attention;

    std::size_t length() const { return truth.length(); }
    /// Planted chunk-end positions (b_k - 1 for interior boundaries).
    std::vector<std::size_t> planted_positions() const;
};

struct PlantedCorpus {
    PlantedCorpusSpec spec;
    std::vector<PlantedSequence> sequences;
};

PlantedCorpus gen_planted(const PlantedCorpusSpec& spec);

/// One training example per sequence: keys of head (index mod heads), or of
/// every head when `all_heads` is set, paired with labels from the
/// sequence's head-averaged attention.
std::vector<TrainingExample> make_training_examples(const PlantedCorpus& corpus, const LabelConfig& labels,
                                                    bool all_heads = false);

/// Same pairing with labels read from a label file (matched by sequence id).
std::vector<TrainingExample> make_training_examples(const PlantedCorpus& corpus, std::span<const LabelRecord> labels,
                                                    bool all_heads = false);

/// Largest per-row attention mass falling outside the row's own segment.
double max_cross_segment_mass(const Matrix& attention, const BoundarySet& segments);

/// Mean over rows of the causal attention mass captured by the mask.
double attention_mass_recall(const AttentionMatrix& attention, const SparsityMask& mask);

/// Mean over heads and rows of cos(masked output row, dense output row),
/// clamped to [0, 1].
double output_cosine(std::span<const TokenSequence> heads, const SparsityMask& mask);

/// Corpus layout on disk: corpus.json (spec + ground-truth boundaries) and one
/// DHT1 tensor per (sequence, head, q/k/v) plus the attention matrix.
void save_corpus(const std::string& directory, const PlantedCorpus& corpus);
PlantedCorpus load_corpus(const std::string& directory);

enum class BoundarySource {
    kDense,      ///< no sparsity
    kStatic,     ///< fixed-size chunks
    kOracle,     ///< ground-truth planted boundaries
    kPredicted,  ///< trained predictor + NMS
};

std::string method_name(BoundarySource source);

struct CompareConfig {
    std::size_t budget = 64;
    /// 0 selects L / num_segments (same chunk count as the planted partition).
    std::size_t static_chunk_size = 0;
    HeadAggregation aggregation = HeadAggregation::kMax;
    NmsConfig nms;
    const PredictorParams* predictor = nullptr;
    std::size_t threads = 1;
};

struct MaskReport {
    std::string method;
    std::size_t sequence_id = 0;
    double recall = 0.0;
    double output_cosine = 0.0;
    std::uint64_t attended_pairs = 0;
    std::uint64_t score_ops = 0;
    double wall_time_ms = 0.0;
};

/// Boundaries produced by the predictor: head-averaged probabilities through
/// NMS. Adds one score op per (head, candidate position) evaluated.
BoundarySet predicted_boundaries(std::span<const TokenSequence> heads, const PredictorParams& params,
                                 const NmsConfig& nms, CostCounters* counters = nullptr);

/// Boundaries for a method. Static and DHSA variants then go through the
/// same select path; only this provenance differs.
BoundarySet method_boundaries(BoundarySource source, const PlantedSequence& sequence, const CompareConfig& config,
                              CostCounters* counters = nullptr);

SparsityMask method_mask(BoundarySource source, const PlantedSequence& sequence, const CompareConfig& config,
                         CostCounters* counters = nullptr);

/// Evaluates each method on each sequence. Reports are ordered by method,
/// then sequence index, independent of `threads`.
std::vector<MaskReport> compare(const PlantedCorpus& corpus, std::span<const BoundarySource> methods,
                                const CompareConfig& config);

/// Reports for externally produced masks (one per sequence).
std::vector<MaskReport> evaluate_masks(const PlantedCorpus& corpus, std::span<const SparsityMask> masks,
                                       const std::string& method);

struct MethodSummary {
    std::string method;
    std::size_t sequences = 0;
    double recall = 0.0;
    double output_cosine = 0.0;
    double attended_pairs = 0.0;
    double score_ops = 0.0;
};

std::vector<MethodSummary> summarize(std::span<const MaskReport> reports);

void write_reports_csv(const std::string& path, std::span<const MaskReport> reports, bool include_timing);
void write_summary_json(const std::string& path, std::span<const MethodSummary> summary, const CompareConfig& config);

struct CurvePoint {
    std::string method;
    std::size_t budget = 0;
    double recall = 0.0;
    double output_cosine = 0.0;
};

/// Mean recall/cosine per method for each budget (long format).
std::vector<CurvePoint> recall_curve(const PlantedCorpus& corpus, std::span<const BoundarySource> methods,
                                     CompareConfig config, std::span<const std::size_t> budgets);
void write_curve_csv(const std::string& path, std::span<const CurvePoint> points);

}  // namespace dhsa
