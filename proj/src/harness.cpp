#include "dhsa/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include "dhsa/tensor_io.hpp"

namespace dhsa {

namespace fs = std::filesystem;

void PlantedCorpusSpec::validate() const {
    if (num_sequences == 0) throw std::invalid_argument("corpus needs at least one sequence");
    if (num_segments < 2) throw std::invalid_argument("num_segments must be >= 2");
    if (num_segments > dim) throw std::invalid_argument("num_segments must not exceed dim (orthogonal directions)");
    if (heads == 0 || dim == 0) throw std::invalid_argument("heads and dim must be >= 1");
    if (!(leakage >= 0.0 && leakage < 0.5)) throw std::invalid_argument("leakage must lie in [0, 0.5)");
    if (noise < 0.0) throw std::invalid_argument("noise must be non-negative");
    const std::size_t min_len = min_segment_length ? min_segment_length : std::max<std::size_t>(10, length / (3 * num_segments));
    if (min_len * num_segments > length) throw std::invalid_argument("segments do not fit in the sequence length");
}

std::vector<std::size_t> PlantedSequence::planted_positions() const {
    std::vector<std::size_t> out;
    const auto& b = truth.indices();
    for (std::size_t k = 1; k + 1 < b.size(); ++k) out.push_back(b[k] - 1);
    return out;
}

namespace {

std::size_t effective_min_length(const PlantedCorpusSpec& spec) {
    return spec.min_segment_length ? spec.min_segment_length
                                   : std::max<std::size_t>(10, spec.length / (3 * spec.num_segments));
}

BoundarySet draw_segments(const PlantedCorpusSpec& spec, std::mt19937_64& rng) {
    const std::size_t min_len = effective_min_length(spec);
    const std::size_t spare = spec.length - min_len * spec.num_segments;
    std::exponential_distribution<double> expo(1.0);  // Dirichlet(1, ..., 1) via normalized exponentials
    std::vector<double> share(spec.num_segments);
    for (auto& s : share) s = expo(rng);
    const double total = std::accumulate(share.begin(), share.end(), 0.0);
    std::vector<std::size_t> b{0};
    double cum = 0.0;
    for (std::size_t k = 1; k < spec.num_segments; ++k) {
        cum += share[k - 1] / total;
        b.push_back(min_len * k + static_cast<std::size_t>(std::llround(cum * static_cast<double>(spare))));
    }
    b.push_back(spec.length);
    return BoundarySet(std::move(b));
}

// Random orthonormal rows (count x dim) by Gram-Schmidt on Gaussian draws.
Matrix orthonormal_directions(std::size_t count, std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix dirs(count, dim);
    for (std::size_t k = 0; k < count; ++k) {
        auto row = dirs.row(k);
        for (;;) {
            for (auto& x : row) x = gauss(rng);
            for (std::size_t j = 0; j < k; ++j) {
                const double p = dot(row, dirs.row(j));
                for (std::size_t c = 0; c < dim; ++c) row[c] -= p * dirs(j, c);
            }
            const double n = norm(row);
            if (n > 1e-6) {
                for (auto& x : row) x /= n;
                break;
            }
        }
    }
    return dirs;
}

// Within-segment causal softmax; exactly zero across segments.
Matrix restricted_probabilities(const TokenSequence& seq, const BoundarySet& segments) {
    const std::size_t L = seq.length();
    const double scale = 1.0 / std::sqrt(static_cast<double>(seq.head_dim()));
    Matrix probs(L, L);
    std::vector<double> scores(L);
    for (std::size_t i = 0; i < L; ++i) {
        const std::size_t lo = segments.begin(segments.chunk_of(i));
        std::vector<bool> valid(L, false);
        for (std::size_t j = lo; j <= i; ++j) {
            valid[j] = true;
            scores[j] = dot(seq.queries().row(i), seq.keys().row(j)) * scale;
        }
        auto p = softmax_row(scores, valid);
        std::copy(p.begin(), p.end(), probs.row(i).begin());
    }
    return probs;
}

struct HeadDraw {
    Matrix q_noise, k_noise, values, dirs;
};

TokenSequence assemble_head(const HeadDraw& draw, const BoundarySet& segments, double gain) {
    const std::size_t L = draw.q_noise.rows(), d = draw.q_noise.cols();
    Matrix q(L, d), k(L, d);
    for (std::size_t i = 0; i < L; ++i) {
        const auto dir = draw.dirs.row(segments.chunk_of(i));
        for (std::size_t c = 0; c < d; ++c) {
            q(i, c) = gain * dir[c] + draw.q_noise(i, c);
            k(i, c) = gain * dir[c] + draw.k_noise(i, c);
        }
    }
    return TokenSequence(round_to_f32(q), round_to_f32(k), round_to_f32(draw.values));
}

PlantedSequence generate_sequence(const PlantedCorpusSpec& spec, std::size_t index) {
    std::seed_seq seq_seed{static_cast<std::uint64_t>(spec.seed), static_cast<std::uint64_t>(index),
                           static_cast<std::uint64_t>(spec.seed >> 32)};
    std::mt19937_64 rng(seq_seed);
    const BoundarySet segments = draw_segments(spec, rng);
    const std::size_t L = spec.length, d = spec.dim;
    std::normal_distribution<double> noise(0.0, spec.noise);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<HeadDraw> draws;
    for (std::size_t h = 0; h < spec.heads; ++h) {
        HeadDraw draw{Matrix(L, d), Matrix(L, d), Matrix(L, d), orthonormal_directions(spec.num_segments, d, rng)};
        for (auto& x : draw.q_noise.data()) x = noise(rng);
        for (auto& x : draw.k_noise.data()) x = noise(rng);
        for (auto& x : draw.values.data()) x = gauss(rng);
        draws.push_back(std::move(draw));
    }

    // Same-segment scores sit near gain^2 / sqrt(d) above cross-segment ones;
    // start where the worst row would just meet the leakage bound, then grow.
    const double target = spec.leakage > 0.0 ? spec.leakage : 0.05;
    const double start_logit = std::log(static_cast<double>(L - 1) * (1.0 - target) / target);
    double gain = std::sqrt(std::sqrt(static_cast<double>(d)) * std::max(start_logit, 1.0));

    std::vector<TokenSequence> heads;
    Matrix mean(L, L);
    for (int attempt = 0;; ++attempt) {
        if (attempt > 200) throw std::runtime_error("planted generator could not reach the leakage bound");
        heads.clear();
        mean = Matrix(L, L);
        bool ok = true;
        for (const auto& draw : draws) {
            heads.push_back(assemble_head(draw, segments, gain));
            const Matrix probs = spec.leakage > 0.0 ? attention_probabilities(heads.back())
                                                    : restricted_probabilities(heads.back(), segments);
            if (spec.leakage > 0.0 && max_cross_segment_mass(probs, segments) > spec.leakage) {
                ok = false;
                break;
            }
            for (std::size_t n = 0; n < mean.data().size(); ++n) mean.data()[n] += probs.data()[n];
        }
        if (ok) break;
        gain *= 1.1;
    }
    for (auto& x : mean.data()) x /= static_cast<double>(spec.heads);
    return PlantedSequence{std::move(heads), segments, AttentionMatrix(round_to_f32(mean))};
}

}  // namespace

PlantedCorpus gen_planted(const PlantedCorpusSpec& spec) {
    spec.validate();
    PlantedCorpus corpus{spec, {}};
    corpus.sequences.reserve(spec.num_sequences);
    for (std::size_t n = 0; n < spec.num_sequences; ++n) corpus.sequences.push_back(generate_sequence(spec, n));
    return corpus;
}

double max_cross_segment_mass(const Matrix& attention, const BoundarySet& segments) {
    double worst = 0.0;
    for (std::size_t i = 0; i < attention.rows(); ++i) {
        const std::size_t lo = segments.begin(segments.chunk_of(i));
        double cross = 0.0;
        for (std::size_t j = 0; j < lo; ++j) cross += attention(i, j);
        worst = std::max(worst, cross);
    }
    return worst;
}

double attention_mass_recall(const AttentionMatrix& attention, const SparsityMask& mask) {
    const std::size_t L = attention.length();
    if (mask.length() != L) throw std::invalid_argument("mask length does not match attention matrix");
    double total = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
        double captured = 0.0, row_total = 0.0;
        for (std::size_t j = 0; j <= i; ++j) row_total += attention(i, j);
        for (auto j : mask.row(i)) captured += attention(i, j);
        total += row_total > 0.0 ? std::min(captured / row_total, 1.0) : 1.0;
    }
    return total / static_cast<double>(L);
}

double output_cosine(std::span<const TokenSequence> heads, const SparsityMask& mask) {
    if (heads.empty()) throw std::invalid_argument("output_cosine: no heads");
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& h : heads) {
        const Matrix dense = dense_attention(h);
        const Matrix sparse = dense_attention(h, mask);
        for (std::size_t i = 0; i < dense.rows(); ++i) {
            const auto a = dense.row(i), b = sparse.row(i);
            // Identical rows count as 1 even when both are zero.
            const double c = std::equal(a.begin(), a.end(), b.begin()) ? 1.0 : cosine_similarity(a, b);
            total += std::clamp(c, 0.0, 1.0);
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

namespace {

nlohmann::json spec_to_json(const PlantedCorpusSpec& s) {
    return {{"num_sequences", s.num_sequences}, {"length", s.length}, {"dim", s.dim},
            {"heads", s.heads},                 {"num_segments", s.num_segments},
            {"leakage", s.leakage},             {"seed", s.seed},
            {"noise", s.noise},                 {"min_segment_length", s.min_segment_length}};
}

PlantedCorpusSpec spec_from_json(const nlohmann::json& j) {
    PlantedCorpusSpec s;
    j.at("num_sequences").get_to(s.num_sequences);
    j.at("length").get_to(s.length);
    j.at("dim").get_to(s.dim);
    j.at("heads").get_to(s.heads);
    j.at("num_segments").get_to(s.num_segments);
    j.at("leakage").get_to(s.leakage);
    j.at("seed").get_to(s.seed);
    j.at("noise").get_to(s.noise);
    j.at("min_segment_length").get_to(s.min_segment_length);
    return s;
}

std::string tensor_name(std::size_t seq, std::size_t head, char kind) {
    return "seq" + std::to_string(seq) + "_h" + std::to_string(head) + "_" + kind + ".dht";
}

std::string attention_name(std::size_t seq) { return "seq" + std::to_string(seq) + "_attn.dht"; }

}  // namespace

void save_corpus(const std::string& directory, const PlantedCorpus& corpus) {
    fs::create_directories(directory);
    nlohmann::json manifest = {{"format", "dhsa-corpus-1"}, {"spec", spec_to_json(corpus.spec)}};
    nlohmann::json seqs = nlohmann::json::array();
    for (std::size_t n = 0; n < corpus.sequences.size(); ++n) {
        const auto& s = corpus.sequences[n];
        seqs.push_back({{"id", n}, {"boundaries", s.truth}});
        for (std::size_t h = 0; h < s.heads.size(); ++h) {
            write_tensor((fs::path(directory) / tensor_name(n, h, 'q')).string(), s.heads[h].queries());
            write_tensor((fs::path(directory) / tensor_name(n, h, 'k')).string(), s.heads[h].keys());
            write_tensor((fs::path(directory) / tensor_name(n, h, 'v')).string(), s.heads[h].values());
        }
        write_tensor((fs::path(directory) / attention_name(n)).string(), s.attention.values());
    }
    manifest["sequences"] = seqs;
    write_text_file((fs::path(directory) / "corpus.json").string(), manifest.dump(2) + "\n");
}

PlantedCorpus load_corpus(const std::string& directory) {
    const auto manifest_path = fs::path(directory) / "corpus.json";
    if (!fs::exists(manifest_path)) throw std::invalid_argument("no corpus.json in " + directory);
    std::ifstream in(manifest_path);
    const auto manifest = nlohmann::json::parse(in);
    PlantedCorpus corpus{spec_from_json(manifest.at("spec")), {}};
    for (const auto& entry : manifest.at("sequences")) {
        const auto n = entry.at("id").get<std::size_t>();
        std::vector<TokenSequence> heads;
        for (std::size_t h = 0; h < corpus.spec.heads; ++h) {
            heads.emplace_back(read_tensor((fs::path(directory) / tensor_name(n, h, 'q')).string()),
                               read_tensor((fs::path(directory) / tensor_name(n, h, 'k')).string()),
                               read_tensor((fs::path(directory) / tensor_name(n, h, 'v')).string()));
        }
        corpus.sequences.push_back(PlantedSequence{
            std::move(heads), boundaries_from_json(entry.at("boundaries")),
            AttentionMatrix(read_tensor((fs::path(directory) / attention_name(n)).string()))});
    }
    return corpus;
}

std::vector<TrainingExample> make_training_examples(const PlantedCorpus& corpus, const LabelConfig& labels,
                                                    bool all_heads) {
    std::vector<LabelRecord> records;
    for (std::size_t n = 0; n < corpus.sequences.size(); ++n) {
        records.push_back(make_label_record(n, 0, label_sequence(corpus.sequences[n].attention, labels)));
    }
    return make_training_examples(corpus, records, all_heads);
}

std::vector<TrainingExample> make_training_examples(const PlantedCorpus& corpus, std::span<const LabelRecord> labels,
                                                    bool all_heads) {
    std::map<std::size_t, const LabelRecord*> by_id;
    for (const auto& r : labels) by_id[r.sequence_id] = &r;
    std::vector<TrainingExample> out;
    for (std::size_t n = 0; n < corpus.sequences.size(); ++n) {
        const auto it = by_id.find(n);
        if (it == by_id.end()) throw std::invalid_argument("no labels for sequence " + std::to_string(n));
        const auto& seq = corpus.sequences[n];
        const auto soft = dense_soft_labels(*it->second, seq.length());
        if (all_heads) {
            for (const auto& h : seq.heads) out.push_back({h.keys(), soft});
        } else {
            out.push_back({seq.heads[n % seq.heads.size()].keys(), soft});
        }
    }
    return out;
}

std::string method_name(BoundarySource source) {
    switch (source) {
        case BoundarySource::kDense: return "dense";
        case BoundarySource::kStatic: return "static";
        case BoundarySource::kOracle: return "dhsa-oracle";
        case BoundarySource::kPredicted: return "dhsa";
    }
    throw std::invalid_argument("unknown boundary source");
}

BoundarySet predicted_boundaries(std::span<const TokenSequence> heads, const PredictorParams& params,
                                 const NmsConfig& nms, CostCounters* counters) {
    if (heads.empty()) throw std::invalid_argument("predicted_boundaries: no heads");
    const std::size_t L = heads.front().length();
    std::vector<double> mean(L, 0.0);
    for (const auto& h : heads) {
        const auto p = predict_sequence(h.keys(), params);
        for (std::size_t i = 0; i < L; ++i) mean[i] += p[i];
    }
    for (auto& x : mean) x /= static_cast<double>(heads.size());
    if (counters) counters->score_ops += heads.size() * candidate_positions(L, params.shape().window).size();
    return nms_boundaries(mean, nms);
}

BoundarySet method_boundaries(BoundarySource source, const PlantedSequence& sequence, const CompareConfig& config,
                              CostCounters* counters) {
    const std::size_t L = sequence.length();
    switch (source) {
        case BoundarySource::kDense: return BoundarySet::whole(L);
        case BoundarySource::kStatic: {
            const std::size_t n = std::max<std::size_t>(1, sequence.truth.num_chunks());
            const std::size_t size = config.static_chunk_size ? config.static_chunk_size : std::max<std::size_t>(1, L / n);
            return static_boundaries(L, size);
        }
        case BoundarySource::kOracle: return sequence.truth;
        case BoundarySource::kPredicted:
            if (!config.predictor) throw std::invalid_argument("dhsa method needs a trained predictor");
            return predicted_boundaries(sequence.heads, *config.predictor, config.nms, counters);
    }
    throw std::invalid_argument("unknown boundary source");
}

SparsityMask method_mask(BoundarySource source, const PlantedSequence& sequence, const CompareConfig& config,
                         CostCounters* counters) {
    if (source == BoundarySource::kDense) {
        if (counters) *counters += dense_cost(sequence.length());
        return SparsityMask::full_causal(sequence.length());
    }
    const auto bounds = method_boundaries(source, sequence, config, counters);
    return prefill_mask(sequence.heads, bounds, Budget(config.budget), config.aggregation, counters);
}

namespace {

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t n = 0; n < count; ++n) fn(n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t n = t; n < count; n += threads) fn(n);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

std::vector<MaskReport> compare(const PlantedCorpus& corpus, std::span<const BoundarySource> methods,
                                const CompareConfig& config) {
    if (corpus.sequences.empty()) throw std::invalid_argument("compare: empty corpus");
    const std::size_t S = corpus.sequences.size();
    std::vector<MaskReport> reports(methods.size() * S);
    parallel_for(S, config.threads, [&](std::size_t n) {
        const auto& seq = corpus.sequences[n];
        for (std::size_t m = 0; m < methods.size(); ++m) {
            CostCounters counters;
            const auto t0 = std::chrono::steady_clock::now();
            const auto mask = method_mask(methods[m], seq, config, &counters);
            const auto t1 = std::chrono::steady_clock::now();
            auto& r = reports[m * S + n];
            r.method = method_name(methods[m]);
            r.sequence_id = n;
            r.recall = attention_mass_recall(seq.attention, mask);
            r.output_cosine = output_cosine(seq.heads, mask);
            r.attended_pairs = counters.attended_pairs;
            r.score_ops = counters.score_ops;
            r.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        }
    });
    return reports;
}

std::vector<MaskReport> evaluate_masks(const PlantedCorpus& corpus, std::span<const SparsityMask> masks,
                                       const std::string& method) {
    if (masks.size() != corpus.sequences.size()) throw std::invalid_argument("need one mask per sequence");
    std::vector<MaskReport> reports;
    for (std::size_t n = 0; n < masks.size(); ++n) {
        const auto& seq = corpus.sequences[n];
        MaskReport r;
        r.method = method;
        r.sequence_id = n;
        r.recall = attention_mass_recall(seq.attention, masks[n]);
        r.output_cosine = output_cosine(seq.heads, masks[n]);
        r.attended_pairs = masks[n].attended_pairs();
        reports.push_back(r);
    }
    return reports;
}

std::vector<MethodSummary> summarize(std::span<const MaskReport> reports) {
    std::vector<MethodSummary> out;
    for (const auto& r : reports) {
        auto it = std::find_if(out.begin(), out.end(), [&](const MethodSummary& s) { return s.method == r.method; });
        if (it == out.end()) {
            out.push_back({r.method});
            it = out.end() - 1;
        }
        ++it->sequences;
        it->recall += r.recall;
        it->output_cosine += r.output_cosine;
        it->attended_pairs += static_cast<double>(r.attended_pairs);
        it->score_ops += static_cast<double>(r.score_ops);
    }
    for (auto& s : out) {
        const double n = static_cast<double>(s.sequences);
        s.recall /= n;
        s.output_cosine /= n;
        s.attended_pairs /= n;
        s.score_ops /= n;
    }
    return out;
}

namespace {
std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10f", x);
    return buf;
}
}  // namespace

void write_reports_csv(const std::string& path, std::span<const MaskReport> reports, bool include_timing) {
    std::string text = "method,sequence_id,recall,output_cosine,attended_pairs,score_ops";
    text += include_timing ? ",wall_time_ms\n" : "\n";
    for (const auto& r : reports) {
        text += r.method + "," + std::to_string(r.sequence_id) + "," + fmt(r.recall) + "," + fmt(r.output_cosine) +
                "," + std::to_string(r.attended_pairs) + "," + std::to_string(r.score_ops);
        text += include_timing ? "," + fmt(r.wall_time_ms) + "\n" : "\n";
    }
    write_text_file(path, text);
}

void write_summary_json(const std::string& path, std::span<const MethodSummary> summary, const CompareConfig& config) {
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& s : summary) {
        methods.push_back({{"method", s.method},
                           {"sequences", s.sequences},
                           {"recall", s.recall},
                           {"output_cosine", s.output_cosine},
                           {"attended_pairs", s.attended_pairs},
                           {"score_ops", s.score_ops}});
    }
    const nlohmann::json j = {{"budget", config.budget},
                              {"static_chunk_size", config.static_chunk_size},
                              {"aggregation", config.aggregation == HeadAggregation::kMax ? "max" : "mean"},
                              {"methods", methods}};
    write_text_file(path, j.dump(2) + "\n");
}

std::vector<CurvePoint> recall_curve(const PlantedCorpus& corpus, std::span<const BoundarySource> methods,
                                     CompareConfig config, std::span<const std::size_t> budgets) {
    std::vector<CurvePoint> out;
    for (std::size_t b : budgets) {
        config.budget = b;
        const auto reports = compare(corpus, methods, config);
        for (const auto& s : summarize(reports)) out.push_back({s.method, b, s.recall, s.output_cosine});
    }
    return out;
}

void write_curve_csv(const std::string& path, std::span<const CurvePoint> points) {
    std::string text = "method,budget,recall,output_cosine\n";
    for (const auto& p : points) {
        text += p.method + "," + std::to_string(p.budget) + "," + fmt(p.recall) + "," + fmt(p.output_cosine) + "\n";
    }
    write_text_file(path, text);
}

}  // namespace dhsa
