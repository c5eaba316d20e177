#include "dhsa/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dhsa/harness.hpp"
#include "dhsa/tensor_io.hpp"

namespace dhsa {

namespace {

namespace fs = std::filesystem;

// Thrown for problems that are the caller's fault but only visible after
// parsing (bad method list, missing predictor, ...). Maps to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const char* const kSubcommands[] = {"gen", "label", "train", "mask", "compare", "gradcheck"};

std::string published(const std::string& text) { return text + " (published setting)"; }

struct Options {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    PlantedCorpusSpec corpus;

    std::string corpus_dir;
    LabelConfig labels;
    std::string log_base = "e";

    std::string labels_file;
    std::string validation_dir;
    std::string validation_labels;
    PredictorShape shape;
    bool all_heads = false;
    TrainConfig train;
    std::string focal = "canonical";

    std::string method = "oracle";
    std::string methods;
    std::string predictor;
    std::string masks_dir;
    std::string budgets;
    std::size_t budget = 64;
    std::size_t chunk_size = 0;
    std::string aggregation = "max";
    NmsConfig nms;
    bool timing = false;

    std::size_t inits = 10;
    std::size_t gc_length = 24;
    std::size_t gc_sequences = 2;
    GradCheckConfig gradcheck;
    double tolerance = 1e-4;
};

void add_out(CLI::App* sub, Options& o, bool required) {
    auto* opt = sub->add_option("--out", o.out, "output directory");
    if (required) opt->required();
}

void add_label_options(CLI::App* sub, Options& o) {
    sub->add_option("--window", o.labels.window, published("window w on each side of a position"))
        ->capture_default_str();
    sub->add_option("--max-chunks", o.labels.max_chunks, "N_c: at most N_c - 1 hard boundaries per sequence")
        ->capture_default_str();
    sub->add_option("--epsilon", o.labels.epsilon, published("ratio smoothing epsilon"))->capture_default_str();
    sub->add_option("--theta", o.labels.theta, published("hard-label ratio threshold"))->capture_default_str();
    sub->add_option("--zeta", o.labels.zeta, published("soft-label log offset"))->capture_default_str();
    sub->add_option("--alpha", o.labels.alpha, published("soft-label slope"))->capture_default_str();
    sub->add_option("--log-base", o.log_base, published("log base for beta and the soft label: e or 10"))
        ->check(CLI::IsMember({"e", "10"}))
        ->capture_default_str();
}

void add_shape_options(CLI::App* sub, Options& o) {
    sub->add_option("--encoder-heads", o.shape.heads, published("attention heads in the window encoder"))
        ->capture_default_str();
    sub->add_option("--hidden", o.shape.hidden, published("MLP hidden width"))->capture_default_str();
    sub->add_flag("--position-bias", o.shape.position_bias, "add learned per-slot biases to window inputs");
}

void add_loss_options(CLI::App* sub, Options& o) {
    sub->add_option("--gamma", o.train.loss.gamma, published("focal exponent"))->capture_default_str();
    sub->add_option("--pos-weight", o.train.loss.positive_weight, published("positive-class weight"))
        ->capture_default_str();
    sub->add_option("--focal", o.focal, "focal form: canonical or verbatim")
        ->check(CLI::IsMember({"canonical", "verbatim"}))
        ->capture_default_str();
}

void add_select_options(CLI::App* sub, Options& o) {
    sub->add_option("--budget", o.budget, "N_b: keys kept per query row")->capture_default_str();
    sub->add_option("--chunk-size", o.chunk_size, "static chunk size, 0 = L / number of planted segments")
        ->capture_default_str();
    sub->add_option("--aggregation", o.aggregation, "per-head similarity aggregation: max or mean")
        ->check(CLI::IsMember({"max", "mean"}))
        ->capture_default_str();
    sub->add_option("--predictor", o.predictor, "trained predictor checkpoint")->check(CLI::ExistingFile);
    sub->add_option("--nms-window", o.nms.window, published("NMS suppression radius (8 or 64)"))
        ->capture_default_str();
    sub->add_option("--min-conf", o.nms.min_conf, "NMS minimum boundary probability")->capture_default_str();
    sub->add_option("--nms-max-chunks", o.nms.max_chunks, "NMS chunk cap")->capture_default_str();
}

void add_corpus_input(CLI::App* sub, Options& o) {
    sub->add_option("--corpus", o.corpus_dir, "corpus directory written by gen")
        ->required()
        ->check(CLI::ExistingDirectory);
}

// Turns the config object into flag tokens for `sub`. Unknown keys are
// rejected so a typo never falls back to a default silently.
std::vector<std::string> config_tokens(const nlohmann::json& j, CLI::App& sub) {
    if (!j.is_object()) throw UsageError("config file must hold a JSON object");
    std::vector<std::string> tokens;
    for (const auto& [key, value] : j.items()) {
        const CLI::Option* opt = key == "config" || key == "help" ? nullptr : sub.get_option_no_throw("--" + key);
        if (!opt) throw UsageError("unknown config key '" + key + "' for " + sub.get_name());
        if (opt->get_expected_min() == 0) {
            if (!value.is_boolean()) throw UsageError("config key '" + key + "' expects true or false");
            if (value.get<bool>()) tokens.push_back("--" + key);
            continue;
        }
        tokens.push_back("--" + key);
        if (value.is_string()) {
            tokens.push_back(value.get<std::string>());
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& item : value) {
                if (!joined.empty()) joined += ',';
                joined += item.is_string() ? item.get<std::string>() : item.dump();
            }
            tokens.push_back(joined);
        } else if (value.is_number() || value.is_boolean()) {
            tokens.push_back(value.dump());
        } else {
            throw UsageError("config key '" + key + "' has an unsupported value");
        }
    }
    return tokens;
}

std::string find_config_path(const std::vector<std::string>& args) {
    for (std::size_t n = 0; n < args.size(); ++n) {
        if (args[n] == "--config" && n + 1 < args.size()) return args[n + 1];
        if (args[n].rfind("--config=", 0) == 0) return args[n].substr(9);
    }
    return {};
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

BoundarySource parse_method(const std::string& name) {
    if (name == "dense") return BoundarySource::kDense;
    if (name == "static") return BoundarySource::kStatic;
    if (name == "oracle" || name == "dhsa-oracle") return BoundarySource::kOracle;
    if (name == "dhsa") return BoundarySource::kPredicted;
    throw UsageError("unknown method '" + name + "' (dense, static, oracle, dhsa)");
}

fs::path out_path(const Options& o, const std::string& name) {
    fs::create_directories(o.out);
    return fs::path(o.out) / name;
}

nlohmann::json metrics_json(const BoundaryMetrics& m) {
    return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"topk_overlap", m.topk_overlap}};
}

void finalize_label_config(Options& o) {
    o.labels.log_base = o.log_base == "10" ? LogBase::kTen : LogBase::kNatural;
}

CompareConfig compare_config(const Options& o, const std::optional<PredictorParams>& predictor) {
    CompareConfig c;
    c.budget = o.budget;
    c.static_chunk_size = o.chunk_size;
    c.aggregation = o.aggregation == "mean" ? HeadAggregation::kMean : HeadAggregation::kMax;
    c.nms = o.nms;
    c.predictor = predictor ? &*predictor : nullptr;
    c.threads = o.threads;
    return c;
}

std::optional<PredictorParams> load_predictor(const Options& o, const PlantedCorpus& corpus) {
    if (o.predictor.empty()) return std::nullopt;
    auto p = load_checkpoint(o.predictor);
    if (p.shape().dim != corpus.spec.dim) {
        throw std::runtime_error("predictor key dimension " + std::to_string(p.shape().dim) +
                                 " does not match corpus dimension " + std::to_string(corpus.spec.dim));
    }
    return p;
}

int cmd_gen(Options& o, std::ostream& out) {
    o.corpus.seed = o.seed;
    const auto corpus = gen_planted(o.corpus);
    save_corpus(o.out, corpus);
    out << "wrote " << corpus.sequences.size() << " sequences (L=" << o.corpus.length << ") to " << o.out << "\n";
    return kExitOk;
}

int cmd_label(Options& o, std::ostream& out) {
    finalize_label_config(o);
    const auto corpus = load_corpus(o.corpus_dir);
    std::vector<LabelRecord> records;
    std::size_t planted = 0, recovered = 0;
    for (std::size_t n = 0; n < corpus.sequences.size(); ++n) {
        const auto& seq = corpus.sequences[n];
        const auto labels = label_sequence(seq.attention, o.labels);
        for (std::size_t p : seq.planted_positions()) {
            ++planted;
            recovered += std::binary_search(labels.hard.begin(), labels.hard.end(), p);
        }
        records.push_back(make_label_record(n, 0, labels));
    }
    write_label_file(out_path(o, "labels.jsonl").string(), records);
    const double rate = planted ? static_cast<double>(recovered) / static_cast<double>(planted) : 1.0;
    const nlohmann::json summary = {
        {"sequences", records.size()}, {"planted", planted}, {"recovered", recovered}, {"recovery", rate}};
    write_text_file(out_path(o, "label_summary.json").string(), summary.dump(2) + "\n");
    out << "labelled " << records.size() << " sequences; planted boundaries recovered " << recovered << "/"
        << planted << "\n";
    return kExitOk;
}

int cmd_train(Options& o, std::ostream& out) {
    finalize_label_config(o);
    o.train.loss.form = o.focal == "verbatim" ? FocalForm::kVerbatim : FocalForm::kCanonical;
    o.train.seed = o.seed;
    const auto corpus = load_corpus(o.corpus_dir);
    const auto examples = o.labels_file.empty()
                              ? make_training_examples(corpus, o.labels, o.all_heads)
                              : make_training_examples(corpus, read_label_file(o.labels_file), o.all_heads);
    std::vector<TrainingExample> validation;
    if (!o.validation_dir.empty()) {
        const auto vcorpus = load_corpus(o.validation_dir);
        validation = o.validation_labels.empty()
                         ? make_training_examples(vcorpus, o.labels)
                         : make_training_examples(vcorpus, read_label_file(o.validation_labels));
    }
    PredictorShape shape = o.shape;
    shape.dim = corpus.spec.dim;
    shape.window = o.labels.window;
    const auto result = train(examples, PredictorParams::xavier(shape, o.seed), o.train, validation);
    save_checkpoint(out_path(o, "predictor.prd").string(), result.params);

    nlohmann::json history = nlohmann::json::array();
    for (const auto& e : result.history) {
        nlohmann::json row = {{"epoch", e.epoch}, {"loss", e.loss}, {"train", metrics_json(e.train)}};
        if (e.validation) row["validation"] = metrics_json(*e.validation);
        history.push_back(row);
    }
    write_text_file(out_path(o, "history.json").string(), history.dump(2) + "\n");
    const auto& last = result.history.back();
    out << "trained " << last.epoch << " epochs; loss " << last.loss << ", train F1 " << last.train.f1;
    if (last.validation) out << ", validation F1 " << last.validation->f1 << ", top-K " << last.validation->topk_overlap;
    out << "\n";
    return kExitOk;
}

int cmd_mask(Options& o, std::ostream& out) {
    const auto corpus = load_corpus(o.corpus_dir);
    const auto source = parse_method(o.method);
    if (source == BoundarySource::kPredicted && o.predictor.empty()) throw UsageError("method dhsa needs --predictor");
    const auto predictor = load_predictor(o, corpus);
    const auto config = compare_config(o, predictor);
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t n = 0; n < corpus.sequences.size(); ++n) {
        const auto& seq = corpus.sequences[n];
        CostCounters counters;
        const auto mask = method_mask(source, seq, config, &counters);
        const std::string file = "seq" + std::to_string(n) + ".mask";
        write_mask_binary(out_path(o, file).string(), mask);
        entries.push_back({{"id", n},
                           {"file", file},
                           {"boundaries", method_boundaries(source, seq, config)},
                           {"attended_pairs", counters.attended_pairs},
                           {"score_ops", counters.score_ops}});
    }
    const nlohmann::json manifest = {
        {"method", method_name(source)}, {"budget", o.budget}, {"aggregation", o.aggregation}, {"sequences", entries}};
    write_text_file(out_path(o, "masks.json").string(), manifest.dump(2) + "\n");
    out << "wrote " << entries.size() << " " << method_name(source) << " masks to " << o.out << "\n";
    return kExitOk;
}

std::vector<MaskReport> evaluate_mask_dir(const PlantedCorpus& corpus, const std::string& dir) {
    const auto path = fs::path(dir) / "masks.json";
    if (!fs::exists(path)) throw UsageError("no masks.json in " + dir);
    std::ifstream in(path);
    const auto manifest = nlohmann::json::parse(in);
    std::vector<SparsityMask> masks;
    std::vector<CostCounters> counters;
    for (const auto& e : manifest.at("sequences")) {
        masks.push_back(read_mask_binary((fs::path(dir) / e.at("file").get<std::string>()).string()));
        counters.push_back({e.at("score_ops").get<std::uint64_t>(), e.at("attended_pairs").get<std::uint64_t>()});
    }
    auto reports = evaluate_masks(corpus, masks, "file:" + manifest.at("method").get<std::string>());
    for (std::size_t n = 0; n < reports.size(); ++n) reports[n].score_ops = counters[n].score_ops;
    return reports;
}

int cmd_compare(Options& o, std::ostream& out) {
    const auto corpus = load_corpus(o.corpus_dir);
    std::vector<BoundarySource> methods;
    const std::string list = o.methods.empty() ? (o.predictor.empty() ? "dense,static,oracle" : "dense,static,oracle,dhsa")
                                               : o.methods;
    for (const auto& name : split_list(list)) methods.push_back(parse_method(name));
    const bool wants_predictor = std::count(methods.begin(), methods.end(), BoundarySource::kPredicted) > 0;
    if (wants_predictor && o.predictor.empty()) throw UsageError("method dhsa needs --predictor");
    const auto predictor = load_predictor(o, corpus);
    const auto config = compare_config(o, predictor);

    auto reports = compare(corpus, methods, config);
    if (!o.masks_dir.empty()) {
        const auto extra = evaluate_mask_dir(corpus, o.masks_dir);
        reports.insert(reports.end(), extra.begin(), extra.end());
    }
    write_reports_csv(out_path(o, "reports.csv").string(), reports, o.timing);
    const auto summary = summarize(reports);
    write_summary_json(out_path(o, "summary.json").string(), summary, config);
    if (!o.budgets.empty()) {
        std::vector<std::size_t> budgets;
        for (const auto& b : split_list(o.budgets)) {
            try {
                budgets.push_back(std::stoul(b));
            } catch (const std::exception&) {
                throw UsageError("bad budget '" + b + "' in --budgets");
            }
        }
        write_curve_csv(out_path(o, "curve.csv").string(), recall_curve(corpus, methods, config, budgets));
    }
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %10s %10s %14s %14s\n", "method", "recall", "cosine", "pairs", "score_ops");
    out << line;
    for (const auto& s : summary) {
        std::snprintf(line, sizeof line, "%-16s %10.4f %10.4f %14.1f %14.1f\n", s.method.c_str(), s.recall,
                      s.output_cosine, s.attended_pairs, s.score_ops);
        out << line;
    }
    return kExitOk;
}

int cmd_gradcheck(Options& o, std::ostream& out) {
    PlantedCorpusSpec spec;
    spec.num_sequences = o.gc_sequences;
    spec.length = o.gc_length;
    spec.dim = o.corpus.dim;
    spec.heads = 1;
    spec.num_segments = 2;
    spec.min_segment_length = std::min<std::size_t>(10, o.gc_length / 2);
    spec.seed = o.seed;
    const auto corpus = gen_planted(spec);
    LabelConfig labels;
    labels.window = o.labels.window;
    const auto batch = make_training_examples(corpus, labels);

    PredictorShape shape = o.shape;
    shape.dim = spec.dim;
    shape.window = o.labels.window;
    o.gradcheck.loss.form = o.focal == "verbatim" ? FocalForm::kVerbatim : FocalForm::kCanonical;
    o.gradcheck.loss.gamma = o.train.loss.gamma;
    o.gradcheck.loss.positive_weight = o.train.loss.positive_weight;

    double worst = 0.0;
    std::size_t checked = 0, skipped = 0;
    nlohmann::json runs = nlohmann::json::array();
    for (std::size_t k = 0; k < o.inits; ++k) {
        auto config = o.gradcheck;
        config.seed = o.seed + k;
        const auto r = grad_check(PredictorParams::xavier(shape, o.seed + k), batch, config);
        worst = std::max(worst, r.max_relative_error);
        checked += r.checked;
        skipped += r.skipped_kinks;
        runs.push_back({{"init", k}, {"max_relative_error", r.max_relative_error}, {"checked", r.checked},
                        {"skipped_kinks", r.skipped_kinks}});
    }
    const bool pass = worst < o.tolerance;
    if (!o.out.empty()) {
        const nlohmann::json report = {{"max_relative_error", worst}, {"tolerance", o.tolerance},
                                       {"pass", pass},               {"analytic_scale", o.gradcheck.analytic_scale},
                                       {"runs", runs}};
        write_text_file(out_path(o, "gradcheck.json").string(), report.dump(2) + "\n");
    }
    char line[160];
    std::snprintf(line, sizeof line, "max relative error %.3e over %zu samples (%zu kink skips): %s\n", worst, checked,
                  skipped, pass ? "ok" : "FAILED");
    out << line;
    return pass ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Dynamic hierarchical sparse attention toolkit"};
    app.name("dhsa");
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON file of option values (flags override it)");
        sub->add_option("--seed", o.seed, "seed for every random draw")->capture_default_str();
    };

    auto* gen = app.add_subcommand("gen", "generate a planted corpus");
    common(gen);
    add_out(gen, o, true);
    gen->add_option("--num-sequences", o.corpus.num_sequences, "sequences to generate")->capture_default_str();
    gen->add_option("--length", o.corpus.length, "tokens per sequence L")->capture_default_str();
    gen->add_option("--dim", o.corpus.dim, "head dimension d")->capture_default_str();
    gen->add_option("--heads", o.corpus.heads, "attention heads")->capture_default_str();
    gen->add_option("--num-segments", o.corpus.num_segments, "planted segments per sequence")->capture_default_str();
    gen->add_option("--leakage", o.corpus.leakage, "max cross-segment attention mass per row")->capture_default_str();
    gen->add_option("--noise", o.corpus.noise, "query/key noise standard deviation")->capture_default_str();
    gen->add_option("--min-segment-length", o.corpus.min_segment_length, "0 = max(10, L / (3 * segments))")
        ->capture_default_str();

    auto* label = app.add_subcommand("label", "derive boundary labels from corpus attention");
    common(label);
    add_out(label, o, true);
    add_corpus_input(label, o);
    add_label_options(label, o);

    auto* trainc = app.add_subcommand("train", "train the boundary predictor");
    common(trainc);
    add_out(trainc, o, true);
    add_corpus_input(trainc, o);
    trainc->add_option("--labels", o.labels_file, "label file from label (default: label on the fly)")
        ->check(CLI::ExistingFile);
    trainc->add_option("--validation-corpus", o.validation_dir, "held-out corpus directory")
        ->check(CLI::ExistingDirectory);
    trainc->add_option("--validation-labels", o.validation_labels, "label file for the held-out corpus")
        ->check(CLI::ExistingFile);
    add_label_options(trainc, o);
    add_shape_options(trainc, o);
    add_loss_options(trainc, o);
    trainc->add_flag("--all-heads", o.all_heads, "one training example per head instead of per sequence");
    trainc->add_option("--epochs", o.train.epochs, "training epochs")->capture_default_str();
    trainc->add_option("--batch-size", o.train.batch_size, "sequences per optimizer step")->capture_default_str();
    trainc->add_option("--lr", o.train.learning_rate, "Adam learning rate")->capture_default_str();

    auto* mask = app.add_subcommand("mask", "predict sparsity masks for a corpus");
    common(mask);
    add_out(mask, o, true);
    add_corpus_input(mask, o);
    mask->add_option("--method", o.method, "boundary source: dense, static, oracle or dhsa")->capture_default_str();
    add_select_options(mask, o);

    auto* comparec = app.add_subcommand("compare", "compare dense, static and dynamic masks");
    common(comparec);
    add_out(comparec, o, true);
    add_corpus_input(comparec, o);
    comparec->add_option("--methods", o.methods,
                         "comma list of dense, static, oracle, dhsa (default: all available)");
    comparec->add_option("--masks", o.masks_dir, "also evaluate masks written by mask")
        ->check(CLI::ExistingDirectory);
    comparec->add_option("--budgets", o.budgets, "comma list of budgets for curve.csv");
    comparec->add_option("--threads", o.threads, "worker threads (outputs do not depend on it)")
        ->capture_default_str();
    comparec->add_flag("--timing", o.timing, "add wall-clock column to reports.csv");
    add_select_options(comparec, o);

    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of predictor gradients");
    common(grad);
    add_out(grad, o, false);
    grad->add_option("--inits", o.inits, "random initializations")->capture_default_str();
    grad->add_option("--length", o.gc_length, "tokens per check sequence")->capture_default_str();
    grad->add_option("--sequences", o.gc_sequences, "sequences in the check batch")->capture_default_str();
    grad->add_option("--dim", o.corpus.dim, "key dimension d")->capture_default_str();
    grad->add_option("--window", o.labels.window, published("window w on each side of a position"))
        ->capture_default_str();
    add_shape_options(grad, o);
    add_loss_options(grad, o);
    grad->add_option("--samples-per-block", o.gradcheck.samples_per_block, "weights sampled per parameter block")
        ->capture_default_str();
    grad->add_option("--step", o.gradcheck.step, "central-difference step")->capture_default_str();
    grad->add_option("--mutation", o.gradcheck.analytic_scale, "scale applied to the analytic gradient")
        ->capture_default_str();
    grad->add_option("--tolerance", o.tolerance, "max relative error for success")->capture_default_str();

    try {
        std::vector<std::string> merged = args;
        const bool known_sub =
            !args.empty() && std::find(std::begin(kSubcommands), std::end(kSubcommands), args[0]) != std::end(kSubcommands);
        const std::string config_path = known_sub ? find_config_path(args) : std::string{};
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw UsageError("cannot open config file " + config_path);
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                throw UsageError("config file " + config_path + ": " + e.what());
            }
            const auto tokens = config_tokens(j, *app.get_subcommand(args[0]));
            merged = {args[0]};
            merged.insert(merged.end(), tokens.begin(), tokens.end());
            merged.insert(merged.end(), args.begin() + 1, args.end());
        }
        std::reverse(merged.begin(), merged.end());  // CLI11 consumes from the back
        app.parse(merged);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;  // help exits 0
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen(o, out);
        if (label->parsed()) return cmd_label(o, out);
        if (trainc->parsed()) return cmd_train(o, out);
        if (mask->parsed()) return cmd_mask(o, out);
        if (comparec->parsed()) return cmd_compare(o, out);
        return cmd_gradcheck(o, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace dhsa
