// dyadgen: synthesize dyad corpora, build shape models and affect-shape
// dictionaries, train the sequence generators, generate behavior, evaluate.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dyadgen/cgan.hpp"
#include "dyadgen/clstm.hpp"
#include "dyadgen/corpus.hpp"
#include "dyadgen/dictionary.hpp"
#include "dyadgen/eval.hpp"
#include "dyadgen/io_text.hpp"
#include "dyadgen/pdm.hpp"
#include "dyadgen/sketch.hpp"

namespace fs = std::filesystem;
using namespace dyadgen;

namespace {

void echo(const std::string& key, const std::string& value) {
    std::cout << "config." << key << ' ' << value << "\n";
}
void echo(const std::string& key, double value) { echo(key, g17(value)); }
void echo(const std::string& key, long value) { echo(key, std::to_string(value)); }

const DyadSequence& find_sequence(const Corpus& corpus, const std::string& id) {
    for (const auto& seq : corpus.sequences)
        if (seq.id == id) return seq;
    throw DataError("sequence id '" + id + "' not found in corpus");
}

Standardizer corpus_standardizer(const Corpus& corpus) {
    return Standardizer::fit(corpus.flattened_shapes());
}

// Trailing-window mean of the partner affect, one vector per frame.
std::vector<AffectVector> trailing_affects(const DyadSequence& seq, int window) {
    std::vector<AffectVector> out;
    out.reserve(seq.frames.size());
    AffectVector acc = AffectVector::Zero();
    std::size_t in_acc = 0;
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        acc += seq.frames[t].partner_affect;
        ++in_acc;
        if (in_acc > static_cast<std::size_t>(window)) {
            acc -= seq.frames[t - window].partner_affect;
            --in_acc;
        }
        out.push_back(acc / static_cast<double>(in_acc));
    }
    return out;
}

Corpus holdout_tail(const Corpus& corpus, int holdout) {
    if (holdout < 1 || holdout >= static_cast<int>(corpus.sequences.size()))
        throw UsageError("--holdout must be in [1, n_sequences)");
    Corpus tail;
    tail.config = corpus.config;
    tail.sequences.assign(corpus.sequences.end() - holdout, corpus.sequences.end());
    return tail;
}

Corpus training_head(const Corpus& corpus, int holdout) {
    if (holdout == 0) return corpus;
    if (holdout < 0 || holdout >= static_cast<int>(corpus.sequences.size()))
        throw UsageError("--holdout must be in [0, n_sequences)");
    Corpus head;
    head.config = corpus.config;
    head.sequences.assign(corpus.sequences.begin(), corpus.sequences.end() - holdout);
    return head;
}

struct SynthArgs {
    std::string out;
    CorpusConfig cfg;
};

int cmd_synth(const SynthArgs& a) {
    echo("out", a.out);
    echo("sequences", static_cast<long>(a.cfg.n_sequences));
    echo("seq_len", static_cast<long>(a.cfg.seq_len));
    echo("m", static_cast<long>(a.cfg.m));
    echo("intensity_levels", static_cast<long>(a.cfg.n_intensity_levels));
    echo("seed", static_cast<long>(a.cfg.seed));
    const SynthResult result = synth_corpus(a.cfg);
    save_corpus(result.corpus, result.pdm, a.out);
    std::cout << "wrote " << result.corpus.sequences.size() << " sequences ("
              << result.corpus.frame_count() << " frames) to " << a.out << "\n";
    std::cout << "class separation " << g17(result.truth.min_class_separation)
              << " (noise scale " << g17(result.truth.noise_sigma) << ")\n";
    return 0;
}

struct BuildPdmArgs {
    std::string corpus_dir, out;
    int m = 10;
    int stride = 1;
};

int cmd_build_pdm(const BuildPdmArgs& a) {
    echo("corpus", a.corpus_dir);
    echo("m", static_cast<long>(a.m));
    echo("stride", static_cast<long>(a.stride));
    echo("out", a.out);
    const Corpus corpus = load_corpus(a.corpus_dir);
    const PDMModel reference = load_corpus_pdm(a.corpus_dir);

    // Decode each frame to its canonical-pose 3D landmarks (non-rigid only)
    // through the corpus's reference model; alignment strips pose anyway.
    std::vector<Landmarks3D> shapes;
    for (const auto& seq : corpus.sequences)
        for (std::size_t t = 0; t < seq.frames.size(); t += a.stride) {
            const Eigen::VectorXd deform =
                reference.basis * seq.frames[t].agent_shape.q;
            Landmarks3D s = reference.mean_shape;
            for (int i = 0; i < kLandmarkCount; ++i) s.row(i) += deform.segment<3>(3 * i).transpose();
            shapes.push_back(std::move(s));
        }
    const PDMModel pdm = build_pdm(shapes, a.m);
    save_pdm(pdm, a.out);
    std::cout << "built PDM from " << shapes.size() << " shapes; mean reconstruction error "
              << g17(mean_reconstruction_error(pdm, shapes)) << "\n";
    return 0;
}

struct BuildDictArgs {
    std::string corpus_dir, out;
    DictionaryConfig cfg;
};

int cmd_build_dict(const BuildDictArgs& a) {
    echo("corpus", a.corpus_dir);
    echo("min_size", static_cast<long>(a.cfg.min_size));
    echo("seed", static_cast<long>(a.cfg.seed));
    echo("label_window", static_cast<long>(a.cfg.label_window));
    echo("out", a.out);
    const Corpus corpus = load_corpus(a.corpus_dir);
    const DictionaryBuildResult build = build_dictionary(corpus, a.cfg);
    save_dictionary(build.dictionary, a.out);
    std::cout << "dictionary with " << build.dictionary.member_count() << " members:";
    for (const auto& cluster : build.dictionary.clusters)
        std::cout << ' ' << affect_class_name(cluster.class_id) << '='
                  << cluster.subclusters.size();
    std::cout << "\n";
    return 0;
}

struct TrainArgs {
    std::string method, corpus_dir, out;
    int holdout = 0;
    // lstm
    CLstmConfig lstm;
    // cgan
    CGanConfig cgan;
    long cgan_steps = 5000;
    int cgan_window = 100;
    std::string z_source = "gaussian";
    std::string dict_path;
};

int cmd_train(const TrainArgs& a) {
    echo("method", a.method);
    echo("corpus", a.corpus_dir);
    echo("holdout", static_cast<long>(a.holdout));
    echo("out", a.out);
    const Corpus full = load_corpus(a.corpus_dir);
    const Corpus corpus = training_head(full, a.holdout);
    const Standardizer standardizer = corpus_standardizer(corpus);
    const int d = corpus.shape_dim();

    if (a.method == "lstm") {
        CLstmConfig cfg = a.lstm;
        cfg.output_dim = d;
        cfg.input_dim = kAffectClassCount + d;
        echo("window", static_cast<long>(cfg.window));
        echo("hidden", static_cast<long>(cfg.hidden_dim));
        echo("epochs", static_cast<long>(cfg.epochs));
        echo("lr", cfg.learning_rate);
        echo("grad_clip", cfg.grad_clip);
        echo("seed", static_cast<long>(cfg.seed));
        echo("aggregate_affect", static_cast<long>(cfg.aggregate_affect ? 1 : 0));
        CLstmModel model = CLstmModel::init(cfg);
        const TrainReport report = train(model, corpus, cfg, standardizer);
        save_clstm(model, a.out);
        for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
            std::cout << "epoch " << e << " loss " << g17(report.epoch_loss[e]) << "\n";
        return 0;
    }
    if (a.method == "cgan") {
        CGanConfig cfg = a.cgan;
        cfg.data_dim = d;
        if (cfg.z_dim == 0) cfg.z_dim = d;
        echo("steps", a.cgan_steps);
        echo("batch", static_cast<long>(cfg.batch_size));
        echo("hidden", static_cast<long>(cfg.hidden));
        echo("lr", cfg.learning_rate);
        echo("z_dim", static_cast<long>(cfg.z_dim));
        echo("seed", static_cast<long>(cfg.seed));
        echo("z_source", a.z_source);

        CGanModel model = CGanModel::init(cfg);
        model.standardizer = standardizer;

        // Real pairs: trailing-aggregate affect conditioning a standardized shape.
        std::vector<ConditionedSample> pool;
        pool.reserve(corpus.frame_count());
        for (const auto& seq : corpus.sequences) {
            const auto affects = trailing_affects(seq, a.cgan_window);
            for (std::size_t t = 0; t < seq.frames.size(); ++t)
                pool.push_back({affects[t], standardizer.apply(seq.frames[t].agent_shape.flatten())});
        }
        if (pool.size() < static_cast<std::size_t>(cfg.batch_size))
            throw DataError("corpus smaller than one batch");

        ZSource source;
        AffectShapeDictionary dict;
        if (a.z_source == "dictionary") {
            if (a.dict_path.empty()) throw UsageError("--z-source dictionary requires --dict");
            dict = load_dictionary(a.dict_path);
            source = [&dict](const AffectVector& affect, Rng& rng) {
                return dict.standardization.apply(sample_z(dict, affect, nullptr, rng));
            };
        } else if (a.z_source != "gaussian") {
            throw UsageError("--z-source must be gaussian or dictionary");
        }

        Rng rng(Rng::derive(cfg.seed, 0x9a7));
        std::vector<ConditionedSample> batch(cfg.batch_size);
        for (long step = 0; step < a.cgan_steps; ++step) {
            for (int i = 0; i < cfg.batch_size; ++i) batch[i] = pool[rng.below(pool.size())];
            const StepLosses losses = train_step(model, batch, rng, source);
            if (step % 500 == 0 || step + 1 == a.cgan_steps)
                std::cout << "step " << step << " d_loss " << g17(losses.d) << " g_loss "
                          << g17(losses.g) << "\n";
        }
        save_cgan(model, a.out);
        return 0;
    }
    throw UsageError("--method must be lstm or cgan");
}

struct GenerateArgs {
    std::string method, corpus_dir, out;
    std::string dict_path, ckpt_path;
    std::string affect_class, from_seq;
    std::string mode = "overlap";
    std::string render_dir, svg_path;
    std::string z_source = "gaussian";
    std::string fit = "auto";
    int steps = 100;
    int top_k = 5;
    int width = 256, height = 256;
    std::uint64_t seed = 1;
};

int cmd_generate(const GenerateArgs& a) {
    echo("method", a.method);
    echo("corpus", a.corpus_dir);
    echo("steps", static_cast<long>(a.steps));
    echo("seed", static_cast<long>(a.seed));
    echo("out", a.out);
    const Corpus corpus = load_corpus(a.corpus_dir);
    const PDMModel pdm = load_corpus_pdm(a.corpus_dir);
    const int d = corpus.shape_dim();
    Rng rng(Rng::derive(a.seed, 0x9e4));

    // Conditioning affect per generated frame.
    std::vector<AffectVector> affects;
    if (!a.affect_class.empty()) {
        const auto cls = affect_class_from_name(a.affect_class);
        if (!cls) throw UsageError("unknown affect class '" + a.affect_class + "'");
        AffectVector one = AffectVector::Zero();
        one[static_cast<int>(*cls)] = 1.0;
        affects.assign(a.steps, one);
        echo("affect_class", a.affect_class);
    }

    DyadSequence out_seq;
    out_seq.id = "generated";
    std::vector<ShapeParams> shapes;

    if (a.method == "dict") {
        if (a.dict_path.empty()) throw UsageError("--method dict requires --dict");
        echo("dict", a.dict_path);
        echo("top_k", static_cast<long>(a.top_k));
        const AffectShapeDictionary dict = load_dictionary(a.dict_path);
        if (a.affect_class.empty()) {
            if (a.from_seq.empty()) throw UsageError("need --affect-class or --from-seq");
            const DyadSequence& src = find_sequence(corpus, a.from_seq);
            if (static_cast<int>(src.frames.size()) < a.steps)
                throw DataError("source sequence shorter than --steps");
            for (int t = 0; t < a.steps; ++t) affects.push_back(src.frames[t].partner_affect);
        }
        Eigen::VectorXd prev;
        for (int t = 0; t < a.steps; ++t) {
            const Eigen::VectorXd z =
                sample_z(dict, affects[t], t == 0 ? nullptr : &prev, rng, a.top_k);
            prev = z;
            shapes.push_back(ShapeParams::unflatten(z));
        }
    } else if (a.method == "lstm") {
        if (a.ckpt_path.empty()) throw UsageError("--method lstm requires --ckpt");
        if (a.from_seq.empty()) throw UsageError("--method lstm requires --from-seq for history");
        echo("ckpt", a.ckpt_path);
        echo("mode", a.mode);
        echo("from_seq", a.from_seq);
        const CLstmModel model = load_clstm(a.ckpt_path);
        const int n = model.config.window;
        const DyadSequence& src = find_sequence(corpus, a.from_seq);
        if (static_cast<int>(src.frames.size()) < n)
            throw DataError("source sequence shorter than the model window");
        const std::vector<DyadFrame> history(src.frames.begin(), src.frames.begin() + n);
        if (a.affect_class.empty()) {
            if (static_cast<int>(src.frames.size()) < n + a.steps)
                throw DataError("source sequence too short for the requested steps");
            for (int t = n; t < n + a.steps; ++t) affects.push_back(src.frames[t].partner_affect);
        }
        const GenerationMode mode = a.mode == "nonoverlap" ? GenerationMode::NonOverlap
                                                           : GenerationMode::Overlap;
        if (a.mode != "overlap" && a.mode != "nonoverlap")
            throw UsageError("--mode must be overlap or nonoverlap");
        shapes = generate(model, history, affects, a.steps, mode);
        echo("history_frames", static_cast<long>(n));
    } else if (a.method == "cgan") {
        if (a.ckpt_path.empty()) throw UsageError("--method cgan requires --ckpt");
        echo("ckpt", a.ckpt_path);
        echo("z_source", a.z_source);
        const CGanModel model = load_cgan(a.ckpt_path);
        if (a.affect_class.empty()) {
            if (a.from_seq.empty()) throw UsageError("need --affect-class or --from-seq");
            const DyadSequence& src = find_sequence(corpus, a.from_seq);
            if (static_cast<int>(src.frames.size()) < a.steps)
                throw DataError("source sequence shorter than --steps");
            const auto agg = trailing_affects(src, 100);
            affects.assign(agg.begin(), agg.begin() + a.steps);
        }
        AffectShapeDictionary dict;
        std::optional<Eigen::VectorXd> prev;
        for (int t = 0; t < a.steps; ++t) {
            Eigen::VectorXd z;
            if (a.z_source == "dictionary") {
                if (a.dict_path.empty()) throw UsageError("--z-source dictionary requires --dict");
                if (dict.dim == 0) dict = load_dictionary(a.dict_path);
                const Eigen::VectorXd raw =
                    sample_z(dict, affects[t], prev ? &*prev : nullptr, rng, a.top_k);
                prev = raw;
                z = dict.standardization.apply(raw);
            } else {
                z = gaussian_z_source(model.config.z_dim)(affects[t], rng);
            }
            const auto out = generate(model, affects[t], 1, rng, z);
            shapes.push_back(ShapeParams::unflatten(model.standardizer.invert(out[0])));
        }
    } else {
        throw UsageError("--method must be dict, lstm or cgan");
    }

    out_seq.frames.resize(shapes.size());
    for (std::size_t t = 0; t < shapes.size(); ++t) {
        out_seq.frames[t].t = static_cast<int>(t);
        out_seq.frames[t].partner_affect = affects.empty() ? AffectVector::Zero() : affects[t];
        out_seq.frames[t].agent_shape = shapes[t];
    }
    save_sequence_file(out_seq, d, a.out);
    std::cout << "wrote " << shapes.size() << " frames to " << a.out << "\n";

    if ((!a.render_dir.empty() || !a.svg_path.empty()) && !shapes.empty()) {
        const Topology topo = Topology::ibug68();
        std::vector<Landmarks2D> lm;
        lm.reserve(shapes.size());
        for (const auto& p : shapes) lm.push_back(project(pdm, p));

        if (a.fit == "auto") {
            // view transform: fit the sequence's bounding box into the canvas
            double lo_x = lm[0].col(0).minCoeff(), hi_x = lm[0].col(0).maxCoeff();
            double lo_y = lm[0].col(1).minCoeff(), hi_y = lm[0].col(1).maxCoeff();
            for (const auto& f : lm) {
                lo_x = std::min(lo_x, f.col(0).minCoeff());
                hi_x = std::max(hi_x, f.col(0).maxCoeff());
                lo_y = std::min(lo_y, f.col(1).minCoeff());
                hi_y = std::max(hi_y, f.col(1).maxCoeff());
            }
            const double span_x = std::max(hi_x - lo_x, 1e-9);
            const double span_y = std::max(hi_y - lo_y, 1e-9);
            const double view = 0.9 * std::min(a.width / span_x, a.height / span_y);
            for (auto& f : lm) {
                f.col(0) = (f.col(0).array() - 0.5 * (lo_x + hi_x)) * view + 0.5 * a.width;
                f.col(1) = (f.col(1).array() - 0.5 * (lo_y + hi_y)) * view + 0.5 * a.height;
            }
        } else if (a.fit != "none") {
            throw UsageError("--fit must be auto or none");
        }

        if (!a.render_dir.empty()) {
            std::vector<RasterFrame> frames;
            frames.reserve(lm.size());
            for (const auto& f : lm) frames.push_back(render(f, topo, a.width, a.height));
            export_pgm(frames, a.render_dir);
            std::cout << "rendered frames to " << a.render_dir << "\n";
        }
        if (!a.svg_path.empty()) {
            export_svg(lm, topo, a.width, a.height, a.svg_path);
            std::cout << "wrote vector preview to " << a.svg_path << "\n";
        }
    }
    return 0;
}

struct EvalArgs {
    std::string generated, corpus_dir, out, json_out;
    std::string truth_seq;
    std::string dict_path, lstm_path;
    int truth_offset = 0;
    int holdout = 0;
};

int cmd_eval(const EvalArgs& a) {
    echo("generated", a.generated);
    echo("corpus", a.corpus_dir);
    echo("out", a.out);
    const Corpus corpus = load_corpus(a.corpus_dir);
    const PDMModel pdm = load_corpus_pdm(a.corpus_dir);
    const Standardizer standardizer = corpus_standardizer(corpus);
    const int d = corpus.shape_dim();

    EvalReport report;
    report.config["generated"] = a.generated;
    report.config["corpus"] = a.corpus_dir;
    report.config["mse_definition"] = "mean over frames and dimensions, standardized shape space";

    const DyadSequence gen_seq = load_sequence_file(a.generated, d);
    if (gen_seq.frames.empty()) throw DataError("generated sequence is empty");
    std::vector<ShapeParams> gen_shapes;
    std::vector<Eigen::VectorXd> gen_std;
    for (const auto& f : gen_seq.frames) {
        gen_shapes.push_back(f.agent_shape);
        gen_std.push_back(standardizer.apply(f.agent_shape.flatten()));
    }
    report.metrics["frames"] = static_cast<double>(gen_seq.frames.size());
    report.metrics["dim"] = d;

    const DyadSequence& truth =
        a.truth_seq.empty() ? corpus.sequences.front() : find_sequence(corpus, a.truth_seq);
    report.config["truth_seq"] = truth.id;
    if (a.truth_offset < 0 ||
        a.truth_offset + gen_seq.frames.size() > truth.frames.size())
        throw DataError("truth sequence does not cover generated frames at offset " +
                        std::to_string(a.truth_offset));
    std::vector<Eigen::VectorXd> truth_std;
    for (std::size_t t = 0; t < gen_seq.frames.size(); ++t)
        truth_std.push_back(standardizer.apply(
            truth.frames[a.truth_offset + t].agent_shape.flatten()));
    report.metrics["mse"] = mse(gen_std, truth_std);

    if (gen_shapes.size() >= 2) {
        const SmoothnessStats st = smoothness(gen_shapes, pdm, standardizer);
        report.metrics["smoothness_mean_disp"] = st.mean_disp;
        report.metrics["smoothness_max_disp"] = st.max_disp;
        report.metrics["smoothness_pixel_mean"] = st.pixel_mean;
        report.metrics["smoothness_pixel_max"] = st.pixel_max;
    }

    if (!a.dict_path.empty()) {
        // Rebuild deterministically from the stored config so per-frame
        // assignments are available.
        const AffectShapeDictionary stored = load_dictionary(a.dict_path);
        const DictionaryBuildResult build = build_dictionary(corpus, stored.config);
        const ClusterRecovery rec = cluster_recovery(build, corpus);
        report.metrics["cluster_ari"] = rec.ari;
        report.metrics["cluster_purity_min"] = rec.min_purity;
        for (int c = 0; c < kAffectClassCount; ++c) {
            const std::string name = affect_class_name(static_cast<AffectClass>(c));
            report.metrics["cluster_purity_" + name] = rec.purity[c];
            report.metrics["subclusters_" + name] = rec.subcluster_counts[c];
        }
        // Table-1 style facts: the dictionary needs no history and samples fast.
        report.metrics["history_frames_dict"] = 0;
        Rng rng(Rng::derive(1, 0xe7a));
        AffectVector probe = AffectVector::Zero();
        probe[0] = 1.0;
        const auto t0 = std::chrono::steady_clock::now();
        Eigen::VectorXd prev = sample_z(build.dictionary, probe, nullptr, rng);
        for (int i = 0; i < 200; ++i) prev = sample_z(build.dictionary, probe, &prev, rng);
        report.metrics["sec_per_frame_dict"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 201.0;
    }

    if (!a.lstm_path.empty()) {
        const CLstmModel model = load_clstm(a.lstm_path);
        const Corpus held = a.holdout > 0 ? holdout_tail(corpus, a.holdout) : corpus;
        const ModeComparison cmp = compare_modes(model, held);
        report.metrics["mse_overlap"] = cmp.mse_overlap;
        report.metrics["mse_nonoverlap"] = cmp.mse_nonoverlap;
        report.metrics["overlap_better"] = cmp.overlap_better ? 1.0 : 0.0;
        report.metrics["sec_per_frame_overlap"] = cmp.sec_per_frame_overlap;
        report.metrics["sec_per_frame_nonoverlap"] = cmp.sec_per_frame_nonoverlap;
        report.metrics["history_frames_lstm"] = model.config.window;
        report.metrics["eval_sequences"] = cmp.sequences;
    }

    report.save_text(a.out);
    if (!a.json_out.empty()) report.save_json(a.json_out);
    for (const auto& [k, v] : report.metrics) std::cout << k << ' ' << g17(v) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"facial behavior generation for dyadic interactions"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read flag defaults from a key=value file");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dyad corpus");
    synth->add_option("--out", synth_args.out, "output corpus directory")->required();
    synth->add_option("--sequences", synth_args.cfg.n_sequences, "number of sequences")
        ->capture_default_str();
    synth->add_option("--seq-len", synth_args.cfg.seq_len, "frames per sequence")
        ->capture_default_str();
    synth->add_option("--m", synth_args.cfg.m, "PDM rank (shape dim = 6 + m)")
        ->capture_default_str();
    synth->add_option("--intensity-levels", synth_args.cfg.n_intensity_levels,
                      "intensity levels per class, in [3, 9]")
        ->capture_default_str();
    synth->add_option("--seed", synth_args.cfg.seed, "random seed")->capture_default_str();

    BuildPdmArgs pdm_args;
    auto* bpdm = app.add_subcommand("build-pdm", "build a PDM from corpus shapes");
    bpdm->add_option("--corpus", pdm_args.corpus_dir, "corpus directory")->required();
    bpdm->add_option("--m", pdm_args.m, "basis rank")->capture_default_str();
    bpdm->add_option("--stride", pdm_args.stride, "use every stride-th frame")
        ->capture_default_str();
    bpdm->add_option("--out", pdm_args.out, "output PDM file")->required();

    BuildDictArgs dict_args;
    auto* bdict = app.add_subcommand("build-dict", "build the affect-shape dictionary");
    bdict->add_option("--corpus", dict_args.corpus_dir, "corpus directory")->required();
    bdict->add_option("--min-size", dict_args.cfg.min_size, "minimum subcluster size")
        ->capture_default_str();
    bdict->add_option("--seed", dict_args.cfg.seed, "clustering seed")->capture_default_str();
    bdict->add_option("--label-window", dict_args.cfg.label_window,
                      "trailing frames aggregated for class votes")
        ->capture_default_str();
    bdict->add_option("--out", dict_args.out, "output dictionary file")->required();

    TrainArgs train_args;
    auto* tr = app.add_subcommand("train", "train the lstm or cgan generator");
    tr->add_option("--method", train_args.method, "lstm | cgan")->required();
    tr->add_option("--corpus", train_args.corpus_dir, "corpus directory")->required();
    tr->add_option("--out", train_args.out, "output checkpoint file")->required();
    tr->add_option("--holdout", train_args.holdout, "sequences held out from the corpus tail")
        ->capture_default_str();
    tr->add_option("--window", train_args.lstm.window, "lstm window n")->capture_default_str();
    tr->add_option("--hidden", train_args.lstm.hidden_dim, "lstm hidden units")
        ->capture_default_str();
    tr->add_option("--epochs", train_args.lstm.epochs, "lstm training epochs")
        ->capture_default_str();
    tr->add_option("--lr", train_args.lstm.learning_rate, "lstm learning rate")
        ->capture_default_str();
    tr->add_option("--grad-clip", train_args.lstm.grad_clip, "global-norm gradient clip")
        ->capture_default_str();
    tr->add_flag("--aggregate-affect", train_args.lstm.aggregate_affect,
                 "feed window-mean affect instead of per-frame");
    tr->add_option("--seed", train_args.lstm.seed, "training seed")->capture_default_str();
    tr->add_option("--steps", train_args.cgan_steps, "cgan training steps")->capture_default_str();
    tr->add_option("--batch", train_args.cgan.batch_size, "cgan batch size")
        ->capture_default_str();
    tr->add_option("--cgan-hidden", train_args.cgan.hidden, "cgan hidden units")
        ->capture_default_str();
    tr->add_option("--cgan-lr", train_args.cgan.learning_rate, "cgan learning rate")
        ->capture_default_str();
    tr->add_option("--z-dim", train_args.cgan.z_dim, "cgan z dimension (0 = shape dim)")
        ->default_val(0);
    tr->add_option("--z-source", train_args.z_source, "gaussian | dictionary")
        ->capture_default_str();
    tr->add_option("--dict", train_args.dict_path, "dictionary file for --z-source dictionary");

    GenerateArgs gen_args;
    auto* gen = app.add_subcommand("generate", "generate a behavior sequence");
    gen->add_option("--method", gen_args.method, "dict | lstm | cgan")->required();
    gen->add_option("--corpus", gen_args.corpus_dir, "corpus directory")->required();
    gen->add_option("--out", gen_args.out, "output sequence file")->required();
    gen->add_option("--steps", gen_args.steps, "frames to generate")->capture_default_str();
    gen->add_option("--seed", gen_args.seed, "sampling seed")->capture_default_str();
    gen->add_option("--dict", gen_args.dict_path, "dictionary file (dict method / z source)");
    gen->add_option("--ckpt", gen_args.ckpt_path, "model checkpoint (lstm/cgan)");
    gen->add_option("--affect-class", gen_args.affect_class,
                    "constant conditioning class (joy anger surprise fear contempt disgust "
                    "sadness neutral)");
    gen->add_option("--from-seq", gen_args.from_seq, "corpus sequence for history/affect stream");
    gen->add_option("--mode", gen_args.mode, "lstm mode: overlap | nonoverlap")
        ->capture_default_str();
    gen->add_option("--top-k", gen_args.top_k, "dictionary neighborhood size")
        ->capture_default_str();
    gen->add_option("--z-source", gen_args.z_source, "cgan z source: gaussian | dictionary")
        ->capture_default_str();
    gen->add_option("--render", gen_args.render_dir, "write PGM frames to this directory");
    gen->add_option("--fit", gen_args.fit, "render view fitting: auto | none")
        ->capture_default_str();
    gen->add_option("--svg", gen_args.svg_path, "write an SVG preview file");
    gen->add_option("--width", gen_args.width, "render width")->capture_default_str();
    gen->add_option("--height", gen_args.height, "render height")->capture_default_str();

    EvalArgs eval_args;
    auto* ev = app.add_subcommand("eval", "evaluate a generated sequence");
    ev->add_option("--generated", eval_args.generated, "generated sequence file")->required();
    ev->add_option("--corpus", eval_args.corpus_dir, "corpus directory")->required();
    ev->add_option("--out", eval_args.out, "report output (key value lines)")->required();
    ev->add_option("--json", eval_args.json_out, "also write a JSON report");
    ev->add_option("--truth-seq", eval_args.truth_seq, "ground-truth sequence id");
    ev->add_option("--truth-offset", eval_args.truth_offset,
                   "truth frame offset aligned with generated frame 0")
        ->capture_default_str();
    ev->add_option("--dict", eval_args.dict_path, "dictionary file: adds cluster recovery");
    ev->add_option("--lstm", eval_args.lstm_path, "lstm checkpoint: adds mode comparison");
    ev->add_option("--holdout", eval_args.holdout, "evaluate modes on the corpus tail only")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
        if (*synth) return cmd_synth(synth_args);
        if (*bpdm) return cmd_build_pdm(pdm_args);
        if (*bdict) return cmd_build_dict(dict_args);
        if (*tr) return cmd_train(train_args);
        if (*gen) return cmd_generate(gen_args);
        if (*ev) return cmd_eval(eval_args);
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
