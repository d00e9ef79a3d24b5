#include "dyadgen/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "dyadgen/io_text.hpp"
#include "dyadgen/rng.hpp"

namespace fs = std::filesystem;

namespace dyadgen {

namespace {

const char* kClassNames[kAffectClassCount] = {"joy",     "anger",   "surprise", "fear",
                                              "contempt", "disgust", "sadness",  "neutral"};

// Per-dimension excursion scales for the planted class targets; q dimensions
// are scaled to the PDM variances so every dimension carries usable signal.
Eigen::VectorXd target_dim_scales(const PDMModel& pdm) {
    const int d = kRigidDim + pdm.rank();
    Eigen::VectorXd w(d);
    w[0] = 0.08;                            // scale
    w[1] = w[2] = w[3] = 0.15;              // pitch, yaw, roll
    w[4] = w[5] = 12.0;                     // tx, ty
    for (int j = 0; j < pdm.rank(); ++j) w[kRigidDim + j] = 0.8 * std::sqrt(pdm.variances[j]);
    return w;
}

}  // namespace

const char* affect_class_name(AffectClass c) { return kClassNames[static_cast<int>(c)]; }

std::optional<AffectClass> affect_class_from_name(const std::string& name) {
    for (int i = 0; i < kAffectClassCount; ++i)
        if (name == kClassNames[i]) return static_cast<AffectClass>(i);
    return std::nullopt;
}

AffectClass affect_argmax(const AffectVector& v) {
    if (!v.allFinite()) throw DataError("affect vector contains non-finite values");
    int best = 0;
    for (int i = 1; i < kAffectClassCount; ++i)
        if (v[i] > v[best]) best = i;
    return static_cast<AffectClass>(best);
}

AffectVector aggregate_affect(const std::vector<AffectVector>& window) {
    if (window.empty()) throw DataError("cannot aggregate an empty affect window");
    AffectVector acc = AffectVector::Zero();
    for (const auto& v : window) acc += v;
    return acc / static_cast<double>(window.size());
}

std::size_t Corpus::frame_count() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.frames.size();
    return n;
}

std::vector<Eigen::VectorXd> Corpus::flattened_shapes() const {
    std::vector<Eigen::VectorXd> out;
    out.reserve(frame_count());
    for (const auto& s : sequences)
        for (const auto& f : s.frames) out.push_back(f.agent_shape.flatten());
    return out;
}

PDMModel make_synthetic_pdm(int m, std::uint64_t seed) {
    if (m < 1) throw UsageError("PDM rank must be >= 1");
    Rng rng(Rng::derive(seed, 0x5d1));
    Eigen::MatrixXd g(3 * kLandmarkCount, m);
    for (int r = 0; r < g.rows(); ++r)
        for (int c = 0; c < m; ++c) g(r, c) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd basis =
        qr.householderQ() * Eigen::MatrixXd::Identity(3 * kLandmarkCount, m);
    for (int j = 0; j < m; ++j) {
        int imax = 0;
        basis.col(j).cwiseAbs().maxCoeff(&imax);
        if (basis(imax, j) < 0.0) basis.col(j) = -basis.col(j);
    }

    PDMModel pdm;
    // The mean face is blown up 100x so in-range deformations stay a small
    // fraction of the face size. Keeping |Phi q| well below |mean| avoids
    // near-degenerate scale/rotation-vs-q directions in the fit, and the
    // large variances keep the fit regularizer's pull (lambda/variance) far
    // below round-trip tolerances.
    pdm.mean_shape = 100.0 * canonical_mean_face();
    pdm.basis = basis;
    pdm.variances.resize(m);
    for (int j = 0; j < m; ++j)
        pdm.variances[j] = 4e7 * std::pow(0.25, m > 1 ? static_cast<double>(j) / (m - 1) : 0.0);
    pdm.validate();
    return pdm;
}

SynthResult synth_corpus(const CorpusConfig& cfg) {
    if (cfg.n_sequences < 1) throw UsageError("n_sequences must be >= 1");
    if (cfg.seq_len < 2) throw UsageError("seq_len must be >= 2");
    if (cfg.n_intensity_levels < 3 || cfg.n_intensity_levels > 9)
        throw UsageError("n_intensity_levels must lie in [3, 9]");
    if (cfg.m < 1) throw UsageError("m must be >= 1");

    SynthResult result;
    result.pdm = make_synthetic_pdm(cfg.m, cfg.seed);
    const int d = kRigidDim + cfg.m;
    const int levels = cfg.n_intensity_levels;
    const Eigen::VectorXd w = target_dim_scales(result.pdm);

    Eigen::VectorXd neutral_flat = Eigen::VectorXd::Zero(d);
    neutral_flat[0] = 1.0;  // scale

    // Class directions: a random orthogonal block over the q dimensions
    // guarantees pairwise-orthogonal class signals; a small random rigid
    // pattern adds head-pose character per class without touching separation.
    Rng dir_rng(Rng::derive(cfg.seed, 0xd17));
    const int qd = std::min(cfg.m, kAffectClassCount);
    Eigen::MatrixXd gq(cfg.m, qd);
    for (int r = 0; r < gq.rows(); ++r)
        for (int c = 0; c < gq.cols(); ++c) gq(r, c) = dir_rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gq);
    const Eigen::MatrixXd ortho = qr.householderQ() * Eigen::MatrixXd::Identity(cfg.m, qd);

    // Class offsets: orthogonal q-space directions normalized to a common
    // magnitude, so the eight classes sit at equal radii in well-separated
    // directions (k-means-recoverable geometry by construction). A small
    // random rigid pattern adds per-class head-pose character.
    const double w_q_norm = w.tail(cfg.m).norm();
    const double offset_mag = 0.45 * w_q_norm;
    std::vector<Eigen::VectorXd> offsets(kAffectClassCount);
    for (int c = 0; c < kAffectClassCount; ++c) {
        Eigen::VectorXd off = Eigen::VectorXd::Zero(d);
        for (int j = 0; j < kRigidDim; ++j)
            off[j] = 0.6 * w[j] * std::clamp(dir_rng.normal(), -2.0, 2.0);
        const Eigen::VectorXd dir = ortho.col(c % qd);
        Eigen::VectorXd off_q(cfg.m);
        for (int j = 0; j < cfg.m; ++j) off_q[j] = w[kRigidDim + j] * dir[j];
        double mag = offset_mag;
        if (c >= qd) {
            // Low-rank fallback (m < 8): reuse q directions at alternating signs
            // and growing magnitudes so class ranges stay disjoint.
            const int block = c / qd;
            off_q *= (block % 2 == 1 ? -1.0 : 1.0);
            mag *= 1.0 + 0.8 * block;
        }
        off.tail(cfg.m) = off_q * (mag / off_q.norm());
        offsets[c] = off;
    }

    // Intensity level l scales the target radially (gamma in [0.8, 1.0]) and
    // sets the approach rate, proportional to the level and topping out at
    // 0.9. Fast rates keep between-class transit frames scarce.
    auto gamma_of = [&](int level) {
        return 0.8 + 0.2 * static_cast<double>(level - 1) / (levels - 1);
    };
    auto rate_of = [&](int level) { return 0.9 * static_cast<double>(level) / levels; };

    result.truth.n_intensity_levels = levels;
    result.truth.class_targets.resize(static_cast<std::size_t>(kAffectClassCount) * levels);
    for (int c = 0; c < kAffectClassCount; ++c)
        for (int l = 1; l <= levels; ++l)
            result.truth.class_targets[c * levels + (l - 1)] = neutral_flat + gamma_of(l) * offsets[c];

    // Dynamics noise: sigma = 0.02 * per-dimension target scale.
    const Eigen::VectorXd sigma = 0.02 * w;
    result.truth.noise_sigma = sigma.norm();
    double min_sep = std::numeric_limits<double>::infinity();
    for (int a = 0; a < kAffectClassCount; ++a)
        for (int b = a + 1; b < kAffectClassCount; ++b)
            min_sep = std::min(min_sep, (offsets[a] - offsets[b]).norm());
    result.truth.min_class_separation = min_sep;
    if (min_sep < 6.0 * sigma.norm())
        throw NumericalError("synthetic class targets are not 6-sigma separated");

    result.corpus.config = cfg;
    result.corpus.sequences.resize(cfg.n_sequences);
    for (int s = 0; s < cfg.n_sequences; ++s) {
        Rng rng(Rng::derive(cfg.seed, 0xc0 + static_cast<std::uint64_t>(s)));
        DyadSequence& seq = result.corpus.sequences[s];
        {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "seq_%06d", s);
            seq.id = buf;
        }
        seq.frames.resize(cfg.seq_len);
        seq.labels.resize(cfg.seq_len);

        // Segment classes come off a shuffled deck whose first card is pinned
        // to the sequence index, so every class is covered corpus-wide even
        // when sequences hold only one or two segments.
        int deck[kAffectClassCount];
        for (int c = 0; c < kAffectClassCount; ++c) deck[c] = c;
        std::swap(deck[0], deck[s % kAffectClassCount]);
        for (int i = kAffectClassCount - 1; i > 1; --i)
            std::swap(deck[i], deck[1 + static_cast<int>(rng.below(i))]);
        int deck_pos = 0;

        int seg_left = 0;
        int cur_class = 0;
        int cur_level = 1;
        Eigen::VectorXd state;
        for (int t = 0; t < cfg.seq_len; ++t) {
            if (seg_left == 0) {
                seg_left = 60 + static_cast<int>(rng.below(141));  // 60..200
                if (deck_pos == kAffectClassCount) {
                    for (int i = kAffectClassCount - 1; i > 0; --i)
                        std::swap(deck[i], deck[static_cast<int>(rng.below(i + 1))]);
                    deck_pos = 0;
                }
                cur_class = deck[deck_pos++];
                cur_level = 1 + static_cast<int>(rng.below(levels));
            }
            const Eigen::VectorXd& target = result.truth.class_targets[cur_class * levels + (cur_level - 1)];
            if (t == 0) {
                state = target;
                for (int j = 0; j < d; ++j) state[j] += sigma[j] * rng.normal();
            } else {
                const double alpha = rate_of(cur_level);
                for (int j = 0; j < d; ++j)
                    state[j] += alpha * (target[j] - state[j]) + sigma[j] * rng.normal();
            }
            --seg_left;

            DyadFrame& fr = seq.frames[t];
            fr.t = t;
            fr.agent_shape = ShapeParams::unflatten(state);
            fr.partner_affect = AffectVector::Zero();
            fr.partner_affect[cur_class] = 1.0;
            for (int j = 0; j < kAffectClassCount; ++j)
                fr.partner_affect[j] = std::max(0.0, fr.partner_affect[j] + 0.05 * rng.normal());
            seq.labels[t] = FrameLabel{static_cast<AffectClass>(cur_class), cur_level};
        }
    }
    return result;
}

namespace {

void save_sequence(const DyadSequence& seq, int d, const std::string& path) {
    auto out = open_output(path);
    out << "SEQ v1\n";
    out << "id " << seq.id << "\n";
    out << "frames " << seq.frames.size() << "\n";
    out << "dim " << d << "\n";
    out << "labels " << (seq.has_labels() ? 1 : 0) << "\n";
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        const DyadFrame& f = seq.frames[i];
        out << f.t;
        for (int j = 0; j < kAffectClassCount; ++j) out << ' ' << g17(f.partner_affect[j]);
        const Eigen::VectorXd flat = f.agent_shape.flatten();
        for (int j = 0; j < flat.size(); ++j) out << ' ' << g17(flat[j]);
        if (seq.has_labels())
            out << ' ' << static_cast<int>(seq.labels[i].affect) << ' ' << seq.labels[i].intensity;
        out << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

DyadSequence load_sequence(const std::string& path, int expected_dim, bool require_nonempty) {
    auto in = open_input(path);
    std::string line;
    int line_no = 0;
    auto next_line = [&]() {
        if (!std::getline(in, line)) throw DataError(path + ":" + std::to_string(line_no + 1) + ": unexpected end of file");
        ++line_no;
        return line;
    };
    if (next_line() != "SEQ v1") throw DataError(path + ":1: expected 'SEQ v1' header");

    DyadSequence seq;
    std::size_t n_frames = 0;
    int dim = 0, labels = 0;
    {
        std::istringstream h(next_line());
        std::string key;
        h >> key >> seq.id;
        if (key != "id" || seq.id.empty()) throw DataError(path + ":2: expected 'id <name>'");
    }
    auto header_int = [&](const char* key) {
        std::istringstream h(next_line());
        std::string k;
        long v = -1;
        h >> k >> v;
        if (k != key || h.fail()) throw DataError(path + ":" + std::to_string(line_no) + ": expected '" + key + " <int>'");
        return v;
    };
    n_frames = static_cast<std::size_t>(header_int("frames"));
    dim = static_cast<int>(header_int("dim"));
    labels = static_cast<int>(header_int("labels"));
    if (require_nonempty && n_frames < 1)
        throw DataError(path + ": sequence must have at least one frame");
    if (dim != expected_dim)
        throw DataError(path + ": frame dim " + std::to_string(dim) + " does not match manifest dim " +
                        std::to_string(expected_dim));

    seq.frames.resize(n_frames);
    if (labels) seq.labels.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        std::istringstream row(next_line());
        DyadFrame& f = seq.frames[i];
        row >> f.t;
        for (int j = 0; j < kAffectClassCount; ++j) row >> f.partner_affect[j];
        Eigen::VectorXd flat(dim);
        for (int j = 0; j < dim; ++j) row >> flat[j];
        if (labels) {
            int cls = -1, level = 0;
            row >> cls >> level;
            if (cls < 0 || cls >= kAffectClassCount || level < 1)
                throw DataError(path + ":" + std::to_string(line_no) + ": malformed label");
            seq.labels[i] = FrameLabel{static_cast<AffectClass>(cls), level};
        }
        if (row.fail())
            throw DataError(path + ":" + std::to_string(line_no) + ": malformed frame record");
        if (f.t != static_cast<int>(i))
            throw DataError(path + ":" + std::to_string(line_no) + ": frame indices must be contiguous from 0");
        f.agent_shape = ShapeParams::unflatten(flat);
    }
    return seq;
}

}  // namespace

void save_corpus(const Corpus& corpus, const PDMModel& pdm, const std::string& dir) {
    fs::create_directories(dir);
    save_pdm(pdm, (fs::path(dir) / "pdm.txt").string());
    auto manifest = open_output((fs::path(dir) / "manifest").string());
    manifest << "CORPUS v1\n";
    manifest << "n_sequences " << corpus.sequences.size() << "\n";
    manifest << "seq_len " << corpus.config.seq_len << "\n";
    manifest << "m " << corpus.config.m << "\n";
    manifest << "n_intensity_levels " << corpus.config.n_intensity_levels << "\n";
    manifest << "seed " << corpus.config.seed << "\n";
    manifest << "dim " << corpus.shape_dim() << "\n";
    manifest << "pdm pdm.txt\n";
    for (const auto& seq : corpus.sequences) {
        const std::string name = seq.id + ".txt";
        save_sequence(seq, corpus.shape_dim(), (fs::path(dir) / name).string());
        manifest << "sequence " << name << "\n";
    }
    if (!manifest) throw DataError("write failed: " + dir + "/manifest");
}

Corpus load_corpus(const std::string& dir) {
    const std::string mpath = (fs::path(dir) / "manifest").string();
    auto in = open_input(mpath);
    std::string line;
    if (!std::getline(in, line) || line != "CORPUS v1")
        throw DataError(mpath + ":1: expected 'CORPUS v1' header");

    Corpus corpus;
    int dim = 0;
    int line_no = 1;
    std::vector<std::string> files;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string key;
        row >> key;
        if (key == "sequence") {
            std::string f;
            row >> f;
            files.push_back(f);
        } else if (key == "pdm") {
            std::string f;
            row >> f;
        } else {
            long v = 0;
            row >> v;
            if (row.fail()) throw DataError(mpath + ":" + std::to_string(line_no) + ": malformed entry");
            if (key == "n_sequences") corpus.config.n_sequences = static_cast<int>(v);
            else if (key == "seq_len") corpus.config.seq_len = static_cast<int>(v);
            else if (key == "m") corpus.config.m = static_cast<int>(v);
            else if (key == "n_intensity_levels") corpus.config.n_intensity_levels = static_cast<int>(v);
            else if (key == "seed") corpus.config.seed = static_cast<std::uint64_t>(v);
            else if (key == "dim") dim = static_cast<int>(v);
            else throw DataError(mpath + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    if (dim == 0) dim = kRigidDim + corpus.config.m;
    if (files.empty()) throw DataError(mpath + ": manifest lists no sequences");
    corpus.sequences.reserve(files.size());
    for (const auto& f : files)
        corpus.sequences.push_back(load_sequence((fs::path(dir) / f).string(), dim, true));
    return corpus;
}

void save_sequence_file(const DyadSequence& seq, int dim, const std::string& path) {
    save_sequence(seq, dim, path);
}

DyadSequence load_sequence_file(const std::string& path, int expected_dim) {
    return load_sequence(path, expected_dim, false);
}

PDMModel load_corpus_pdm(const std::string& dir) {
    return load_pdm((fs::path(dir) / "pdm.txt").string());
}

}  // namespace dyadgen
