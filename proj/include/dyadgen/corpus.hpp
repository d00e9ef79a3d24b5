#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dyadgen/pdm.hpp"

namespace dyadgen {

inline constexpr int kAffectClassCount = 8;

enum class AffectClass : int {
    Joy = 0,
    Anger = 1,
    Surprise = 2,
    Fear = 3,
    Contempt = 4,
    Disgust = 5,
    Sadness = 6,
    Neutral = 7,
};

const char* affect_class_name(AffectClass c);
std::optional<AffectClass> affect_class_from_name(const std::string& name);

// 8 non-negative per-class likelihoods; not forced to sum to 1.
using AffectVector = Eigen::Matrix<double, kAffectClassCount, 1>;

// Index of the maximum component; ties resolved to the lowest index.
AffectClass affect_argmax(const AffectVector& v);

// Component-wise mean over the window. Errors on an empty window.
AffectVector aggregate_affect(const std::vector<AffectVector>& window);

// Ground-truth annotation available on synthetic sequences.
struct FrameLabel {
    AffectClass affect = AffectClass::Neutral;
    int intensity = 1;  // 1..n_intensity_levels
};

struct DyadFrame {
    int t = 0;                    // 0-based frame index, 30 fps nominal
    AffectVector partner_affect;  // conditioning partner
    ShapeParams agent_shape;      // generated partner
};

struct DyadSequence {
    std::string id;
    std::vector<DyadFrame> frames;
    std::vector<FrameLabel> labels;  // empty, or one per frame

    bool has_labels() const { return !labels.empty(); }
};

struct CorpusConfig {
    int n_sequences = 200;
    int seq_len = 100;
    int m = 10;  // PDM rank; flattened dim d = 6 + m
    int n_intensity_levels = 3;
    std::uint64_t seed = 1;
};

struct Corpus {
    CorpusConfig config;
    std::vector<DyadSequence> sequences;

    int shape_dim() const { return kRigidDim + config.m; }
    std::size_t frame_count() const;
    // All agent shapes, flattened, in sequence-then-frame order.
    std::vector<Eigen::VectorXd> flattened_shapes() const;
};

// The planted generative process behind a synthetic corpus: per (class,
// intensity) target points in flattened shape space plus the approach rates.
struct SynthGroundTruth {
    std::vector<Eigen::VectorXd> class_targets;  // 8 * levels entries, class-major
    int n_intensity_levels = 3;
    double min_class_separation = 0.0;  // min pairwise distance between class targets
    double noise_sigma = 0.0;           // per-dimension dynamics noise scale factor
};

struct SynthResult {
    PDMModel pdm;
    Corpus corpus;
    SynthGroundTruth truth;
};

// Synthetic PDM: canonical mean face, seeded random orthonormal basis,
// geometrically decaying variances.
PDMModel make_synthetic_pdm(int m, std::uint64_t seed);

// Deterministic synthetic dyad corpus. Eight well-separated class targets
// (pairwise distance at least 6x the within-class noise scale), per-segment
// intensity levels scaling both the target offset and the approach rate,
// first-order dynamics toward the scheduled target, and noisy one-hot
// partner affect.
SynthResult synth_corpus(const CorpusConfig& cfg);

// Directory layout: `manifest` + one text file per sequence + `pdm.txt`.
void save_corpus(const Corpus& corpus, const PDMModel& pdm, const std::string& dir);
Corpus load_corpus(const std::string& dir);
// Reference PDM stored alongside the corpus.
PDMModel load_corpus_pdm(const std::string& dir);

// Standalone sequence files share the corpus record layout. Generated
// sequences may be empty; corpus members must hold at least one frame.
void save_sequence_file(const DyadSequence& seq, int dim, const std::string& path);
DyadSequence load_sequence_file(const std::string& path, int expected_dim);

}  // namespace dyadgen
