#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dyadgen/corpus.hpp"
#include "dyadgen/rng.hpp"
#include "dyadgen/stats.hpp"

namespace dyadgen {

struct KMeansResult {
    std::vector<int> assignments;            // per point, 0..k-1
    std::vector<Eigen::VectorXd> centroids;  // k entries
    double wcss = 0.0;
    int iterations = 0;
};

// Lloyd iterations from k-means++ seeding until the assignment fixpoint or
// 300 iterations. Empty clusters are re-seeded from the point farthest from
// its assigned centroid. Deterministic given the seed.
KMeansResult kmeans(const std::vector<Eigen::VectorXd>& points, int k, std::uint64_t seed);

struct SubCluster {
    std::vector<Eigen::VectorXd> members;  // raw (unstandardized) flattened shapes
    Eigen::VectorXd centroid;              // member mean
    bool below_min_size = false;           // set when the input could not satisfy min_size

    int size() const { return static_cast<int>(members.size()); }
};

struct AgglomerateResult {
    std::vector<SubCluster> subclusters;
    std::vector<int> assignment;  // per input point, subcluster index
};

// Ward-linkage agglomeration (nearest-neighbor chain), cut at the largest
// cluster count k* <= max_k for which every cluster keeps >= min_size members.
// When even a single cluster cannot reach min_size, returns one flagged
// subcluster. Ties are broken toward the lowest member index pair.
AgglomerateResult agglomerate(const std::vector<Eigen::VectorXd>& members, int min_size,
                              int max_k = 9, int min_k = 3);

// Per-frame affect class from the trailing `window`-frame aggregate of the
// partner affect, sequence-major order.
std::vector<AffectClass> frame_affect_labels(const Corpus& corpus, int window);

// Bijective cluster -> class mapping, greedy on (cluster, class) vote counts,
// highest first; count ties prefer the lowest cluster id, then the lowest
// class index; clusters left without votes take the remaining classes in
// ascending order.
std::array<AffectClass, kAffectClassCount> assign_affect_labels(
    const std::vector<AffectClass>& frame_labels, const std::vector<int>& cluster_assignments);

struct AffectCluster {
    AffectClass class_id = AffectClass::Joy;
    std::vector<SubCluster> subclusters;  // ordered by distance from the Neutral centroid
    Eigen::VectorXd centroid;             // raw-space mean of all class members

    int member_count() const;
};

struct DictionaryConfig {
    int min_size = 100;
    std::uint64_t seed = 1;
    // Trailing frames aggregated for class votes. Kept well below typical
    // segment lengths so votes track affect switches.
    int label_window = 25;
};

struct AffectShapeDictionary {
    std::array<AffectCluster, kAffectClassCount> clusters;
    Standardizer standardization;  // used for clustering; members are stored raw
    DictionaryConfig config;
    int dim = 0;

    const AffectCluster& cluster_for(const AffectVector& affect) const;
    std::size_t member_count() const;
};

struct DictionaryBuildResult {
    AffectShapeDictionary dictionary;
    // Per corpus frame (sequence-major): assigned affect class and subcluster.
    std::vector<int> frame_class;
    std::vector<int> frame_subcluster;
};

// Standardize -> k-means(k=8) -> class assignment -> per-class Ward
// subclustering. Internally runs over a canonical (lexicographic) point
// ordering, so the result is invariant to corpus frame order.
// Errors when any affect class holds fewer than min_size frames.
DictionaryBuildResult build_dictionary(const Corpus& corpus, const DictionaryConfig& cfg);

// Temporally-constrained draw. Routes to the argmax class; without a previous
// z, picks a uniform member of the subcluster nearest the class centroid; with
// one, picks uniformly among the class's top_k members nearest prev_z.
// top_k = 1 reproduces the plain nearest-neighbor rule.
Eigen::VectorXd sample_z(const AffectShapeDictionary& dict, const AffectVector& affect,
                         const Eigen::VectorXd* prev_z, Rng& rng, int top_k = 5);

// Versioned text format "DICT v1"; exact round-trip.
void save_dictionary(const AffectShapeDictionary& dict, const std::string& path);
AffectShapeDictionary load_dictionary(const std::string& path);

}  // namespace dyadgen
