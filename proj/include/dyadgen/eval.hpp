#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <string>
#include <vector>

#include "dyadgen/clstm.hpp"
#include "dyadgen/corpus.hpp"
#include "dyadgen/dictionary.hpp"

namespace dyadgen {

// Mean over frames and dimensions of squared differences.
double mse(const std::vector<Eigen::VectorXd>& generated, const std::vector<Eigen::VectorXd>& truth);

struct SmoothnessStats {
    double mean_disp = 0.0;  // standardized shape space
    double max_disp = 0.0;
    double pixel_mean = 0.0;  // projected landmark centroid, pixels
    double pixel_max = 0.0;
};

// Inter-frame displacement statistics; needs at least 2 frames.
SmoothnessStats smoothness(const std::vector<ShapeParams>& sequence, const PDMModel& pdm,
                           const Standardizer& standardizer);

// Chance-corrected clustering agreement between two labelings.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

struct ModeComparison {
    double mse_overlap = 0.0;
    double mse_nonoverlap = 0.0;
    bool overlap_better = false;
    double sec_per_frame_overlap = 0.0;
    double sec_per_frame_nonoverlap = 0.0;
    int sequences = 0;
    long frames = 0;
};

// Runs both generation modes on identical histories over every held-out
// sequence longer than the model window and reports standardized MSEs
// against the true continuations.
ModeComparison compare_modes(const CLstmModel& model, const Corpus& test_corpus);

struct ClusterRecovery {
    double ari = 0.0;
    std::array<double, kAffectClassCount> purity{};  // per dictionary class
    std::array<int, kAffectClassCount> subcluster_counts{};
    double min_purity = 0.0;
};

// Dictionary class assignment vs the corpus's planted labels.
ClusterRecovery cluster_recovery(const DictionaryBuildResult& build, const Corpus& labeled_corpus);

// Line-oriented `key value` text plus a JSON mirror; numeric values round-trip.
struct EvalReport {
    std::map<std::string, std::string> config;
    std::map<std::string, double> metrics;

    void save_text(const std::string& path) const;
    void save_json(const std::string& path) const;
    static EvalReport load_text(const std::string& path);
};

}  // namespace dyadgen
