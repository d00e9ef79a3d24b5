#include "dyadgen/eval.hpp"

#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "dyadgen/io_text.hpp"

namespace dyadgen {

double mse(const std::vector<Eigen::VectorXd>& generated,
           const std::vector<Eigen::VectorXd>& truth) {
    if (generated.size() != truth.size())
        throw DataError("sequence length mismatch: " + std::to_string(generated.size()) + " vs " +
                        std::to_string(truth.size()));
    if (generated.empty()) throw DataError("cannot compute MSE of empty sequences");
    double acc = 0.0;
    long count = 0;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        if (generated[i].size() != truth[i].size())
            throw DataError("frame dimension mismatch at index " + std::to_string(i));
        acc += (generated[i] - truth[i]).squaredNorm();
        count += generated[i].size();
    }
    return acc / static_cast<double>(count);
}

SmoothnessStats smoothness(const std::vector<ShapeParams>& sequence, const PDMModel& pdm,
                           const Standardizer& standardizer) {
    if (sequence.size() < 2) throw DataError("smoothness needs at least 2 frames");
    SmoothnessStats st;
    Eigen::VectorXd prev_std = standardizer.apply(sequence[0].flatten());
    Eigen::RowVector2d prev_centroid = project(pdm, sequence[0]).colwise().mean();
    double acc = 0.0, pix_acc = 0.0;
    for (std::size_t t = 1; t < sequence.size(); ++t) {
        const Eigen::VectorXd cur_std = standardizer.apply(sequence[t].flatten());
        const double d = (cur_std - prev_std).norm();
        acc += d;
        st.max_disp = std::max(st.max_disp, d);
        prev_std = cur_std;

        const Eigen::RowVector2d centroid = project(pdm, sequence[t]).colwise().mean();
        const double pd = (centroid - prev_centroid).norm();
        pix_acc += pd;
        st.pixel_max = std::max(st.pixel_max, pd);
        prev_centroid = centroid;
    }
    const double n = static_cast<double>(sequence.size() - 1);
    st.mean_disp = acc / n;
    st.pixel_mean = pix_acc / n;
    return st;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw DataError("label vectors differ in length");
    if (a.empty()) throw DataError("empty label vectors");
    int ka = 0, kb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < 0 || b[i] < 0) throw DataError("labels must be non-negative");
        ka = std::max(ka, a[i] + 1);
        kb = std::max(kb, b[i] + 1);
    }
    std::vector<long> table(static_cast<std::size_t>(ka) * kb, 0);
    std::vector<long> row(ka, 0), col(kb, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++table[static_cast<std::size_t>(a[i]) * kb + b[i]];
        ++row[a[i]];
        ++col[b[i]];
    }
    auto choose2 = [](long n) { return 0.5 * static_cast<double>(n) * (n - 1); };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const long v : table) sum_ij += choose2(v);
    for (const long v : row) sum_a += choose2(v);
    for (const long v : col) sum_b += choose2(v);
    const double n2 = choose2(static_cast<long>(a.size()));
    const double expected = sum_a * sum_b / n2;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 0.0;  // single-cluster degenerate case
    return (sum_ij - expected) / (max_index - expected);
}

ModeComparison compare_modes(const CLstmModel& model, const Corpus& test_corpus) {
    const int n = model.config.window;
    ModeComparison cmp;
    double acc_over = 0.0, acc_non = 0.0;
    long dims = 0;
    double t_over = 0.0, t_non = 0.0;

    for (const auto& seq : test_corpus.sequences) {
        const int len = static_cast<int>(seq.frames.size());
        const int steps = len - n;
        if (steps < 1) continue;
        std::vector<DyadFrame> history(seq.frames.begin(), seq.frames.begin() + n);
        std::vector<AffectVector> affects;
        affects.reserve(steps);
        std::vector<Eigen::VectorXd> truth;
        truth.reserve(steps);
        for (int t = n; t < len; ++t) {
            affects.push_back(seq.frames[t].partner_affect);
            truth.push_back(model.standardizer.apply(seq.frames[t].agent_shape.flatten()));
        }

        using clock = std::chrono::steady_clock;
        auto run = [&](GenerationMode mode, double& timer) {
            const auto t0 = clock::now();
            const std::vector<ShapeParams> gen = generate(model, history, affects, steps, mode);
            timer += std::chrono::duration<double>(clock::now() - t0).count();
            std::vector<Eigen::VectorXd> flat(gen.size());
            for (std::size_t i = 0; i < gen.size(); ++i)
                flat[i] = model.standardizer.apply(gen[i].flatten());
            return flat;
        };
        const auto gen_over = run(GenerationMode::Overlap, t_over);
        const auto gen_non = run(GenerationMode::NonOverlap, t_non);
        for (int i = 0; i < steps; ++i) {
            acc_over += (gen_over[i] - truth[i]).squaredNorm();
            acc_non += (gen_non[i] - truth[i]).squaredNorm();
            dims += truth[i].size();
        }
        cmp.frames += steps;
        ++cmp.sequences;
    }
    if (cmp.frames == 0) throw DataError("no test sequence longer than the model window");
    cmp.mse_overlap = acc_over / static_cast<double>(dims);
    cmp.mse_nonoverlap = acc_non / static_cast<double>(dims);
    cmp.overlap_better = cmp.mse_overlap < cmp.mse_nonoverlap;
    cmp.sec_per_frame_overlap = t_over / static_cast<double>(cmp.frames);
    cmp.sec_per_frame_nonoverlap = t_non / static_cast<double>(cmp.frames);
    return cmp;
}

ClusterRecovery cluster_recovery(const DictionaryBuildResult& build, const Corpus& labeled_corpus) {
    std::vector<int> planted;
    planted.reserve(build.frame_class.size());
    for (const auto& seq : labeled_corpus.sequences) {
        if (!seq.has_labels()) throw DataError("corpus sequence '" + seq.id + "' carries no labels");
        for (const auto& label : seq.labels) planted.push_back(static_cast<int>(label.affect));
    }
    if (planted.size() != build.frame_class.size())
        throw DataError("dictionary build does not match corpus frame count");

    ClusterRecovery rec;
    rec.ari = adjusted_rand_index(build.frame_class, planted);

    long counts[kAffectClassCount][kAffectClassCount] = {};
    long totals[kAffectClassCount] = {};
    for (std::size_t i = 0; i < planted.size(); ++i) {
        ++counts[build.frame_class[i]][planted[i]];
        ++totals[build.frame_class[i]];
    }
    rec.min_purity = 1.0;
    for (int c = 0; c < kAffectClassCount; ++c) {
        long best = 0;
        for (int p = 0; p < kAffectClassCount; ++p) best = std::max(best, counts[c][p]);
        rec.purity[c] = totals[c] > 0 ? static_cast<double>(best) / totals[c] : 0.0;
        rec.min_purity = std::min(rec.min_purity, rec.purity[c]);
        rec.subcluster_counts[c] =
            static_cast<int>(build.dictionary.clusters[c].subclusters.size());
    }
    return rec;
}

void EvalReport::save_text(const std::string& path) const {
    auto out = open_output(path);
    for (const auto& [k, v] : config) out << "config." << k << ' ' << v << "\n";
    for (const auto& [k, v] : metrics) out << k << ' ' << g17(v) << "\n";
    if (!out) throw DataError("write failed: " + path);
}

void EvalReport::save_json(const std::string& path) const {
    nlohmann::json j;
    for (const auto& [k, v] : config) j["config"][k] = v;
    for (const auto& [k, v] : metrics) j["metrics"][k] = v;
    auto out = open_output(path);
    out << j.dump(2) << "\n";
    if (!out) throw DataError("write failed: " + path);
}

EvalReport EvalReport::load_text(const std::string& path) {
    auto in = open_input(path);
    EvalReport report;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto space = line.find(' ');
        if (space == std::string::npos)
            throw DataError(path + ":" + std::to_string(line_no) + ": expected 'key value'");
        const std::string key = line.substr(0, space);
        const std::string value = line.substr(space + 1);
        if (key.rfind("config.", 0) == 0) {
            report.config[key.substr(7)] = value;
        } else {
            char* end = nullptr;
            const double v = std::strtod(value.c_str(), &end);
            if (end == value.c_str())
                throw DataError(path + ":" + std::to_string(line_no) + ": bad numeric value");
            report.metrics[key] = v;
        }
    }
    return report;
}

}  // namespace dyadgen
