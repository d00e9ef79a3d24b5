#include "dyadgen/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dyadgen/io_text.hpp"

namespace dyadgen {

namespace {

double dist2(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).squaredNorm(); }

}  // namespace

namespace {

KMeansResult kmeans_single(const std::vector<Eigen::VectorXd>& points, int k, std::uint64_t seed) {
    const int n = static_cast<int>(points.size());
    Rng rng(seed);

    // k-means++ seeding.
    std::vector<Eigen::VectorXd> centroids;
    centroids.reserve(k);
    centroids.push_back(points[rng.below(n)]);
    std::vector<double> d2(n);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = dist2(points[i], centroids[0]);
            for (std::size_t j = 1; j < centroids.size(); ++j)
                best = std::min(best, dist2(points[i], centroids[j]));
            d2[i] = best;
            total += best;
        }
        int pick = -1;
        if (total > 0.0) {
            const double u = rng.uniform01() * total;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += d2[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick < 0) {
            // all remaining mass zero: first point not already a centroid
            for (int i = 0; i < n && pick < 0; ++i) {
                bool used = false;
                for (const auto& cen : centroids) used = used || dist2(points[i], cen) == 0.0;
                if (!used) pick = i;
            }
            if (pick < 0) pick = 0;
        }
        centroids.push_back(points[pick]);
    }

    KMeansResult res;
    res.assignments.assign(n, -1);
    std::vector<int> counts(k, 0);
    for (int iter = 0; iter < 300; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bd = dist2(points[i], centroids[0]);
            for (int c = 1; c < k; ++c) {
                const double d = dist2(points[i], centroids[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (res.assignments[i] != best) {
                res.assignments[i] = best;
                changed = true;
            }
        }

        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) ++counts[res.assignments[i]];
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            // re-seed the empty cluster from the farthest point
            int far = -1;
            double fd = -1.0;
            for (int i = 0; i < n; ++i) {
                if (counts[res.assignments[i]] <= 1) continue;  // keep donors non-empty
                const double d = dist2(points[i], centroids[res.assignments[i]]);
                if (d > fd) {
                    fd = d;
                    far = i;
                }
            }
            if (far < 0) continue;
            --counts[res.assignments[far]];
            res.assignments[far] = c;
            counts[c] = 1;
            changed = true;
        }

        for (int c = 0; c < k; ++c) centroids[c].setZero();
        for (int i = 0; i < n; ++i) centroids[res.assignments[i]] += points[i];
        for (int c = 0; c < k; ++c)
            if (counts[c] > 0) centroids[c] /= static_cast<double>(counts[c]);

        res.iterations = iter + 1;
        if (!changed) break;
    }

    res.centroids = std::move(centroids);
    res.wcss = 0.0;
    for (int i = 0; i < n; ++i) res.wcss += dist2(points[i], res.centroids[res.assignments[i]]);
    return res;
}

}  // namespace

KMeansResult kmeans(const std::vector<Eigen::VectorXd>& points, int k, std::uint64_t seed) {
    if (k < 1) throw UsageError("k must be >= 1");
    if (static_cast<int>(points.size()) < k)
        throw DataError("k-means needs at least k points (" + std::to_string(points.size()) +
                        " < " + std::to_string(k) + ")");
    // Ten k-means++ restarts on derived sub-seeds; keep the lowest WCSS.
    KMeansResult best;
    for (int restart = 0; restart < 10; ++restart) {
        KMeansResult res = kmeans_single(points, k, Rng::derive(seed, restart));
        if (restart == 0 || res.wcss < best.wcss) best = std::move(res);
    }
    return best;
}

AgglomerateResult agglomerate(const std::vector<Eigen::VectorXd>& members, int min_size, int max_k,
                              int min_k) {
    const int n = static_cast<int>(members.size());
    if (n < 1) throw DataError("agglomerate needs at least one member");
    if (min_size < 1) throw UsageError("min_size must be >= 1");
    (void)min_k;  // the size constraint dominates; kept for the documented contract

    AgglomerateResult out;
    if (n < min_size) {
        SubCluster sc;
        sc.members = members;
        sc.centroid = Eigen::VectorXd::Zero(members[0].size());
        for (const auto& v : members) sc.centroid += v;
        sc.centroid /= static_cast<double>(n);
        sc.below_min_size = true;
        out.subclusters.push_back(std::move(sc));
        out.assignment.assign(n, 0);
        return out;
    }

    // Ward linkage via the nearest-neighbor chain; distances kept as a full
    // n x n matrix of squared-euclidean Ward dissimilarities.
    std::vector<double> dist(static_cast<std::size_t>(n) * n, 0.0);
    auto d_at = [&](int i, int j) -> double& { return dist[static_cast<std::size_t>(i) * n + j]; };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) d_at(i, j) = d_at(j, i) = dist2(members[i], members[j]);

    std::vector<int> size(n, 1);
    std::vector<bool> active(n, true);
    std::vector<std::pair<int, int>> merges;  // (keep, drop) per merge, keep < drop
    merges.reserve(n - 1);
    std::vector<int> chain;
    chain.reserve(n);

    int n_active = n;
    while (n_active > 1) {
        if (chain.empty()) {
            for (int i = 0; i < n; ++i)
                if (active[i]) {
                    chain.push_back(i);
                    break;
                }
        }
        const int a = chain.back();
        const int prev = chain.size() >= 2 ? chain[chain.size() - 2] : -1;
        int best = prev;
        double bd = prev >= 0 ? d_at(a, prev) : std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            if (!active[i] || i == a || i == prev) continue;
            if (d_at(a, i) < bd) {
                bd = d_at(a, i);
                best = i;
            }
        }
        if (best == prev && prev >= 0) {
            // reciprocal nearest neighbors: merge a and prev
            const int keep = std::min(a, prev);
            const int drop = std::max(a, prev);
            const int sk = size[keep], sd = size[drop];
            for (int i = 0; i < n; ++i) {
                if (!active[i] || i == keep || i == drop) continue;
                // Lance-Williams update for Ward linkage
                const double v = ((sk + size[i]) * d_at(keep, i) + (sd + size[i]) * d_at(drop, i) -
                                  size[i] * d_at(keep, drop)) /
                                 static_cast<double>(sk + sd + size[i]);
                d_at(keep, i) = d_at(i, keep) = v;
            }
            size[keep] = sk + sd;
            active[drop] = false;
            merges.emplace_back(keep, drop);
            --n_active;
            chain.pop_back();
            chain.pop_back();
        } else {
            chain.push_back(best);
        }
    }

    // Replay merges to find the largest k <= max_k whose smallest cluster
    // still holds min_size members (feasibility is monotone in shrinking k).
    const int k_hi = std::min(max_k, n);
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<int> csize(n, 1);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    int chosen_k = 1;
    for (std::size_t step = 0; step < merges.size(); ++step) {
        const int ra = find(merges[step].first);
        const int rb = find(merges[step].second);
        parent[rb] = ra;
        csize[ra] += csize[rb];
        const int k_now = n - static_cast<int>(step) - 1;
        if (k_now > k_hi) continue;
        int min_sz = std::numeric_limits<int>::max();
        for (int i = 0; i < n; ++i)
            if (find(i) == i) min_sz = std::min(min_sz, csize[i]);
        if (min_sz >= min_size) {
            chosen_k = k_now;
            break;
        }
    }
    if (n <= k_hi && n >= 1) {
        // n points can themselves be a feasible cut when each is >= min_size (min_size == 1)
        if (min_size == 1) chosen_k = n;
    }

    // Rebuild the partition at chosen_k clusters.
    std::iota(parent.begin(), parent.end(), 0);
    for (int step = 0; step < n - chosen_k; ++step) parent[find(merges[step].second)] = find(merges[step].first);
    std::vector<int> root_to_cluster(n, -1);
    int next_id = 0;
    out.assignment.resize(n);
    for (int i = 0; i < n; ++i) {
        const int r = find(i);
        if (root_to_cluster[r] < 0) root_to_cluster[r] = next_id++;
        out.assignment[i] = root_to_cluster[r];
    }

    out.subclusters.resize(next_id);
    for (int i = 0; i < n; ++i) out.subclusters[out.assignment[i]].members.push_back(members[i]);
    for (auto& sc : out.subclusters) {
        sc.centroid = Eigen::VectorXd::Zero(members[0].size());
        for (const auto& v : sc.members) sc.centroid += v;
        sc.centroid /= static_cast<double>(sc.members.size());
    }
    return out;
}

std::vector<AffectClass> frame_affect_labels(const Corpus& corpus, int window) {
    if (window < 1) throw UsageError("label window must be >= 1");
    std::vector<AffectClass> labels;
    labels.reserve(corpus.frame_count());
    for (const auto& seq : corpus.sequences) {
        AffectVector acc = AffectVector::Zero();
        std::size_t in_acc = 0;
        for (std::size_t t = 0; t < seq.frames.size(); ++t) {
            acc += seq.frames[t].partner_affect;
            ++in_acc;
            if (in_acc > static_cast<std::size_t>(window)) {
                acc -= seq.frames[t - window].partner_affect;
                --in_acc;
            }
            labels.push_back(affect_argmax(acc / static_cast<double>(in_acc)));
        }
    }
    return labels;
}

std::array<AffectClass, kAffectClassCount> assign_affect_labels(
    const std::vector<AffectClass>& frame_labels, const std::vector<int>& cluster_assignments) {
    if (frame_labels.size() != cluster_assignments.size())
        throw DataError("label/assignment length mismatch");

    long counts[kAffectClassCount][kAffectClassCount] = {};
    for (std::size_t i = 0; i < frame_labels.size(); ++i) {
        const int c = cluster_assignments[i];
        if (c < 0 || c >= kAffectClassCount) throw DataError("cluster id out of range");
        ++counts[c][static_cast<int>(frame_labels[i])];
    }

    std::array<AffectClass, kAffectClassCount> mapping{};
    bool cluster_done[kAffectClassCount] = {};
    bool class_done[kAffectClassCount] = {};
    for (int round = 0; round < kAffectClassCount; ++round) {
        long best = -1;
        int bc = -1, bk = -1;
        for (int c = 0; c < kAffectClassCount; ++c) {
            if (cluster_done[c]) continue;
            for (int k = 0; k < kAffectClassCount; ++k) {
                if (class_done[k]) continue;
                if (counts[c][k] > best) {
                    best = counts[c][k];
                    bc = c;
                    bk = k;
                }
            }
        }
        mapping[bc] = static_cast<AffectClass>(bk);
        cluster_done[bc] = true;
        class_done[bk] = true;
    }
    return mapping;
}

int AffectCluster::member_count() const {
    int n = 0;
    for (const auto& sc : subclusters) n += sc.size();
    return n;
}

const AffectCluster& AffectShapeDictionary::cluster_for(const AffectVector& affect) const {
    return clusters[static_cast<int>(affect_argmax(affect))];
}

std::size_t AffectShapeDictionary::member_count() const {
    std::size_t n = 0;
    for (const auto& c : clusters) n += c.member_count();
    return n;
}

DictionaryBuildResult build_dictionary(const Corpus& corpus, const DictionaryConfig& cfg) {
    if (cfg.min_size < 1) throw UsageError("min_size must be >= 1");
    const std::vector<Eigen::VectorXd> raw = corpus.flattened_shapes();
    const std::vector<AffectClass> labels = frame_affect_labels(corpus, cfg.label_window);
    const int n = static_cast<int>(raw.size());
    if (n < kAffectClassCount) throw DataError("corpus too small for 8 clusters");

    long coverage[kAffectClassCount] = {};
    for (const auto& l : labels) ++coverage[static_cast<int>(l)];
    std::string deficient;
    for (int c = 0; c < kAffectClassCount; ++c)
        if (coverage[c] < cfg.min_size)
            deficient += std::string(deficient.empty() ? "" : ", ") + affect_class_name(static_cast<AffectClass>(c)) +
                         " (" + std::to_string(coverage[c]) + ")";
    if (!deficient.empty())
        throw DataError("classes below min_size=" + std::to_string(cfg.min_size) + ": " + deficient);

    // Canonical lexicographic order makes the whole build invariant to the
    // corpus frame order; identical points keep their input order.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        for (int j = 0; j < raw[a].size(); ++j) {
            if (raw[a][j] < raw[b][j]) return true;
            if (raw[a][j] > raw[b][j]) return false;
        }
        return a < b;
    });

    std::vector<Eigen::VectorXd> raw_sorted(n);
    std::vector<AffectClass> labels_sorted(n);
    for (int i = 0; i < n; ++i) {
        raw_sorted[i] = raw[order[i]];
        labels_sorted[i] = labels[order[i]];
    }

    DictionaryBuildResult out;
    AffectShapeDictionary& dict = out.dictionary;
    dict.config = cfg;
    dict.dim = static_cast<int>(raw_sorted[0].size());
    dict.standardization = Standardizer::fit(raw_sorted);

    std::vector<Eigen::VectorXd> std_points(n);
    for (int i = 0; i < n; ++i) std_points[i] = dict.standardization.apply(raw_sorted[i]);

    const KMeansResult km = kmeans(std_points, kAffectClassCount, cfg.seed);
    const auto mapping = assign_affect_labels(labels_sorted, km.assignments);

    std::vector<int> class_of_point(n);
    for (int i = 0; i < n; ++i) class_of_point[i] = static_cast<int>(mapping[km.assignments[i]]);

    std::vector<int> sub_of_point(n, -1);
    const Eigen::VectorXd neutral_probe = [&] {
        // Neutral class centroid in raw space, for the intensity ordering.
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(dict.dim);
        long cnt = 0;
        for (int i = 0; i < n; ++i)
            if (class_of_point[i] == static_cast<int>(AffectClass::Neutral)) {
                acc += raw_sorted[i];
                ++cnt;
            }
        return cnt > 0 ? Eigen::VectorXd(acc / static_cast<double>(cnt)) : acc;
    }();

    for (int c = 0; c < kAffectClassCount; ++c) {
        AffectCluster& cluster = dict.clusters[c];
        cluster.class_id = static_cast<AffectClass>(c);
        std::vector<int> idx;
        for (int i = 0; i < n; ++i)
            if (class_of_point[i] == c) idx.push_back(i);
        if (idx.empty()) {
            cluster.centroid = Eigen::VectorXd::Zero(dict.dim);
            continue;
        }
        std::vector<Eigen::VectorXd> class_std(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) class_std[i] = std_points[idx[i]];
        AgglomerateResult agg = agglomerate(class_std, cfg.min_size);

        // Re-materialize subclusters with raw members; order them by centroid
        // distance from the Neutral centroid, ascending (intensity ranks).
        const int n_sub = static_cast<int>(agg.subclusters.size());
        std::vector<SubCluster> subs(n_sub);
        for (std::size_t i = 0; i < idx.size(); ++i)
            subs[agg.assignment[i]].members.push_back(raw_sorted[idx[i]]);
        for (int sidx = 0; sidx < n_sub; ++sidx) {
            SubCluster& sc = subs[sidx];
            sc.below_min_size = agg.subclusters[sidx].below_min_size;
            sc.centroid = Eigen::VectorXd::Zero(dict.dim);
            for (const auto& v : sc.members) sc.centroid += v;
            sc.centroid /= static_cast<double>(sc.members.size());
        }
        std::vector<int> sub_order(n_sub);
        std::iota(sub_order.begin(), sub_order.end(), 0);
        std::stable_sort(sub_order.begin(), sub_order.end(), [&](int a, int b) {
            return (subs[a].centroid - neutral_probe).squaredNorm() <
                   (subs[b].centroid - neutral_probe).squaredNorm();
        });
        std::vector<int> rank_of(n_sub);
        for (int r = 0; r < n_sub; ++r) rank_of[sub_order[r]] = r;

        cluster.subclusters.resize(n_sub);
        for (int s = 0; s < n_sub; ++s) cluster.subclusters[rank_of[s]] = std::move(subs[s]);
        for (std::size_t i = 0; i < idx.size(); ++i) sub_of_point[idx[i]] = rank_of[agg.assignment[i]];

        cluster.centroid = Eigen::VectorXd::Zero(dict.dim);
        for (std::size_t i = 0; i < idx.size(); ++i) cluster.centroid += raw_sorted[idx[i]];
        cluster.centroid /= static_cast<double>(idx.size());
    }

    out.frame_class.resize(n);
    out.frame_subcluster.resize(n);
    for (int i = 0; i < n; ++i) {
        out.frame_class[order[i]] = class_of_point[i];
        out.frame_subcluster[order[i]] = sub_of_point[i];
    }
    return out;
}

Eigen::VectorXd sample_z(const AffectShapeDictionary& dict, const AffectVector& affect,
                         const Eigen::VectorXd* prev_z, Rng& rng, int top_k) {
    if (top_k < 1) throw UsageError("top_k must be >= 1");
    const AffectCluster& cluster = dict.cluster_for(affect);
    if (cluster.subclusters.empty()) throw DataError("dictionary class has no members");

    if (prev_z == nullptr) {
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < cluster.subclusters.size(); ++s) {
            const double d = (cluster.subclusters[s].centroid - cluster.centroid).squaredNorm();
            if (d < bd) {
                bd = d;
                best = static_cast<int>(s);
            }
        }
        const SubCluster& sc = cluster.subclusters[best];
        return sc.members[rng.below(sc.members.size())];
    }

    // Top-k nearest members of the whole class, ties toward the lower index.
    std::vector<std::pair<double, int>> scored;
    scored.reserve(cluster.member_count());
    std::vector<const Eigen::VectorXd*> flat;
    flat.reserve(cluster.member_count());
    for (const auto& sc : cluster.subclusters)
        for (const auto& v : sc.members) {
            scored.emplace_back((v - *prev_z).squaredNorm(), static_cast<int>(flat.size()));
            flat.push_back(&v);
        }
    const int k = std::min<int>(top_k, static_cast<int>(scored.size()));
    std::nth_element(scored.begin(), scored.begin() + (k - 1), scored.end());
    std::sort(scored.begin(), scored.begin() + k);
    return *flat[scored[rng.below(k)].second];
}

void save_dictionary(const AffectShapeDictionary& dict, const std::string& path) {
    auto out = open_output(path);
    out << "DICT v1\n";
    out << "dim " << dict.dim << "\n";
    out << "min_size " << dict.config.min_size << "\n";
    out << "seed " << dict.config.seed << "\n";
    out << "label_window " << dict.config.label_window << "\n";
    auto write_vec = [&](const Eigen::VectorXd& v) {
        for (int j = 0; j < v.size(); ++j) out << (j ? " " : "") << g17(v[j]);
        out << "\n";
    };
    write_vec(dict.standardization.mean);
    write_vec(dict.standardization.std_dev);
    for (const auto& cluster : dict.clusters) {
        out << "class " << static_cast<int>(cluster.class_id) << ' ' << cluster.subclusters.size()
            << "\n";
        write_vec(cluster.centroid.size() ? cluster.centroid : Eigen::VectorXd::Zero(dict.dim));
        for (const auto& sc : cluster.subclusters) {
            out << "sub " << sc.members.size() << ' ' << (sc.below_min_size ? 1 : 0) << "\n";
            write_vec(sc.centroid);
            for (const auto& mv : sc.members) write_vec(mv);
        }
    }
    if (!out) throw DataError("write failed: " + path);
}

AffectShapeDictionary load_dictionary(const std::string& path) {
    auto in = open_input(path);
    TokenReader tr(in, path);
    tr.expect("DICT");
    tr.expect("v1");
    AffectShapeDictionary dict;
    tr.expect("dim");
    dict.dim = static_cast<int>(tr.next_int());
    tr.expect("min_size");
    dict.config.min_size = static_cast<int>(tr.next_int());
    tr.expect("seed");
    dict.config.seed = static_cast<std::uint64_t>(tr.next_int());
    tr.expect("label_window");
    dict.config.label_window = static_cast<int>(tr.next_int());
    auto read_vec = [&]() {
        Eigen::VectorXd v(dict.dim);
        for (int j = 0; j < dict.dim; ++j) v[j] = tr.next_double();
        return v;
    };
    dict.standardization.mean = read_vec();
    dict.standardization.std_dev = read_vec();
    for (int c = 0; c < kAffectClassCount; ++c) {
        tr.expect("class");
        const int cid = static_cast<int>(tr.next_int());
        if (cid != c) tr.fail("classes must appear in index order");
        const int n_sub = static_cast<int>(tr.next_int());
        AffectCluster& cluster = dict.clusters[c];
        cluster.class_id = static_cast<AffectClass>(c);
        cluster.centroid = read_vec();
        cluster.subclusters.resize(n_sub);
        for (int s = 0; s < n_sub; ++s) {
            tr.expect("sub");
            const int sz = static_cast<int>(tr.next_int());
            cluster.subclusters[s].below_min_size = tr.next_int() != 0;
            cluster.subclusters[s].centroid = read_vec();
            cluster.subclusters[s].members.resize(sz);
            for (int i = 0; i < sz; ++i) cluster.subclusters[s].members[i] = read_vec();
        }
    }
    return dict;
}

}  // namespace dyadgen
