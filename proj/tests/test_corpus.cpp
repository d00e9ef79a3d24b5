#include <doctest.h>

#include <set>

#include "dyadgen/corpus.hpp"
#include "dyadgen/io_text.hpp"
#include "test_util.hpp"

using namespace dyadgen;
using dyadgen::test::TempDir;
using dyadgen::test::slurp;

namespace {

CorpusConfig small_config(std::uint64_t seed = 7) {
    CorpusConfig cfg;
    cfg.n_sequences = 24;
    cfg.seq_len = 100;
    cfg.m = 10;
    cfg.n_intensity_levels = 3;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("affect_argmax: one-hot, tie rule, plain max") {
    AffectVector v = AffectVector::Zero();
    v[static_cast<int>(AffectClass::Joy)] = 1.0;
    CHECK(affect_argmax(v) == AffectClass::Joy);

    CHECK(affect_argmax(AffectVector::Zero()) == AffectClass::Joy);  // all-zero tie -> index 0

    AffectVector w = AffectVector::Zero();
    w[0] = 0.1;
    w[1] = 0.9;
    CHECK(affect_argmax(w) == AffectClass::Anger);
}

TEST_CASE("aggregate_affect: constant window, two one-hots, invariances") {
    AffectVector v;
    v << 0.3, 0, 0.7, 0, 0.1, 0, 0, 0.2;
    CHECK((aggregate_affect({v, v, v}) - v).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(aggregate_affect({v, v}) == v);  // power-of-two window is exact

    AffectVector a = AffectVector::Zero(), b = AffectVector::Zero();
    a[0] = 1.0;
    b[1] = 1.0;
    const AffectVector mean = aggregate_affect({a, b});
    CHECK(mean[0] == 0.5);
    CHECK(mean[1] == 0.5);
    CHECK(mean.tail(6).cwiseAbs().maxCoeff() == 0.0);

    // permutation invariance
    CHECK(aggregate_affect({a, b, v}) == aggregate_affect({v, b, a}));
    CHECK_THROWS_AS(aggregate_affect({}), DataError);
}

TEST_CASE("synth_corpus: same seed is byte-identical on disk") {
    const CorpusConfig cfg = small_config();
    const SynthResult r1 = synth_corpus(cfg);
    const SynthResult r2 = synth_corpus(cfg);
    TempDir d1("corpus_a"), d2("corpus_b");
    save_corpus(r1.corpus, r1.pdm, d1.path.string());
    save_corpus(r2.corpus, r2.pdm, d2.path.string());
    CHECK(slurp(d1.file("manifest")) == slurp(d2.file("manifest")));
    CHECK(slurp(d1.file("pdm.txt")) == slurp(d2.file("pdm.txt")));
    for (const auto& seq : r1.corpus.sequences) {
        const std::string name = seq.id + ".txt";
        REQUIRE(slurp(d1.file(name)) == slurp(d2.file(name)));
    }
}

TEST_CASE("synth_corpus: labels use exactly n_intensity_levels per class") {
    CorpusConfig big = small_config(3);
    big.n_sequences = 120;  // enough segments for every (class, level) pair
    big.seq_len = 150;
    const SynthResult r = synth_corpus(big);
    std::set<int> levels[kAffectClassCount];
    for (const auto& seq : r.corpus.sequences) {
        REQUIRE(seq.has_labels());
        for (const auto& label : seq.labels)
            levels[static_cast<int>(label.affect)].insert(label.intensity);
    }
    for (int c = 0; c < kAffectClassCount; ++c) {
        for (const int l : levels[c]) {
            CHECK(l >= 1);
            CHECK(l <= 3);
        }
        CHECK(levels[c].size() == 3);  // all three levels realized per class
    }
}

TEST_CASE("synth_corpus: classes are separated in shape space") {
    const SynthResult r = synth_corpus(small_config(5));
    // class-conditional means and average pairwise distances, via labels
    std::vector<Eigen::VectorXd> by_class[kAffectClassCount];
    for (const auto& seq : r.corpus.sequences)
        for (std::size_t t = 0; t < seq.frames.size(); ++t)
            by_class[static_cast<int>(seq.labels[t].affect)].push_back(
                seq.frames[t].agent_shape.flatten());

    double within = 0.0, between = 0.0;
    long nw = 0, nb = 0;
    Rng rng(1);
    for (int c = 0; c < kAffectClassCount; ++c) {
        for (int s = 0; s < 400; ++s) {
            const auto& pool = by_class[c];
            if (pool.size() < 2) continue;
            within += (pool[rng.below(pool.size())] - pool[rng.below(pool.size())]).norm();
            ++nw;
        }
        for (int c2 = c + 1; c2 < kAffectClassCount; ++c2)
            for (int s = 0; s < 100; ++s) {
                between += (by_class[c][rng.below(by_class[c].size())] -
                            by_class[c2][rng.below(by_class[c2].size())])
                               .norm();
                ++nb;
            }
    }
    CHECK(within / nw < between / nb);
    CHECK(r.truth.min_class_separation >= 6.0 * r.truth.noise_sigma);
}

TEST_CASE("synth_corpus: in-segment 100-frame windows vote the scheduled class") {
    CorpusConfig cfg = small_config(9);
    cfg.seq_len = 300;
    const SynthResult r = synth_corpus(cfg);
    long total = 0, correct = 0;
    for (const auto& seq : r.corpus.sequences) {
        for (std::size_t start = 0; start + 100 <= seq.frames.size(); start += 25) {
            const AffectClass cls = seq.labels[start].affect;
            bool uniform = true;
            for (std::size_t t = start; t < start + 100; ++t)
                uniform = uniform && seq.labels[t].affect == cls;
            if (!uniform) continue;
            std::vector<AffectVector> window;
            for (std::size_t t = start; t < start + 100; ++t)
                window.push_back(seq.frames[t].partner_affect);
            ++total;
            if (affect_argmax(aggregate_affect(window)) == cls) ++correct;
        }
    }
    REQUIRE(total > 50);
    CHECK(static_cast<double>(correct) / total >= 0.99);
}

TEST_CASE("synth_corpus: config validation") {
    CorpusConfig cfg = small_config();
    cfg.n_intensity_levels = 2;
    CHECK_THROWS_AS(synth_corpus(cfg), UsageError);
    cfg = small_config();
    cfg.seq_len = 1;
    CHECK_THROWS_AS(synth_corpus(cfg), UsageError);
    cfg = small_config();
    cfg.n_sequences = 0;
    CHECK_THROWS_AS(synth_corpus(cfg), UsageError);
}

TEST_CASE("corpus save/load is a field-exact identity") {
    const SynthResult r = synth_corpus(small_config(21));
    TempDir dir("corpus_io");
    save_corpus(r.corpus, r.pdm, dir.path.string());
    const Corpus back = load_corpus(dir.path.string());

    REQUIRE(back.sequences.size() == r.corpus.sequences.size());
    CHECK(back.config.seed == r.corpus.config.seed);
    CHECK(back.config.m == r.corpus.config.m);
    for (std::size_t s = 0; s < back.sequences.size(); ++s) {
        const auto& sa = r.corpus.sequences[s];
        const auto& sb = back.sequences[s];
        REQUIRE(sb.frames.size() == sa.frames.size());
        CHECK(sb.id == sa.id);
        for (std::size_t t = 0; t < sa.frames.size(); ++t) {
            CHECK(sb.frames[t].t == sa.frames[t].t);
            CHECK(sb.frames[t].partner_affect == sa.frames[t].partner_affect);
            CHECK(sb.frames[t].agent_shape.flatten() == sa.frames[t].agent_shape.flatten());
            CHECK(sb.labels[t].affect == sa.labels[t].affect);
            CHECK(sb.labels[t].intensity == sa.labels[t].intensity);
        }
    }
    const PDMModel pdm_back = load_corpus_pdm(dir.path.string());
    CHECK(pdm_back.basis == r.pdm.basis);
}

TEST_CASE("load_corpus: malformed record errors name the line") {
    const SynthResult r = synth_corpus(small_config(2));
    TempDir dir("corpus_bad");
    save_corpus(r.corpus, r.pdm, dir.path.string());

    // truncate one frame record in the first sequence file
    const std::string seq_path = dir.file("seq_000000.txt");
    std::string content = slurp(seq_path);
    const auto pos = content.find('\n', content.find("labels"));
    std::ofstream(seq_path, std::ios::binary) << content.substr(0, pos + 1) << "0 bad\n";
    try {
        load_corpus(dir.path.string());
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":6:") != std::string::npos);
    }
}

TEST_CASE("standalone sequence files may be empty; corpus members may not") {
    TempDir dir("seq_empty");
    DyadSequence empty;
    empty.id = "gen";
    save_sequence_file(empty, 16, dir.file("empty.txt"));
    const DyadSequence back = load_sequence_file(dir.file("empty.txt"), 16);
    CHECK(back.frames.empty());
}
