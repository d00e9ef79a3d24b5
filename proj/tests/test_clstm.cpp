#include <doctest.h>

#include <cmath>

#include "dyadgen/clstm.hpp"
#include "test_util.hpp"

using namespace dyadgen;
using dyadgen::test::TempDir;

namespace {

CLstmConfig tiny_config() {
    CLstmConfig cfg;
    cfg.input_dim = 5;
    cfg.hidden_dim = 8;
    cfg.output_dim = 3;
    cfg.window = 5;
    cfg.seed = 3;
    return cfg;
}

std::vector<Eigen::VectorXd> random_sequence(Rng& rng, int steps, int dim, double scale = 1.0) {
    std::vector<Eigen::VectorXd> seq(steps);
    for (auto& v : seq) {
        v.resize(dim);
        for (int j = 0; j < dim; ++j) v[j] = scale * rng.normal();
    }
    return seq;
}

Corpus tiny_corpus(std::uint64_t seed = 7, int sequences = 12, int len = 64) {
    CorpusConfig cfg;
    cfg.n_sequences = sequences;
    cfg.seq_len = len;
    cfg.seed = seed;
    return synth_corpus(cfg).corpus;
}

}  // namespace

TEST_CASE("forward: all-zero weights emit the output bias") {
    CLstmModel m = CLstmModel::init(tiny_config());
    m.unpack(Eigen::VectorXd::Zero(m.n_params()));
    Rng rng(1);
    const auto outs = forward(m, random_sequence(rng, 7, 5));
    REQUIRE(outs.size() == 7);
    for (const auto& y : outs) CHECK(y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward: shape contract and bit determinism") {
    const CLstmModel m = CLstmModel::init(tiny_config());
    Rng rng(2);
    const auto inputs = random_sequence(rng, 1, 5);
    const auto a = forward(m, inputs);
    const auto b = forward(m, inputs);
    REQUIRE(a.size() == 1);
    CHECK(a[0].size() == 3);
    CHECK(a[0] == b[0]);

    CHECK_THROWS_AS(forward(m, random_sequence(rng, 2, 4)), DataError);
}

TEST_CASE("bptt_gradients: matches central finite differences") {
    Rng rng(11);
    for (int instance = 0; instance < 5; ++instance) {
        CLstmConfig cfg = tiny_config();
        cfg.seed = 100 + instance;
        CLstmModel m = CLstmModel::init(cfg);
        const auto inputs = random_sequence(rng, 5, 5);
        const auto targets = random_sequence(rng, 5, 3);

        CLstmGrads grads;
        bptt_gradients(m, inputs, targets, grads);
        const Eigen::VectorXd analytic = grads.pack();

        CLstmModel probe = m;
        const Eigen::VectorXd numeric = test::finite_difference_gradient(
            [&](const Eigen::VectorXd& theta) {
                probe.unpack(theta);
                CLstmGrads scratch;
                return bptt_gradients(probe, inputs, targets, scratch);
            },
            m.pack());
        CHECK(test::max_relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("bptt_gradients: empty sequence gives zero loss and zero gradients") {
    const CLstmModel m = CLstmModel::init(tiny_config());
    CLstmGrads grads;
    const double loss = bptt_gradients(m, {}, {}, grads);
    CHECK(loss == 0.0);
    CHECK(grads.pack().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bptt_gradients: gradient is linear in the residual") {
    const CLstmModel m = CLstmModel::init(tiny_config());
    Rng rng(13);
    const auto inputs = random_sequence(rng, 5, 5);
    const auto outputs = forward(m, inputs);

    auto targets_with_residual_scale = [&](double k) {
        const Eigen::VectorXd base_residual = 0.5 * Eigen::VectorXd::Ones(3);
        std::vector<Eigen::VectorXd> targets(outputs.size());
        for (std::size_t t = 0; t < outputs.size(); ++t)
            targets[t] = outputs[t] - k * base_residual;
        return targets;
    };

    CLstmGrads g1, g2, g4;
    const double l1 = bptt_gradients(m, inputs, targets_with_residual_scale(1.0), g1);
    const double l2 = bptt_gradients(m, inputs, targets_with_residual_scale(std::sqrt(2.0)), g2);
    const double l4 = bptt_gradients(m, inputs, targets_with_residual_scale(2.0), g4);

    // residual x sqrt(2): loss doubles, gradient norm scales by sqrt(2)
    CHECK(std::abs(l2 - 2.0 * l1) <= 1e-9 * std::abs(l1) * 2.0);
    CHECK(std::abs(g2.pack().norm() - std::sqrt(2.0) * g1.pack().norm()) <=
          1e-9 * g1.pack().norm());
    CHECK(std::abs(g2.pack().squaredNorm() - 2.0 * g1.pack().squaredNorm()) <=
          1e-9 * g1.pack().squaredNorm() * 2.0);
    // residual x 2: gradients double exactly
    CHECK((g4.pack() - 2.0 * g1.pack()).cwiseAbs().maxCoeff() <=
          1e-9 * g1.pack().cwiseAbs().maxCoeff() * 2.0 + 1e-15);
    CHECK(std::abs(l4 - 4.0 * l1) <= 1e-9 * std::abs(l1) * 4.0);
}

TEST_CASE("train: best-so-far loss strictly decreases on the synthetic corpus") {
    const Corpus corpus = tiny_corpus();
    CLstmConfig cfg;
    cfg.window = 15;
    cfg.hidden_dim = 32;
    cfg.output_dim = corpus.shape_dim();
    cfg.input_dim = kAffectClassCount + cfg.output_dim;
    cfg.epochs = 11;
    cfg.seed = 5;
    CLstmModel model = CLstmModel::init(cfg);
    const Standardizer st = Standardizer::fit(corpus.flattened_shapes());
    const TrainReport report = train(model, corpus, cfg, st);
    REQUIRE(report.epoch_loss.size() == 11);
    double best = report.epoch_loss[0];
    for (const double l : report.epoch_loss) best = std::min(best, l);
    CHECK(best < report.epoch_loss[0]);
    CHECK(report.epoch_loss[10] < report.epoch_loss[0]);
}

TEST_CASE("train: zero learning rate leaves weights bit-exact") {
    const Corpus corpus = tiny_corpus(9, 6, 40);
    CLstmConfig cfg;
    cfg.window = 10;
    cfg.hidden_dim = 16;
    cfg.output_dim = corpus.shape_dim();
    cfg.input_dim = kAffectClassCount + cfg.output_dim;
    cfg.epochs = 2;
    cfg.learning_rate = 0.0;
    CLstmModel model = CLstmModel::init(cfg);
    const Eigen::VectorXd before = model.pack();
    train(model, corpus, cfg, Standardizer::fit(corpus.flattened_shapes()));
    CHECK(model.pack() == before);
}

TEST_CASE("train: constant targets are learned below 1e-3 within 50 epochs") {
    // constant-shape corpus; identity standardizer since the data has no variance
    Corpus corpus;
    corpus.config.m = 2;
    corpus.config.seq_len = 24;
    Eigen::VectorXd target(8);
    target << 1.0, 0.0, 0.0, 0.0, 2.0, -1.0, 0.4, -0.3;
    Rng rng(3);
    for (int s = 0; s < 4; ++s) {
        DyadSequence seq;
        seq.id = "const_" + std::to_string(s);
        for (int t = 0; t < 24; ++t) {
            DyadFrame f;
            f.t = t;
            f.partner_affect = AffectVector::Zero();
            f.partner_affect[s % 8] = 1.0;
            f.agent_shape = ShapeParams::unflatten(target);
            seq.frames.push_back(f);
        }
        corpus.sequences.push_back(seq);
    }
    CLstmConfig cfg;
    cfg.window = 8;
    cfg.hidden_dim = 64;
    cfg.output_dim = 8;
    cfg.input_dim = 16;
    cfg.epochs = 50;
    cfg.seed = 1;
    Standardizer identity;
    identity.mean = Eigen::VectorXd::Zero(8);
    identity.std_dev = Eigen::VectorXd::Ones(8);
    CLstmModel model = CLstmModel::init(cfg);
    const TrainReport report = train(model, corpus, cfg, identity);
    CHECK(report.epoch_loss.back() < 1e-3);
}

TEST_CASE("train: identical seed and corpus give identical weights") {
    const Corpus corpus = tiny_corpus(31, 6, 40);
    CLstmConfig cfg;
    cfg.window = 10;
    cfg.hidden_dim = 16;
    cfg.output_dim = corpus.shape_dim();
    cfg.input_dim = kAffectClassCount + cfg.output_dim;
    cfg.epochs = 3;
    cfg.seed = 17;
    const Standardizer st = Standardizer::fit(corpus.flattened_shapes());
    CLstmModel a = CLstmModel::init(cfg);
    CLstmModel b = CLstmModel::init(cfg);
    train(a, corpus, cfg, st);
    train(b, corpus, cfg, st);
    CHECK(a.pack() == b.pack());
}

TEST_CASE("generate: steps=0, shape contract, window validation") {
    const Corpus corpus = tiny_corpus(41, 4, 40);
    CLstmConfig cfg;
    cfg.window = 10;
    cfg.hidden_dim = 16;
    cfg.output_dim = corpus.shape_dim();
    cfg.input_dim = kAffectClassCount + cfg.output_dim;
    cfg.epochs = 1;
    CLstmModel model = CLstmModel::init(cfg);
    train(model, corpus, cfg, Standardizer::fit(corpus.flattened_shapes()));

    const auto& frames = corpus.sequences[0].frames;
    const std::vector<DyadFrame> history(frames.begin(), frames.begin() + 10);
    std::vector<AffectVector> affects(25, AffectVector::Zero());

    CHECK(generate(model, history, affects, 0, GenerationMode::Overlap).empty());
    const auto out = generate(model, history, affects, 25, GenerationMode::NonOverlap);
    REQUIRE(out.size() == 25);
    for (const auto& p : out) CHECK(p.dim() == corpus.shape_dim());

    const std::vector<DyadFrame> short_history(frames.begin(), frames.begin() + 9);
    CHECK_THROWS_AS(generate(model, short_history, affects, 5, GenerationMode::Overlap), DataError);
}

TEST_CASE("generate: overlap step 1 equals the first non-overlap output") {
    const Corpus corpus = tiny_corpus(43, 4, 40);
    CLstmConfig cfg;
    cfg.window = 12;
    cfg.hidden_dim = 24;
    cfg.output_dim = corpus.shape_dim();
    cfg.input_dim = kAffectClassCount + cfg.output_dim;
    cfg.epochs = 2;
    CLstmModel model = CLstmModel::init(cfg);
    train(model, corpus, cfg, Standardizer::fit(corpus.flattened_shapes()));

    const auto& frames = corpus.sequences[1].frames;
    const std::vector<DyadFrame> history(frames.begin(), frames.begin() + 12);
    const std::vector<AffectVector> affects(1, frames[12].partner_affect);

    const auto over = generate(model, history, affects, 1, GenerationMode::Overlap);
    const auto non = generate(model, history, affects, 1, GenerationMode::NonOverlap);
    REQUIRE(over.size() == 1);
    REQUIRE(non.size() == 1);
    CHECK(over[0].flatten() == non[0].flatten());
}

TEST_CASE("generate: free runs stay bounded") {
    const Corpus corpus = tiny_corpus(47, 8, 80);
    CLstmConfig cfg;
    cfg.window = 16;
    cfg.hidden_dim = 32;
    cfg.output_dim = corpus.shape_dim();
    cfg.input_dim = kAffectClassCount + cfg.output_dim;
    cfg.epochs = 4;
    CLstmModel model = CLstmModel::init(cfg);
    train(model, corpus, cfg, Standardizer::fit(corpus.flattened_shapes()));

    double corpus_max = 0.0;
    for (const auto& v : corpus.flattened_shapes())
        corpus_max = std::max(corpus_max, v.cwiseAbs().maxCoeff());

    const auto& frames = corpus.sequences[0].frames;
    const std::vector<DyadFrame> history(frames.begin(), frames.begin() + 16);
    std::vector<AffectVector> affects;
    for (int t = 0; t < 400; ++t) affects.push_back(frames[16 + (t % 60)].partner_affect);

    for (const GenerationMode mode : {GenerationMode::Overlap, GenerationMode::NonOverlap}) {
        const auto out = generate(model, history, affects, 400, mode);
        for (const auto& p : out)
            CHECK(p.flatten().cwiseAbs().maxCoeff() <= 10.0 * corpus_max);
    }
}

TEST_CASE("checkpoint round-trips weights and behavior") {
    const Corpus corpus = tiny_corpus(53, 4, 40);
    CLstmConfig cfg;
    cfg.window = 10;
    cfg.hidden_dim = 16;
    cfg.output_dim = corpus.shape_dim();
    cfg.input_dim = kAffectClassCount + cfg.output_dim;
    cfg.epochs = 1;
    CLstmModel model = CLstmModel::init(cfg);
    train(model, corpus, cfg, Standardizer::fit(corpus.flattened_shapes()));

    TempDir dir("clstm_io");
    save_clstm(model, dir.file("m.txt"));
    const CLstmModel back = load_clstm(dir.file("m.txt"));
    CHECK(back.pack() == model.pack());
    CHECK(back.standardizer.mean == model.standardizer.mean);
    CHECK(back.standardizer.std_dev == model.standardizer.std_dev);

    Rng rng(5);
    const auto inputs = random_sequence(rng, 6, cfg.input_dim);
    CHECK(forward(back, inputs) == forward(model, inputs));
}
