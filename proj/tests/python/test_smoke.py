"""Python smoke tests: drive the main operations end to end through the
bindings and the CLI binary (path in $DYADGEN_CLI)."""

import os
import subprocess

import numpy as np
import pytest

import dyadgen as dg


@pytest.fixture(scope="module")
def synth():
    cfg = dg.CorpusConfig()
    cfg.n_sequences = 24
    cfg.seq_len = 100
    cfg.seed = 7
    return dg.synth_corpus(cfg)


def test_pdm_roundtrip(synth):
    pdm = synth.pdm
    rng = dg.Rng(3)
    params = dg.neutral_params(pdm)
    q = np.array(params.q)
    for j in range(pdm.rank):
        q[j] = (2.0 * rng.uniform01() - 1.0) * np.sqrt(pdm.variances[j])
    params.q = q
    params.rigid.yaw = 0.2
    params.rigid.tx = 12.0

    observed = dg.project(pdm, params)
    assert observed.shape == (dg.LANDMARK_COUNT, 2)
    res = dg.fit(pdm, observed)
    assert res.converged
    err = np.linalg.norm(res.params.flatten() - params.flatten())
    assert err < 1e-6


def test_corpus_labels_and_affect(synth):
    corpus = synth.corpus
    assert corpus.frame_count == 24 * 100
    seq = corpus.sequences[0]
    assert seq.has_labels()
    window = [f.partner_affect for f in seq.frames[:40]]
    agg = dg.aggregate_affect(window)
    assert agg.shape == (8, 1) or agg.shape == (8,)
    assert dg.affect_argmax(seq.frames[0].partner_affect) == seq.labels[0].affect


def test_dictionary_build_and_sampling(synth):
    cfg = dg.DictionaryConfig()
    cfg.min_size = 20
    cfg.seed = 5
    build = dg.build_dictionary(synth.corpus, cfg)
    assert build.dictionary.member_count == synth.corpus.frame_count

    affect = np.zeros(8)
    affect[0] = 1.0
    rng = dg.Rng(11)
    z0 = dg.sample_z(build.dictionary, affect, None, rng)
    z1 = dg.sample_z(build.dictionary, affect, z0, rng)
    assert z0.shape == z1.shape == (synth.corpus.shape_dim,)

    rec = dg.cluster_recovery(build, synth.corpus)
    assert rec.ari > 0.9


def test_clstm_train_and_generate(synth):
    corpus = synth.corpus
    cfg = dg.CLstmConfig()
    cfg.window = 10
    cfg.hidden_dim = 16
    cfg.output_dim = corpus.shape_dim
    cfg.input_dim = 8 + corpus.shape_dim
    cfg.epochs = 2
    cfg.seed = 1
    model = dg.CLstmModel.init(cfg)
    st = dg.Standardizer.fit(corpus.flattened_shapes())
    report = dg.train_clstm(model, corpus, cfg, st)
    assert len(report.epoch_loss) == 2

    history = corpus.sequences[0].frames[:10]
    affects = [corpus.sequences[0].frames[10 + t].partner_affect for t in range(20)]
    out = dg.generate_clstm(model, history, affects, 20, dg.GenerationMode.overlap)
    assert len(out) == 20
    assert out[0].dim == corpus.shape_dim

    cmp = dg.compare_modes(model, corpus)
    assert cmp.frames > 0


def test_cgan_losses_and_step():
    cfg = dg.CGanConfig()
    cfg.data_dim = 3
    cfg.z_dim = 2
    cfg.hidden = 8
    cfg.seed = 2
    model = dg.CGanModel.init(cfg)

    rng = dg.Rng(4)
    batch = []
    for i in range(6):
        s = dg.ConditionedSample()
        affect = np.zeros(8)
        affect[i % 8] = 1.0
        s.affect = affect
        s.shape = np.array([rng.normal() for _ in range(3)])
        batch.append(s)
    losses = dg.train_step(model, batch, rng)
    assert model.d_updates == 1
    assert model.g_updates == 2
    assert np.isfinite(losses.d) and np.isfinite(losses.g)

    out = dg.generate_cgan(model, batch[0].affect, 4, rng, None)
    assert len(out) == 4 and out[0].shape == (3,)


def test_render_and_hash():
    face3d = dg.canonical_mean_face()
    lm = np.ascontiguousarray(face3d[:, :2])
    frame = dg.render(lm, dg.Topology.ibug68(), 256, 256)
    img = frame.to_numpy()
    assert img.shape == (256, 256)
    assert img.sum() > 500  # the face is on canvas
    assert dg.frame_hash(frame) == 0x58D6F6BB50D90342


def test_mse_and_ari():
    a = [np.array([1.0, 2.0]), np.array([3.0, 4.0])]
    b = [np.array([1.0, 2.0]), np.array([3.0, 5.0])]
    assert dg.mse(a, a) == 0.0
    assert abs(dg.mse(a, b) - 0.25) < 1e-12
    assert dg.adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(1.0)


def test_cli_pipeline(tmp_path):
    cli = os.environ.get("DYADGEN_CLI")
    assert cli, "DYADGEN_CLI must point at the CLI binary"
    corpus = tmp_path / "corpus"

    def run(*args):
        proc = subprocess.run([cli, *args], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        return proc.stdout

    run("synth", "--out", str(corpus), "--sequences", "24", "--seq-len", "100", "--seed", "7")
    run("build-dict", "--corpus", str(corpus), "--min-size", "20", "--seed", "3",
        "--out", str(tmp_path / "dict.txt"))
    run("generate", "--method", "dict", "--corpus", str(corpus), "--dict",
        str(tmp_path / "dict.txt"), "--affect-class", "joy", "--steps", "30", "--seed", "11",
        "--out", str(tmp_path / "gen.txt"))
    run("eval", "--generated", str(tmp_path / "gen.txt"), "--corpus", str(corpus),
        "--truth-seq", "seq_000000", "--out", str(tmp_path / "report.txt"),
        "--json", str(tmp_path / "report.json"))

    report = (tmp_path / "report.txt").read_text()
    assert "mse " in report
    assert "smoothness_max_disp" in report

    # zero-step generation writes an empty sequence file and exits 0
    run("generate", "--method", "dict", "--corpus", str(corpus), "--dict",
        str(tmp_path / "dict.txt"), "--affect-class", "joy", "--steps", "0",
        "--out", str(tmp_path / "empty.txt"))
    assert "frames 0" in (tmp_path / "empty.txt").read_text()

    # synth is byte-idempotent for a fixed seed
    corpus2 = tmp_path / "corpus2"
    run("synth", "--out", str(corpus2), "--sequences", "24", "--seq-len", "100", "--seed", "7")
    assert (corpus / "manifest").read_bytes() == (corpus2 / "manifest").read_bytes()
    assert (corpus / "seq_000003.txt").read_bytes() == (corpus2 / "seq_000003.txt").read_bytes()

    # usage errors exit 1, data errors exit 2
    proc = subprocess.run([cli, "generate", "--method", "nope", "--corpus", str(corpus),
                           "--out", "x"], capture_output=True)
    assert proc.returncode == 1
    proc = subprocess.run([cli, "eval", "--generated", "/nonexistent", "--corpus", str(corpus),
                           "--out", str(tmp_path / "r2.txt")], capture_output=True)
    assert proc.returncode == 2

    # --help advertises every flag with its default
    help_text = run("build-dict", "--help")
    assert "--min-size" in help_text and "100" in help_text
    assert "--label-window" in help_text
