// Python bindings for the dyadgen core: shape model, corpus synthesis,
// affect-shape dictionary, sequence generators, renderer and metrics.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dyadgen/cgan.hpp"
#include "dyadgen/clstm.hpp"
#include "dyadgen/corpus.hpp"
#include "dyadgen/dictionary.hpp"
#include "dyadgen/eval.hpp"
#include "dyadgen/pdm.hpp"
#include "dyadgen/sketch.hpp"

namespace py = pybind11;
using namespace dyadgen;

namespace {

py::array_t<std::uint8_t> raster_to_numpy(const RasterFrame& f) {
    py::array_t<std::uint8_t> arr({f.height, f.width});
    std::copy(f.pixels.begin(), f.pixels.end(), arr.mutable_data());
    return arr;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Temporally smooth facial-behavior generation for dyadic interactions";

    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.attr("LANDMARK_COUNT") = kLandmarkCount;
    m.attr("AFFECT_CLASS_COUNT") = kAffectClassCount;

    py::class_<Rng>(m, "Rng")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("uniform01", &Rng::uniform01)
        .def("normal", py::overload_cast<>(&Rng::normal))
        .def("below", &Rng::below, py::arg("n"));

    py::enum_<AffectClass>(m, "AffectClass")
        .value("joy", AffectClass::Joy)
        .value("anger", AffectClass::Anger)
        .value("surprise", AffectClass::Surprise)
        .value("fear", AffectClass::Fear)
        .value("contempt", AffectClass::Contempt)
        .value("disgust", AffectClass::Disgust)
        .value("sadness", AffectClass::Sadness)
        .value("neutral", AffectClass::Neutral);

    py::class_<RigidParams>(m, "RigidParams")
        .def(py::init<>())
        .def_readwrite("scale", &RigidParams::scale)
        .def_readwrite("pitch", &RigidParams::pitch)
        .def_readwrite("yaw", &RigidParams::yaw)
        .def_readwrite("roll", &RigidParams::roll)
        .def_readwrite("tx", &RigidParams::tx)
        .def_readwrite("ty", &RigidParams::ty);

    py::class_<ShapeParams>(m, "ShapeParams")
        .def(py::init<>())
        .def_readwrite("rigid", &ShapeParams::rigid)
        .def_readwrite("q", &ShapeParams::q)
        .def_property_readonly("dim", &ShapeParams::dim)
        .def("flatten", &ShapeParams::flatten)
        .def_static("unflatten", &ShapeParams::unflatten, py::arg("flat"));

    py::class_<PDMModel>(m, "PDMModel")
        .def_readonly("mean_shape", &PDMModel::mean_shape)
        .def_readonly("basis", &PDMModel::basis)
        .def_readonly("variances", &PDMModel::variances)
        .def_property_readonly("rank", &PDMModel::rank)
        .def_property_readonly("param_dim", &PDMModel::param_dim)
        .def("validate", &PDMModel::validate);

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("params", &FitResult::params)
        .def_readonly("residual", &FitResult::residual)
        .def_readonly("converged", &FitResult::converged)
        .def_readonly("iterations", &FitResult::iterations);

    m.def("build_pdm", &build_pdm, py::arg("shapes"), py::arg("m"));
    m.def("project", &project, py::arg("pdm"), py::arg("params"));
    m.def("fit", &fit, py::arg("pdm"), py::arg("observed"),
          py::arg("init") = std::nullopt, py::arg("lambda_") = 1e-4);
    m.def("neutral_params", &neutral_params, py::arg("pdm"));
    m.def("mean_reconstruction_error", &mean_reconstruction_error, py::arg("pdm"),
          py::arg("shapes"));
    m.def("canonical_mean_face", &canonical_mean_face);
    m.def("make_synthetic_pdm", &make_synthetic_pdm, py::arg("m"), py::arg("seed"));
    m.def("save_pdm", &save_pdm, py::arg("pdm"), py::arg("path"));
    m.def("load_pdm", &load_pdm, py::arg("path"));

    m.def("affect_class_name", &affect_class_name, py::arg("affect_class"));
    m.def("affect_argmax", &affect_argmax, py::arg("affect"));
    m.def("aggregate_affect", &aggregate_affect, py::arg("window"));

    py::class_<FrameLabel>(m, "FrameLabel")
        .def_readonly("affect", &FrameLabel::affect)
        .def_readonly("intensity", &FrameLabel::intensity);

    py::class_<DyadFrame>(m, "DyadFrame")
        .def(py::init<>())
        .def_readwrite("t", &DyadFrame::t)
        .def_readwrite("partner_affect", &DyadFrame::partner_affect)
        .def_readwrite("agent_shape", &DyadFrame::agent_shape);

    py::class_<DyadSequence>(m, "DyadSequence")
        .def(py::init<>())
        .def_readwrite("id", &DyadSequence::id)
        .def_readwrite("frames", &DyadSequence::frames)
        .def_readonly("labels", &DyadSequence::labels)
        .def("has_labels", &DyadSequence::has_labels);

    py::class_<CorpusConfig>(m, "CorpusConfig")
        .def(py::init<>())
        .def_readwrite("n_sequences", &CorpusConfig::n_sequences)
        .def_readwrite("seq_len", &CorpusConfig::seq_len)
        .def_readwrite("m", &CorpusConfig::m)
        .def_readwrite("n_intensity_levels", &CorpusConfig::n_intensity_levels)
        .def_readwrite("seed", &CorpusConfig::seed);

    py::class_<Corpus>(m, "Corpus")
        .def(py::init<>())
        .def_readwrite("config", &Corpus::config)
        .def_readwrite("sequences", &Corpus::sequences)
        .def_property_readonly("shape_dim", &Corpus::shape_dim)
        .def_property_readonly("frame_count", &Corpus::frame_count)
        .def("flattened_shapes", &Corpus::flattened_shapes);

    py::class_<SynthGroundTruth>(m, "SynthGroundTruth")
        .def_readonly("class_targets", &SynthGroundTruth::class_targets)
        .def_readonly("n_intensity_levels", &SynthGroundTruth::n_intensity_levels)
        .def_readonly("min_class_separation", &SynthGroundTruth::min_class_separation)
        .def_readonly("noise_sigma", &SynthGroundTruth::noise_sigma);

    py::class_<SynthResult>(m, "SynthResult")
        .def_readonly("pdm", &SynthResult::pdm)
        .def_readonly("corpus", &SynthResult::corpus)
        .def_readonly("truth", &SynthResult::truth);

    m.def("synth_corpus", &synth_corpus, py::arg("config"));
    m.def("save_corpus", &save_corpus, py::arg("corpus"), py::arg("pdm"), py::arg("dir"));
    m.def("load_corpus", &load_corpus, py::arg("dir"));
    m.def("load_corpus_pdm", &load_corpus_pdm, py::arg("dir"));
    m.def("save_sequence_file", &save_sequence_file, py::arg("sequence"), py::arg("dim"),
          py::arg("path"));
    m.def("load_sequence_file", &load_sequence_file, py::arg("path"), py::arg("expected_dim"));

    py::class_<Standardizer>(m, "Standardizer")
        .def_static("fit", &Standardizer::fit, py::arg("points"))
        .def_readonly("mean", &Standardizer::mean)
        .def_readonly("std_dev", &Standardizer::std_dev)
        .def("apply", &Standardizer::apply, py::arg("v"))
        .def("invert", &Standardizer::invert, py::arg("v"));

    py::class_<KMeansResult>(m, "KMeansResult")
        .def_readonly("assignments", &KMeansResult::assignments)
        .def_readonly("centroids", &KMeansResult::centroids)
        .def_readonly("wcss", &KMeansResult::wcss)
        .def_readonly("iterations", &KMeansResult::iterations);

    m.def("kmeans", &kmeans, py::arg("points"), py::arg("k"), py::arg("seed"));

    py::class_<SubCluster>(m, "SubCluster")
        .def_readonly("members", &SubCluster::members)
        .def_readonly("centroid", &SubCluster::centroid)
        .def_readonly("below_min_size", &SubCluster::below_min_size)
        .def_property_readonly("size", &SubCluster::size);

    py::class_<AgglomerateResult>(m, "AgglomerateResult")
        .def_readonly("subclusters", &AgglomerateResult::subclusters)
        .def_readonly("assignment", &AgglomerateResult::assignment);

    m.def("agglomerate", &agglomerate, py::arg("members"), py::arg("min_size"),
          py::arg("max_k") = 9, py::arg("min_k") = 3);

    py::class_<AffectCluster>(m, "AffectCluster")
        .def_readonly("class_id", &AffectCluster::class_id)
        .def_readonly("subclusters", &AffectCluster::subclusters)
        .def_readonly("centroid", &AffectCluster::centroid)
        .def_property_readonly("member_count", &AffectCluster::member_count);

    py::class_<DictionaryConfig>(m, "DictionaryConfig")
        .def(py::init<>())
        .def_readwrite("min_size", &DictionaryConfig::min_size)
        .def_readwrite("seed", &DictionaryConfig::seed)
        .def_readwrite("label_window", &DictionaryConfig::label_window);

    py::class_<AffectShapeDictionary>(m, "AffectShapeDictionary")
        .def_readonly("clusters", &AffectShapeDictionary::clusters)
        .def_readonly("standardization", &AffectShapeDictionary::standardization)
        .def_readonly("config", &AffectShapeDictionary::config)
        .def_readonly("dim", &AffectShapeDictionary::dim)
        .def_property_readonly("member_count", &AffectShapeDictionary::member_count);

    py::class_<DictionaryBuildResult>(m, "DictionaryBuildResult")
        .def_readonly("dictionary", &DictionaryBuildResult::dictionary)
        .def_readonly("frame_class", &DictionaryBuildResult::frame_class)
        .def_readonly("frame_subcluster", &DictionaryBuildResult::frame_subcluster);

    m.def("build_dictionary", &build_dictionary, py::arg("corpus"), py::arg("config"));
    m.def(
        "sample_z",
        [](const AffectShapeDictionary& dict, const AffectVector& affect,
           const std::optional<Eigen::VectorXd>& prev_z, Rng& rng, int top_k) {
            return sample_z(dict, affect, prev_z ? &*prev_z : nullptr, rng, top_k);
        },
        py::arg("dictionary"), py::arg("affect"), py::arg("prev_z"), py::arg("rng"),
        py::arg("top_k") = 5);
    m.def("save_dictionary", &save_dictionary, py::arg("dictionary"), py::arg("path"));
    m.def("load_dictionary", &load_dictionary, py::arg("path"));

    py::enum_<GenerationMode>(m, "GenerationMode")
        .value("overlap", GenerationMode::Overlap)
        .value("nonoverlap", GenerationMode::NonOverlap);

    py::class_<CLstmConfig>(m, "CLstmConfig")
        .def(py::init<>())
        .def_readwrite("input_dim", &CLstmConfig::input_dim)
        .def_readwrite("hidden_dim", &CLstmConfig::hidden_dim)
        .def_readwrite("output_dim", &CLstmConfig::output_dim)
        .def_readwrite("window", &CLstmConfig::window)
        .def_readwrite("learning_rate", &CLstmConfig::learning_rate)
        .def_readwrite("grad_clip", &CLstmConfig::grad_clip)
        .def_readwrite("epochs", &CLstmConfig::epochs)
        .def_readwrite("seed", &CLstmConfig::seed)
        .def_readwrite("aggregate_affect", &CLstmConfig::aggregate_affect);

    py::class_<CLstmModel>(m, "CLstmModel")
        .def_static("init", &CLstmModel::init, py::arg("config"))
        .def_readonly("config", &CLstmModel::config)
        .def_readonly("standardizer", &CLstmModel::standardizer)
        .def_property_readonly("n_params", &CLstmModel::n_params)
        .def("pack", &CLstmModel::pack)
        .def("unpack", &CLstmModel::unpack, py::arg("flat"));

    py::class_<TrainReport>(m, "TrainReport")
        .def_readonly("epoch_loss", &TrainReport::epoch_loss)
        .def_readonly("windows_per_epoch", &TrainReport::windows_per_epoch);

    m.def(
        "lstm_forward",
        [](const CLstmModel& model, const std::vector<Eigen::VectorXd>& inputs) {
            return forward(model, inputs);
        },
        py::arg("model"), py::arg("inputs"));
    m.def("train_clstm", &train, py::arg("model"), py::arg("corpus"), py::arg("config"),
          py::arg("standardizer"));
    m.def(
        "generate_clstm",
        [](const CLstmModel& model, const std::vector<DyadFrame>& history,
           const std::vector<AffectVector>& affect_stream, int steps, GenerationMode mode) {
            return generate(model, history, affect_stream, steps, mode);
        },
        py::arg("model"), py::arg("history"), py::arg("affect_stream"), py::arg("steps"),
        py::arg("mode"));
    m.def("save_clstm", &save_clstm, py::arg("model"), py::arg("path"));
    m.def("load_clstm", &load_clstm, py::arg("path"));

    py::class_<CGanConfig>(m, "CGanConfig")
        .def(py::init<>())
        .def_readwrite("data_dim", &CGanConfig::data_dim)
        .def_readwrite("z_dim", &CGanConfig::z_dim)
        .def_readwrite("hidden", &CGanConfig::hidden)
        .def_readwrite("learning_rate", &CGanConfig::learning_rate)
        .def_readwrite("beta1", &CGanConfig::beta1)
        .def_readwrite("beta2", &CGanConfig::beta2)
        .def_readwrite("adam_eps_d", &CGanConfig::adam_eps_d)
        .def_readwrite("adam_eps_g", &CGanConfig::adam_eps_g)
        .def_readwrite("batch_size", &CGanConfig::batch_size)
        .def_readwrite("seed", &CGanConfig::seed);

    py::class_<ConditionedSample>(m, "ConditionedSample")
        .def(py::init<>())
        .def_readwrite("affect", &ConditionedSample::affect)
        .def_readwrite("shape", &ConditionedSample::shape);

    py::class_<StepLosses>(m, "StepLosses")
        .def_readonly("d", &StepLosses::d)
        .def_readonly("g", &StepLosses::g);

    py::class_<CGanModel>(m, "CGanModel")
        .def_static("init", &CGanModel::init, py::arg("config"))
        .def_readonly("config", &CGanModel::config)
        .def_readwrite("standardizer", &CGanModel::standardizer)
        .def_readonly("d_updates", &CGanModel::d_updates)
        .def_readonly("g_updates", &CGanModel::g_updates)
        .def_readonly("steps", &CGanModel::steps);

    m.def("d_loss", &d_loss, py::arg("model"), py::arg("batch"), py::arg("z_batch"));
    m.def("g_loss", &g_loss, py::arg("model"), py::arg("x_batch"), py::arg("z_batch"));
    m.def(
        "train_step",
        [](CGanModel& model, const std::vector<ConditionedSample>& batch, Rng& rng) {
            return train_step(model, batch, rng);
        },
        py::arg("model"), py::arg("real_batch"), py::arg("rng"));
    m.def(
        "generate_cgan",
        [](const CGanModel& model, const AffectVector& affect, int count, Rng& rng,
           const std::optional<Eigen::VectorXd>& z) {
            return generate(model, affect, count, rng, z);
        },
        py::arg("model"), py::arg("affect"), py::arg("count"), py::arg("rng"),
        py::arg("z") = std::nullopt);
    m.def("save_cgan", &save_cgan, py::arg("model"), py::arg("path"));
    m.def("load_cgan", &load_cgan, py::arg("path"));

    py::class_<Topology>(m, "Topology")
        .def_static("ibug68", &Topology::ibug68)
        .def_readwrite("edges", &Topology::edges)
        .def("validate", &Topology::validate);

    py::class_<RasterFrame>(m, "RasterFrame")
        .def_readonly("width", &RasterFrame::width)
        .def_readonly("height", &RasterFrame::height)
        .def("to_numpy", &raster_to_numpy);

    m.def("render", &render, py::arg("landmarks"), py::arg("topology"), py::arg("width"),
          py::arg("height"));
    m.def("render_sequence", &render_sequence, py::arg("sequence"), py::arg("pdm"),
          py::arg("topology"), py::arg("width"), py::arg("height"));
    m.def("frame_hash", &frame_hash, py::arg("frame"));
    m.def("export_pgm", &export_pgm, py::arg("frames"), py::arg("dir"));
    m.def("export_svg", &export_svg, py::arg("frames"), py::arg("topology"), py::arg("width"),
          py::arg("height"), py::arg("path"));

    py::class_<SmoothnessStats>(m, "SmoothnessStats")
        .def_readonly("mean_disp", &SmoothnessStats::mean_disp)
        .def_readonly("max_disp", &SmoothnessStats::max_disp)
        .def_readonly("pixel_mean", &SmoothnessStats::pixel_mean)
        .def_readonly("pixel_max", &SmoothnessStats::pixel_max);

    py::class_<ModeComparison>(m, "ModeComparison")
        .def_readonly("mse_overlap", &ModeComparison::mse_overlap)
        .def_readonly("mse_nonoverlap", &ModeComparison::mse_nonoverlap)
        .def_readonly("overlap_better", &ModeComparison::overlap_better)
        .def_readonly("sec_per_frame_overlap", &ModeComparison::sec_per_frame_overlap)
        .def_readonly("sec_per_frame_nonoverlap", &ModeComparison::sec_per_frame_nonoverlap)
        .def_readonly("sequences", &ModeComparison::sequences)
        .def_readonly("frames", &ModeComparison::frames);

    py::class_<ClusterRecovery>(m, "ClusterRecovery")
        .def_readonly("ari", &ClusterRecovery::ari)
        .def_readonly("purity", &ClusterRecovery::purity)
        .def_readonly("subcluster_counts", &ClusterRecovery::subcluster_counts)
        .def_readonly("min_purity", &ClusterRecovery::min_purity);

    m.def("mse", &mse, py::arg("generated"), py::arg("truth"));
    m.def("smoothness", &smoothness, py::arg("sequence"), py::arg("pdm"), py::arg("standardizer"));
    m.def("adjusted_rand_index", &adjusted_rand_index, py::arg("a"), py::arg("b"));
    m.def("compare_modes", &compare_modes, py::arg("model"), py::arg("test_corpus"));
    m.def("cluster_recovery", &cluster_recovery, py::arg("build"), py::arg("labeled_corpus"));
}
