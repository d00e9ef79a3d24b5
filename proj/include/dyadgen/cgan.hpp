#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dyadgen/corpus.hpp"
#include "dyadgen/rng.hpp"
#include "dyadgen/stats.hpp"

namespace dyadgen {

// Fully-connected net: leaky-rectifier (slope 0.2) hidden layers, identity or
// sigmoid output. Small enough that samples are processed one at a time.
struct MlpNet {
    std::vector<Eigen::MatrixXd> weights;  // out x in per layer
    std::vector<Eigen::VectorXd> biases;
    bool sigmoid_output = false;

    static MlpNet init(const std::vector<int>& layer_sizes, bool sigmoid_output, Rng& rng);

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
    int input_dim() const { return static_cast<int>(weights.front().cols()); }
    int output_dim() const { return static_cast<int>(weights.back().rows()); }
    int n_params() const;
    Eigen::VectorXd pack() const;
    void unpack(const Eigen::VectorXd& flat);

    // Backprop from dL/d(output) — or, when `d_out_is_preactivation`, from
    // dL/d(final pre-activation), which keeps log-sigmoid losses numerically
    // exact in saturation. Accumulates into grad_flat (packed layout) and
    // returns dL/d(input).
    Eigen::VectorXd backward(const Eigen::VectorXd& x, const Eigen::VectorXd& d_out,
                             Eigen::VectorXd& grad_flat, bool d_out_is_preactivation = false) const;
};

struct CGanConfig {
    int data_dim = 16;  // d: flattened shape dimension
    int z_dim = 16;     // defaults to d
    int hidden = 64;    // two hidden layers of this width in both nets
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    // Large epsilon makes updates SGD-like near equilibrium, damping the
    // two-player orbit once losses settle; the generator runs on a larger
    // epsilon than the discriminator so the boundary settles first.
    double adam_eps_d = 1e-4;
    double adam_eps_g = 3e-2;
    int batch_size = 64;
    std::uint64_t seed = 1;
};

// Generator (affect, z) -> shape vector; discriminator (affect, shape) -> (0,1).
// Both nets operate on standardized shape vectors; the transform rides along.
struct CGanModel {
    CGanConfig config;
    MlpNet g, d;
    Standardizer standardizer;  // identity until trained on a corpus
    long d_updates = 0;
    long g_updates = 0;
    long steps = 0;

    // Adam moments, reset when a checkpoint is loaded.
    Eigen::VectorXd adam_m_d, adam_v_d, adam_m_g, adam_v_g;

    static CGanModel init(const CGanConfig& cfg);
};

// Draws the latent vector for a conditioning affect; the default is a
// standard gaussian, and the dictionary module can stand in behind the same
// signature.
using ZSource = std::function<Eigen::VectorXd(const AffectVector&, Rng&)>;
ZSource gaussian_z_source(int z_dim);

struct ConditionedSample {
    AffectVector affect;
    Eigen::VectorXd shape;  // d-vector
};

// Discriminator objective, minimized form:
//   -mean[log D(x, y) + log(1 - D(x, G(x, z)))]
// with D outputs clamped to [1e-7, 1-1e-7] before the logs.
double d_loss(const CGanModel& model, const std::vector<ConditionedSample>& batch,
              const std::vector<Eigen::VectorXd>& z_batch);

// Non-saturating generator objective: -mean[log D(x, G(x, z))].
double g_loss(const CGanModel& model, const std::vector<AffectVector>& x_batch,
              const std::vector<Eigen::VectorXd>& z_batch);

// Same losses with gradients w.r.t. the respective net's packed parameters.
double d_loss_grad(const CGanModel& model, const std::vector<ConditionedSample>& batch,
                   const std::vector<Eigen::VectorXd>& z_batch, Eigen::VectorXd& grad_d);
double g_loss_grad(const CGanModel& model, const std::vector<AffectVector>& x_batch,
                   const std::vector<Eigen::VectorXd>& z_batch, Eigen::VectorXd& grad_g);

struct StepLosses {
    double d = 0.0;
    double g = 0.0;
};

// One Adam update of D followed by two Adam updates of G (fresh z each).
StepLosses train_step(CGanModel& model, const std::vector<ConditionedSample>& real_batch, Rng& rng,
                      const ZSource& z_source = {});

// count draws of G(affect || z_i); a supplied z pins every draw.
std::vector<Eigen::VectorXd> generate(const CGanModel& model, const AffectVector& affect, int count,
                                      Rng& rng, const std::optional<Eigen::VectorXd>& z = std::nullopt,
                                      const ZSource& z_source = {});

// Versioned text format "CGAN v1" (weights only; optimizer state resets).
void save_cgan(const CGanModel& model, const std::string& path);
CGanModel load_cgan(const std::string& path);

}  // namespace dyadgen
