#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dyadgen/corpus.hpp"
#include "dyadgen/stats.hpp"

namespace dyadgen {

struct CLstmConfig {
    int input_dim = 8 + 16;  // affect + flattened shape
    int hidden_dim = 64;
    int output_dim = 16;
    int window = 100;  // n
    double learning_rate = 1e-3;
    double grad_clip = 5.0;
    int epochs = 20;
    std::uint64_t seed = 1;
    bool aggregate_affect = false;  // feed the window-mean affect instead of per-frame
};

// Sliding one-step-ahead generation vs block free-running generation.
enum class GenerationMode { Overlap, NonOverlap };

// Single-layer LSTM with a linear read-out; trained on standardized shape
// parameters. Immutable during generation; training mutates in place.
struct CLstmModel {
    CLstmConfig config;
    Standardizer standardizer;  // applied to the shape part of inputs/outputs

    Eigen::MatrixXd w_i, w_f, w_o, w_g;  // hidden x input
    Eigen::MatrixXd u_i, u_f, u_o, u_g;  // hidden x hidden
    Eigen::VectorXd b_i, b_f, b_o, b_g;  // hidden
    Eigen::MatrixXd v;                   // output x hidden
    Eigen::VectorXd c;                   // output

    // Uniform +-1/sqrt(hidden) weights, forget bias 1.0, other biases 0.
    static CLstmModel init(const CLstmConfig& cfg);

    int n_params() const;
    Eigen::VectorXd pack() const;
    void unpack(const Eigen::VectorXd& flat);
};

struct CLstmGrads {
    Eigen::MatrixXd w_i, w_f, w_o, w_g, u_i, u_f, u_o, u_g;
    Eigen::VectorXd b_i, b_f, b_o, b_g;
    Eigen::MatrixXd v;
    Eigen::VectorXd c;

    Eigen::VectorXd pack() const;
};

struct LstmState {
    Eigen::VectorXd h, c;
};

// Standard LSTM recurrence (sigmoid gates, tanh candidate), y_t = V h_t + c.
std::vector<Eigen::VectorXd> forward(const CLstmModel& model,
                                     const std::vector<Eigen::VectorXd>& inputs,
                                     LstmState* state = nullptr);

// Exact BPTT gradients of the mean squared error over the sequence
// (mean across time steps and output dimensions). Returns the loss.
double bptt_gradients(const CLstmModel& model, const std::vector<Eigen::VectorXd>& inputs,
                      const std::vector<Eigen::VectorXd>& targets, CLstmGrads& grads);

struct TrainReport {
    std::vector<double> epoch_loss;  // mean training loss per epoch
    int windows_per_epoch = 0;
};

// Teacher-forced Adam training (beta1 0.9, beta2 0.999, eps 1e-8) with
// global-norm gradient clipping over non-overlapping length-n windows.
// Deterministic given cfg.seed.
TrainReport train(CLstmModel& model, const Corpus& corpus, const CLstmConfig& cfg,
                  const Standardizer& standardizer);

// Closed-loop generation. Overlap: the n-frame window is re-encoded from a
// fresh state each step and slides FIFO with the generated frame appended.
// NonOverlap: the window is consumed once per block, the model free-runs for
// the rest of the block, and the generated block becomes the next window.
// affect_stream supplies the conditioning affect for every generated frame.
std::vector<ShapeParams> generate(const CLstmModel& model, const std::vector<DyadFrame>& history,
                                  const std::vector<AffectVector>& affect_stream, int steps,
                                  GenerationMode mode);

// Versioned text format "CLSTM v1"; exact round-trip.
void save_clstm(const CLstmModel& model, const std::string& path);
CLstmModel load_clstm(const std::string& path);

}  // namespace dyadgen
