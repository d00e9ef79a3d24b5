#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "dyadgen/error.hpp"

namespace dyadgen {

inline constexpr int kLandmarkCount = 68;

// iBUG-68 ordering: jaw 0-16, right brow 17-21, left brow 22-26,
// nose bridge 27-30, nostrils 31-35, right eye 36-41, left eye 42-47,
// outer lip 48-59, inner lip 60-67.
using Landmarks2D = Eigen::Matrix<double, kLandmarkCount, 2>;  // pixel units
using Landmarks3D = Eigen::Matrix<double, kLandmarkCount, 3>;  // model units

// Head pose: similarity transform of the model frame into the image.
struct RigidParams {
    double scale = 1.0;
    double pitch = 0.0;  // about x, radians
    double yaw = 0.0;    // about y
    double roll = 0.0;   // about z
    double tx = 0.0;     // pixels
    double ty = 0.0;
};

// Full shape state: rigid pose + non-rigid deformation coefficients.
// Flattened layout is fixed as (scale, pitch, yaw, roll, tx, ty, q_1..q_m).
struct ShapeParams {
    RigidParams rigid;
    Eigen::VectorXd q;  // length m

    int dim() const { return 6 + static_cast<int>(q.size()); }
    Eigen::VectorXd flatten() const;
    static ShapeParams unflatten(const Eigen::VectorXd& v);
};

inline constexpr int kRigidDim = 6;

// Statistical shape model: mean 3D landmarks + orthonormal deformation basis.
// Immutable after construction; safe for concurrent reads.
struct PDMModel {
    Landmarks3D mean_shape;
    Eigen::MatrixXd basis;      // 204 x m, columns orthonormal
    Eigen::VectorXd variances;  // m, descending, > 0 (population convention)

    int rank() const { return static_cast<int>(basis.cols()); }
    int param_dim() const { return kRigidDim + rank(); }

    // Throws NumericalError when orthonormality (1e-8) or variance order is broken.
    void validate() const;
};

struct FitResult {
    ShapeParams params;
    double residual = 0.0;  // final objective value
    bool converged = false;
    int iterations = 0;
};

// Intrinsic pitch->yaw->roll rotation; R2D = first two rows (weak perspective).
Eigen::Matrix3d rotation_from_euler(double pitch, double yaw, double roll);

// Project shape parameters to 2D landmarks:
//   x_i = s * R2D * (mean_i + Phi_i * q) + t
Landmarks2D project(const PDMModel& pdm, const ShapeParams& params);

// Gauss-Newton fit (Levenberg damping) of the projection to observed landmarks,
// minimizing sum_i |project_i - observed_i|^2 + lambda * sum_j q_j^2 / variance_j.
// Stops when the step norm drops below 1e-9 or after 100 iterations; a
// non-converged fit still returns the best parameters found, flagged.
FitResult fit(const PDMModel& pdm, const Landmarks2D& observed,
              const std::optional<ShapeParams>& init = std::nullopt, double lambda = 1e-4);

// s=1, angles=0, t=0, q=0.
ShapeParams neutral_params(const PDMModel& pdm);

// Generalized Procrustes alignment (similarity transforms, mean convergence
// 1e-8) followed by PCA. Requires at least m+1 shapes and nonzero variance.
PDMModel build_pdm(const std::vector<Landmarks3D>& shapes, int m);

// Mean squared 3D reconstruction error of `shapes` Procrustes-aligned to the
// model mean and projected onto the basis. Non-increasing in basis rank.
double mean_reconstruction_error(const PDMModel& pdm, const std::vector<Landmarks3D>& shapes);

// Similarity-align `shape` to `target` (rotation, scale, translation).
Landmarks3D procrustes_align(const Landmarks3D& shape, const Landmarks3D& target);

// Fixed 68-point face layout spanning roughly [48,208]x[40,216] in x,y;
// deterministic constants, used as the synthetic model's mean shape.
Landmarks3D canonical_mean_face();

// Versioned text format "PDM v1"; 17-significant-digit reals, exact round-trip.
void save_pdm(const PDMModel& pdm, const std::string& path);
PDMModel load_pdm(const std::string& path);

}  // namespace dyadgen
