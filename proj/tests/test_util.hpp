#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "dyadgen/pdm.hpp"
#include "dyadgen/rng.hpp"

namespace dyadgen::test {

// Scratch directory removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("dyadgen_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// In-range draw per the round-trip contract: |q_j| <= 2 sqrt(var_j),
// |angles| <= 0.5 rad, moderate scale and translation.
inline ShapeParams random_in_range_params(const PDMModel& pdm, Rng& rng) {
    ShapeParams p;
    p.rigid.scale = rng.uniform(0.85, 1.2);
    p.rigid.pitch = rng.uniform(-0.5, 0.5);
    p.rigid.yaw = rng.uniform(-0.5, 0.5);
    p.rigid.roll = rng.uniform(-0.5, 0.5);
    p.rigid.tx = rng.uniform(-30.0, 30.0);
    p.rigid.ty = rng.uniform(-30.0, 30.0);
    p.q.resize(pdm.rank());
    for (int j = 0; j < pdm.rank(); ++j) {
        const double lim = 2.0 * std::sqrt(pdm.variances[j]);
        p.q[j] = rng.uniform(-lim, lim);
    }
    return p;
}

// Central finite differences of a scalar function of a flat parameter vector.
inline Eigen::VectorXd finite_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& theta,
    double eps = 1e-5) {
    Eigen::VectorXd grad(theta.size());
    Eigen::VectorXd probe = theta;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        probe[i] = theta[i] + eps;
        const double hi = f(probe);
        probe[i] = theta[i] - eps;
        const double lo = f(probe);
        probe[i] = theta[i];
        grad[i] = (hi - lo) / (2.0 * eps);
    }
    return grad;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                 double floor = 1e-6) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace dyadgen::test
