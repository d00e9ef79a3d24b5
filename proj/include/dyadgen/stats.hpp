#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dyadgen/error.hpp"

namespace dyadgen {

// Per-dimension (mean, std) transform shared by clustering, sequence training
// and evaluation so that all of them measure distances in the same units.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd std_dev;

    // Population std per dimension. Throws on any zero-variance dimension.
    static Standardizer fit(const std::vector<Eigen::VectorXd>& points);

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    Eigen::VectorXd invert(const Eigen::VectorXd& v) const;
    int dim() const { return static_cast<int>(mean.size()); }
};

inline Standardizer Standardizer::fit(const std::vector<Eigen::VectorXd>& points) {
    if (points.empty()) throw DataError("cannot standardize an empty point set");
    const int d = static_cast<int>(points.front().size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& p : points) {
        if (p.size() != d) throw DataError("inconsistent point dimensions");
        mean += p;
    }
    mean /= static_cast<double>(points.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (const auto& p : points) var += (p - mean).cwiseAbs2();
    var /= static_cast<double>(points.size());
    Standardizer s;
    s.mean = mean;
    s.std_dev = var.cwiseSqrt();
    for (int j = 0; j < d; ++j)
        if (!(s.std_dev[j] > 0.0))
            throw DataError("zero variance in dimension " + std::to_string(j) +
                            "; cannot standardize");
    return s;
}

inline Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& v) const {
    return (v - mean).cwiseQuotient(std_dev);
}

inline Eigen::VectorXd Standardizer::invert(const Eigen::VectorXd& v) const {
    return v.cwiseProduct(std_dev) + mean;
}

}  // namespace dyadgen
