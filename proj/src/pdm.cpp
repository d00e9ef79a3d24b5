#include "dyadgen/pdm.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

#include "dyadgen/io_text.hpp"

namespace dyadgen {

namespace {

constexpr int kFlatDim3 = 3 * kLandmarkCount;  // 204

// Landmark i occupies flat rows 3i..3i+2 as (x, y, z).
Eigen::VectorXd vec3(const Landmarks3D& s) {
    Eigen::VectorXd v(kFlatDim3);
    for (int i = 0; i < kLandmarkCount; ++i) v.segment<3>(3 * i) = s.row(i).transpose();
    return v;
}

Landmarks3D unvec3(const Eigen::VectorXd& v) {
    Landmarks3D s;
    for (int i = 0; i < kLandmarkCount; ++i) s.row(i) = v.segment<3>(3 * i).transpose();
    return s;
}

double wrap_angle(double a) {
    // into (-pi, pi]
    a = std::fmod(a, 2.0 * M_PI);
    if (a <= -M_PI) a += 2.0 * M_PI;
    if (a > M_PI) a -= 2.0 * M_PI;
    return a;
}

Eigen::Matrix3d rot_x(double a) {
    Eigen::Matrix3d r;
    r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    return r;
}

Eigen::Matrix3d rot_y(double a) {
    Eigen::Matrix3d r;
    r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
    return r;
}

Eigen::Matrix3d rot_z(double a) {
    Eigen::Matrix3d r;
    r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return r;
}

Eigen::Matrix3d drot_x(double a) {
    Eigen::Matrix3d r;
    r << 0, 0, 0, 0, -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a);
    return r;
}

Eigen::Matrix3d drot_y(double a) {
    Eigen::Matrix3d r;
    r << -std::sin(a), 0, std::cos(a), 0, 0, 0, -std::cos(a), 0, -std::sin(a);
    return r;
}

Eigen::Matrix3d drot_z(double a) {
    Eigen::Matrix3d r;
    r << -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a), 0, 0, 0, 0;
    return r;
}

// Deterministic sign: largest-magnitude entry of each basis column positive.
void fix_basis_signs(Eigen::MatrixXd& basis) {
    for (int j = 0; j < basis.cols(); ++j) {
        int imax = 0;
        basis.col(j).cwiseAbs().maxCoeff(&imax);
        if (basis(imax, j) < 0.0) basis.col(j) = -basis.col(j);
    }
}

}  // namespace

Eigen::VectorXd ShapeParams::flatten() const {
    Eigen::VectorXd v(dim());
    v[0] = rigid.scale;
    v[1] = rigid.pitch;
    v[2] = rigid.yaw;
    v[3] = rigid.roll;
    v[4] = rigid.tx;
    v[5] = rigid.ty;
    v.tail(q.size()) = q;
    return v;
}

ShapeParams ShapeParams::unflatten(const Eigen::VectorXd& v) {
    if (v.size() < kRigidDim) throw DataError("flattened shape vector shorter than 6");
    ShapeParams p;
    p.rigid.scale = v[0];
    p.rigid.pitch = v[1];
    p.rigid.yaw = v[2];
    p.rigid.roll = v[3];
    p.rigid.tx = v[4];
    p.rigid.ty = v[5];
    p.q = v.tail(v.size() - kRigidDim);
    return p;
}

void PDMModel::validate() const {
    const int m = rank();
    if (m < 1) throw NumericalError("PDM basis is empty");
    if (basis.rows() != kFlatDim3) throw NumericalError("PDM basis must have 204 rows");
    if (variances.size() != m) throw NumericalError("PDM variance count != basis rank");
    if (!mean_shape.allFinite() || !basis.allFinite()) throw NumericalError("PDM has non-finite entries");
    const Eigen::MatrixXd gram = basis.transpose() * basis;
    const double dev = (gram - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
    if (dev > 1e-8) throw NumericalError("PDM basis not orthonormal (deviation " + g17(dev) + ")");
    for (int j = 0; j < m; ++j) {
        if (!(variances[j] > 0.0)) throw NumericalError("PDM variance " + std::to_string(j) + " not positive");
        if (j > 0 && variances[j] > variances[j - 1]) throw NumericalError("PDM variances not descending");
    }
}

Eigen::Matrix3d rotation_from_euler(double pitch, double yaw, double roll) {
    return rot_x(pitch) * rot_y(yaw) * rot_z(roll);
}

Landmarks2D project(const PDMModel& pdm, const ShapeParams& params) {
    if (static_cast<int>(params.q.size()) != pdm.rank())
        throw DataError("shape parameter dimension " + std::to_string(params.q.size()) +
                        " does not match PDM rank " + std::to_string(pdm.rank()));
    const Eigen::Matrix3d rot = rotation_from_euler(params.rigid.pitch, params.rigid.yaw, params.rigid.roll);
    const Eigen::VectorXd deform = pdm.basis * params.q;
    Landmarks2D out;
    for (int i = 0; i < kLandmarkCount; ++i) {
        const Eigen::Vector3d p = pdm.mean_shape.row(i).transpose() + deform.segment<3>(3 * i);
        const Eigen::Vector3d w = rot * p;
        out(i, 0) = params.rigid.scale * w[0] + params.rigid.tx;
        out(i, 1) = params.rigid.scale * w[1] + params.rigid.ty;
    }
    return out;
}

ShapeParams neutral_params(const PDMModel& pdm) {
    ShapeParams p;
    p.q = Eigen::VectorXd::Zero(pdm.rank());
    return p;
}

FitResult fit(const PDMModel& pdm, const Landmarks2D& observed, const std::optional<ShapeParams>& init,
              double lambda) {
    if (!observed.allFinite()) throw DataError("observed landmarks contain non-finite values");
    pdm.validate();

    const int m = pdm.rank();
    const int n_res = 2 * kLandmarkCount + m;
    const int n_par = kRigidDim + m;

    const Eigen::VectorXd reg_w = (lambda * pdm.variances.cwiseInverse()).cwiseSqrt();

    Eigen::VectorXd theta;
    if (init) {
        theta = init->flatten();
        if (theta.size() != n_par) throw DataError("init parameter dimension mismatch");
    } else {
        // Default start: neutral pose with (q, t) from the linear least-squares
        // problem the projection reduces to at s=1, R=I. Large deformations are
        // then already captured before the joint refinement.
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * kLandmarkCount, m + 2);
        Eigen::VectorXd b(2 * kLandmarkCount);
        for (int i = 0; i < kLandmarkCount; ++i) {
            a.block(2 * i, 0, 1, m) = pdm.basis.row(3 * i);
            a.block(2 * i + 1, 0, 1, m) = pdm.basis.row(3 * i + 1);
            a(2 * i, m) = 1.0;
            a(2 * i + 1, m + 1) = 1.0;
            b[2 * i] = observed(i, 0) - pdm.mean_shape(i, 0);
            b[2 * i + 1] = observed(i, 1) - pdm.mean_shape(i, 1);
        }
        Eigen::MatrixXd normal = a.transpose() * a;
        normal.diagonal().head(m) += reg_w.cwiseAbs2();
        const Eigen::VectorXd sol = normal.ldlt().solve(a.transpose() * b);
        ShapeParams start = neutral_params(pdm);
        start.q = sol.head(m);
        start.rigid.tx = sol[m];
        start.rigid.ty = sol[m + 1];
        theta = start.flatten();
    }

    auto residual_of = [&](const Eigen::VectorXd& t) {
        const ShapeParams p = ShapeParams::unflatten(t);
        const Landmarks2D proj = project(pdm, p);
        Eigen::VectorXd r(n_res);
        for (int i = 0; i < kLandmarkCount; ++i) {
            r[2 * i] = proj(i, 0) - observed(i, 0);
            r[2 * i + 1] = proj(i, 1) - observed(i, 1);
        }
        r.tail(m) = reg_w.cwiseProduct(p.q);
        return r;
    };

    Eigen::VectorXd r = residual_of(theta);
    double obj = r.squaredNorm();

    FitResult best;
    best.params = ShapeParams::unflatten(theta);
    best.residual = obj;

    double mu = 1e-3;
    int iters = 0;
    for (; iters < 100; ++iters) {
        const ShapeParams p = ShapeParams::unflatten(theta);
        const double s = p.rigid.scale;
        const Eigen::Matrix3d rot = rotation_from_euler(p.rigid.pitch, p.rigid.yaw, p.rigid.roll);
        const Eigen::Matrix3d dpitch = drot_x(p.rigid.pitch) * rot_y(p.rigid.yaw) * rot_z(p.rigid.roll);
        const Eigen::Matrix3d dyaw = rot_x(p.rigid.pitch) * drot_y(p.rigid.yaw) * rot_z(p.rigid.roll);
        const Eigen::Matrix3d droll = rot_x(p.rigid.pitch) * rot_y(p.rigid.yaw) * drot_z(p.rigid.roll);
        const Eigen::VectorXd deform = pdm.basis * p.q;

        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n_res, n_par);
        for (int i = 0; i < kLandmarkCount; ++i) {
            const Eigen::Vector3d pt = pdm.mean_shape.row(i).transpose() + deform.segment<3>(3 * i);
            const Eigen::Vector3d w = rot * pt;
            const int rx = 2 * i, ry = 2 * i + 1;
            jac(rx, 0) = w[0];
            jac(ry, 0) = w[1];
            const Eigen::Vector3d dp = dpitch * pt, dy = dyaw * pt, dr = droll * pt;
            jac(rx, 1) = s * dp[0];
            jac(ry, 1) = s * dp[1];
            jac(rx, 2) = s * dy[0];
            jac(ry, 2) = s * dy[1];
            jac(rx, 3) = s * dr[0];
            jac(ry, 3) = s * dr[1];
            jac(rx, 4) = 1.0;
            jac(ry, 5) = 1.0;
            const Eigen::Matrix<double, 3, Eigen::Dynamic> rphi = rot * pdm.basis.middleRows(3 * i, 3);
            jac.block(rx, kRigidDim, 1, m) = s * rphi.row(0);
            jac.block(ry, kRigidDim, 1, m) = s * rphi.row(1);
        }
        for (int j = 0; j < m; ++j) jac(2 * kLandmarkCount + j, kRigidDim + j) = reg_w[j];

        const Eigen::MatrixXd hess = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * r;
        const Eigen::VectorXd diag_floor =
            hess.diagonal().cwiseMax(1e-12 * hess.diagonal().maxCoeff());

        // Convergence is judged on the undamped Gauss-Newton step so a large
        // damping term cannot masquerade as a fixpoint.
        {
            Eigen::MatrixXd probe = hess;
            probe.diagonal() += 1e-12 * diag_floor;
            if (probe.ldlt().solve(-grad).norm() < 1e-9) {
                best.params = ShapeParams::unflatten(theta);
                best.residual = obj;
                best.converged = true;
                break;
            }
        }

        // Marquardt-scaled damping: retry with larger mu until the step
        // decreases the objective. Scaling by the Hessian diagonal keeps the
        // damping meaningful across the very different parameter scales.
        bool accepted = false;
        while (mu < 1e12) {
            Eigen::MatrixXd damped = hess;
            damped.diagonal() += mu * diag_floor;
            const Eigen::VectorXd step = damped.ldlt().solve(-grad);
            const Eigen::VectorXd trial = theta + step;
            const Eigen::VectorXd r_trial = residual_of(trial);
            const double obj_trial = r_trial.squaredNorm();
            if (obj_trial < obj && r_trial.allFinite()) {
                theta = trial;
                r = r_trial;
                obj = obj_trial;
                mu = std::max(mu * 0.25, 1e-12);
                accepted = true;
                break;
            }
            mu *= 10.0;
        }
        if (!accepted) break;
        if (obj < best.residual) {
            best.params = ShapeParams::unflatten(theta);
            best.residual = obj;
        }
    }
    best.iterations = iters;
    best.params.rigid.pitch = wrap_angle(best.params.rigid.pitch);
    best.params.rigid.yaw = wrap_angle(best.params.rigid.yaw);
    best.params.rigid.roll = wrap_angle(best.params.rigid.roll);
    return best;
}

Landmarks3D procrustes_align(const Landmarks3D& shape, const Landmarks3D& target) {
    const Eigen::RowVector3d ca = shape.colwise().mean();
    const Eigen::RowVector3d cb = target.colwise().mean();
    const Landmarks3D a = shape.rowwise() - ca;
    const Landmarks3D b = target.rowwise() - cb;

    const Eigen::Matrix3d h = a.transpose() * b;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
    const Eigen::Matrix3d rot = svd.matrixV() * d * svd.matrixU().transpose();

    const double denom = a.squaredNorm();
    const double scale = denom > 0.0 ? (svd.singularValues().asDiagonal() * d).trace() / denom : 1.0;

    Landmarks3D out = scale * (a * rot.transpose());
    out.rowwise() += cb;
    return out;
}

PDMModel build_pdm(const std::vector<Landmarks3D>& shapes, int m) {
    if (m < 1) throw UsageError("PDM rank must be >= 1");
    const int n = static_cast<int>(shapes.size());
    if (n < m + 1) throw DataError("need at least m+1 = " + std::to_string(m + 1) + " shapes, got " +
                                   std::to_string(n));
    for (const auto& s : shapes)
        if (!s.allFinite()) throw DataError("input shape contains non-finite values");

    // Generalized Procrustes: align to the running mean, recenter, hold the
    // mean's norm at its initial value to pin the scale gauge.
    Landmarks3D mean = Landmarks3D::Zero();
    for (const auto& s : shapes) mean += s;
    mean /= static_cast<double>(n);
    mean.rowwise() -= mean.colwise().mean().eval();
    const double gauge_norm = mean.norm();
    if (gauge_norm <= 0.0) throw DataError("degenerate shape data: zero-size mean");

    std::vector<Landmarks3D> aligned(shapes.begin(), shapes.end());
    for (int iter = 0; iter < 200; ++iter) {
        for (int i = 0; i < n; ++i) aligned[i] = procrustes_align(shapes[i], mean);
        Landmarks3D next = Landmarks3D::Zero();
        for (const auto& s : aligned) next += s;
        next /= static_cast<double>(n);
        next.rowwise() -= next.colwise().mean().eval();
        const double norm = next.norm();
        if (norm <= 0.0) throw DataError("degenerate shape data: collapsed mean");
        next *= gauge_norm / norm;
        const double delta = (next - mean).norm();
        mean = next;
        if (delta < 1e-8) break;
    }
    for (int i = 0; i < n; ++i) aligned[i] = procrustes_align(shapes[i], mean);

    // PCA, population convention (divide by N).
    Eigen::VectorXd center = Eigen::VectorXd::Zero(kFlatDim3);
    Eigen::MatrixXd data(n, kFlatDim3);
    for (int i = 0; i < n; ++i) {
        data.row(i) = vec3(aligned[i]).transpose();
        center += data.row(i).transpose();
    }
    center /= static_cast<double>(n);
    data.rowwise() -= center.transpose();

    const Eigen::MatrixXd cov = data.transpose() * data / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericalError("PCA eigendecomposition failed");

    const double total = eig.eigenvalues().sum();
    if (total <= 1e-18 * (center.squaredNorm() + 1.0))
        throw DataError("degenerate shape data: zero total variance");

    PDMModel pdm;
    pdm.mean_shape = unvec3(center);
    pdm.basis.resize(kFlatDim3, m);
    pdm.variances.resize(m);
    const double floor_rel = 1e-12 * eig.eigenvalues().maxCoeff();
    for (int j = 0; j < m; ++j) {
        const int src = kFlatDim3 - 1 - j;  // solver orders ascending
        const double var = eig.eigenvalues()[src];
        if (var <= floor_rel)
            throw DataError("shape data rank " + std::to_string(j) + " is below requested m = " +
                            std::to_string(m) + " (zero variance direction)");
        pdm.basis.col(j) = eig.eigenvectors().col(src);
        pdm.variances[j] = var;
    }
    fix_basis_signs(pdm.basis);
    pdm.validate();
    return pdm;
}

double mean_reconstruction_error(const PDMModel& pdm, const std::vector<Landmarks3D>& shapes) {
    if (shapes.empty()) throw DataError("no shapes");
    const Eigen::VectorXd center = vec3(pdm.mean_shape);
    double acc = 0.0;
    for (const auto& s : shapes) {
        const Eigen::VectorXd x = vec3(procrustes_align(s, pdm.mean_shape)) - center;
        const Eigen::VectorXd r = x - pdm.basis * (pdm.basis.transpose() * x);
        acc += r.squaredNorm() / kLandmarkCount;
    }
    return acc / static_cast<double>(shapes.size());
}

Landmarks3D canonical_mean_face() {
    // Stylized frontal face in a 256x256 frame; literal constants so renders
    // hash identically everywhere.
    static const double table[kLandmarkCount * 3] = {
        48.000000, 96.000000, -10.000000, 49.537178, 119.410839, -13.901806,
        54.089637, 141.922012, -17.653669, 61.482431, 162.668428, -21.111405,
        71.431458, 180.852814, -24.142136, 83.554381, 195.776353, -26.629392,
        97.385325, 206.865544, -28.477591, 112.392774, 213.694234, -29.615706,
        128.000000, 216.000000, -30.000000, 143.607226, 213.694234, -29.615706,
        158.614675, 206.865544, -28.477591, 172.445619, 195.776353, -26.629392,
        184.568542, 180.852814, -24.142136, 194.517569, 162.668428, -21.111405,
        201.910363, 141.922012, -17.653669, 206.462822, 119.410839, -13.901806,
        208.000000, 96.000000, -10.000000, 60.000000, 90.000000, 18.000000,
        73.000000, 82.000000, 18.000000, 86.000000, 79.000000, 18.000000,
        99.000000, 82.000000, 18.000000, 112.000000, 88.000000, 18.000000,
        196.000000, 90.000000, 18.000000, 183.000000, 82.000000, 18.000000,
        170.000000, 79.000000, 18.000000, 157.000000, 82.000000, 18.000000,
        144.000000, 88.000000, 18.000000, 128.000000, 98.000000, 22.000000,
        128.000000, 112.000000, 27.000000, 128.000000, 126.000000, 32.000000,
        128.000000, 140.000000, 37.000000, 112.000000, 150.000000, 24.000000,
        120.000000, 153.000000, 27.000000, 128.000000, 155.000000, 29.000000,
        136.000000, 153.000000, 27.000000, 144.000000, 150.000000, 24.000000,
        72.000000, 104.000000, 12.000000, 82.000000, 97.000000, 12.000000,
        96.000000, 97.000000, 12.000000, 104.000000, 104.000000, 12.000000,
        96.000000, 111.000000, 12.000000, 82.000000, 111.000000, 12.000000,
        152.000000, 104.000000, 12.000000, 160.000000, 97.000000, 12.000000,
        174.000000, 97.000000, 12.000000, 184.000000, 104.000000, 12.000000,
        174.000000, 111.000000, 12.000000, 160.000000, 111.000000, 12.000000,
        96.000000, 176.000000, 12.000000, 106.000000, 168.000000, 15.000000,
        118.000000, 164.000000, 16.000000, 128.000000, 166.000000, 16.000000,
        138.000000, 164.000000, 16.000000, 150.000000, 168.000000, 15.000000,
        160.000000, 176.000000, 12.000000, 150.000000, 186.000000, 14.000000,
        138.000000, 192.000000, 15.000000, 128.000000, 194.000000, 15.000000,
        118.000000, 192.000000, 15.000000, 106.000000, 186.000000, 14.000000,
        104.000000, 176.000000, 14.000000, 118.000000, 172.000000, 14.000000,
        128.000000, 174.000000, 14.000000, 138.000000, 172.000000, 14.000000,
        152.000000, 176.000000, 14.000000, 138.000000, 182.000000, 14.000000,
        128.000000, 184.000000, 14.000000, 118.000000, 182.000000, 14.000000};
    Landmarks3D face;
    for (int i = 0; i < kLandmarkCount; ++i)
        face.row(i) << table[3 * i], table[3 * i + 1], table[3 * i + 2];
    return face;
}

void save_pdm(const PDMModel& pdm, const std::string& path) {
    pdm.validate();
    auto out = open_output(path);
    out << "PDM v1\n" << pdm.rank() << "\n";
    for (int i = 0; i < kLandmarkCount; ++i)
        out << g17(pdm.mean_shape(i, 0)) << ' ' << g17(pdm.mean_shape(i, 1)) << ' '
            << g17(pdm.mean_shape(i, 2)) << "\n";
    for (int r = 0; r < pdm.basis.rows(); ++r) {
        for (int c = 0; c < pdm.basis.cols(); ++c) out << (c ? " " : "") << g17(pdm.basis(r, c));
        out << "\n";
    }
    for (int j = 0; j < pdm.rank(); ++j) out << (j ? " " : "") << g17(pdm.variances[j]);
    out << "\n";
    if (!out) throw DataError("write failed: " + path);
}

PDMModel load_pdm(const std::string& path) {
    auto in = open_input(path);
    TokenReader tr(in, path);
    tr.expect("PDM");
    tr.expect("v1");
    const int m = static_cast<int>(tr.next_int());
    if (m < 1) tr.fail("invalid rank");
    PDMModel pdm;
    for (int i = 0; i < kLandmarkCount; ++i)
        for (int c = 0; c < 3; ++c) pdm.mean_shape(i, c) = tr.next_double();
    pdm.basis.resize(3 * kLandmarkCount, m);
    for (int r = 0; r < pdm.basis.rows(); ++r)
        for (int c = 0; c < m; ++c) pdm.basis(r, c) = tr.next_double();
    pdm.variances.resize(m);
    for (int j = 0; j < m; ++j) pdm.variances[j] = tr.next_double();
    pdm.validate();
    return pdm;
}

}  // namespace dyadgen
