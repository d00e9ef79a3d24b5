#include <doctest.h>

#include <cmath>

#include "dyadgen/corpus.hpp"
#include "dyadgen/pdm.hpp"
#include "test_util.hpp"

using namespace dyadgen;
using dyadgen::test::TempDir;

namespace {

PDMModel test_pdm(int m = 10, std::uint64_t seed = 42) { return make_synthetic_pdm(m, seed); }

Eigen::VectorXd vec_of(const Landmarks3D& s) {
    Eigen::VectorXd v(3 * kLandmarkCount);
    for (int i = 0; i < kLandmarkCount; ++i) v.segment<3>(3 * i) = s.row(i).transpose();
    return v;
}

Landmarks3D shape_of(const Eigen::VectorXd& v) {
    Landmarks3D s;
    for (int i = 0; i < kLandmarkCount; ++i) s.row(i) = v.segment<3>(3 * i).transpose();
    return s;
}

// Unit direction orthogonal to every similarity-transform mode of the centered
// mean (translations, scaling, infinitesimal rotations), so Procrustes leaves
// shapes mean +- delta*v untouched and PCA must recover v exactly.
Eigen::VectorXd pure_deformation_direction(const Landmarks3D& centered_mean, Rng& rng) {
    std::vector<Eigen::VectorXd> forbidden;
    for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd t = Eigen::VectorXd::Zero(3 * kLandmarkCount);
        for (int i = 0; i < kLandmarkCount; ++i) t[3 * i + k] = 1.0;
        forbidden.push_back(t);
    }
    forbidden.push_back(vec_of(centered_mean));  // scaling mode
    for (int k = 0; k < 3; ++k) {                // rotation generators e_k x m_i
        Eigen::Vector3d axis = Eigen::Vector3d::Zero();
        axis[k] = 1.0;
        Landmarks3D r;
        for (int i = 0; i < kLandmarkCount; ++i)
            r.row(i) = axis.cross(centered_mean.row(i).transpose()).transpose();
        forbidden.push_back(vec_of(r));
    }
    Eigen::VectorXd v(3 * kLandmarkCount);
    for (int i = 0; i < v.size(); ++i) v[i] = rng.normal();
    for (const auto& f : forbidden) {
        const double nf = f.squaredNorm();
        if (nf > 0) v -= f.dot(v) / nf * f;
    }
    // one more sweep for numerical cleanliness
    for (const auto& f : forbidden) {
        const double nf = f.squaredNorm();
        if (nf > 0) v -= f.dot(v) / nf * f;
    }
    return v / v.norm();
}

}  // namespace

TEST_CASE("project: neutral parameters reproduce the mean shape") {
    const PDMModel pdm = test_pdm();
    const Landmarks2D out = project(pdm, neutral_params(pdm));
    for (int i = 0; i < kLandmarkCount; ++i) {
        CHECK(out(i, 0) == pdm.mean_shape(i, 0));
        CHECK(out(i, 1) == pdm.mean_shape(i, 1));
    }
}

TEST_CASE("project: translation shifts every point") {
    const PDMModel pdm = test_pdm();
    ShapeParams p = neutral_params(pdm);
    p.rigid.tx = 10.0;
    p.rigid.ty = -3.0;
    const Landmarks2D out = project(pdm, p);
    for (int i = 0; i < kLandmarkCount; ++i) {
        CHECK(out(i, 0) == doctest::Approx(pdm.mean_shape(i, 0) + 10.0).epsilon(1e-12));
        CHECK(out(i, 1) == doctest::Approx(pdm.mean_shape(i, 1) - 3.0).epsilon(1e-12));
    }
}

TEST_CASE("project: scale doubles a centered mean") {
    PDMModel pdm = test_pdm();
    pdm.mean_shape.rowwise() -= pdm.mean_shape.colwise().mean().eval();
    ShapeParams p = neutral_params(pdm);
    p.rigid.scale = 2.0;
    const Landmarks2D out = project(pdm, p);
    for (int i = 0; i < kLandmarkCount; ++i) {
        CHECK(out(i, 0) == doctest::Approx(2.0 * pdm.mean_shape(i, 0)).epsilon(1e-12));
        CHECK(out(i, 1) == doctest::Approx(2.0 * pdm.mean_shape(i, 1)).epsilon(1e-12));
    }
}

TEST_CASE("project: roll = pi rotates the mean in-plane by 180 degrees") {
    const PDMModel pdm = test_pdm();
    ShapeParams p = neutral_params(pdm);
    p.rigid.roll = M_PI;
    const Landmarks2D out = project(pdm, p);
    // independent 2D rotation of the mean's (x, y)
    for (int i = 0; i < kLandmarkCount; ++i) {
        const double c = std::cos(M_PI), s = std::sin(M_PI);
        const double ex = c * pdm.mean_shape(i, 0) - s * pdm.mean_shape(i, 1);
        const double ey = s * pdm.mean_shape(i, 0) + c * pdm.mean_shape(i, 1);
        CHECK(out(i, 0) == doctest::Approx(ex).epsilon(1e-9));
        CHECK(out(i, 1) == doctest::Approx(ey).epsilon(1e-9));
    }
}

TEST_CASE("project: superposition in q and t") {
    const PDMModel pdm = test_pdm(6, 3);
    Rng rng(5);
    ShapeParams base = neutral_params(pdm);
    base.rigid.pitch = 0.2;
    base.rigid.yaw = -0.3;
    base.rigid.scale = 1.1;
    ShapeParams pa = base, pb = base, pab = base;
    for (int j = 0; j < 6; ++j) {
        pa.q[j] = rng.normal() * 100.0;
        pb.q[j] = rng.normal() * 100.0;
        pab.q[j] = pa.q[j] + pb.q[j];
    }
    const Landmarks2D z = project(pdm, base), a = project(pdm, pa), b = project(pdm, pb),
                      ab = project(pdm, pab);
    CHECK(((a - z) + (b - z) - (ab - z)).cwiseAbs().maxCoeff() < 1e-8);

    ShapeParams pt = base;
    pt.rigid.tx = 7.0;
    pt.rigid.ty = -2.0;
    const Landmarks2D t = project(pdm, pt);
    CHECK(((t - z).col(0).array() - 7.0).abs().maxCoeff() < 1e-12);
    CHECK(((t - z).col(1).array() + 2.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("project: dimension mismatch is an error") {
    const PDMModel pdm = test_pdm(4, 1);
    ShapeParams p = neutral_params(pdm);
    p.q.resize(3);
    p.q.setZero();
    CHECK_THROWS_AS(project(pdm, p), DataError);
}

TEST_CASE("build_pdm: identical shapes are degenerate") {
    std::vector<Landmarks3D> shapes(5, canonical_mean_face());
    CHECK_THROWS_AS(build_pdm(shapes, 1), DataError);
}

TEST_CASE("build_pdm: too few shapes") {
    std::vector<Landmarks3D> shapes(3, canonical_mean_face());
    CHECK_THROWS_AS(build_pdm(shapes, 3), DataError);
}

TEST_CASE("build_pdm: recovers a planted deformation direction with variance delta^2") {
    Landmarks3D mean = canonical_mean_face();
    mean.rowwise() -= mean.colwise().mean().eval();
    Rng rng(11);
    const Eigen::VectorXd v = pure_deformation_direction(mean, rng);

    const double delta = 0.1;
    const std::vector<Landmarks3D> shapes = {shape_of(vec_of(mean) + delta * v),
                                             shape_of(vec_of(mean) - delta * v)};
    const PDMModel pdm = build_pdm(shapes, 1);

    // hand-computed covariance eigendecomposition: eigenvector +-v, eigenvalue delta^2
    CHECK(std::abs(pdm.basis.col(0).dot(v)) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(pdm.variances[0] == doctest::Approx(delta * delta).epsilon(1e-6));
}

TEST_CASE("build_pdm: reconstruction error non-increasing in rank") {
    Rng rng(7);
    const Landmarks3D mean = canonical_mean_face();
    std::vector<Landmarks3D> shapes;
    for (int s = 0; s < 50; ++s) {
        Landmarks3D sh = mean;
        for (int i = 0; i < kLandmarkCount; ++i)
            for (int c = 0; c < 3; ++c) sh(i, c) += 3.0 * rng.normal();
        shapes.push_back(sh);
    }
    const PDMModel p5 = build_pdm(shapes, 5);
    const PDMModel p10 = build_pdm(shapes, 10);
    CHECK(mean_reconstruction_error(p10, shapes) <= mean_reconstruction_error(p5, shapes));
}

TEST_CASE("fit: recovers the mean shape as neutral parameters") {
    const PDMModel pdm = test_pdm();
    Landmarks2D observed;
    observed.col(0) = pdm.mean_shape.col(0);
    observed.col(1) = pdm.mean_shape.col(1);
    const FitResult res = fit(pdm, observed);
    const Eigen::VectorXd err = res.params.flatten() - neutral_params(pdm).flatten();
    CHECK(err.norm() < 1e-6);
}

TEST_CASE("fit: round-trips random in-range parameters") {
    const PDMModel pdm = test_pdm();
    Rng rng(101);
    int ok = 0;
    const int trials = 60;
    for (int t = 0; t < trials; ++t) {
        const ShapeParams truth = test::random_in_range_params(pdm, rng);
        const FitResult res = fit(pdm, project(pdm, truth));
        if ((res.params.flatten() - truth.flatten()).norm() < 1e-6) ++ok;
    }
    CHECK(ok >= trials * 95 / 100);
}

TEST_CASE("fit: noisy observations stay within the chi-square style bound") {
    const PDMModel pdm = test_pdm();
    Rng rng(55);
    const double sigma = 0.5;
    for (int trial = 0; trial < 100; ++trial) {
        const ShapeParams truth = test::random_in_range_params(pdm, rng);
        Landmarks2D observed = project(pdm, truth);
        for (int i = 0; i < kLandmarkCount; ++i)
            for (int c = 0; c < 2; ++c) observed(i, c) += sigma * rng.normal();
        const FitResult res = fit(pdm, observed);
        CHECK(res.residual <= kLandmarkCount * 2 * sigma * sigma * 1.5);
    }
}

TEST_CASE("fit: objective never exceeds the initial objective") {
    const PDMModel pdm = test_pdm();
    Rng rng(77);
    const ShapeParams truth = test::random_in_range_params(pdm, rng);
    Landmarks2D observed = project(pdm, truth);
    for (int i = 0; i < kLandmarkCount; ++i) observed(i, 0) += rng.normal();

    const ShapeParams init = neutral_params(pdm);
    double init_obj = 0.0;
    const Landmarks2D at_init = project(pdm, init);
    for (int i = 0; i < kLandmarkCount; ++i)
        init_obj += (at_init.row(i) - observed.row(i)).squaredNorm();
    const FitResult res = fit(pdm, observed, init);
    CHECK(res.residual <= init_obj);
}

TEST_CASE("fit: NaN input is an error") {
    const PDMModel pdm = test_pdm();
    Landmarks2D observed = project(pdm, neutral_params(pdm));
    observed(10, 0) = std::nan("");
    CHECK_THROWS_AS(fit(pdm, observed), DataError);
}

TEST_CASE("neutral_params flattens to (1, 0, ..., 0)") {
    const PDMModel pdm = test_pdm(4, 9);
    const Eigen::VectorXd flat = neutral_params(pdm).flatten();
    CHECK(flat.size() == 10);
    CHECK(flat[0] == 1.0);
    CHECK(flat.tail(9).cwiseAbs().maxCoeff() == 0.0);

    const FitResult res = fit(pdm, project(pdm, neutral_params(pdm)));
    CHECK((res.params.flatten() - flat).norm() < 1e-6);
}

TEST_CASE("pdm file format round-trips bit-exactly") {
    const PDMModel pdm = test_pdm(7, 13);
    TempDir dir("pdm_io");
    save_pdm(pdm, dir.file("model.txt"));
    const PDMModel back = load_pdm(dir.file("model.txt"));
    CHECK(back.basis == pdm.basis);
    CHECK(back.variances == pdm.variances);
    CHECK(back.mean_shape == pdm.mean_shape);
    CHECK_NOTHROW(back.validate());  // orthonormality preserved through save/load
}

TEST_CASE("flatten/unflatten is the identity on the documented layout") {
    Rng rng(3);
    Eigen::VectorXd flat(6 + 5);
    for (int i = 0; i < flat.size(); ++i) flat[i] = rng.normal();
    flat[0] = 1.3;
    CHECK(ShapeParams::unflatten(flat).flatten() == flat);
}
