#include "oostrack/trajectory.hpp"
#include "oostrack/continuous_models.hpp"

#include "../oracles/scenarios.hpp"

#include <gtest/gtest.h>

using namespace oostrack;

namespace {

TrajectoryState three_step(std::mt19937_64& rng) {
    TrajectoryState s(oracle::random_vector(4, rng), oracle::random_spd(4, rng), 4);
    const auto k1 = wiener_kernel(0.3, 2, 0.8), k2 = wiener_kernel(0.3, 2, 1.7);
    s.append_transition(k1.F, k1.Q);
    s.append_transition(k2.F, k2.Q);
    return s;
}

}  // namespace

TEST(TrajectoryState, AppendTransitionBuildsJointGaussian) {
    std::mt19937_64 rng(2);
    const Vector m = oracle::random_vector(4, rng);
    const Matrix P = oracle::random_spd(4, rng);
    TrajectoryState s(m, P, 4);
    const auto k = wiener_kernel(0.3, 2, 0.8);
    s.append_transition(k.F, k.Q);
    ASSERT_EQ(s.length(), 2);
    EXPECT_TRUE(s.state_mean(1).isApprox(k.F * m, 1e-14));
    EXPECT_TRUE(s.state_cov(1).isApprox(k.F * P * k.F.transpose() + k.Q, 1e-14));
    EXPECT_TRUE(s.window_cov().block(4, 0, 4, 4).isApprox(k.F * P, 1e-14));
}

TEST(TrajectoryState, DropLastUndoesAppend) {
    std::mt19937_64 rng(3);
    TrajectoryState s = three_step(rng);
    const Vector m = s.stacked_mean();
    const Matrix P = s.stacked_cov();
    const auto k = wiener_kernel(0.3, 2, 0.4);
    s.append_transition(k.F, k.Q);
    s.drop_last();
    EXPECT_EQ(s.stacked_mean(), m);
    EXPECT_EQ(s.stacked_cov(), P);
}

TEST(TrajectoryState, FreezingKeepsMarginalsAndZeroesCrossTerms) {
    std::mt19937_64 rng(4);
    TrajectoryState s = three_step(rng);
    const TrajectoryState before = s;
    s.freeze_before(2);
    EXPECT_EQ(s.frozen_length(), 2);
    EXPECT_EQ(s.window_length(), 1);
    for (int i = 0; i < 3; ++i) {
        EXPECT_TRUE(s.state_mean(i).isApprox(before.state_mean(i), 0.0));
        EXPECT_TRUE(s.state_cov(i).isApprox(before.state_cov(i), 0.0));
    }
    const Matrix P = s.stacked_cov();
    EXPECT_TRUE(P.block(0, 4, 4, 8).isZero());
    EXPECT_TRUE(P.block(4, 8, 4, 4).isZero());
    EXPECT_EQ(s.window_index(1), -1);
    EXPECT_EQ(s.window_index(2), 0);
    s.freeze_before(1);
    EXPECT_EQ(s.frozen_length(), 2);
}

TEST(TrajectoryState, KalmanUpdateMatchesBatchConditioning) {
    std::mt19937_64 rng(5);
    TrajectoryState s = three_step(rng);
    const Vector m = s.stacked_mean();
    const Matrix P = s.stacked_cov();
    Matrix H = Matrix::Zero(2, 4);
    H(0, 0) = H(1, 1) = 1.0;
    const Matrix R = 2.0 * Matrix::Identity(2, 2);
    const Vector z = oracle::random_vector(2, rng, 3.0);
    s.kalman_update(1, H, R, z);
    Matrix Hb = Matrix::Zero(2, 12);
    Hb.block(0, 4, 2, 4) = H;
    const Matrix S = Hb * P * Hb.transpose() + R;
    const Matrix K = P * Hb.transpose() * S.inverse();
    EXPECT_LE((s.stacked_mean() - (m + K * (z - Hb * m))).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((s.stacked_cov() - (P - K * S * K.transpose())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TrajectoryState, KalmanUpdateOutsideWindowThrows) {
    std::mt19937_64 rng(6);
    TrajectoryState s = three_step(rng);
    s.freeze_before(2);
    Matrix H = Matrix::Zero(2, 4);
    H(0, 0) = H(1, 1) = 1.0;
    EXPECT_THROW(s.kalman_update(0, H, Matrix::Identity(2, 2), Vector::Zero(2)), WindowError);
}

TEST(TrajectoryState, AppendLinearWithOffset) {
    std::mt19937_64 rng(7);
    TrajectoryState s = three_step(rng);
    const Matrix G = oracle::random_vector(4 * 12, rng).reshaped(4, 12);
    const Vector b = oracle::random_vector(4, rng);
    const Matrix N = oracle::random_spd(4, rng);
    const Vector m = s.stacked_mean();
    const Matrix P = s.stacked_cov();
    s.append_linear(G, b, N);
    EXPECT_TRUE(s.state_mean(3).isApprox(G * m + b, 1e-13));
    EXPECT_TRUE(s.state_cov(3).isApprox(G * P * G.transpose() + N, 1e-13));
    EXPECT_TRUE(s.stacked_cov().block(12, 0, 4, 12).isApprox(G * P, 1e-13));
}

TEST(MergeStates, MomentMatchesMixture) {
    std::mt19937_64 rng(8);
    const TrajectoryState a = three_step(rng), b = three_step(rng);
    const TrajectoryState* parts[2] = {&a, &b};
    const double w[2] = {0.3, 0.9};
    const TrajectoryState m = merge_states(parts, w);
    const double W = 1.2;
    const Vector mean = (0.3 * a.stacked_mean() + 0.9 * b.stacked_mean()) / W;
    Matrix cov = Matrix::Zero(12, 12);
    for (auto [s, wi] : {std::pair{&a, 0.3}, std::pair{&b, 0.9}}) {
        const Vector d = s->stacked_mean() - mean;
        cov += wi * (s->stacked_cov() + d * d.transpose());
    }
    cov /= W;
    EXPECT_LE((m.stacked_mean() - mean).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((m.stacked_cov() - cov).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MergeStates, SharedFrozenHistoryIsKept) {
    std::mt19937_64 rng(9);
    TrajectoryState a = three_step(rng);
    a.freeze_before(1);
    TrajectoryState b = a;
    Matrix H = Matrix::Zero(2, 4);
    H(0, 0) = H(1, 1) = 1.0;
    b.kalman_update(2, H, Matrix::Identity(2, 2), Vector::Ones(2));
    const TrajectoryState* parts[2] = {&a, &b};
    const double w[2] = {0.5, 0.5};
    const TrajectoryState m = merge_states(parts, w);
    EXPECT_EQ(m.frozen(), a.frozen());
    EXPECT_EQ(m.length(), 3);
}

TEST(Innovation, LikelihoodMatchesDensity) {
    std::mt19937_64 rng(10);
    const TrajectoryState s = three_step(rng);
    Matrix H = Matrix::Zero(2, 4);
    H(0, 0) = H(1, 1) = 1.0;
    const Matrix R = Matrix::Identity(2, 2);
    const Innovation inn = innovation(s, 2, H, R);
    const Vector z = inn.zhat + Vector::Ones(2);
    const Matrix S = H * s.state_cov(2) * H.transpose() + R;
    const double d2 = (z - inn.zhat).dot(S.inverse() * (z - inn.zhat));
    EXPECT_NEAR(mahalanobis2(inn, z), d2, 1e-12);
    EXPECT_NEAR(log_likelihood(inn, z), -0.5 * d2 - std::log(2 * M_PI) - 0.5 * std::log(S.determinant()), 1e-12);
}
