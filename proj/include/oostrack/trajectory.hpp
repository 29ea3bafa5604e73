#pragma once

#include "oostrack/types.hpp"

#include <memory>
#include <span>
#include <vector>

namespace oostrack {

/// One state block that has left the L-scan window. Blocks form a persistent
/// singly-linked chain (newest first) so that hypotheses descending from a
/// common parent share their frozen history.
struct FrozenBlock {
    Vector mean;
    Matrix cov;
    std::shared_ptr<const FrozenBlock> older;
    int count = 1;  ///< number of blocks in the chain ending here
};

/// Gaussian over a stacked sequence of states. The first `frozen_length()`
/// states are mutually independent marginals; the remaining window states
/// carry a full joint covariance.
class TrajectoryState {
public:
    TrajectoryState() = default;
    TrajectoryState(Vector mean, Matrix cov, int state_dim);

    [[nodiscard]] int state_dim() const { return state_dim_; }
    [[nodiscard]] int length() const { return frozen_length() + window_length(); }
    [[nodiscard]] int frozen_length() const { return frozen_ ? frozen_->count : 0; }
    [[nodiscard]] int window_length() const { return state_dim_ == 0 ? 0 : static_cast<int>(mean_.size()) / state_dim_; }

    [[nodiscard]] const Vector& window_mean() const { return mean_; }
    [[nodiscard]] const Matrix& window_cov() const { return cov_; }
    [[nodiscard]] const std::shared_ptr<const FrozenBlock>& frozen() const { return frozen_; }

    /// Mean / marginal covariance of the state at position i (0 = first state).
    [[nodiscard]] Vector state_mean(int i) const;
    [[nodiscard]] Matrix state_cov(int i) const;
    [[nodiscard]] Vector last_mean() const { return state_mean(length() - 1); }

    /// Stacked mean and covariance over all states; cross-covariances that
    /// involve frozen states are zero.
    [[nodiscard]] Vector stacked_mean() const;
    [[nodiscard]] Matrix stacked_cov() const;

    /// Append y = G*window + offset + w, w ~ N(0, noise). G has
    /// state_dim rows and window_length()*state_dim columns.
    void append_linear(const Matrix& G, const Vector& offset, const Matrix& noise);

    /// Append y = F*last + w, w ~ N(0, Q) (prediction one step forward).
    void append_transition(const Matrix& F, const Matrix& Q);

    /// Remove the last window block (marginalisation of the newest state).
    void drop_last();

    /// Move all window states before position `first_kept` (absolute index)
    /// into the frozen chain. No-op for positions already frozen.
    void freeze_before(int first_kept);

    /// Kalman update of the window with z = H*x_block + v, v ~ N(0, R).
    /// `block` is an absolute state position that must lie in the window.
    void kalman_update(int block, const Matrix& H, const Matrix& R, const Vector& z);

    /// Window index of absolute position i, or -1 if frozen / out of range.
    [[nodiscard]] int window_index(int i) const;

    void set_window(Vector mean, Matrix cov) { mean_ = std::move(mean); cov_ = std::move(cov); }
    void set_frozen(std::shared_ptr<const FrozenBlock> f) { frozen_ = std::move(f); }

private:
    std::shared_ptr<const FrozenBlock> frozen_;
    Vector mean_;
    Matrix cov_;
    int state_dim_ = 0;
};

/// Moment-matched merge of weighted trajectory states of identical shape.
/// Weights need not be normalised. Frozen chains are merged block by block
/// down to their common tail.
[[nodiscard]] TrajectoryState merge_states(std::span<const TrajectoryState* const> states,
                                           std::span<const double> weights);

/// Predicted measurement for a block: zhat = H x, S = H P H^T + R.
struct Innovation {
    Vector zhat;
    Matrix S;
    Eigen::LLT<Matrix> S_llt;
    double log_det_S = 0.0;
};

[[nodiscard]] Innovation innovation(const TrajectoryState& state, int block, const Matrix& H, const Matrix& R);

/// Squared Mahalanobis distance and log N(z; zhat, S).
[[nodiscard]] double mahalanobis2(const Innovation& inn, const Vector& z);
[[nodiscard]] double log_likelihood(const Innovation& inn, const Vector& z);

}  // namespace oostrack
