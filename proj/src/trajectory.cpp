#include "oostrack/trajectory.hpp"

#include <cmath>
#include <numbers>

namespace oostrack {

TrajectoryState::TrajectoryState(Vector mean, Matrix cov, int state_dim)
    : mean_(std::move(mean)), cov_(std::move(cov)), state_dim_(state_dim) {
    if (state_dim_ <= 0 || mean_.size() % state_dim_ != 0 || cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
        throw InvalidArgument("TrajectoryState: inconsistent dimensions");
}

int TrajectoryState::window_index(int i) const {
    const int w = i - frozen_length();
    return (w >= 0 && w < window_length()) ? w : -1;
}

Vector TrajectoryState::state_mean(int i) const {
    const int w = window_index(i);
    if (w >= 0) return mean_.segment(w * state_dim_, state_dim_);
    if (i < 0 || i >= frozen_length()) throw InvalidArgument("TrajectoryState::state_mean: index out of range");
    const FrozenBlock* node = frozen_.get();
    for (int k = frozen_length() - 1; k > i; --k) node = node->older.get();
    return node->mean;
}

Matrix TrajectoryState::state_cov(int i) const {
    const int w = window_index(i);
    if (w >= 0) return cov_.block(w * state_dim_, w * state_dim_, state_dim_, state_dim_);
    if (i < 0 || i >= frozen_length()) throw InvalidArgument("TrajectoryState::state_cov: index out of range");
    const FrozenBlock* node = frozen_.get();
    for (int k = frozen_length() - 1; k > i; --k) node = node->older.get();
    return node->cov;
}

Vector TrajectoryState::stacked_mean() const {
    const int n = state_dim_;
    Vector out(length() * n);
    int k = frozen_length() - 1;
    for (const FrozenBlock* node = frozen_.get(); node; node = node->older.get(), --k)
        out.segment(k * n, n) = node->mean;
    out.tail(mean_.size()) = mean_;
    return out;
}

Matrix TrajectoryState::stacked_cov() const {
    const int n = state_dim_;
    const int len = length();
    Matrix out = Matrix::Zero(len * n, len * n);
    int k = frozen_length() - 1;
    for (const FrozenBlock* node = frozen_.get(); node; node = node->older.get(), --k)
        out.block(k * n, k * n, n, n) = node->cov;
    const auto w = mean_.size();
    out.bottomRightCorner(w, w) = cov_;
    return out;
}

void TrajectoryState::append_linear(const Matrix& G, const Vector& offset, const Matrix& noise) {
    const int n = state_dim_;
    const auto w = mean_.size();
    if (G.rows() != n || G.cols() != w) throw InvalidArgument("append_linear: G has wrong shape");
    Vector m(w + n);
    m.head(w) = mean_;
    m.tail(n) = G * mean_ + offset;
    const Matrix PGt = cov_ * G.transpose();
    Matrix P(w + n, w + n);
    P.topLeftCorner(w, w) = cov_;
    P.topRightCorner(w, n) = PGt;
    P.bottomLeftCorner(n, w) = PGt.transpose();
    P.bottomRightCorner(n, n) = symmetrized(G * PGt + noise);
    mean_ = std::move(m);
    cov_ = std::move(P);
}

void TrajectoryState::append_transition(const Matrix& F, const Matrix& Q) {
    const int n = state_dim_;
    const int w = window_length();
    if (w == 0) {
        // last state already frozen: the new state starts a fresh window
        const Vector x = last_mean();
        const Matrix P = state_cov(length() - 1);
        mean_ = F * x;
        cov_ = symmetrized(F * P * F.transpose() + Q);
        return;
    }
    Matrix G = Matrix::Zero(n, w * n);
    G.rightCols(n) = F;
    append_linear(G, Vector::Zero(n), Q);
}

void TrajectoryState::drop_last() {
    const int n = state_dim_;
    if (window_length() == 0) throw InvalidArgument("drop_last: no window state to drop");
    const auto w = mean_.size() - n;
    Vector m = mean_.head(w);
    Matrix P = cov_.topLeftCorner(w, w);
    mean_ = std::move(m);
    cov_ = std::move(P);
}

void TrajectoryState::freeze_before(int first_kept) {
    const int n = state_dim_;
    const int nf = std::min(first_kept - frozen_length(), window_length());
    if (nf <= 0) return;
    for (int i = 0; i < nf; ++i) {
        auto node = std::make_shared<FrozenBlock>();
        node->mean = mean_.segment(i * n, n);
        node->cov = cov_.block(i * n, i * n, n, n);
        node->count = frozen_length() + 1;
        node->older = frozen_;
        frozen_ = std::move(node);
    }
    const auto keep = mean_.size() - nf * n;
    Vector m = mean_.tail(keep);
    Matrix P = cov_.bottomRightCorner(keep, keep);
    mean_ = std::move(m);
    cov_ = std::move(P);
}

void TrajectoryState::kalman_update(int block, const Matrix& H, const Matrix& R, const Vector& z) {
    const int n = state_dim_;
    const int w = window_index(block);
    if (w < 0) throw WindowError("kalman_update: observed state is outside the L-scan window");
    const Matrix PHt = cov_.middleCols(w * n, n) * H.transpose();
    const Matrix S = symmetrized(H * PHt.middleRows(w * n, n) + R);
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) throw NumericalFailure("kalman_update: innovation covariance not positive definite");
    const Matrix K = llt.solve(PHt.transpose()).transpose();
    mean_ += K * (z - H * mean_.segment(w * n, n));
    cov_ = symmetrized(cov_ - K * PHt.transpose());
}

TrajectoryState merge_states(std::span<const TrajectoryState* const> states, std::span<const double> weights) {
    if (states.empty()) throw InvalidArgument("merge_states: nothing to merge");
    if (states.size() == 1) return *states[0];
    const TrajectoryState& first = *states[0];
    const int n = first.state_dim();
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw NumericalFailure("merge_states: weights sum to zero");
    for (const auto* s : states) {
        if (s->window_length() != first.window_length() || s->frozen_length() != first.frozen_length() || s->state_dim() != n)
            throw InvalidArgument("merge_states: shapes differ");
    }

    Vector m = Vector::Zero(first.window_mean().size());
    for (std::size_t i = 0; i < states.size(); ++i) m += (weights[i] / total) * states[i]->window_mean();
    Matrix P = Matrix::Zero(m.size(), m.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        const Vector d = states[i]->window_mean() - m;
        P += (weights[i] / total) * (states[i]->window_cov() + d * d.transpose());
    }

    TrajectoryState out = first;
    out.set_window(std::move(m), symmetrized(P));

    // Frozen chains: merge until every chain reaches the same node.
    std::vector<const FrozenBlock*> nodes;
    nodes.reserve(states.size());
    for (const auto* s : states) nodes.push_back(s->frozen().get());
    auto all_same = [&] {
        for (const auto* p : nodes)
            if (p != nodes.front()) return false;
        return true;
    };
    if (all_same()) return out;

    std::vector<std::pair<Vector, Matrix>> merged;  // newest first
    while (!all_same()) {
        Vector bm = Vector::Zero(n);
        for (std::size_t i = 0; i < nodes.size(); ++i) bm += (weights[i] / total) * nodes[i]->mean;
        Matrix bP = Matrix::Zero(n, n);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const Vector d = nodes[i]->mean - bm;
            bP += (weights[i] / total) * (nodes[i]->cov + d * d.transpose());
        }
        merged.emplace_back(std::move(bm), symmetrized(bP));
        for (auto& p : nodes) p = p->older.get();
    }
    // nodes.front() is the shared tail; find an owning pointer to it.
    std::shared_ptr<const FrozenBlock> tail;
    if (nodes.front() != nullptr) {
        tail = states[0]->frozen();
        while (tail.get() != nodes.front()) tail = tail->older;
    }
    for (auto it = merged.rbegin(); it != merged.rend(); ++it) {
        auto node = std::make_shared<FrozenBlock>();
        node->mean = std::move(it->first);
        node->cov = std::move(it->second);
        node->count = (tail ? tail->count : 0) + 1;
        node->older = std::move(tail);
        tail = std::move(node);
    }
    out.set_frozen(std::move(tail));
    return out;
}

Innovation innovation(const TrajectoryState& state, int block, const Matrix& H, const Matrix& R) {
    Innovation inn;
    const int w = state.window_index(block);
    if (w < 0) throw WindowError("innovation: observed state is outside the L-scan window");
    const int n = state.state_dim();
    inn.zhat = H * state.window_mean().segment(w * n, n);
    inn.S = symmetrized(H * state.window_cov().block(w * n, w * n, n, n) * H.transpose() + R);
    inn.S_llt.compute(inn.S);
    if (inn.S_llt.info() != Eigen::Success) throw NumericalFailure("innovation covariance not positive definite");
    inn.log_det_S = 2.0 * inn.S_llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return inn;
}

double mahalanobis2(const Innovation& inn, const Vector& z) {
    const Vector y = inn.S_llt.matrixL().solve(z - inn.zhat);
    return y.squaredNorm();
}

double log_likelihood(const Innovation& inn, const Vector& z) {
    const double nz = static_cast<double>(z.size());
    return -0.5 * (mahalanobis2(inn, z) + inn.log_det_S + nz * std::log(2.0 * std::numbers::pi));
}

}  // namespace oostrack
