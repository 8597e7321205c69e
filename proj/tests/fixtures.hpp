#pragma once

#include <functional>
#include <optional>

#include "phmcq/error.hpp"
#include "phmcq/model.hpp"

namespace fixtures {

inline phmcq::QueueModel queue(Eigen::VectorXd gamma, Eigen::MatrixXd T, int c, double mu, double tau) {
    return phmcq::make_queue_model(phmcq::make_phase_type(std::move(gamma), std::move(T)), c, mu, tau);
}

// Poisson(lambda) arrivals.
inline phmcq::QueueModel poisson(double lambda, int c, double mu, double tau) {
    return queue(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Constant(1, 1, -lambda), c, mu, tau);
}

inline phmcq::QueueModel mm1d() { return poisson(0.5, 1, 1.0, 2.0); }

inline phmcq::QueueModel erlang2() {
    Eigen::MatrixXd T(2, 2);
    T << -4, 4, 0, -4;
    return queue(Eigen::Vector2d(1, 0), T, 2, 1.5, 1.0);
}

inline phmcq::QueueModel hyperexp() {
    return queue(Eigen::Vector2d(0.3, 0.7), Eigen::Vector2d(-1, -3).asDiagonal().toDenseMatrix(), 2, 1.0, 1.0);
}

inline phmcq::QueueModel erlang(int phases, double rate, int c, double mu, double tau) {
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(phases, phases);
    for (int i = 0; i < phases; ++i) {
        T(i, i) = -rate;
        if (i + 1 < phases) T(i, i + 1) = rate;
    }
    Eigen::VectorXd g = Eigen::VectorXd::Zero(phases);
    g(0) = 1;
    return queue(g, T, c, mu, tau);
}

// Coxian rates (1, 2, 4), continuation (1, 0.5), c = 1: two roots merge into
// a complex pair at mu = 2.669480354198428...; here they are real and 7.3e-8 apart.
inline constexpr double kNearDoubleRootMu = 2.6694803541984184;

inline phmcq::QueueModel near_double_root() {
    Eigen::MatrixXd T(3, 3);
    T << -1, 1, 0, 0, -2, 1, 0, 0, -4;
    return queue(Eigen::Vector3d(1, 0, 0), T, 1, kNearDoubleRootMu, 1.0);
}

inline std::optional<phmcq::ErrorKind> error_kind(const std::function<void()>& f) {
    try {
        f();
    } catch (const phmcq::Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

inline std::string error_text(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

}  // namespace fixtures
