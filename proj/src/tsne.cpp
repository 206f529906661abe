#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "csn/dimred.hpp"
#include "csn/error.hpp"
#include "csn/rng.hpp"

namespace csn::dimred {
namespace {

constexpr double kPerplexityTolerance = 1e-5;
constexpr int kBisectionSteps = 50;
constexpr int kBracketSteps = 64;
constexpr double kProbabilityFloor = 1e-12;

struct Evaluation {
    double perplexity;
    std::vector<double> probabilities;
};

Evaluation evaluate_sigma(std::span<const double> d, double dmin, double sigma) {
    const double beta = 1.0 / (2.0 * sigma * sigma);
    std::vector<double> p(d.size());
    double z = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        p[j] = std::exp(-(d[j] - dmin) * beta);
        z += p[j];
    }
    double weighted = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        p[j] /= z;
        weighted += p[j] * (d[j] - dmin);
    }
    // H = log Z + beta * E[d - dmin], in nats.
    const double entropy = std::log(z) + beta * weighted;
    return {std::exp(entropy), std::move(p)};
}

}  // namespace

Calibration calibrate_perplexity(std::span<const double> sq_dists, double target) {
    if (sq_dists.size() < 1) throw InvalidArgument("perplexity calibration needs at least 2 points");
    if (!(target >= 1.0)) throw InvalidArgument("perplexity target must be at least 1");
    double dmin = std::numeric_limits<double>::infinity();
    double dsum = 0.0;
    for (double v : sq_dists) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("squared distances must be finite and non-negative");
        dmin = std::min(dmin, v);
        dsum += v;
    }
    const double mean = dsum / static_cast<double>(sq_dists.size());

    auto done = [&](double sigma, Evaluation e, bool clamped) {
        return Calibration{sigma, e.perplexity, clamped, std::move(e.probabilities)};
    };
    auto close = [&](const Evaluation& e) { return std::abs(e.perplexity - target) < kPerplexityTolerance; };

    double sigma = mean > 0.0 ? std::sqrt(mean) : 1.0;
    auto e = evaluate_sigma(sq_dists, dmin, sigma);
    if (close(e)) return done(sigma, std::move(e), false);

    // Bracket: perplexity grows monotonically with sigma.
    double lo = sigma, hi = sigma;
    bool bracketed = false;
    if (e.perplexity < target) {
        for (int step = 0; step < kBracketSteps; ++step) {
            lo = hi;
            hi *= 2.0;
            e = evaluate_sigma(sq_dists, dmin, hi);
            if (close(e)) return done(hi, std::move(e), false);
            if (e.perplexity > target) {
                bracketed = true;
                break;
            }
        }
    } else {
        for (int step = 0; step < kBracketSteps; ++step) {
            hi = lo;
            lo *= 0.5;
            e = evaluate_sigma(sq_dists, dmin, lo);
            if (close(e)) return done(lo, std::move(e), false);
            if (e.perplexity < target) {
                bracketed = true;
                break;
            }
        }
    }
    if (!bracketed) {
        const double mid = 0.5 * (lo + hi);
        return done(mid, evaluate_sigma(sq_dists, dmin, mid), true);
    }

    double mid = 0.5 * (lo + hi);
    for (int step = 0; step < kBisectionSteps; ++step) {
        mid = 0.5 * (lo + hi);
        e = evaluate_sigma(sq_dists, dmin, mid);
        if (close(e)) break;
        if (e.perplexity < target)
            lo = mid;
        else
            hi = mid;
    }
    return done(mid, std::move(e), false);
}

namespace {

Matrix squared_distances(const Matrix& x) {
    Matrix d(x.rows, x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = i + 1; j < x.rows; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < x.cols; ++k) {
                const double diff = x(i, k) - x(j, k);
                s += diff * diff;
            }
            d(i, j) = s;
            d(j, i) = s;
        }
    }
    return d;
}

// Unnormalized Student-t kernel 1 / (1 + |y_i - y_j|^2), zero diagonal; returns the sum.
double student_t_kernel(const Matrix& y, Matrix& num) {
    num = Matrix(y.rows, y.rows);
    double z = 0.0;
    for (std::size_t i = 0; i < y.rows; ++i) {
        for (std::size_t j = i + 1; j < y.rows; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < y.cols; ++k) {
                const double diff = y(i, k) - y(j, k);
                s += diff * diff;
            }
            const double q = 1.0 / (1.0 + s);
            num(i, j) = q;
            num(j, i) = q;
            z += 2.0 * q;
        }
    }
    return z;
}

void gradient_into(const Matrix& p, double p_scale, const Matrix& y, const Matrix& num, double z, Matrix& grad) {
    grad = Matrix(y.rows, y.cols);
    for (std::size_t i = 0; i < y.rows; ++i) {
        for (std::size_t j = 0; j < y.rows; ++j) {
            if (i == j) continue;
            const double mult = (p_scale * p(i, j) - num(i, j) / z) * num(i, j);
            for (std::size_t k = 0; k < y.cols; ++k) grad(i, k) += 4.0 * mult * (y(i, k) - y(j, k));
        }
    }
}

double kl_from_kernel(const Matrix& p, const Matrix& num, double z) {
    double kl = 0.0;
    for (std::size_t i = 0; i < p.rows; ++i)
        for (std::size_t j = 0; j < p.rows; ++j)
            if (i != j && p(i, j) > 0.0) kl += p(i, j) * std::log(p(i, j) / (num(i, j) / z));
    return kl;
}

bool all_rows_identical(const Matrix& x) {
    for (std::size_t i = 1; i < x.rows; ++i)
        for (std::size_t k = 0; k < x.cols; ++k)
            if (x(i, k) != x(0, k)) return false;
    return true;
}

}  // namespace

Matrix joint_probabilities(const Matrix& x, double perplexity) {
    const std::size_t n = x.rows;
    if (n < 2) throw InvalidArgument("joint probabilities need at least 2 points");
    if (!(perplexity > 0.0) || perplexity >= static_cast<double>(n))
        throw InvalidArgument("perplexity must lie in (0, N)");
    const Matrix d = squared_distances(x);
    // Perplexities below 1 are unattainable; 1 is the sharpest distribution.
    const double target = std::max(1.0, perplexity);

    Matrix cond(n, n);
    std::vector<double> others(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0, k = 0; j < n; ++j)
            if (j != i) others[k++] = d(i, j);
        const auto cal = calibrate_perplexity(others, target);
        for (std::size_t j = 0, k = 0; j < n; ++j)
            if (j != i) cond(i, j) = cal.probabilities[k++];
    }

    Matrix p(n, n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            p(i, j) = std::max((cond(i, j) + cond(j, i)) / (2.0 * static_cast<double>(n)), kProbabilityFloor);
            sum += p(i, j);
        }
    }
    for (double& v : p.data) v /= sum;
    return p;
}

Matrix student_t_affinities(const Matrix& y) {
    Matrix num;
    const double z = student_t_kernel(y, num);
    for (double& v : num.data) v /= z;
    return num;
}

double kl_divergence(const Matrix& p, const Matrix& y) {
    Matrix num;
    const double z = student_t_kernel(y, num);
    return kl_from_kernel(p, num, z);
}

Matrix kl_gradient(const Matrix& p, const Matrix& y) {
    Matrix num, grad;
    const double z = student_t_kernel(y, num);
    gradient_into(p, 1.0, y, num, z, grad);
    return grad;
}

TsneResult tsne(const Matrix& x, const TsneParams& params, const std::function<void(const IterationStats&)>& observer) {
    const std::size_t n = x.rows;
    if (n < 4) throw InvalidArgument("tsne needs at least 4 points");
    if (x.cols < 1) throw InvalidArgument("tsne needs at least one feature");
    if (!(params.perplexity > 0.0) || params.perplexity >= static_cast<double>(n))
        throw InvalidArgument("tsne: perplexity must lie in (0, N)");
    if (params.iterations < 1 || !(params.learning_rate > 0.0) || !(params.exaggeration > 0.0) ||
        !(params.init_stddev > 0.0))
        throw InvalidArgument("tsne: parameters must be positive");
    for (double v : x.data)
        if (!std::isfinite(v)) throw InvalidArgument("tsne: non-finite input");
    if (all_rows_identical(x)) throw InvalidArgument("tsne: zero variance");

    const Matrix p = joint_probabilities(x, params.perplexity);

    Rng rng(params.seed);
    Matrix y(n, 2);
    for (double& v : y.data) v = rng.normal(0.0, params.init_stddev);

    Matrix num, grad;
    double z = student_t_kernel(y, num);
    TsneResult result;
    result.initial_kl = kl_from_kernel(p, num, z);

    Matrix update(n, 2);
    Matrix gains(n, 2, 1.0);
    for (int it = 0; it < params.iterations; ++it) {
        const double exaggeration = it < params.exaggeration_iterations ? params.exaggeration : 1.0;
        const double momentum = it < params.momentum_switch_iteration ? params.initial_momentum : params.final_momentum;
        gradient_into(p, exaggeration, y, num, z, grad);

        for (std::size_t i = 0; i < y.data.size(); ++i) {
            auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
            const bool same_sign = sign(grad.data[i]) == sign(update.data[i]);
            gains.data[i] = same_sign ? gains.data[i] * 0.8 : gains.data[i] + 0.2;
            gains.data[i] = std::max(gains.data[i], 0.01);
            update.data[i] = momentum * update.data[i] - params.learning_rate * gains.data[i] * grad.data[i];
            y.data[i] += update.data[i];
        }
        for (std::size_t k = 0; k < 2; ++k) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += y(i, k);
            mean /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) y(i, k) -= mean;
        }

        z = student_t_kernel(y, num);
        if (observer) {
            IterationStats stats;
            stats.iteration = it;
            stats.p_sum = std::accumulate(p.data.begin(), p.data.end(), 0.0);
            for (double v : num.data) stats.q_sum += v / z;
            stats.kl = kl_from_kernel(p, num, z);
            observer(stats);
        }
    }
    result.final_kl = kl_from_kernel(p, num, z);
    result.embedding = std::move(y);
    return result;
}

}  // namespace csn::dimred
