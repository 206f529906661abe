#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csn/bundle.hpp"

namespace csn::dimred {

/// Dense row-major matrix of doubles; row i is object i.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

/// Reads a CSV of reals (an optional non-numeric header line is skipped) or,
/// when `shape` is given, raw float32 LE values of that shape.
Matrix read_matrix(const std::filesystem::path& path,
                   std::optional<std::pair<std::size_t, std::size_t>> shape = std::nullopt);

// ---------------------------------------------------------------- PCA

struct PcaResult {
    Matrix coords;                         // N x k
    Matrix components;                     // k x D, orthonormal rows
    std::vector<double> explained_variance;  // k eigenvalues, descending
    std::vector<double> mean;              // D
    double total_variance = 0.0;
};

/// Projection onto the top-k eigenvectors of the sample covariance
/// (divisor N - 1). Each component's largest-magnitude entry is positive
/// (first such entry on ties). Uses the D x D covariance when D <= N and the
/// N x N Gram matrix otherwise. Throws InvalidArgument("zero variance") when
/// all rows are identical.
PcaResult pca(const Matrix& x, std::size_t k);

// ------------------------------------------------- perplexity calibration

struct Calibration {
    double sigma = 0.0;
    double perplexity = 0.0;  // achieved exp(H), H in nats (equals 2^H in bits)
    bool clamped = false;
    std::vector<double> probabilities;  // conditional distribution over the inputs
};

/// Finds sigma such that the Gaussian conditional distribution
/// p_j ~ exp(-d_j / (2 sigma^2)) has perplexity `target` (within 1e-5).
/// The bracket is found by doubling/halving from an initial guess, then
/// bisected for at most 50 iterations. An unattainable target returns the
/// final bracket midpoint with `clamped` set.
Calibration calibrate_perplexity(std::span<const double> sq_dists, double target);

// ------------------------------------------------------------- t-SNE

struct TsneParams {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iteration = 250;
    double exaggeration = 12.0;
    int exaggeration_iterations = 250;
    double init_stddev = 1e-4;
    std::uint64_t seed = 0;
};

struct IterationStats {
    int iteration = 0;
    double p_sum = 0.0;  // sum of the (unexaggerated) joint P
    double q_sum = 0.0;
    double kl = 0.0;
};

struct TsneResult {
    Matrix embedding;  // N x 2, raw (not normalized)
    double initial_kl = 0.0;
    double final_kl = 0.0;
};

/// Symmetrized joint affinities p_ij = (p_j|i + p_i|j) / 2N, floored at
/// 1e-12 off the diagonal and renormalized to sum to 1.
Matrix joint_probabilities(const Matrix& x, double perplexity);

/// Student-t affinities q_ij of a low-dimensional configuration.
Matrix student_t_affinities(const Matrix& y);

double kl_divergence(const Matrix& p, const Matrix& y);

/// dKL/dy_i = 4 sum_j (p_ij - q_ij) (y_i - y_j) / (1 + |y_i - y_j|^2)
Matrix kl_gradient(const Matrix& p, const Matrix& y);

/// Exact O(N^2) t-SNE with momentum, early exaggeration and per-coordinate
/// gains. Deterministic for a fixed seed. `observer` is called once per
/// iteration after the update.
TsneResult tsne(const Matrix& x, const TsneParams& params,
                const std::function<void(const IterationStats&)>& observer = {});

// ------------------------------------------- axis and imported projections

struct AxisProjection {
    ProjectionTable table;
    std::vector<std::size_t> missing;  // objects placed at the domain minimum
};

/// Pairs two numeric columns (NaN = missing) and normalizes the result.
AxisProjection axis_projection(std::string name, std::span<const double> x, std::span<const double> y);

/// Parses a metadata column as numbers: blank, "NA", "N/A", "nan" and "null"
/// (any case) are missing; any other unparseable value throws InvalidArgument.
std::vector<double> numeric_column(std::span<const std::string> values, std::string_view column_name);

/// Reads N x 2 or N x 3 coordinates (CSV, or float32 LE with `shape`), checks
/// the row count and normalizes x/y.
ProjectionTable import_projection(const std::filesystem::path& path, std::string name, std::size_t expected_rows,
                                  std::optional<std::pair<std::size_t, std::size_t>> shape = std::nullopt);

}  // namespace csn::dimred
