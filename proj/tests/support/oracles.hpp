#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance harness. None of them call into the library code they check.

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "csn/bundle.hpp"
#include "csn/dimred.hpp"
#include "csn/filters.hpp"

namespace csn::testing::oracle {

// ------------------------------------------------------------------- query

struct GenNode {
    enum Kind { Or, And, Cmp } kind = Cmp;
    std::vector<GenNode> kids;
    std::string field, op, literal;
};

/// Row-by-row interpretation of a generated tree.
bool naive_eval(const GenNode& node, const MetadataTable& table, std::size_t row);

GenNode random_tree(std::mt19937_64& g, int depth);

/// Random spacing, bare or quoted literals and optional extra parentheses.
/// Compound children are always parenthesized, so the text parses to exactly
/// the generated structure.
std::string render(const GenNode& node, std::mt19937_64& g);

/// Fields style, year, title, score, note with awkward values: blanks,
/// padded numbers, quotes, backslashes and keyword-like words.
MetadataTable random_table(std::mt19937_64& g, std::size_t rows);

struct MalformedQuery {
    std::string text;
    std::size_t position;
    std::string expected;
    std::string found;
};
const std::vector<MalformedQuery>& malformed_queries();

// ----------------------------------------------------------------- filters

/// Per-object predicate scan with the inactive-filter rule applied per range.
std::vector<bool> naive_mask(std::span<const filters::ColumnView> columns, std::span<const filters::RangeFilter> ranges,
                             std::size_t objects);

/// Ranges biased towards domain ends, bin edges and exact data values.
filters::RangeFilter random_filter(std::mt19937_64& g, const filters::ColumnView& column);
std::vector<filters::RangeFilter> random_state(std::mt19937_64& g, std::span<const filters::ColumnView> columns);

// ------------------------------------------------------------------ dimred

dimred::Matrix random_matrix(std::mt19937_64& g, std::size_t rows, std::size_t cols, double scale = 1.0);

/// Cyclic Jacobi rotations: eigenvalues descending, eigenvectors as columns
/// of `vecs` (row-major n x n).
void jacobi_eigen(std::vector<double> a, std::size_t n, std::vector<double>& vals, std::vector<double>& vecs);

struct Pca {
    std::vector<double> values;
    dimred::Matrix components;  // D x D, one component per row
    dimred::Matrix coords;      // N x D
};

/// Covariance PCA via Jacobi with the library's sign convention: the largest
/// magnitude entry of each component is positive.
Pca pca(const dimred::Matrix& x);

/// exp of the Shannon entropy (natural log) of a distribution.
double perplexity_of(const std::vector<double>& p);

/// Two Gaussian blobs offset by `separation` along the first axis.
dimred::Matrix two_clusters(std::mt19937_64& g, std::size_t per_cluster, double separation, double spread,
                            std::size_t dims);

/// max pairwise distance within a cluster < min distance across clusters.
bool clusters_separated(const dimred::Matrix& y, std::size_t per_cluster);

}  // namespace csn::testing::oracle
