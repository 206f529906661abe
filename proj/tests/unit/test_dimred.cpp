#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "csn/bundle.hpp"
#include "csn/dimred.hpp"
#include "csn/error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace csn;
using namespace csn::dimred;
using namespace csn::testing::oracle;


TEST_CASE("pca matches a Jacobi eigensolver on random 6x3 matrices") {
    std::mt19937_64 g(123);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_matrix(g, 6, 3, 1.0 + trial);
        const auto r = pca(x, 3);
        const auto o = testing::oracle::pca(x);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(std::fabs(r.explained_variance[c] - o.values[c]) <= 1e-8 * std::max(1.0, o.values[c]));
            for (std::size_t j = 0; j < 3; ++j) CHECK(std::fabs(r.components(c, j) - o.components(c, j)) <= 1e-8);
            for (std::size_t i = 0; i < 6; ++i) CHECK(std::fabs(r.coords(i, c) - o.coords(i, c)) <= 1e-8 * (1.0 + trial));
        }
        const double sum = std::accumulate(r.explained_variance.begin(), r.explained_variance.end(), 0.0);
        CHECK(std::fabs(sum - r.total_variance) <= 1e-6);
    }
}

TEST_CASE("pca invariants hold in both covariance and Gram regimes") {
    std::mt19937_64 g(9);
    for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{50, 5}, {4, 9}, {12, 12}, {3, 20}}) {
        const auto x = random_matrix(g, rows, cols, 2.0);
        const std::size_t k = std::min(rows - 1, cols);
        const auto r = pca(x, k);
        CAPTURE(rows);
        CAPTURE(cols);
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = 0; b < k; ++b) {
                double dot = 0;
                for (std::size_t j = 0; j < cols; ++j) dot += r.components(a, j) * r.components(b, j);
                CHECK(std::fabs(dot - (a == b ? 1.0 : 0.0)) <= 1e-8);
            }
            if (a + 1 < k) CHECK(r.explained_variance[a] >= r.explained_variance[a + 1]);
            std::size_t arg = 0;
            for (std::size_t j = 1; j < cols; ++j)
                if (std::fabs(r.components(a, j)) > std::fabs(r.components(a, arg))) arg = j;
            CHECK(r.components(a, arg) > 0);
        }
        double total = 0;
        for (std::size_t j = 0; j < cols; ++j) {
            double m = 0, s = 0;
            for (std::size_t i = 0; i < rows; ++i) m += x(i, j) / rows;
            for (std::size_t i = 0; i < rows; ++i) s += (x(i, j) - m) * (x(i, j) - m);
            total += s / (rows - 1.0);
        }
        CHECK(r.total_variance == doctest::Approx(total).epsilon(1e-10));
        if (k == std::min(rows - 1, cols)) {
            const double sum = std::accumulate(r.explained_variance.begin(), r.explained_variance.end(), 0.0);
            CHECK(std::fabs(sum - total) <= 1e-6);
        }
        // Coordinates are centered data times components.
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t a = 0; a < k; ++a) {
                double v = 0;
                for (std::size_t j = 0; j < cols; ++j) v += (x(i, j) - r.mean[j]) * r.components(a, j);
                CHECK(std::fabs(v - r.coords(i, a)) <= 1e-8);
            }
    }
}

TEST_CASE("pca rejects degenerate input") {
    Matrix same(4, 3, 2.5);
    CHECK_THROWS_AS(pca(same, 2), InvalidArgument);
    std::mt19937_64 g(1);
    CHECK_THROWS_AS(pca(random_matrix(g, 5, 3), 4), InvalidArgument);
    CHECK_THROWS_AS(pca(random_matrix(g, 1, 3), 1), InvalidArgument);
}

TEST_CASE("perplexity calibration hits random targets") {
    std::mt19937_64 g(31);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 5 + g() % 60;
        std::vector<double> d(n);
        for (auto& v : d) v = u(g) * u(g);
        const double target = 1.5 + (n - 2.5) * (g() % 1000) / 1000.0;
        const auto c = calibrate_perplexity(d, target);
        CAPTURE(target);
        CHECK(!c.clamped);
        CHECK(std::fabs(perplexity_of(c.probabilities) - target) < 1e-4);
        CHECK(std::fabs(c.perplexity - target) < 1e-4);
        CHECK(std::accumulate(c.probabilities.begin(), c.probabilities.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("equidistant neighbours give uniform conditionals and clamp other targets") {
    const std::vector<double> d(9, 4.0);
    for (double target : {2.0, 9.0, 30.0}) {
        const auto c = calibrate_perplexity(d, target);
        for (double p : c.probabilities) CHECK(p == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
        CHECK(c.perplexity == doctest::Approx(9.0).epsilon(1e-12));
        CHECK(c.clamped == (target != 9.0));
    }
    CHECK_THROWS_AS(calibrate_perplexity(d, 0.5), InvalidArgument);
}

TEST_CASE("joint probabilities are symmetric and normalized") {
    std::mt19937_64 g(4);
    const auto x = random_matrix(g, 25, 6);
    const auto p = joint_probabilities(x, 5.0);
    double sum = 0;
    for (std::size_t i = 0; i < 25; ++i) {
        CHECK(p(i, i) == 0.0);
        for (std::size_t j = 0; j < 25; ++j) {
            sum += p(i, j);
            CHECK(p(i, j) == doctest::Approx(p(j, i)).epsilon(1e-15));
            if (i != j) CHECK(p(i, j) > 0.0);
        }
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
}

TEST_CASE("kl gradient matches central finite differences") {
    std::mt19937_64 g(17);
    const auto x = random_matrix(g, 10, 4);
    const auto p = joint_probabilities(x, 3.0);
    auto y = random_matrix(g, 10, 2);
    const auto grad = kl_gradient(p, y);
    const double h = 1e-5;
    double worst = 0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const double keep = y.data[i];
        y.data[i] = keep + h;
        const double up = kl_divergence(p, y);
        y.data[i] = keep - h;
        const double down = kl_divergence(p, y);
        y.data[i] = keep;
        const double fd = (up - down) / (2 * h);
        const double rel = std::fabs(fd - grad.data[i]) / std::max({std::fabs(fd), std::fabs(grad.data[i]), 1e-12});
        worst = std::max(worst, rel);
    }
    CHECK(worst < 1e-4);

    const auto q = student_t_affinities(y);
    CHECK(std::fabs(std::accumulate(q.data.begin(), q.data.end(), 0.0) - 1.0) <= 1e-12);
}

TEST_CASE("tsne keeps P and Q normalized, reduces KL and is deterministic") {
    std::mt19937_64 g(3);
    const auto x = two_clusters(g, 20, 8.0, 1.0, 5);
    TsneParams params;
    params.perplexity = 8;
    params.iterations = 400;
    params.seed = 11;
    int calls = 0;
    double worst = 0;
    const auto r = tsne(x, params, [&](const IterationStats& s) {
        ++calls;
        worst = std::max({worst, std::fabs(s.p_sum - 1.0), std::fabs(s.q_sum - 1.0)});
    });
    CHECK(calls == 400);
    CHECK(worst <= 1e-8);
    CHECK(r.final_kl < r.initial_kl);
    CHECK(r.embedding.rows == 40);
    CHECK(r.embedding.cols == 2);

    const auto again = tsne(x, params);
    CHECK(again.embedding.data == r.embedding.data);
    params.seed = 12;
    CHECK(tsne(x, params).embedding.data != r.embedding.data);
}

TEST_CASE("tsne separates two distant clusters") {
    std::mt19937_64 g(8);
    const auto x = two_clusters(g, 10, 250.0, 1.0, 3);
    TsneParams params;
    params.perplexity = 5;
    params.learning_rate = 50;
    params.seed = 2;
    const auto y = tsne(x, params).embedding;
    CHECK(clusters_separated(y, 10));
}

TEST_CASE("tsne input validation") {
    TsneParams params;
    params.iterations = 10;
    CHECK_THROWS_AS(tsne(Matrix(1, 3), params), InvalidArgument);
    CHECK_THROWS_AS(tsne(Matrix(5, 3, 1.0), params), InvalidArgument);
    std::mt19937_64 g(1);
    const auto x = random_matrix(g, 6, 2);
    params.perplexity = 6;
    CHECK_THROWS_AS(tsne(x, params), InvalidArgument);
    params.perplexity = 5.5;
    CHECK_NOTHROW(tsne(x, params));
}

TEST_CASE("axis projection examples") {
    const std::vector<double> year = {1900, 1950, 2000}, pc1 = {0, 1, 2};
    const auto a = axis_projection("time", year, pc1);
    const std::vector<double> raw = {1900, 0, 1950, 1, 2000, 2};
    CHECK(a.table.coords == normalize_projection(std::span<const double>(raw)));
    CHECK(a.table.coords == std::vector<float>{-1, -0.02f, 0, 0, 1, 0.02f});
    CHECK(a.missing.empty());

    const std::vector<double> v = {3, -1, 7, 2};
    const auto diag = axis_projection("d", v, v);
    for (std::size_t i = 0; i < 4; ++i) CHECK(diag.table.x(i) == diag.table.y(i));

    const std::vector<double> with_gap = {1900, std::nan(""), 2000};
    const auto m = axis_projection("t", with_gap, pc1);
    CHECK(m.missing == std::vector<std::size_t>{1});
    CHECK(m.table.x(1) == -1.0f);
}

TEST_CASE("numeric columns accept missing markers and reject text") {
    const std::vector<std::string> ok = {"1.5", " 2 ", "", "NA", "n/a", "NaN", "null", "-3e2"};
    const auto v = numeric_column(ok, "c");
    CHECK(v[0] == 1.5);
    CHECK(v[1] == 2.0);
    for (int i = 2; i < 7; ++i) CHECK(std::isnan(v[i]));
    CHECK(v[7] == -300.0);
    const std::vector<std::string> bad = {"1", "abc"};
    CHECK_THROWS_AS(numeric_column(bad, "c"), InvalidArgument);
}

TEST_CASE("matrices load from csv and raw float32") {
    testing::TempDir tmp;
    std::ofstream(tmp / "m.csv") << "a,b,c\n1,2,3\n4,5,6\n";
    const auto m = read_matrix(tmp / "m.csv");
    CHECK(m.rows == 2);
    CHECK(m.cols == 3);
    CHECK(m(1, 2) == 6.0);
    const std::vector<float> raw = {1, 2, 3, 4, 5, 6};
    write_f32_file(tmp / "m.bin", raw);
    const auto b = read_matrix(tmp / "m.bin", std::pair<std::size_t, std::size_t>{3, 2});
    CHECK(b.rows == 3);
    CHECK(b(2, 1) == 6.0);
    CHECK_THROWS(read_matrix(tmp / "m.bin", std::pair<std::size_t, std::size_t>{4, 2}));
    std::ofstream(tmp / "ragged.csv") << "1,2\n3\n";
    CHECK_THROWS(read_matrix(tmp / "ragged.csv"));
}

TEST_CASE("imported projections round trip and keep z") {
    testing::TempDir tmp;
    const std::vector<double> raw = {0, 0, 4, 2, -2, 1};
    const auto norm = normalize_projection(std::span<const double>(raw));
    write_f32_file(tmp / "p.bin", norm);
    const auto t = import_projection(tmp / "p.bin", "umap", 3, std::pair<std::size_t, std::size_t>{3, 2});
    CHECK(t.coords == norm);
    CHECK(t.name == "umap");

    std::ofstream(tmp / "p3.csv") << "x,y,z\n0,0,0.3\n10,5,0.9\n";
    const auto t3 = import_projection(tmp / "p3.csv", "deep", 2);
    CHECK(t3.dims == 3);
    CHECK(t3.coords == std::vector<float>{-1, -0.5f, 0.3f, 1, 0.5f, 0.9f});

    CHECK_THROWS_AS(import_projection(tmp / "p3.csv", "deep", 5), Error);
    std::ofstream(tmp / "p4.csv") << "1,2,3,4\n";
    CHECK_THROWS(import_projection(tmp / "p4.csv", "bad", 1));
}
