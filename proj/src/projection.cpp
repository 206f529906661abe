#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "csn/csv.hpp"
#include "csn/dimred.hpp"
#include "csn/error.hpp"

namespace csn::dimred {
namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

std::optional<double> to_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

bool is_missing_token(std::string_view s) {
    s = trim(s);
    std::string lower;
    for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return lower.empty() || lower == "na" || lower == "n/a" || lower == "nan" || lower == "null";
}

}  // namespace

Matrix read_matrix(const std::filesystem::path& path, std::optional<std::pair<std::size_t, std::size_t>> shape) {
    if (shape) {
        const auto values = read_f32_file(path);
        const auto [rows, cols] = *shape;
        if (values.size() != rows * cols)
            throw InvalidArgument(path.string() + ": holds " + std::to_string(values.size()) + " values, shape " +
                                  std::to_string(rows) + "x" + std::to_string(cols) + " needs " +
                                  std::to_string(rows * cols));
        Matrix m(rows, cols);
        std::copy(values.begin(), values.end(), m.data.begin());
        return m;
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    auto records = csv::parse(ss.str());
    std::size_t first = 0;
    if (!records.empty() && std::any_of(records[0].begin(), records[0].end(),
                                        [](const std::string& cell) { return !to_double(cell); }))
        first = 1;
    Matrix m;
    m.rows = records.size() - first;
    m.cols = m.rows > 0 ? records[first].size() : 0;
    m.data.reserve(m.rows * m.cols);
    for (std::size_t r = first; r < records.size(); ++r) {
        if (records[r].size() != m.cols)
            throw InvalidArgument(path.string() + ": row " + std::to_string(r + 1) + " has " +
                                  std::to_string(records[r].size()) + " values, expected " + std::to_string(m.cols));
        for (const auto& cell : records[r]) {
            const auto v = to_double(cell);
            if (!v) throw InvalidArgument(path.string() + ": non-numeric value '" + cell + "' on row " + std::to_string(r + 1));
            m.data.push_back(*v);
        }
    }
    return m;
}

std::vector<double> numeric_column(std::span<const std::string> values, std::string_view column_name) {
    std::vector<double> out;
    out.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (is_missing_token(values[i])) {
            out.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const auto v = to_double(values[i]);
        if (!v || !std::isfinite(*v))
            throw InvalidArgument("column '" + std::string(column_name) + "' is not numeric: row " +
                                  std::to_string(i) + " holds '" + values[i] + "'");
        out.push_back(*v);
    }
    return out;
}

AxisProjection axis_projection(std::string name, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("axis projection: columns differ in length");
    if (x.empty()) throw InvalidArgument("axis projection: empty columns");
    auto domain_min = [](std::span<const double> v) {
        double m = std::numeric_limits<double>::infinity();
        for (double a : v)
            if (!std::isnan(a)) m = std::min(m, a);
        return std::isfinite(m) ? m : 0.0;
    };
    const double min_x = domain_min(x);
    const double min_y = domain_min(y);

    AxisProjection out;
    std::vector<double> raw(x.size() * 2);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool missing = std::isnan(x[i]) || std::isnan(y[i]);
        if (missing) out.missing.push_back(i);
        raw[2 * i] = std::isnan(x[i]) ? min_x : x[i];
        raw[2 * i + 1] = std::isnan(y[i]) ? min_y : y[i];
    }
    out.table = {std::move(name), 2, normalize_projection(std::span<const double>(raw), 2)};
    return out;
}

ProjectionTable import_projection(const std::filesystem::path& path, std::string name, std::size_t expected_rows,
                                  std::optional<std::pair<std::size_t, std::size_t>> shape) {
    const Matrix m = read_matrix(path, shape);
    if (m.cols != 2 && m.cols != 3)
        throw InvalidArgument(path.string() + ": projections need 2 or 3 columns, found " + std::to_string(m.cols));
    if (m.rows != expected_rows)
        throw InvalidArgument("row count mismatch: " + path.string() + " has " + std::to_string(m.rows) +
                              " rows, bundle has " + std::to_string(expected_rows) + " objects");
    const int dims = static_cast<int>(m.cols);
    return {std::move(name), dims, normalize_projection(std::span<const double>(m.data), dims)};
}

}  // namespace csn::dimred
