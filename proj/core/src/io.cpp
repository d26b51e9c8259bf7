#include "reldiff/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

namespace reldiff::io {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string where(const std::string& source, Index row, Index line) {
    return source + ": row " + std::to_string(row) + " (line " + std::to_string(line) + ")";
}

void require_rows(const Table& t, const std::string& path) {
    if (t.values.rows() < kMinRows)
        throw CsvError(path + ": need at least " + std::to_string(kMinRows) + " data rows, found " +
                           std::to_string(t.values.rows()),
                       CsvProblem::too_few_rows);
}

}  // namespace

std::string_view to_string(CsvProblem p) noexcept {
    switch (p) {
        case CsvProblem::missing_file: return "missing_file";
        case CsvProblem::empty: return "empty";
        case CsvProblem::ragged: return "ragged";
        case CsvProblem::non_numeric: return "non_numeric";
        case CsvProblem::too_few_rows: return "too_few_rows";
        case CsvProblem::layout: return "layout";
    }
    return "unknown";
}

Table parse_csv(std::string_view text, const std::string& source_name) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        lines.push_back(text.substr(start, end - start));
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    if (lines.empty()) throw CsvError(source_name + ": file is empty", CsvProblem::empty);

    Table t;
    for (std::string_view h : split_cells(lines.front())) t.header.emplace_back(h);
    const Index cols = static_cast<Index>(t.header.size());
    const Index rows = static_cast<Index>(lines.size()) - 1;
    t.values.resize(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const Index line_no = r + 2;
        const auto cells = split_cells(lines[static_cast<std::size_t>(r + 1)]);
        if (static_cast<Index>(cells.size()) != cols)
            throw CsvError(where(source_name, r + 1, line_no) + ": expected " + std::to_string(cols) + " cells, found " +
                               std::to_string(cells.size()),
                           CsvProblem::ragged, r + 1);
        for (Index c = 0; c < cols; ++c) {
            const std::string_view cell = cells[static_cast<std::size_t>(c)];
            double v = 0.0;
            const char* first = cell.data();
            const char* last = cell.data() + cell.size();
            if (!cell.empty() && *first == '+') ++first;
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
                const std::string shown = cell.empty() ? "blank cell" : "'" + std::string(cell) + "'";
                throw CsvError(where(source_name, r + 1, line_no) + ", column " + std::to_string(c + 1) +
                                   ": non-numeric " + shown,
                               CsvProblem::non_numeric, r + 1);
            }
            t.values(r, c) = v;
        }
    }
    return t;
}

Table read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CsvError(path + ": cannot open file", CsvProblem::missing_file);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path);
}

hdtrd::Dataset read_test_csv(const std::string& path, Index p1) {
    const Table t = read_csv(path);
    require_rows(t, path);
    const Index cols = t.values.cols();
    if (p1 < 1 || 1 + p1 > cols)
        throw CsvError(path + ": --p1 " + std::to_string(p1) + " does not fit " + std::to_string(cols) +
                           " columns (y, then p1 x columns, then z)",
                       CsvProblem::layout);
    hdtrd::Dataset d;
    d.y = t.values.col(0);
    d.x = t.values.middleCols(1, p1);
    d.z = t.values.rightCols(cols - 1 - p1);
    return d;
}

transfer::Study read_study_csv(const std::string& path) {
    const Table t = read_csv(path);
    require_rows(t, path);
    if (t.values.cols() < 2)
        throw CsvError(path + ": need a response column and at least one covariate", CsvProblem::layout);
    transfer::Study s;
    s.y = t.values.col(0);
    s.x = t.values.rightCols(t.values.cols() - 1);
    return s;
}

MatrixXd read_matrix_csv(const std::string& path) {
    Table t = read_csv(path);
    require_rows(t, path);
    return std::move(t.values);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string to_csv(const std::vector<std::string>& header, const Eigen::Ref<const MatrixXd>& values) {
    if (!header.empty() && static_cast<Index>(header.size()) != values.cols())
        throw InputError("CSV header has " + std::to_string(header.size()) + " names for " +
                         std::to_string(values.cols()) + " columns");
    std::string out;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j) out += ',';
        out += header[j];
    }
    if (!header.empty()) out += '\n';
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index j = 0; j < values.cols(); ++j) {
            if (j) out += ',';
            out += format_double(values(i, j));
        }
        out += '\n';
    }
    return out;
}

void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError(path + ": cannot open for writing");
        out << content;
        out.flush();
        if (!out) {
            std::error_code ignored;
            fs::remove(tmp, ignored);
            throw InputError(path + ": write failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw InputError(path + ": cannot move temporary file into place: " + ec.message());
    }
}

std::string quote_value(const std::string& v) {
    if (!v.empty() && v.find_first_of(" \t\"=") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    out += '"';
    return out;
}

Record& Record::add(std::string key, double v) {
    fields_.emplace_back(std::move(key), format_double(v));
    return *this;
}

Record& Record::add_integer(std::string key, long long v) {
    fields_.emplace_back(std::move(key), std::to_string(v));
    return *this;
}

Record& Record::add(std::string key, bool v) {
    fields_.emplace_back(std::move(key), v ? "true" : "false");
    return *this;
}

Record& Record::add(std::string key, std::string v) {
    fields_.emplace_back(std::move(key), std::move(v));
    return *this;
}

Record& Record::add_list(std::string key, const std::vector<std::string>& items) {
    std::string joined;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) joined += ',';
        joined += items[i];
    }
    fields_.emplace_back(std::move(key), joined.empty() ? "none" : joined);
    return *this;
}

std::string Record::line() const {
    std::string out;
    for (std::size_t i = 0; i < fields_.size(); ++i) {
        if (i) out += ' ';
        out += fields_[i].first;
        out += '=';
        out += quote_value(fields_[i].second);
    }
    return out;
}

}  // namespace reldiff::io
