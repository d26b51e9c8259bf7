#pragma once

#include <concepts>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "reldiff/error.hpp"
#include "reldiff/hdtrd.hpp"
#include "reldiff/transfer.hpp"

namespace reldiff::io {

enum class CsvProblem { missing_file, empty, ragged, non_numeric, too_few_rows, layout };

std::string_view to_string(CsvProblem p) noexcept;

/// Ingestion failure. `row` is the 1-based data row (header excluded), 0 when not row-specific.
class CsvError : public InputError {
public:
    CsvError(std::string what, CsvProblem problem, Eigen::Index row = 0)
        : InputError(std::move(what)), problem_(problem), row_(row) {}

    CsvProblem problem() const noexcept { return problem_; }
    Eigen::Index row() const noexcept { return row_; }

private:
    CsvProblem problem_;
    Eigen::Index row_;
};

struct Table {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

/// Header line followed by numeric rows. Every row must have as many cells as the header.
Table parse_csv(std::string_view text, const std::string& source_name = "<memory>");
Table read_csv(const std::string& path);

inline constexpr Eigen::Index kMinRows = 4;

/// Column 1 = y, next p1 columns = x, remaining columns = z.
hdtrd::Dataset read_test_csv(const std::string& path, Eigen::Index p1);
/// Column 1 = y, remaining columns = X.
transfer::Study read_study_csv(const std::string& path);
/// Every column is data.
Eigen::MatrixXd read_matrix_csv(const std::string& path);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

std::string to_csv(const std::vector<std::string>& header, const Eigen::Ref<const Eigen::MatrixXd>& values);

/// Writes through a temporary sibling file and renames it into place.
void write_atomic(const std::string& path, const std::string& content);

/// Ordered key=value pairs rendered on one line, space separated.
class Record {
public:
    Record& add(std::string key, double v);
    template <std::integral T>
        requires(!std::same_as<T, bool>)
    Record& add(std::string key, T v) {
        return add_integer(std::move(key), static_cast<long long>(v));
    }
    Record& add(std::string key, bool v);
    Record& add(std::string key, std::string v);
    Record& add(std::string key, const char* v) { return add(std::move(key), std::string(v)); }
    Record& add_list(std::string key, const std::vector<std::string>& items);

    std::string line() const;
    const std::vector<std::pair<std::string, std::string>>& fields() const noexcept { return fields_; }

private:
    Record& add_integer(std::string key, long long v);

    std::vector<std::pair<std::string, std::string>> fields_;
};

/// Values containing spaces or quotes are wrapped in double quotes with inner quotes doubled.
std::string quote_value(const std::string& v);

}  // namespace reldiff::io
