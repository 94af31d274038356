#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "permsel/data.hpp"

namespace permsel {

/// Numeric table read from a CSV file.
struct Table {
    std::vector<std::string> names;
    Matrix values;

    Index column_index(std::string_view name_or_number) const;
};

/// Comma-separated numeric data. When has_header is false, columns are named
/// c0, c1, ... . Empty fields and NA/NaN entries are rejected.
Table read_csv(const std::filesystem::path& path, bool has_header);
Table parse_csv(std::istream& in, bool has_header, const std::string& source = "<stream>");

/// Predictors and response split out of a table.
struct Dataset {
    Matrix predictors;
    std::vector<std::string> predictor_names;
    ResponseVector response;
};

Dataset split_response(const Table& table, std::string_view response_column, GlmFamily family);

/// Shortest round-tripping decimal text for a double; "NA" for NaN.
std::string format_number(double v);

/// Writes comma-separated rows; strings are written verbatim.
class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    CsvWriter& header(const std::vector<std::string>& cols);
    CsvWriter& field(std::string_view s);
    CsvWriter& field(double v);
    CsvWriter& field(long long v);
    CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
    CsvWriter& field(Index v) { return field(static_cast<long long>(v)); }
    void end_row();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace permsel
