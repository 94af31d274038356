#include "permsel/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "permsel/errors.hpp"

namespace permsel {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
    }
    return out;
}

double parse_field(const std::string& f, const std::string& source, std::size_t line, std::size_t col) {
    auto where = [&] { return source + ":" + std::to_string(line) + ": column " + std::to_string(col + 1); };
    if (f.empty() || f == "NA" || f == "na" || f == "NaN" || f == "nan")
        throw DataError(where() + ": missing value (imputation is not supported)");
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v))
        throw DataError(where() + ": cannot parse '" + f + "' as a number");
    return v;
}

}  // namespace

Index Table::column_index(std::string_view key) const {
    for (std::size_t j = 0; j < names.size(); ++j)
        if (names[j] == key) return static_cast<Index>(j);
    Index idx = -1;
    const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
    if (ec == std::errc{} && ptr == key.data() + key.size() && idx >= 0 && idx < values.cols()) return idx;
    throw DataError("response column '" + std::string(key) + "' not found");
}

Table parse_csv(std::istream& in, bool has_header, const std::string& source) {
    Table t;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split_line(line);
        if (has_header && t.names.empty()) {
            t.names = std::move(fields);
            width = t.names.size();
            continue;
        }
        if (width == 0) width = fields.size();
        if (fields.size() != width)
            throw DataError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                            " fields, found " + std::to_string(fields.size()));
        std::vector<double> row(width);
        for (std::size_t j = 0; j < width; ++j) row[j] = parse_field(fields[j], source, lineno, j);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(source + ": no data rows");
    if (!has_header) {
        for (std::size_t j = 0; j < width; ++j) t.names.push_back("c" + std::to_string(j));
    }
    t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) t.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return t;
}

Table read_csv(const std::filesystem::path& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return parse_csv(in, has_header, path.string());
}

Dataset split_response(const Table& table, std::string_view response_column, GlmFamily family) {
    const Index r = table.column_index(response_column);
    const Index p = table.values.cols() - 1;
    if (p < 1) throw DataError("dataset needs at least one predictor column besides the response");
    Dataset d;
    d.predictors.resize(table.values.rows(), p);
    for (Index j = 0, k = 0; j < table.values.cols(); ++j) {
        if (j == r) continue;
        d.predictors.col(k++) = table.values.col(j);
        d.predictor_names.push_back(table.names[static_cast<std::size_t>(j)]);
    }
    d.response = ResponseVector(table.values.col(r), family);
    return d;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

struct CsvWriter::Impl {
    std::ofstream out;
    bool first = true;
};

CsvWriter::CsvWriter(const std::filesystem::path& path) : impl_(std::make_unique<Impl>()) {
    impl_->out.open(path, std::ios::binary);
    if (!impl_->out) throw DataError("cannot write " + path.string());
}

CsvWriter::~CsvWriter() = default;

CsvWriter& CsvWriter::header(const std::vector<std::string>& cols) {
    for (const auto& c : cols) field(std::string_view(c));
    end_row();
    return *this;
}

CsvWriter& CsvWriter::field(std::string_view s) {
    if (!impl_->first) impl_->out << ',';
    impl_->out << s;
    impl_->first = false;
    return *this;
}

CsvWriter& CsvWriter::field(double v) { return field(std::string_view(format_number(v))); }

CsvWriter& CsvWriter::field(long long v) { return field(std::string_view(std::to_string(v))); }

void CsvWriter::end_row() {
    impl_->out << '\n';
    impl_->first = true;
}

}  // namespace permsel
