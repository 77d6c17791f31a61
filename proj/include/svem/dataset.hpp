#pragma once

#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace svem {

enum class ColumnKind { numeric, categorical };

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::vector<double> numbers;       // numeric columns
    std::vector<std::string> labels;   // categorical columns, one per row
    std::vector<std::string> levels;   // categorical columns, sorted unique labels

    std::size_t size() const { return kind == ColumnKind::numeric ? numbers.size() : labels.size(); }
};

/// Named columns of numeric or categorical values, one row per run.
class Dataset {
public:
    Dataset() = default;

    void add_numeric(std::string name, std::vector<double> values);
    /// Levels default to the sorted unique labels.
    void add_categorical(std::string name, std::vector<std::string> labels, std::vector<std::string> levels = {});
    /// Replaces the values of an existing column or appends a new one.
    void set_numeric(const std::string& name, std::vector<double> values);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return columns_.size(); }
    bool has(const std::string& name) const;
    const Column& column(const std::string& name) const;
    const std::vector<Column>& columns() const { return columns_; }
    const std::vector<double>& numeric(const std::string& name) const;
    std::vector<std::string> names() const;

    Dataset select_rows(std::span<const std::size_t> rows) const;
    /// Text of one cell as written to CSV.
    std::string cell_text(std::size_t col, std::size_t row) const;

    /// Columns are numeric unless a non-numeric token appears, or the name is
    /// listed in `categorical`. Lines starting with '#' are skipped.
    static Dataset read_csv(const std::string& path, const std::set<std::string>& categorical = {});
    static Dataset parse_csv(std::istream& in, const std::set<std::string>& categorical = {});
    void write_csv(const std::string& path, const std::vector<std::string>& comments = {}) const;
    void write_csv(std::ostream& out, const std::vector<std::string>& comments = {}) const;

private:
    void check_length(std::size_t n);

    std::vector<Column> columns_;
    std::size_t n_rows_ = 0;
};

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);
/// Parses a full token as a double; returns false on any trailing garbage.
bool parse_double(const std::string& token, double& value);

std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);

}  // namespace svem
