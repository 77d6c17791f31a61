#include "svem/dataset.hpp"

#include "svem/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace svem {

void Dataset::check_length(std::size_t n) {
    if (!columns_.empty() && n != n_rows_) {
        throw DataError("column length " + std::to_string(n) + " does not match dataset rows " +
                        std::to_string(n_rows_));
    }
    n_rows_ = n;
}

void Dataset::add_numeric(std::string name, std::vector<double> values) {
    if (has(name)) throw DataError("duplicate column '" + name + "'");
    check_length(values.size());
    Column col;
    col.name = std::move(name);
    col.kind = ColumnKind::numeric;
    col.numbers = std::move(values);
    columns_.push_back(std::move(col));
}

void Dataset::add_categorical(std::string name, std::vector<std::string> labels, std::vector<std::string> levels) {
    if (has(name)) throw DataError("duplicate column '" + name + "'");
    check_length(labels.size());
    if (levels.empty()) {
        levels = labels;
        std::sort(levels.begin(), levels.end());
        levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    }
    Column col;
    col.name = std::move(name);
    col.kind = ColumnKind::categorical;
    col.labels = std::move(labels);
    col.levels = std::move(levels);
    columns_.push_back(std::move(col));
}

void Dataset::set_numeric(const std::string& name, std::vector<double> values) {
    for (auto& col : columns_) {
        if (col.name == name) {
            if (values.size() != n_rows_) throw DataError("column length mismatch for '" + name + "'");
            col.kind = ColumnKind::numeric;
            col.labels.clear();
            col.levels.clear();
            col.numbers = std::move(values);
            return;
        }
    }
    add_numeric(name, std::move(values));
}

bool Dataset::has(const std::string& name) const {
    return std::any_of(columns_.begin(), columns_.end(), [&](const Column& c) { return c.name == name; });
}

const Column& Dataset::column(const std::string& name) const {
    for (const auto& col : columns_) {
        if (col.name == name) return col;
    }
    throw DataError("missing column '" + name + "'");
}

const std::vector<double>& Dataset::numeric(const std::string& name) const {
    const auto& col = column(name);
    if (col.kind != ColumnKind::numeric) throw DataError("column '" + name + "' is not numeric");
    return col.numbers;
}

std::vector<std::string> Dataset::names() const {
    std::vector<std::string> out;
    for (const auto& c : columns_) out.push_back(c.name);
    return out;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
    Dataset out;
    for (const auto& col : columns_) {
        if (col.kind == ColumnKind::numeric) {
            std::vector<double> v;
            v.reserve(rows.size());
            for (auto r : rows) v.push_back(col.numbers.at(r));
            out.add_numeric(col.name, std::move(v));
        } else {
            std::vector<std::string> v;
            v.reserve(rows.size());
            for (auto r : rows) v.push_back(col.labels.at(r));
            out.add_categorical(col.name, std::move(v), col.levels);
        }
    }
    out.n_rows_ = rows.size();
    return out;
}

std::string Dataset::cell_text(std::size_t col, std::size_t row) const {
    const auto& c = columns_.at(col);
    return c.kind == ColumnKind::numeric ? format_double(c.numbers[row]) : c.labels[row];
}

std::string format_double(double value) {
    if (std::isnan(value)) return "NA";
    if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

bool parse_double(const std::string& token, double& value) {
    if (token == "NA" || token == "NaN" || token == "nan") {
        value = std::nan("");
        return true;
    }
    if (token == "Inf" || token == "inf") {
        value = HUGE_VAL;
        return true;
    }
    if (token == "-Inf" || token == "-inf") {
        value = -HUGE_VAL;
        return true;
    }
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (first != last && *first == '+') ++first;
    if (first == last) return false;
    auto res = std::from_chars(first, last, value);
    return res.ec == std::errc() && res.ptr == last;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

Dataset Dataset::parse_csv(std::istream& in, const std::set<std::string>& categorical) {
    std::string line;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> cells;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto fields = split_csv_line(line);
        if (header.empty()) {
            header = std::move(fields);
            if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
            cells.resize(header.size());
            continue;
        }
        if (fields.size() != header.size()) {
            throw DataError("CSV row has " + std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(header.size()));
        }
        for (std::size_t j = 0; j < fields.size(); ++j) cells[j].push_back(std::move(fields[j]));
    }
    if (header.empty()) throw DataError("CSV input has no header row");
    Dataset data;
    for (std::size_t j = 0; j < header.size(); ++j) {
        std::vector<double> numbers;
        bool is_numeric = !categorical.contains(header[j]);
        if (is_numeric) {
            numbers.reserve(cells[j].size());
            for (const auto& tok : cells[j]) {
                double v;
                if (!parse_double(tok, v)) {
                    is_numeric = false;
                    break;
                }
                numbers.push_back(v);
            }
        }
        if (is_numeric) {
            data.add_numeric(header[j], std::move(numbers));
        } else {
            data.add_categorical(header[j], std::move(cells[j]));
        }
    }
    return data;
}

Dataset Dataset::read_csv(const std::string& path, const std::set<std::string>& categorical) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return parse_csv(in, categorical);
}

void Dataset::write_csv(std::ostream& out, const std::vector<std::string>& comments) const {
    for (const auto& c : comments) out << "# " << c << '\n';
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        if (j) out << ',';
        out << csv_escape(columns_[j].name);
    }
    out << '\n';
    for (std::size_t i = 0; i < n_rows_; ++i) {
        for (std::size_t j = 0; j < columns_.size(); ++j) {
            if (j) out << ',';
            out << csv_escape(cell_text(j, i));
        }
        out << '\n';
    }
}

void Dataset::write_csv(const std::string& path, const std::vector<std::string>& comments) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_csv(out, comments);
}

}  // namespace svem
