#pragma once

// Minimal delimited-text helpers shared by every reader and writer.
// Doubles are written in shortest round-trip form so that intermediate
// files reproduce in-memory values bit for bit.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "busghg/error.hpp"

namespace busghg::csv {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
        s.remove_suffix(1);
    }
    return s;
}

/// Split one line into fields. Double-quoted fields (RFC 4180 style, with
/// "" as an escaped quote) are supported; `out` is reused between calls.
inline void split(std::string_view line, char delim, std::vector<std::string>& out) {
    out.clear();
    if (line.find('"') == std::string_view::npos) {
        std::size_t start = 0;
        while (true) {
            const auto pos = line.find(delim, start);
            if (pos == std::string_view::npos) {
                out.emplace_back(line.substr(start));
                return;
            }
            out.emplace_back(line.substr(start, pos - start));
            start = pos + 1;
        }
    }
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delim) {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
}

inline std::vector<std::string> split(std::string_view line, char delim = ',') {
    std::vector<std::string> out;
    split(line, delim, out);
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    if (s.empty()) {
        return std::nullopt;
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || std::isnan(value)) {
        return std::nullopt;
    }
    return value;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    if (s.empty()) {
        return std::nullopt;
    }
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return value;
}

inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline bool needs_quoting(std::string_view field, char delim) {
    return field.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string_view::npos;
}

/// Row-at-a-time writer with quoting for fields that need it.
class Writer {
public:
    explicit Writer(std::ostream& os, char delim = ',') : os_(os), delim_(delim) {}

    Writer& field(std::string_view s) {
        sep();
        if (needs_quoting(s, delim_)) {
            os_ << '"';
            for (char c : s) {
                if (c == '"') {
                    os_ << '"';
                }
                os_ << c;
            }
            os_ << '"';
        } else {
            os_ << s;
        }
        return *this;
    }
    Writer& field(const std::string& s) { return field(std::string_view(s)); }
    Writer& field(const char* s) { return field(std::string_view(s)); }
    Writer& field(double v) {
        sep();
        os_ << format_double(v);
        return *this;
    }
    template <class Int>
        requires std::is_integral_v<Int>
    Writer& field(Int v) {
        sep();
        os_ << v;
        return *this;
    }
    void end_row() {
        os_ << '\n';
        first_ = true;
    }

    template <class... Fields>
    void row(const Fields&... fields) {
        (field(fields), ...);
        end_row();
    }

private:
    void sep() {
        if (!first_) {
            os_ << delim_;
        }
        first_ = false;
    }

    std::ostream& os_;
    char delim_;
    bool first_ = true;
};

/// Reads a small CSV file with a mandatory header. Lines starting with '#'
/// and blank lines are skipped. Throws DataError when the header differs from
/// `expected_header` (when given) so stage mismatches fail loudly.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    std::vector<std::string> comments;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        throw DataError("missing column '" + std::string(name) + "'");
    }
};

/// Streams data rows to `fn(fields, line_number)`; returns the header.
/// Comment lines go to `comments` when given.
template <class Fn>
std::vector<std::string> for_each_row(std::istream& in, const std::string& source,
                                      const std::vector<std::string>& expected_header, Fn&& fn,
                                      std::vector<std::string>* comments = nullptr) {
    std::vector<std::string> header;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    std::vector<std::string> fields;
    while (std::getline(in, line)) {
        ++lineno;
        const auto view = trim(line);
        if (view.empty()) {
            continue;
        }
        if (view.front() == '#') {
            if (comments) {
                comments->emplace_back(trim(view.substr(1)));
            }
            continue;
        }
        split(view, ',', fields);
        for (auto& f : fields) {
            if (!f.empty() && (std::isspace(static_cast<unsigned char>(f.front())) ||
                               std::isspace(static_cast<unsigned char>(f.back())))) {
                f = std::string(trim(f));
            }
        }
        if (!have_header) {
            header = fields;
            have_header = true;
            if (!expected_header.empty() && header != expected_header) {
                std::string want;
                for (const auto& h : expected_header) {
                    want += (want.empty() ? "" : ",") + h;
                }
                throw DataError("schema mismatch in " + source + ": expected header '" + want + "'");
            }
            continue;
        }
        if (fields.size() != header.size()) {
            throw DataError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(fields.size()));
        }
        fn(static_cast<const std::vector<std::string>&>(fields), lineno);
    }
    if (in.bad()) {
        throw DataError("I/O error while reading " + source);
    }
    if (!have_header) {
        throw DataError(source + ": missing header row");
    }
    return header;
}

inline Table read_table(std::istream& in, const std::string& source,
                        const std::vector<std::string>& expected_header = {}) {
    Table table;
    table.header = for_each_row(
        in, source, expected_header,
        [&](const std::vector<std::string>& fields, std::size_t lineno) {
            table.rows.push_back(fields);
            table.line_numbers.push_back(lineno);
        },
        &table.comments);
    return table;
}

inline Table read_table_file(const std::string& path, const std::vector<std::string>& expected_header = {}) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    return read_table(in, path, expected_header);
}

inline double require_double(const Table& t, std::size_t row, std::size_t col, const std::string& source) {
    const auto v = parse_double(t.rows[row][col]);
    if (!v) {
        throw DataError(source + ":" + std::to_string(t.line_numbers[row]) + ": column '" + t.header[col] +
                        "' is not a number: '" + t.rows[row][col] + "'");
    }
    return *v;
}

inline std::int64_t require_int(const Table& t, std::size_t row, std::size_t col, const std::string& source) {
    const auto v = parse_int(t.rows[row][col]);
    if (!v) {
        throw DataError(source + ":" + std::to_string(t.line_numbers[row]) + ": column '" + t.header[col] +
                        "' is not an integer: '" + t.rows[row][col] + "'");
    }
    return *v;
}

/// One data row with enough context for error messages.
struct Row {
    const std::vector<std::string>& fields;
    const std::vector<std::string>& header;
    std::size_t line_number;
    const std::string& source;

    std::string where() const { return source + ":" + std::to_string(line_number); }

    double number(std::size_t col) const {
        const auto v = parse_double(fields[col]);
        if (!v) {
            throw DataError(where() + ": column '" + header[col] + "' is not a number: '" + fields[col] + "'");
        }
        return *v;
    }

    std::int64_t integer(std::size_t col) const {
        const auto v = parse_int(fields[col]);
        if (!v) {
            throw DataError(where() + ": column '" + header[col] + "' is not an integer: '" + fields[col] + "'");
        }
        return *v;
    }
};

/// Opens `path` and streams its rows as Row objects.
template <class Fn>
void for_each_file_row(const std::string& path, const std::vector<std::string>& expected_header, Fn&& fn,
                       std::vector<std::string>* comments = nullptr) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    std::vector<std::string> header = expected_header;
    for_each_row(
        in, path, expected_header,
        [&](const std::vector<std::string>& fields, std::size_t lineno) { fn(Row{fields, header, lineno, path}); },
        comments);
}

}  // namespace busghg::csv
