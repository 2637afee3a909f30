#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lanecast/core/errors.hpp"

namespace lanecast {

// Shortest representation that parses back to exactly the same double.
// Used for every file this library writes, so identical values always
// serialize to identical bytes.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, std::string_view what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError("bad real value '" + std::string(s) + "' in " + std::string(what));
    return v;
}

inline std::int64_t parse_int(std::string_view s, std::string_view what) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError("bad integer '" + std::string(s) + "' in " + std::string(what));
    return v;
}

// Splits one CSV record on `sep`.  The corpus format never quotes fields,
// so no quote handling is attempted.
inline std::vector<std::string> split_fields(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string::size_type start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.emplace_back(line, start);
            break;
        }
        out.emplace_back(line, start, pos - start);
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

// Header-addressed CSV table.  Columns are looked up by name; columns the
// caller never asks for are simply carried along and ignored.
class CsvTable {
public:
    static CsvTable read_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path);
        CsvTable t;
        t.path_ = path;
        std::string line;
        if (!std::getline(in, line)) throw ParseError(path + " is empty");
        auto header = split_fields(line);
        for (std::size_t i = 0; i < header.size(); ++i) t.index_[header[i]] = i;
        t.header_ = std::move(header);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto fields = split_fields(line);
            if (fields.size() != t.header_.size())
                throw ParseError(path + ": row with " + std::to_string(fields.size()) +
                                 " fields, header has " + std::to_string(t.header_.size()));
            t.rows_.push_back(std::move(fields));
        }
        return t;
    }

    std::size_t column(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw MissingColumn(path_ + ": missing column '" + name + "'");
        return it->second;
    }

    bool has_column(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t row_count() const { return rows_.size(); }
    const std::string& cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }

    double real(std::size_t row, std::size_t col) const {
        return parse_double(rows_[row][col], path_);
    }
    std::int64_t integer(std::size_t row, std::size_t col) const {
        return parse_int(rows_[row][col], path_);
    }

private:
    std::string path_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Row-at-a-time CSV writer with deterministic number formatting.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw IoError("cannot write " + path);
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

}  // namespace lanecast
