#include <les/io.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

namespace les {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& text, double& value)
{
    if (text.empty()) return false;
    const char* begin = text.data();
    const char* end = begin + text.size();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    return ec == std::errc() && ptr == end && std::isfinite(value);
}

std::ifstream open_input(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

/// Non-blank lines with their 1-based line numbers.
std::vector<std::pair<int, std::string>> read_lines(const std::string& path)
{
    auto in = open_input(path);
    std::vector<std::pair<int, std::string>> lines;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!trim(line).empty()) lines.emplace_back(number, line);
    }
    return lines;
}

} // namespace

CsvTable ingest_csv(const std::string& path, const std::string& response)
{
    const auto lines = read_lines(path);
    if (lines.empty()) throw DataError(path + ": missing header row");

    const auto header = split_fields(lines.front().second);
    std::set<std::string> seen;
    Index response_col = -1;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j].empty()) throw DataError(path + ": empty header name in column " + std::to_string(j + 1));
        if (!seen.insert(header[j]).second) throw DataError(path + ": duplicate header name '" + header[j] + "'");
        if (header[j] == response) response_col = static_cast<Index>(j);
    }
    if (response_col < 0) throw DataError(path + ": response column '" + response + "' not found");

    const auto n = static_cast<Index>(lines.size() - 1);
    const auto cols = static_cast<Index>(header.size());
    if (n < 2) throw DataError(path + ": need at least 2 data rows");

    CsvTable table;
    table.X.resize(n, cols - 1);
    table.y.resize(n);
    for (Index j = 0; j < cols; ++j) {
        if (j != response_col) table.names.push_back(header[static_cast<std::size_t>(j)]);
    }
    for (Index i = 0; i < n; ++i) {
        const auto& [number, line] = lines[static_cast<std::size_t>(i + 1)];
        const auto fields = split_fields(line);
        if (static_cast<Index>(fields.size()) != cols) {
            throw DataError(path + ": line " + std::to_string(number) + " has " + std::to_string(fields.size())
                            + " fields, expected " + std::to_string(cols));
        }
        Index out_col = 0;
        for (Index j = 0; j < cols; ++j) {
            const auto& cell = fields[static_cast<std::size_t>(j)];
            double value = 0;
            if (!parse_double(cell, value)) {
                const std::string where = "row " + std::to_string(i + 1) + " (line " + std::to_string(number)
                                          + "), column '" + header[static_cast<std::size_t>(j)] + "'";
                throw DataError(path + ": " + (cell.empty() ? "missing value" : "non-numeric value '" + cell + "'")
                                + " at " + where);
            }
            if (j == response_col) table.y(i) = value;
            else table.X(i, out_col++) = value;
        }
    }
    return table;
}

GroupMap ingest_group_map(const std::string& path, const std::vector<std::string>& columns)
{
    std::map<std::string, Index> column_index;
    for (std::size_t j = 0; j < columns.size(); ++j) column_index[columns[j]] = static_cast<Index>(j);

    GroupMap out;
    std::map<std::string, std::size_t> label_index;
    std::vector<std::vector<Index>> members;
    std::vector<bool> mapped(columns.size(), false);

    auto lines = read_lines(path);
    bool first = true;
    for (const auto& [number, line] : lines) {
        const auto fields = split_fields(line);
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
            throw DataError(path + ": line " + std::to_string(number) + " is not 'variable,group'");
        }
        if (first && fields[0] == "variable" && fields[1] == "group" && !column_index.count("variable")) {
            first = false;
            continue;
        }
        first = false;
        const auto it = column_index.find(fields[0]);
        if (it == column_index.end()) throw DataError(path + ": unknown variable '" + fields[0] + "'");
        auto flag = mapped[static_cast<std::size_t>(it->second)];
        if (flag) throw DataError(path + ": variable '" + fields[0] + "' is mapped more than once");
        flag = true;
        auto [pos, inserted] = label_index.emplace(fields[1], out.labels.size());
        if (inserted) {
            out.labels.push_back(fields[1]);
            members.emplace_back();
        }
        members[pos->second].push_back(it->second);
    }
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (!mapped[j]) throw DataError(path + ": variable '" + columns[j] + "' is not mapped to a group");
    }
    out.groups = GroupPartition(members, static_cast<Index>(columns.size()));
    return out;
}

Vector ingest_weights(const std::string& path, const std::vector<std::string>& labels)
{
    std::map<std::string, double> given;
    for (const auto& [number, line] : read_lines(path)) {
        const auto fields = split_fields(line);
        double w = 0;
        if (fields.size() != 2) throw DataError(path + ": line " + std::to_string(number) + " is not 'group,weight'");
        if (fields[0] == "group" && fields[1] == "weight") continue;
        if (!parse_double(fields[1], w)) {
            throw DataError(path + ": line " + std::to_string(number) + " has non-numeric weight '" + fields[1] + "'");
        }
        if (!given.emplace(fields[0], w).second) throw DataError(path + ": group '" + fields[0] + "' listed twice");
    }
    Vector weights(static_cast<Index>(labels.size()));
    for (std::size_t k = 0; k < labels.size(); ++k) {
        const auto it = given.find(labels[k]);
        if (it == given.end()) throw DataError(path + ": no weight for group '" + labels[k] + "'");
        weights(static_cast<Index>(k)) = it->second;
        given.erase(it);
    }
    if (!given.empty()) throw DataError(path + ": unknown group '" + given.begin()->first + "'");
    return weights;
}

std::string format_number(double v)
{
    if (v == 0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string render(const std::vector<Section>& sections, OutputFormat format)
{
    std::ostringstream out;
    bool first = true;
    for (const auto& s : sections) {
        if (!first) out << '\n';
        first = false;
        if (format == OutputFormat::csv) {
            out << "# " << s.name << '\n';
            for (std::size_t j = 0; j < s.columns.size(); ++j) out << (j ? "," : "") << s.columns[j];
            out << '\n';
            for (const auto& row : s.rows) {
                for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
                out << '\n';
            }
        } else {
            out << s.name << ":\n";
            for (const auto& row : s.rows) {
                for (std::size_t j = 0; j < row.size() && j < s.columns.size(); ++j) {
                    out << (j == 0 ? "  - " : "    ") << s.columns[j] << ": " << row[j] << '\n';
                }
            }
        }
    }
    return out.str();
}

void write_atomic(const std::string& path, const std::string& content)
{
    const std::string tmp = path + ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp);
        out << content;
        out.flush();
        if (!out) {
            out.close();
            std::remove(tmp.c_str());
            throw DataError("write failed for " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw DataError("cannot rename output to " + path + ": " + ec.message());
    }
}

std::vector<double> parse_real_list(const std::string& text)
{
    std::vector<double> out;
    for (const auto& token : split_fields(text)) {
        double v = 0;
        if (!parse_double(token, v)) throw ConfigError("not a number: '" + token + "'");
        out.push_back(v);
    }
    return out;
}

} // namespace les
