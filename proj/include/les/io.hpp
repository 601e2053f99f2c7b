#pragma once
#include <string>
#include <vector>
#include <les/tuning.hpp>

namespace les {

struct CsvTable
{
    Matrix X;
    Vector y;
    std::vector<std::string> names;
};

/**
 * Reads a comma-separated numeric file with a header row. Columns other
 * than `response` form X in header order. Throws DataError naming the row
 * and column of any empty or non-numeric cell, on duplicate header names,
 * or when fewer than 2 rows are present.
 */
CsvTable ingest_csv(const std::string& path, const std::string& response);

struct GroupMap
{
    GroupPartition groups;
    std::vector<std::string> labels;
};

/**
 * Reads a two-column "variable,group" file. Groups are numbered in order
 * of first appearance of their labels. Every name in `columns` must be
 * mapped exactly once and no unknown name may appear. An optional header
 * line "variable,group" is skipped.
 */
GroupMap ingest_group_map(const std::string& path, const std::vector<std::string>& columns);

/// Per-group weights from "group,weight" lines, ordered like `labels`.
Vector ingest_weights(const std::string& path, const std::vector<std::string>& labels);

/// 12 significant digits, "-0" printed as "0".
std::string format_number(double v);

struct Section
{
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

enum class OutputFormat
{
    csv,
    structured_text,
};

/**
 * csv: each section is a "# name" line, a header and its rows.
 * structured_text: "name:" followed by one "- key: value" block per row.
 */
std::string render(const std::vector<Section>& sections, OutputFormat format);

/// Writes to a temporary sibling and renames it over `path`.
void write_atomic(const std::string& path, const std::string& content);

/// Comma-separated list of reals; throws ConfigError on bad tokens.
std::vector<double> parse_real_list(const std::string& text);

} // namespace les
