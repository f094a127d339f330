#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace anytime::report {

enum class ReportFormat { Json, Csv };

ReportFormat parse_report_format(std::string_view name);

inline constexpr int kSchemaVersion = 1;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    bool operator==(const Table&) const = default;
};

/// Shortest decimal form that reads back to the same double; "nan"/"inf"/"-inf" for non-finite.
std::string format_number(double v);

std::string to_csv(const Table& table);
Table parse_csv(std::string_view text);
Table read_csv(const std::filesystem::path& path);

/// Writes `content`; throws std::runtime_error naming the path on failure.
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// JSON: `document` with two-space indent. CSV: `table` with a header row.
void emit_report(const nlohmann::ordered_json& document, const Table& table, ReportFormat format,
                 const std::filesystem::path& path);

}  // namespace anytime::report
