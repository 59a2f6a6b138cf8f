#pragma once
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace kgcot {

/// Minimal RFC-4180 style CSV reading: comma separator, double-quoted fields
/// with doubled-quote escapes. Records must not span lines (embedded newlines
/// inside quotes are rejected), which keeps error line numbers meaningful.
class CsvReader {
public:
    explicit CsvReader(std::istream& in, std::string source_name = "<stream>");

    /// Reads the next record. Empty lines are skipped. Returns nullopt at EOF.
    /// Throws IngestError on quoting errors, naming the offending line.
    std::optional<std::vector<std::string>> next();

    /// 1-based line number of the record last returned by next().
    std::size_t line_number() const { return line_; }

    const std::string& source_name() const { return source_; }

private:
    std::istream& in_;
    std::string source_;
    std::size_t line_ = 0;
};

/// Parses one CSV line into fields; throws IngestError on unbalanced quotes.
std::vector<std::string> parse_csv_line(const std::string& line,
                                        const std::string& source_name,
                                        std::size_t line_number);

/// Writes one CSV record, quoting fields that need it.
std::string format_csv_record(const std::vector<std::string>& fields);

} // namespace kgcot
