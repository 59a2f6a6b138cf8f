#include "kgcot/csv.hpp"

#include "kgcot/errors.hpp"

#include <istream>
#include <sstream>

namespace kgcot {

CsvReader::CsvReader(std::istream& in, std::string source_name)
    : in_(in), source_(std::move(source_name)) {}

std::optional<std::vector<std::string>> CsvReader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        return parse_csv_line(line, source_, line_);
    }
    return std::nullopt;
}

std::vector<std::string> parse_csv_line(const std::string& line,
                                        const std::string& source_name,
                                        std::size_t line_number) {
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    std::size_t i = 0;
    while (i < line.size()) {
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                    continue;
                }
                in_quotes = false;
                ++i;
                continue;
            }
            field.push_back(c);
            ++i;
            continue;
        }
        if (c == '"' && field.empty()) {
            in_quotes = true;
            ++i;
            continue;
        }
        if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            ++i;
            continue;
        }
        field.push_back(c);
        ++i;
    }
    if (in_quotes) {
        std::ostringstream msg;
        msg << source_name << " line " << line_number << ": unterminated quoted field";
        throw IngestError(msg.str());
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string format_csv_record(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        const std::string& f = fields[i];
        bool needs_quotes = f.find_first_of(",\"\r\n") != std::string::npos;
        if (!needs_quotes) {
            out += f;
            continue;
        }
        out.push_back('"');
        for (char c : f) {
            if (c == '"') out.push_back('"');
            out.push_back(c);
        }
        out.push_back('"');
    }
    return out;
}

} // namespace kgcot
