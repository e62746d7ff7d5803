#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace spm {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& context);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(const std::string& name) const;  // throws if missing
};

CsvTable parse_csv(const std::string& text, const std::string& source);
CsvTable read_csv(const std::string& path);
std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& content);

// `key = value` lines; '#' and ';' start comments; [section] headers prefix
// keys as "section.key".  Duplicate keys are an error.
struct KeyValueFile {
    std::string source;
    std::map<std::string, std::string> values;
    std::map<std::string, int> lines;

    static KeyValueFile parse(const std::string& text, const std::string& source);
    static KeyValueFile load(const std::string& path);

    bool has(const std::string& key) const { return values.count(key) != 0; }
    const std::string& get(const std::string& key) const;  // throws if missing
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    long get_int_or(const std::string& key, long fallback) const;
    std::vector<double> get_double_list_or(const std::string& key, const std::vector<double>& fallback) const;
};

std::string sha256_hex(const std::string& content);

}  // namespace spm
