#include "spmsens/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spmsens/expr.hpp"

namespace spm {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

}  // namespace

std::string format_double(double v) {
    if (v == 0.0) return "0";
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

// Accepts plain decimals and constant expressions such as "2^-10" or "exp(1)".
double parse_double(const std::string& text, const std::string& context) {
    std::string t = trim(text);
    double v = 0.0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec == std::errc() && res.ptr == t.data() + t.size()) return v;
    try {
        Expr e = parse_expr(t);
        if (e.depends_on(Var::X) || e.depends_on(Var::Y) || e.depends_on(Var::H))
            throw IoError(context + ": expected a number, got '" + t + "'");
        v = e.eval({});
    } catch (const ParseError&) {
        throw IoError(context + ": expected a number, got '" + t + "'");
    }
    if (!std::isfinite(v)) throw IoError(context + ": value is not finite");
    return v;
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    throw IoError("missing CSV column '" + name + "'");
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
    CsvTable t;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string l = trim(line);
        if (l.empty() || l[0] == '#') continue;
        auto cells = split(l, ',');
        if (t.header.empty()) {
            t.header = cells;
            continue;
        }
        if (cells.size() != t.header.size())
            throw IoError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                          " fields, got " + std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw IoError(source + ": empty CSV (no header)");
    return t;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_text(path), path); }

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
}

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& source) {
    KeyValueFile kv;
    kv.source = source;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::size_t c = line.find_first_of("#;");
        std::string l = trim(c == std::string::npos ? line : line.substr(0, c));
        if (l.empty()) continue;
        if (l.front() == '[') {
            if (l.back() != ']') throw IoError(source + ":" + std::to_string(lineno) + ": malformed section header");
            section = trim(l.substr(1, l.size() - 2));
            continue;
        }
        std::size_t eq = l.find('=');
        if (eq == std::string::npos) throw IoError(source + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(l.substr(0, eq));
        if (key.empty()) throw IoError(source + ":" + std::to_string(lineno) + ": empty key");
        if (!section.empty()) key = section + "." + key;
        if (kv.values.count(key)) throw IoError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv.values[key] = trim(l.substr(eq + 1));
        kv.lines[key] = lineno;
    }
    return kv;
}

KeyValueFile KeyValueFile::load(const std::string& path) { return parse(read_text(path), path); }

const std::string& KeyValueFile::get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw IoError(source + ": missing required key '" + key + "'");
    return it->second;
}

std::string KeyValueFile::get_or(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

double KeyValueFile::get_double(const std::string& key) const {
    return parse_double(get(key), source + ":" + std::to_string(lines.at(key)) + ": " + key);
}

double KeyValueFile::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long KeyValueFile::get_int_or(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    double v = get_double(key);
    if (v != std::floor(v) || std::abs(v) > 1e15)
        throw IoError(source + ":" + std::to_string(lines.at(key)) + ": " + key + " must be an integer");
    return static_cast<long>(v);
}

std::vector<double> KeyValueFile::get_double_list_or(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    std::string ctx = source + ":" + std::to_string(lines.at(key)) + ": " + key;
    const std::string& text = get(key);
    if (text.find_first_not_of(" \t") == std::string::npos) return out;  // `key =` is an empty list
    for (const std::string& item : split(text, ',')) {
        if (item.empty()) throw IoError(ctx + ": empty list entry");
        out.push_back(parse_double(item, ctx));
    }
    return out;
}

std::string sha256_hex(const std::string& content) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_Digest(content.data(), content.size(), md.data(), &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

}  // namespace spm
