#include "vseg/kvfile.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vseg/errors.hpp"

namespace vseg {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

KvFile KvFile::parse(const std::string& text) {
    KvFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw FormatError("kvfile: line " + std::to_string(lineno) + " has no '=': " + t);
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw FormatError("kvfile: line " + std::to_string(lineno) + " has empty key");
        kv.set(key, value);
    }
    return kv;
}

KvFile KvFile::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

void KvFile::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(key, value);
}

void KvFile::set_int(const std::string& key, long long v) { set(key, std::to_string(v)); }
void KvFile::set_uint(const std::string& key, unsigned long long v) { set(key, std::to_string(v)); }

void KvFile::set_double(const std::string& key, double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    set(key, ss.str());
}

const std::string* KvFile::find(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return &v;
    return nullptr;
}

bool KvFile::has(const std::string& key) const { return find(key) != nullptr; }

const std::string& KvFile::require(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) throw FormatError("kvfile: missing key '" + key + "'");
    return *v;
}

long long KvFile::require_int(const std::string& key) const {
    const std::string& s = require(key);
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw FormatError("kvfile: key '" + key + "' is not an integer: " + s);
    return v;
}

unsigned long long KvFile::require_uint(const std::string& key) const {
    const std::string& s = require(key);
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0' || s.find('-') != std::string::npos)
        throw FormatError("kvfile: key '" + key + "' is not an unsigned integer: " + s);
    return v;
}

double KvFile::require_double(const std::string& key) const {
    const std::string& s = require(key);
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw FormatError("kvfile: key '" + key + "' is not a number: " + s);
    return v;
}

std::string KvFile::get_or(const std::string& key, const std::string& fallback) const {
    const std::string* v = find(key);
    return v ? *v : fallback;
}

std::vector<long long> KvFile::require_ints(const std::string& key, size_t count) const {
    std::istringstream ss(require(key));
    std::vector<long long> out;
    long long v;
    while (ss >> v) out.push_back(v);
    if (out.size() != count)
        throw FormatError("kvfile: key '" + key + "' needs " + std::to_string(count) + " integers");
    return out;
}

std::vector<double> KvFile::require_doubles(const std::string& key, size_t count) const {
    std::istringstream ss(require(key));
    std::vector<double> out;
    double v;
    while (ss >> v) out.push_back(v);
    if (out.size() != count)
        throw FormatError("kvfile: key '" + key + "' needs " + std::to_string(count) + " numbers");
    return out;
}

std::string KvFile::serialize() const {
    std::ostringstream ss;
    for (const auto& [k, v] : entries_) ss << k << " = " << v << "\n";
    return ss.str();
}

void KvFile::save(const std::filesystem::path& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << serialize();
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace vseg
