#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace vseg {

// Plain "key = value" text files, one pair per line. Used for volume
// headers, run configs, dataset manifests and checkpoint descriptors.
// '#' starts a comment, blank lines are skipped, order is preserved.
class KvFile {
public:
    KvFile() = default;

    static KvFile parse(const std::string& text);
    static KvFile load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    void set_int(const std::string& key, long long v);
    void set_uint(const std::string& key, unsigned long long v);
    void set_double(const std::string& key, double v);

    bool has(const std::string& key) const;

    // require_* throw FormatError when the key is missing or unparsable.
    const std::string& require(const std::string& key) const;
    long long require_int(const std::string& key) const;
    unsigned long long require_uint(const std::string& key) const;
    double require_double(const std::string& key) const;

    std::string get_or(const std::string& key, const std::string& fallback) const;

    // Whitespace-separated numeric lists, e.g. "512 512 64".
    std::vector<long long> require_ints(const std::string& key, size_t count) const;
    std::vector<double> require_doubles(const std::string& key, size_t count) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    std::string serialize() const;
    void save(const std::filesystem::path& path) const;

private:
    const std::string* find(const std::string& key) const;

    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace vseg
