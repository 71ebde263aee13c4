#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ctof {

inline constexpr const char* kToolVersion = "0.1.0";

// Ordered key=value record of everything needed to reproduce a run: effective
// config, seed, tool version and input/output content hashes.
struct RunManifest {
    std::vector<std::pair<std::string, std::string>> entries;

    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set(const std::string& key, std::int64_t value);
    void set(const std::string& key, std::uint64_t value);
    void set_input_hash(const std::string& name, const std::string& path);
    void set_output_hash(const std::string& name, const std::string& path);

    void write(const std::string& path) const;
    static std::map<std::string, std::string> read(const std::string& path);
};

std::string fnv1a_hex(const std::string& bytes);
std::string fnv1a_file_hex(const std::string& path);

// plain `key = value` lines; '#' starts a comment
std::map<std::string, std::string> parse_config_file(const std::string& path);

std::string iso_timestamp();

std::string format_double(double v);

}  // namespace ctof
