#include "ctof/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctof {

std::string format_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void RunManifest::set(const std::string& key, const std::string& value) {
    entries.emplace_back(key, value);
}
void RunManifest::set(const std::string& key, double value) { set(key, format_double(value)); }
void RunManifest::set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
void RunManifest::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

void RunManifest::set_input_hash(const std::string& name, const std::string& path) {
    set("hash.in." + name, fnv1a_file_hex(path));
}
void RunManifest::set_output_hash(const std::string& name, const std::string& path) {
    set("hash.out." + name, fnv1a_file_hex(path));
}

void RunManifest::write(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("manifest: cannot open " + path);
    for (const auto& [k, v] : entries) f << k << " = " << v << "\n";
    if (!f) throw std::runtime_error("manifest: write failed for " + path);
}

std::map<std::string, std::string> RunManifest::read(const std::string& path) {
    return parse_config_file(path);
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fnv1a_file_hex(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("hash: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return fnv1a_hex(ss.str());
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::map<std::string, std::string> out;
    std::string line;
    auto trim = [](std::string s) {
        std::size_t a = s.find_first_not_of(" \t\r");
        std::size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(f, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) throw std::runtime_error("config: bad line '" + line + "' in " + path);
        out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return out;
}

std::string iso_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace ctof
