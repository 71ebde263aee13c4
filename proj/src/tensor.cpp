#include "ctof/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctof {

Tensor::Tensor(std::vector<int> d, float fill) : dims(std::move(d)) {
    std::int64_t n = 1;
    for (int e : dims) {
        if (e <= 0) throw std::invalid_argument("Tensor: extents must be positive, got " + shape_str(dims));
        n *= e;
    }
    data.assign(static_cast<std::size_t>(n), fill);
}

std::int64_t Tensor::numel() const {
    std::int64_t n = 1;
    for (int e : dims) n *= e;
    return dims.empty() ? 0 : n;
}

bool Tensor::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string shape_str(const std::vector<int>& dims) {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

namespace {

// Payload stays byte-stable across hosts: floats go through an explicit
// little-endian uint32 encoding.
void put_f32_le(std::string& out, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    out.push_back(static_cast<char>(u & 0xff));
    out.push_back(static_cast<char>((u >> 8) & 0xff));
    out.push_back(static_cast<char>((u >> 16) & 0xff));
    out.push_back(static_cast<char>((u >> 24) & 0xff));
}

float get_f32_le(const unsigned char* p) {
    std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                      (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

}  // namespace

void tns_write_stream(std::ostream& out, const Tensor& t, const std::string& what) {
    if (t.dims.empty()) throw std::invalid_argument("tns_write: empty tensor for " + what);
    if (!t.all_finite()) throw std::invalid_argument("tns_write: non-finite values, refusing to write " + what);

    std::ostringstream header;
    header << "TNS1 f32 " << t.ndim();
    for (int d : t.dims) header << " " << d;
    header << "\n";

    std::string payload;
    payload.reserve(t.data.size() * 4);
    for (float v : t.data) put_f32_le(payload, v);

    out << header.str();
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("tns_write: write failed for " + what);
}

Tensor tns_read_stream(std::istream& f, const std::string& what) {
    std::string header;
    if (!std::getline(f, header)) throw std::runtime_error("tns_read: missing header in " + what);

    std::istringstream hs(header);
    std::string magic, dtype;
    hs >> magic >> dtype;
    if (magic != "TNS1") throw std::runtime_error("tns_read: bad magic '" + magic + "' in " + what);
    if (dtype != "f32") throw std::runtime_error("tns_read: unsupported dtype '" + dtype + "' in " + what);

    int ndim = -1;
    hs >> ndim;
    if (!hs || ndim <= 0) throw std::runtime_error("tns_read: bad ndim in " + what);
    std::vector<int> dims(ndim);
    for (int i = 0; i < ndim; ++i) {
        hs >> dims[i];
        if (!hs || dims[i] <= 0) throw std::runtime_error("tns_read: bad extent in " + what);
    }

    std::int64_t n = 1;
    for (int d : dims) n *= d;

    std::vector<unsigned char> raw(static_cast<std::size_t>(n) * 4);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (f.gcount() != static_cast<std::streamsize>(raw.size()))
        throw std::runtime_error("tns_read: payload size mismatch in " + what + " (expected " +
                                 std::to_string(n) + " values)");

    Tensor t(dims);
    for (std::int64_t i = 0; i < n; ++i)
        t.data[static_cast<std::size_t>(i)] = get_f32_le(&raw[static_cast<std::size_t>(i) * 4]);
    if (!t.all_finite()) throw std::runtime_error("tns_read: non-finite values in " + what);
    return t;
}

void tns_write(const Tensor& t, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("tns_write: cannot open " + path);
    tns_write_stream(f, t, path);
}

Tensor tns_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("tns_read: cannot open " + path);
    Tensor t = tns_read_stream(f, path);
    char extra;
    if (f.read(&extra, 1))
        throw std::runtime_error("tns_read: trailing bytes after payload in " + path);
    return t;
}

}  // namespace ctof
