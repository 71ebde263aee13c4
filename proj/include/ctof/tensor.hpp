#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ctof {

// Dense row-major float32 array. Carrier for images, light fields, masks and
// correlation stacks; the last dimension varies fastest.
struct Tensor {
    std::vector<int> dims;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<int> d, float fill = 0.0f);

    static Tensor zeros(std::vector<int> d) { return Tensor(std::move(d), 0.0f); }
    static Tensor full(std::vector<int> d, float v) { return Tensor(std::move(d), v); }

    std::int64_t numel() const;
    int ndim() const { return static_cast<int>(dims.size()); }

    float& operator()(int i) { return data[static_cast<std::size_t>(i)]; }
    float operator()(int i) const { return data[static_cast<std::size_t>(i)]; }
    float& operator()(int i, int j) { return data[idx2(i, j)]; }
    float operator()(int i, int j) const { return data[idx2(i, j)]; }
    float& operator()(int i, int j, int k) { return data[idx3(i, j, k)]; }
    float operator()(int i, int j, int k) const { return data[idx3(i, j, k)]; }
    float& operator()(int i, int j, int k, int l) { return data[idx4(i, j, k, l)]; }
    float operator()(int i, int j, int k, int l) const { return data[idx4(i, j, k, l)]; }

    bool same_shape(const Tensor& o) const { return dims == o.dims; }
    bool all_finite() const;

  private:
    std::size_t idx2(int i, int j) const {
        return static_cast<std::size_t>(i) * dims[1] + j;
    }
    std::size_t idx3(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
    }
    std::size_t idx4(int i, int j, int k, int l) const {
        return ((static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k) * dims[3] + l;
    }
};

// TNS1 container: ASCII header `TNS1 f32 <ndim> <d0> ... <dk>\n` followed by
// raw little-endian IEEE-754 32-bit values, row-major.
void tns_write(const Tensor& t, const std::string& path);
Tensor tns_read(const std::string& path);

// same format embedded in a larger stream (weights containers)
void tns_write_stream(std::ostream& out, const Tensor& t, const std::string& what);
Tensor tns_read_stream(std::istream& in, const std::string& what);

std::string shape_str(const std::vector<int>& dims);

}  // namespace ctof
