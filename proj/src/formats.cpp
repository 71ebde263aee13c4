#include "ctof/formats.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctof {

void pgm_write_mosaic(const MaskPatch& patch, const std::string& path) {
    int U = patch.views_u, V = patch.views_v, P = patch.patch_side;
    int rows = U * P, cols = V * P;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("pgm_write_mosaic: cannot open " + path);
    f << "P5\n";
    f << "# mask mosaic: " << U << "x" << V << " view blocks of " << P << "x" << P
      << " pixels, block (u,v) at rows [u*P,(u+1)*P) cols [v*P,(v+1)*P)\n";
    f << cols << " " << rows << "\n255\n";
    std::vector<unsigned char> bytes(static_cast<std::size_t>(rows) * cols);
    for (int u = 0; u < U; ++u)
        for (int v = 0; v < V; ++v)
            for (int r = 0; r < P; ++r)
                for (int c = 0; c < P; ++c) {
                    double val = std::min(1.0f, std::max(0.0f, patch.values(u, v, r, c)));
                    bytes[static_cast<std::size_t>(u * P + r) * cols + (v * P + c)] =
                        static_cast<unsigned char>(std::lround(val * 255.0));
                }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("pgm_write_mosaic: write failed for " + path);
}

PgmImage pgm_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("pgm_read: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw std::runtime_error("pgm_read: bad magic in " + path);

    auto next_token = [&]() {
        std::string tok;
        while (f >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(f, rest);
                continue;
            }
            return tok;
        }
        throw std::runtime_error("pgm_read: truncated header in " + path);
    };

    PgmImage img;
    img.cols = std::stoi(next_token());
    img.rows = std::stoi(next_token());
    img.maxval = std::stoi(next_token());
    if (img.maxval != 255) throw std::runtime_error("pgm_read: only maxval 255 supported");
    f.get();  // single whitespace after maxval
    img.bytes.resize(static_cast<std::size_t>(img.rows) * img.cols);
    f.read(reinterpret_cast<char*>(img.bytes.data()), static_cast<std::streamsize>(img.bytes.size()));
    if (f.gcount() != static_cast<std::streamsize>(img.bytes.size()))
        throw std::runtime_error("pgm_read: payload truncated in " + path);
    return img;
}

void ply_write(const PointCloud& cloud, const std::string& path) {
    if (cloud.points.ndim() != 2 || cloud.points.dims[1] != 3)
        throw std::invalid_argument("ply_write: cloud must be [N,3]");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("ply_write: cannot open " + path);
    int n = cloud.points.dims[0];
    f << "ply\nformat ascii 1.0\n"
      << "element vertex " << n << "\n"
      << "property float x\nproperty float y\nproperty float z\nend_header\n";
    char line[96];
    for (int i = 0; i < n; ++i) {
        // 9 significant digits keep the float32 round trip lossless
        std::snprintf(line, sizeof(line), "%.9g %.9g %.9g\n", cloud.points(i, 0), cloud.points(i, 1),
                      cloud.points(i, 2));
        f << line;
    }
    if (!f) throw std::runtime_error("ply_write: write failed for " + path);
}

PointCloud ply_read(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("ply_read: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "ply") throw std::runtime_error("ply_read: bad magic in " + path);
    int n = -1;
    bool ascii = false;
    while (std::getline(f, line)) {
        if (line == "end_header") break;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = fmt == "ascii";
        } else if (word == "element") {
            std::string what;
            ls >> what >> n;
            if (what != "vertex") throw std::runtime_error("ply_read: unsupported element " + what);
        }
    }
    if (!ascii || n <= 0) throw std::runtime_error("ply_read: unsupported or empty ply in " + path);
    PointCloud pc;
    pc.points = Tensor({n, 3});
    for (int i = 0; i < n; ++i) {
        float x, y, z;
        if (!(f >> x >> y >> z)) throw std::runtime_error("ply_read: truncated vertex list in " + path);
        pc.points(i, 0) = x;
        pc.points(i, 1) = y;
        pc.points(i, 2) = z;
    }
    return pc;
}

}  // namespace ctof
