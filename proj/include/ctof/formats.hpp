#pragma once

#include <string>
#include <vector>

#include "ctof/mask.hpp"
#include "ctof/recon.hpp"

namespace ctof {

// Binary PGM (P5) mosaic of the mask patch: U*P rows by V*P columns, block
// (u,v) holding that view's P x P transmittance scaled to [0,255]. Binarized
// patches land on exactly 0/255.
void pgm_write_mosaic(const MaskPatch& patch, const std::string& path);

struct PgmImage {
    int rows = 0;
    int cols = 0;
    int maxval = 255;
    std::vector<unsigned char> bytes;
};
PgmImage pgm_read(const std::string& path);

// ASCII PLY with float x, y, z vertex properties.
void ply_write(const PointCloud& cloud, const std::string& path);
PointCloud ply_read(const std::string& path);

}  // namespace ctof
