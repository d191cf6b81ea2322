// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specray/framebuffer.hpp"

namespace specray {

// PFM, 32-bit little-endian RGB, rows bottom-to-top: the bit-exact comparison
// format. Pixels are linear (calibrated-matrix) RGB, no transfer function.
void write_pfm(const std::string& path, const Framebuffer& fb);
std::vector<float> pfm_pixels(const Framebuffer& fb); // row-major top-down, 3 floats per pixel
struct PfmImage {
    int width = 0, height = 0;
    std::vector<float> rgb; // row-major top-down
};
PfmImage read_pfm(const std::string& path);

// 8-bit sRGB PNG for viewing.
void write_png_rgb8(const std::string& path, const Framebuffer& fb);

// Grayscale PNG helpers for distribution maps (bit depth 8 or 16).
struct GrayImage {
    int width = 0, height = 0;
    int bit_depth = 8;                 // 8 or 16
    std::vector<uint16_t> pixels;      // row-major, raw sample values
};
void write_png_gray(const std::string& path, const GrayImage& img);
GrayImage read_png_gray(const std::string& path);

// Raw spectral dump: header {u32 width, u32 height, u32 band_count},
// then row-major band-major f32 samples, all little-endian.
void write_spectral_dump(const std::string& path, const Framebuffer& fb);

} // namespace specray
