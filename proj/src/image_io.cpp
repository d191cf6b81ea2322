// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#include "specray/image_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "specray/errors.hpp"
#include "specray/math.hpp"

namespace specray {

double max_relative_deviation(const Framebuffer& a, const Framebuffer& b, double floor) {
    if (a.width != b.width || a.height != b.height)
        return kInfinity;
    double worst = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        for (int j = 0; j < kBandCount; ++j) {
            double x = a.pixels[i][j];
            double y = b.pixels[i][j];
            double denom = std::max({std::abs(x), std::abs(y), floor});
            worst = std::max(worst, std::abs(x - y) / denom);
        }
    }
    return worst;
}

std::vector<float> pfm_pixels(const Framebuffer& fb) {
    std::vector<float> out;
    out.reserve(fb.pixel_count() * 3);
    for (int y = 0; y < fb.height; ++y) {
        for (int x = 0; x < fb.width; ++x) {
            LinearRgb rgb = xyz_to_linear_rgb(spectrum_to_xyz(fb.at(x, y)));
            out.push_back(static_cast<float>(rgb.r));
            out.push_back(static_cast<float>(rgb.g));
            out.push_back(static_cast<float>(rgb.b));
        }
    }
    return out;
}

void write_pfm(const std::string& path, const Framebuffer& fb) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidData("cannot write PFM: " + path);
    out << "PF\n" << fb.width << " " << fb.height << "\n-1.0\n"; // -1: little-endian
    std::vector<float> px = pfm_pixels(fb);
    // PFM stores rows bottom-to-top.
    for (int y = fb.height - 1; y >= 0; --y)
        out.write(reinterpret_cast<const char*>(px.data() + static_cast<size_t>(y) * fb.width * 3),
                  static_cast<std::streamsize>(sizeof(float) * 3 * fb.width));
}

PfmImage read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidData("cannot open PFM: " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    if (magic != "PF" || w <= 0 || h <= 0 || scale >= 0.0)
        throw InvalidData("unsupported PFM header in " + path);
    in.get(); // single whitespace after the header
    PfmImage img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<size_t>(w) * h * 3);
    for (int y = h - 1; y >= 0; --y)
        in.read(reinterpret_cast<char*>(img.rgb.data() + static_cast<size_t>(y) * w * 3),
                static_cast<std::streamsize>(sizeof(float) * 3 * w));
    if (!in) throw InvalidData("truncated PFM: " + path);
    return img;
}

namespace {

uint32_t crc32_of(const uint8_t* data, size_t len, uint32_t seed = 0) {
    return static_cast<uint32_t>(::crc32(seed, data, static_cast<uInt>(len)));
}

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void write_chunk(std::ofstream& out, const char type[4], const std::vector<uint8_t>& payload) {
    std::vector<uint8_t> head;
    put_u32_be(head, static_cast<uint32_t>(payload.size()));
    out.write(reinterpret_cast<const char*>(head.data()), 4);
    uint8_t tb[4] = {static_cast<uint8_t>(type[0]), static_cast<uint8_t>(type[1]),
                     static_cast<uint8_t>(type[2]), static_cast<uint8_t>(type[3])};
    out.write(reinterpret_cast<const char*>(tb), 4);
    if (!payload.empty())
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size()));
    uint32_t crc = crc32_of(tb, 4);
    crc = crc32_of(payload.data(), payload.size(), crc);
    std::vector<uint8_t> tail;
    put_u32_be(tail, crc);
    out.write(reinterpret_cast<const char*>(tail.data()), 4);
}

void write_png(const std::string& path, int width, int height, int bit_depth, int color_type,
               const std::vector<uint8_t>& raster, int bytes_per_pixel) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidData("cannot write PNG: " + path);
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(width));
    put_u32_be(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(static_cast<uint8_t>(bit_depth));
    ihdr.push_back(static_cast<uint8_t>(color_type));
    ihdr.push_back(0); // deflate
    ihdr.push_back(0); // filter method 0
    ihdr.push_back(0); // no interlace
    write_chunk(out, "IHDR", ihdr);

    // Filter byte 0 in front of every row.
    size_t stride = static_cast<size_t>(width) * bytes_per_pixel;
    std::vector<uint8_t> filtered;
    filtered.reserve((stride + 1) * height);
    for (int y = 0; y < height; ++y) {
        filtered.push_back(0);
        filtered.insert(filtered.end(), raster.begin() + static_cast<long>(y * stride),
                        raster.begin() + static_cast<long>((y + 1) * stride));
    }

    uLongf bound = compressBound(static_cast<uLong>(filtered.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, filtered.data(), static_cast<uLong>(filtered.size()),
                  6) != Z_OK)
        throw InvalidData("PNG deflate failed: " + path);
    compressed.resize(bound);
    write_chunk(out, "IDAT", compressed);
    write_chunk(out, "IEND", {});
}

} // namespace

void write_png_rgb8(const std::string& path, const Framebuffer& fb) {
    std::vector<uint8_t> raster;
    raster.reserve(fb.pixel_count() * 3);
    for (int y = 0; y < fb.height; ++y)
        for (int x = 0; x < fb.width; ++x) {
            Rgb8 px = xyz_to_srgb8(spectrum_to_xyz(fb.at(x, y)));
            raster.push_back(px.r);
            raster.push_back(px.g);
            raster.push_back(px.b);
        }
    write_png(path, fb.width, fb.height, 8, 2, raster, 3);
}

void write_png_gray(const std::string& path, const GrayImage& img) {
    if (img.bit_depth != 8 && img.bit_depth != 16)
        throw InvalidArgument("gray PNG bit depth must be 8 or 16");
    std::vector<uint8_t> raster;
    if (img.bit_depth == 8) {
        for (uint16_t v : img.pixels) raster.push_back(static_cast<uint8_t>(v & 0xFF));
        write_png(path, img.width, img.height, 8, 0, raster, 1);
    } else {
        for (uint16_t v : img.pixels) { // 16-bit samples are big-endian in PNG
            raster.push_back(static_cast<uint8_t>(v >> 8));
            raster.push_back(static_cast<uint8_t>(v & 0xFF));
        }
        write_png(path, img.width, img.height, 16, 0, raster, 2);
    }
}

namespace {

uint32_t read_u32_be(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace

GrayImage read_png_gray(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidData("cannot open PNG: " + path);
    std::vector<uint8_t> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (file.size() < 8 || std::memcmp(file.data(), sig, 8) != 0)
        throw InvalidData("not a PNG file: " + path);

    GrayImage img;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    bool saw_ihdr = false;
    while (pos + 8 <= file.size()) {
        uint32_t len = read_u32_be(&file[pos]);
        std::string type(reinterpret_cast<const char*>(&file[pos + 4]), 4);
        if (pos + 12 + len > file.size()) throw InvalidData("truncated PNG: " + path);
        const uint8_t* payload = &file[pos + 8];
        if (type == "IHDR") {
            img.width = static_cast<int>(read_u32_be(payload));
            img.height = static_cast<int>(read_u32_be(payload + 4));
            img.bit_depth = payload[8];
            int color_type = payload[9];
            if (color_type != 0 || (img.bit_depth != 8 && img.bit_depth != 16))
                throw InvalidData(path + ": distribution maps must be 8- or 16-bit grayscale PNG");
            if (payload[12] != 0) throw InvalidData(path + ": interlaced PNG not supported");
            saw_ihdr = true;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (!saw_ihdr || idat.empty()) throw InvalidData("malformed PNG: " + path);

    int bpp = img.bit_depth / 8;
    size_t stride = static_cast<size_t>(img.width) * bpp;
    std::vector<uint8_t> raw((stride + 1) * img.height);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw InvalidData("PNG inflate failed: " + path);

    // Undo per-row filters.
    std::vector<uint8_t> prev(stride, 0);
    std::vector<uint8_t> row(stride);
    img.pixels.resize(static_cast<size_t>(img.width) * img.height);
    for (int y = 0; y < img.height; ++y) {
        const uint8_t* src = raw.data() + static_cast<size_t>(y) * (stride + 1);
        uint8_t filter = src[0];
        for (size_t i = 0; i < stride; ++i) {
            int x = src[1 + i];
            int a = i >= static_cast<size_t>(bpp) ? row[i - bpp] : 0;
            int b = prev[i];
            int c = i >= static_cast<size_t>(bpp) ? prev[i - bpp] : 0;
            switch (filter) {
                case 0: break;
                case 1: x += a; break;
                case 2: x += b; break;
                case 3: x += (a + b) / 2; break;
                case 4: x += paeth(a, b, c); break;
                default: throw InvalidData("PNG: unknown filter type in " + path);
            }
            row[i] = static_cast<uint8_t>(x & 0xFF);
        }
        for (int xpx = 0; xpx < img.width; ++xpx) {
            uint16_t v = img.bit_depth == 8
                             ? row[xpx]
                             : static_cast<uint16_t>((row[xpx * 2] << 8) | row[xpx * 2 + 1]);
            img.pixels[static_cast<size_t>(y) * img.width + xpx] = v;
        }
        prev = row;
    }
    return img;
}

void write_spectral_dump(const std::string& path, const Framebuffer& fb) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidData("cannot write spectral dump: " + path);
    uint32_t header[3] = {static_cast<uint32_t>(fb.width), static_cast<uint32_t>(fb.height),
                          static_cast<uint32_t>(kBandCount)};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    for (const Spectrum& px : fb.pixels) {
        float bands[kBandCount];
        for (int j = 0; j < kBandCount; ++j) bands[j] = static_cast<float>(px[j]);
        out.write(reinterpret_cast<const char*>(bands), sizeof(bands));
    }
}

} // namespace specray
