// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include "stereolab/disparity_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <zlib.h>

#include "stereolab/error.hpp"

namespace stereolab {

namespace {

std::vector<std::uint8_t> read_all(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_all(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("short write to " + path);
}

// ---------------------------------------------------------------------------
// PFM

struct PfmHeader {
    bool color = false;
    int width = 0;
    int height = 0;
    double scale = -1.0;
    size_t data_offset = 0;
};

PfmHeader parse_pfm_header(const std::vector<std::uint8_t>& b, const std::string& path) {
    PfmHeader h;
    size_t p = 0;
    auto token = [&]() {
        while (p < b.size() && std::isspace(b[p])) ++p;
        const size_t start = p;
        while (p < b.size() && !std::isspace(b[p])) ++p;
        if (start == p) throw FormatError(path + ": truncated pfm header", static_cast<long>(start));
        return std::string(b.begin() + static_cast<long>(start), b.begin() + static_cast<long>(p));
    };
    const std::string magic = token();
    if (magic == "PF")
        h.color = true;
    else if (magic != "Pf")
        throw FormatError(path + ": not a pfm file", 0);
    try {
        h.width = std::stoi(token());
        h.height = std::stoi(token());
        h.scale = std::stod(token());
    } catch (const std::exception&) {
        throw FormatError(path + ": bad pfm dimensions/scale", static_cast<long>(p));
    }
    if (h.width <= 0 || h.height <= 0) throw FormatError(path + ": bad pfm dimensions", static_cast<long>(p));
    if (p >= b.size() || !std::isspace(b[p]))
        throw FormatError(path + ": missing whitespace after pfm scale", static_cast<long>(p));
    h.data_offset = p + 1; // exactly one whitespace byte before the raster
    return h;
}

float load_f32(const std::uint8_t* q, bool little) {
    std::uint32_t u = little ? (std::uint32_t(q[0]) | std::uint32_t(q[1]) << 8 | std::uint32_t(q[2]) << 16 |
                                std::uint32_t(q[3]) << 24)
                             : (std::uint32_t(q[3]) | std::uint32_t(q[2]) << 8 | std::uint32_t(q[1]) << 16 |
                                std::uint32_t(q[0]) << 24);
    return std::bit_cast<float>(u);
}

void store_f32_le(float v, std::vector<std::uint8_t>& out) {
    const auto u = std::bit_cast<std::uint32_t>(v);
    out.push_back(static_cast<std::uint8_t>(u & 0xff));
    out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((u >> 24) & 0xff));
}

Tensor read_pfm_any(const std::string& path, bool expect_color) {
    const auto bytes = read_all(path);
    const PfmHeader h = parse_pfm_header(bytes, path);
    if (h.color != expect_color)
        throw FormatError(path + ": expected " + (expect_color ? std::string("PF") : std::string("Pf")), 0);
    const int ch = h.color ? 3 : 1;
    const size_t need = static_cast<size_t>(h.width) * static_cast<size_t>(h.height) * static_cast<size_t>(ch) * 4;
    if (bytes.size() - h.data_offset < need)
        throw FormatError(path + ": pfm raster truncated", static_cast<long>(bytes.size()));
    const bool little = h.scale < 0.0;

    Tensor t = expect_color ? Tensor({3, h.height, h.width}) : Tensor({h.height, h.width});
    const std::uint8_t* q = bytes.data() + h.data_offset;
    for (int row = 0; row < h.height; ++row) {
        const int y = h.height - 1 - row; // bottom-to-top storage
        for (int x = 0; x < h.width; ++x)
            for (int c = 0; c < ch; ++c) {
                const float v = load_f32(q, little);
                q += 4;
                if (expect_color)
                    t(c, y, x) = static_cast<double>(v);
                else
                    t(y, x) = static_cast<double>(v);
            }
    }
    return t;
}

void write_pfm_any(const Tensor& t, const std::string& path, bool color) {
    const int ch = color ? 3 : 1;
    const int height = color ? t.dim(1) : t.dim(0);
    const int width = color ? t.dim(2) : t.dim(1);
    std::ostringstream head;
    head << (color ? "PF" : "Pf") << "\n" << width << " " << height << "\n-1.0\n";
    const std::string hs = head.str();
    std::vector<std::uint8_t> bytes(hs.begin(), hs.end());
    bytes.reserve(bytes.size() + static_cast<size_t>(width) * static_cast<size_t>(height) * static_cast<size_t>(ch) * 4);
    for (int row = 0; row < height; ++row) {
        const int y = height - 1 - row;
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < ch; ++c)
                store_f32_le(static_cast<float>(color ? t(c, y, x) : t(y, x)), bytes);
    }
    write_all(path, bytes);
}

// ---------------------------------------------------------------------------
// PNG, 16-bit grayscale only (the KITTI disparity container)

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

std::uint32_t get_u32be(const std::uint8_t* p) {
    return std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 | std::uint32_t(p[2]) << 8 | std::uint32_t(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& data) {
    put_u32be(out, static_cast<std::uint32_t>(data.size()));
    const size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc =
        crc32(0, reinterpret_cast<const Bytef*>(out.data() + crc_start), static_cast<uInt>(out.size() - crc_start));
    put_u32be(out, static_cast<std::uint32_t>(crc));
}

const std::uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

std::uint8_t paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
    if (pb <= pc) return static_cast<std::uint8_t>(b);
    return static_cast<std::uint8_t>(c);
}

} // namespace

void write_png16(const Tensor& grid, const std::string& path) {
    if (grid.rank() != 2) throw ShapeError("write_png16 expects an HxW grid");
    const int h = grid.dim(0), w = grid.dim(1);

    // Uncompressed scanlines: filter byte 0 + big-endian 16-bit samples.
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<size_t>(h) * (1 + static_cast<size_t>(w) * 2));
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);
        for (int x = 0; x < w; ++x) {
            const double v = grid(y, x);
            if (!(v >= 0.0 && v <= 65535.0)) throw DataError("write_png16: value outside [0, 65535]");
            const auto u = static_cast<std::uint16_t>(std::llround(v));
            raw.push_back(static_cast<std::uint8_t>(u >> 8));
            raw.push_back(static_cast<std::uint8_t>(u & 0xff));
        }
    }

    uLongf comp_cap = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_cap);
    if (compress2(comp.data(), &comp_cap, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw Error("write_png16: deflate failed");
    comp.resize(comp_cap);

    std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);
    std::vector<std::uint8_t> ihdr;
    put_u32be(ihdr, static_cast<std::uint32_t>(w));
    put_u32be(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(16); // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // adaptive filtering
    ihdr.push_back(0);  // no interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", comp);
    append_chunk(out, "IEND", {});
    write_all(path, out);
}

Tensor read_png16(const std::string& path) {
    const auto bytes = read_all(path);
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
        throw FormatError(path + ": not a png file", 0);

    int w = 0, h = 0;
    bool have_ihdr = false;
    std::vector<std::uint8_t> idat;
    size_t p = 8;
    while (p + 8 <= bytes.size()) {
        const std::uint32_t len = get_u32be(bytes.data() + p);
        if (p + 12 + len > bytes.size()) throw FormatError(path + ": truncated png chunk", static_cast<long>(p));
        const char* type = reinterpret_cast<const char*>(bytes.data() + p + 4);
        const std::uint8_t* data = bytes.data() + p + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw FormatError(path + ": bad IHDR length", static_cast<long>(p));
            w = static_cast<int>(get_u32be(data));
            h = static_cast<int>(get_u32be(data + 4));
            const int depth = data[8], color = data[9], interlace = data[12];
            if (depth != 16 || color != 0)
                throw FormatError(path + ": expected 16-bit grayscale png", static_cast<long>(p + 8));
            if (interlace != 0) throw FormatError(path + ": interlaced png unsupported", static_cast<long>(p + 8));
            have_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        p += 12 + len;
    }
    if (!have_ihdr || w <= 0 || h <= 0) throw FormatError(path + ": missing IHDR", 8);

    const size_t stride = static_cast<size_t>(w) * 2;
    const size_t raw_size = static_cast<size_t>(h) * (stride + 1);
    std::vector<std::uint8_t> raw(raw_size);
    uLongf got = static_cast<uLongf>(raw_size);
    const int zrc = uncompress(raw.data(), &got, idat.data(), static_cast<uLong>(idat.size()));
    if (zrc != Z_OK || got != raw_size) throw FormatError(path + ": png inflate failed", static_cast<long>(p));

    // Undo per-scanline filters; bytes-per-pixel is 2.
    Tensor t({h, w});
    std::vector<std::uint8_t> prev(stride, 0), cur(stride);
    for (int y = 0; y < h; ++y) {
        const std::uint8_t* line = raw.data() + static_cast<size_t>(y) * (stride + 1);
        const int filter = line[0];
        for (size_t i = 0; i < stride; ++i) {
            const int x = line[1 + i];
            const int a = i >= 2 ? cur[i - 2] : 0;
            const int b = prev[i];
            const int c = i >= 2 ? prev[i - 2] : 0;
            int v = 0;
            switch (filter) {
            case 0: v = x; break;
            case 1: v = x + a; break;
            case 2: v = x + b; break;
            case 3: v = x + (a + b) / 2; break;
            case 4: v = x + paeth(a, b, c); break;
            default: throw FormatError(path + ": bad png filter type", static_cast<long>(y));
            }
            cur[i] = static_cast<std::uint8_t>(v & 0xff);
        }
        for (int x = 0; x < w; ++x)
            t(y, x) = static_cast<double>((std::uint16_t(cur[static_cast<size_t>(x) * 2]) << 8) |
                                          cur[static_cast<size_t>(x) * 2 + 1]);
        std::swap(prev, cur);
    }
    return t;
}

// ---------------------------------------------------------------------------

Tensor read_disparity(const std::string& path, DisparityFormat format) {
    if (format == DisparityFormat::pfm) return read_pfm_any(path, false);
    Tensor raw = read_png16(path);
    for (std::int64_t i = 0; i < raw.size(); ++i)
        raw[i] = raw[i] == 0.0 ? std::numeric_limits<double>::quiet_NaN() : raw[i] / 256.0;
    return raw;
}

void write_disparity(const Tensor& grid, const std::string& path, DisparityFormat format) {
    if (grid.rank() != 2) throw ShapeError("write_disparity expects an HxW grid");
    if (format == DisparityFormat::pfm) {
        write_pfm_any(grid, path, false);
        return;
    }
    Tensor enc({grid.dim(0), grid.dim(1)});
    for (std::int64_t i = 0; i < grid.size(); ++i) {
        const double v = grid[i];
        if (std::isnan(v)) {
            enc[i] = 0.0; // invalid code
            continue;
        }
        if (!(v >= 0.0 && v < 256.0)) throw DataError("write_disparity: kitti-png16 value outside [0, 256)");
        enc[i] = static_cast<double>(std::llround(v * 256.0));
    }
    write_png16(enc, path);
}

Tensor read_image_pfm(const std::string& path) { return read_pfm_any(path, true); }

void write_image_pfm(const Tensor& image, const std::string& path) {
    if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("write_image_pfm expects a 3xHxW image");
    write_pfm_any(image, path, true);
}

BoolGrid read_mask_pgm(const std::string& path) {
    const auto bytes = read_all(path);
    size_t p = 0;
    auto token = [&]() {
        while (p < bytes.size() && std::isspace(bytes[p])) ++p;
        const size_t start = p;
        while (p < bytes.size() && !std::isspace(bytes[p])) ++p;
        if (start == p) throw FormatError(path + ": truncated pgm header", static_cast<long>(start));
        return std::string(bytes.begin() + static_cast<long>(start), bytes.begin() + static_cast<long>(p));
    };
    if (token() != "P5") throw FormatError(path + ": not a binary pgm", 0);
    const int w = std::stoi(token());
    const int h = std::stoi(token());
    const int maxval = std::stoi(token());
    if (maxval != 255) throw FormatError(path + ": expected 8-bit pgm", static_cast<long>(p));
    ++p; // single whitespace after maxval
    if (bytes.size() - p < static_cast<size_t>(w) * static_cast<size_t>(h))
        throw FormatError(path + ": pgm raster truncated", static_cast<long>(bytes.size()));
    BoolGrid m(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.at(y, x) = bytes[p + static_cast<size_t>(y) * w + x] != 0;
    return m;
}

void write_mask_pgm(const BoolGrid& mask, const std::string& path) {
    std::ostringstream head;
    head << "P5\n" << mask.w << " " << mask.h << "\n255\n";
    const std::string hs = head.str();
    std::vector<std::uint8_t> bytes(hs.begin(), hs.end());
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x) bytes.push_back(mask.at(y, x) ? 255 : 0);
    write_all(path, bytes);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest " + path);
    std::vector<ManifestEntry> out;
    std::string line;
    long lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        ManifestEntry e;
        if (!std::getline(ss, e.sample_id, '\t') || !std::getline(ss, e.style_tag, '\t') ||
            !std::getline(ss, e.left_image, '\t') || !std::getline(ss, e.right_image, '\t') ||
            !std::getline(ss, e.disparity_left, '\t'))
            throw FormatError(path + ": malformed manifest line " + std::to_string(lineno), lineno);
        std::getline(ss, e.disparity_right, '\t');
        std::getline(ss, e.occlusion, '\t');
        out.push_back(std::move(e));
    }
    return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open manifest " + path + " for writing");
    for (const auto& e : entries) {
        f << e.sample_id << '\t' << e.style_tag << '\t' << e.left_image << '\t' << e.right_image << '\t'
          << e.disparity_left << '\t' << (e.disparity_right.empty() ? "-" : e.disparity_right) << '\t'
          << (e.occlusion.empty() ? "-" : e.occlusion) << '\n';
    }
    if (!f) throw DataError("short write to manifest " + path);
}

} // namespace stereolab
