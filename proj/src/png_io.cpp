#include "matforge/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace matforge {

namespace {

void put_u32(std::string& s, uint32_t v) {
    s.push_back(char((v >> 24) & 0xff));
    s.push_back(char((v >> 16) & 0xff));
    s.push_back(char((v >> 8) & 0xff));
    s.push_back(char(v & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void write_chunk(std::ofstream& f, const char type[4], const std::string& payload) {
    std::string head;
    put_u32(head, uint32_t(payload.size()));
    f.write(head.data(), 4);
    f.write(type, 4);
    f.write(payload.data(), std::streamsize(payload.size()));
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(payload.data()), uInt(payload.size()));
    std::string tail;
    put_u32(tail, uint32_t(crc));
    f.write(tail.data(), 4);
}

unsigned char encode_byte(float v, bool gamma_encode) {
    double x = v < 0.0f ? 0.0 : (v > 1.0f ? 1.0 : double(v));
    if (gamma_encode) x = std::pow(x, 1.0 / 2.2);
    return static_cast<unsigned char>(std::lround(x * 255.0));
}

} // namespace

void write_png(const std::string& path, const ImagePlane& img, bool gamma_encode) {
    if (img.channels != 1 && img.channels != 3)
        throw Error("io-failure", "png writer supports 1 or 3 channels");
    const int color_type = img.channels == 3 ? 2 : 0;

    // filter 0 per scanline; fixed zlib level keeps output byte-stable
    std::string raw;
    raw.reserve(size_t(img.res) * (size_t(img.res) * img.channels + 1));
    for (int y = 0; y < img.res; ++y) {
        raw.push_back('\0');
        for (int x = 0; x < img.res; ++x)
            for (int c = 0; c < img.channels; ++c)
                raw.push_back(char(encode_byte(img.at(x, y, c), gamma_encode)));
    }
    uLongf comp_cap = compressBound(uLong(raw.size()));
    std::string comp(comp_cap, '\0');
    if (compress2(reinterpret_cast<Bytef*>(comp.data()), &comp_cap,
                  reinterpret_cast<const Bytef*>(raw.data()), uLong(raw.size()), 6) != Z_OK)
        throw Error("io-failure", "png deflate failed");
    comp.resize(comp_cap);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("io-failure", "cannot open for writing: " + path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::string ihdr;
    put_u32(ihdr, uint32_t(img.res));
    put_u32(ihdr, uint32_t(img.res));
    ihdr.push_back(8);                // bit depth
    ihdr.push_back(char(color_type)); // gray or rgb
    ihdr.push_back(0);                // deflate
    ihdr.push_back(0);                // adaptive filtering
    ihdr.push_back(0);                // no interlace
    write_chunk(f, "IHDR", ihdr);
    write_chunk(f, "IDAT", comp);
    write_chunk(f, "IEND", "");
    if (!f) throw Error("io-failure", "write failed: " + path);
}

ImagePlane read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("io-failure", "cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() < 8 || std::memcmp(p, sig, 8) != 0)
        throw Error("io-failure", "not a png file: " + path);

    size_t pos = 8;
    uint32_t width = 0, height = 0;
    int bit_depth = 0, color_type = 0, interlace = 0;
    std::string idat;
    while (pos + 8 <= bytes.size()) {
        const uint32_t len = get_u32(p + pos);
        const char* type = bytes.data() + pos + 4;
        if (pos + 12 + len > bytes.size()) throw Error("io-failure", "truncated png chunk: " + path);
        const unsigned char* payload = p + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            width = get_u32(payload);
            height = get_u32(payload + 4);
            bit_depth = payload[8];
            color_type = payload[9];
            interlace = payload[12];
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.append(reinterpret_cast<const char*>(payload), len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (width == 0 || width != height) throw Error("io-failure", "png must be square: " + path);
    if (bit_depth != 8 || interlace != 0)
        throw Error("io-failure", "png reader supports 8-bit non-interlaced only: " + path);
    int src_ch;
    switch (color_type) {
        case 0: src_ch = 1; break;
        case 2: src_ch = 3; break;
        case 4: src_ch = 2; break;
        case 6: src_ch = 4; break;
        default: throw Error("io-failure", "unsupported png color type: " + path);
    }

    const size_t stride = size_t(width) * src_ch;
    std::vector<unsigned char> raw(height * (stride + 1));
    uLongf raw_len = uLongf(raw.size());
    if (uncompress(raw.data(), &raw_len, reinterpret_cast<const Bytef*>(idat.data()),
                   uLong(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw Error("io-failure", "png inflate failed: " + path);

    // undo scanline filters in place
    std::vector<unsigned char> img(height * stride);
    const int bpp = src_ch;
    for (uint32_t y = 0; y < height; ++y) {
        const unsigned char filter = raw[y * (stride + 1)];
        const unsigned char* src = raw.data() + y * (stride + 1) + 1;
        unsigned char* dst = img.data() + y * stride;
        const unsigned char* prev = y > 0 ? img.data() + (y - 1) * stride : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            const int a = i >= size_t(bpp) ? dst[i - bpp] : 0;
            const int b = prev ? prev[i] : 0;
            const int c = (prev && i >= size_t(bpp)) ? prev[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: {
                    const int pp = a + b - c;
                    const int pa = std::abs(pp - a), pb = std::abs(pp - b), pc = std::abs(pp - c);
                    v += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
                    break;
                }
                default: throw Error("io-failure", "bad png filter: " + path);
            }
            dst[i] = static_cast<unsigned char>(v & 0xff);
        }
    }

    const int out_ch = src_ch >= 3 ? 3 : 1;
    ImagePlane out(int(width), out_ch);
    for (uint32_t y = 0; y < height; ++y)
        for (uint32_t x = 0; x < width; ++x)
            for (int c = 0; c < out_ch; ++c)
                out.at(int(x), int(y), c) = float(img[y * stride + x * src_ch + c]) / 255.0f;
    return out;
}

} // namespace matforge
