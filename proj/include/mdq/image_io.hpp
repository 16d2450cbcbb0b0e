#pragma once

// 8-bit binary PPM/PGM and PNG reading and writing.

#include <png.h>

#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "mdq/error.hpp"
#include "mdq/image.hpp"

namespace mdq {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), Errc::io, "cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), Errc::io, "cannot create " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), Errc::io, "write failed for " + path);
}

inline Image decode_pnm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&] {
        skip_space();
        require(pos < bytes.size() && std::isdigit(bytes[pos]), Errc::io, "malformed PNM header");
        std::size_t v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
            require(v < (1u << 24), Errc::io, "PNM dimension too large");
        }
        return v;
    };
    require(bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'), Errc::io,
            "only binary P5/P6 images are supported");
    const std::size_t channels = bytes[1] == '6' ? 3 : 1;
    pos = 2;
    const std::size_t w = number(), h = number(), maxval = number();
    require(w > 0 && h > 0, Errc::io, "empty PNM image");
    require(maxval == 255, Errc::io, "only 8-bit PNM (maxval 255) is supported");
    require(pos < bytes.size() && std::isspace(bytes[pos]), Errc::io, "malformed PNM header");
    ++pos;
    require(bytes.size() - pos >= w * h * channels, Errc::io, "PNM pixel data truncated");
    return from_bytes(w, h, channels, std::vector<std::uint8_t>(bytes.begin() + pos, bytes.begin() + pos + w * h * channels));
}

inline std::vector<std::uint8_t> encode_pnm(const Image& img) {
    require(img.channels == 1 || img.channels == 3, Errc::invalid_argument, "PNM needs 1 or 3 channels");
    const std::string head =
        std::string(img.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(head.begin(), head.end());
    const auto px = to_bytes(img);
    out.insert(out.end(), px.begin(), px.end());
    return out;
}

inline Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    require(png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()) != 0, Errc::io,
            std::string("PNG header: ") + png.message);
    const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
    png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const std::size_t channels = color ? 3 : 1;
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(png));
    if (png_image_finish_read(&png, nullptr, px.data(), 0, nullptr) == 0) {
        const std::string msg = png.message;
        png_image_free(&png);
        fail(Errc::io, "PNG decode: " + msg);
    }
    return from_bytes(png.width, png.height, channels, px);
}

inline std::vector<std::uint8_t> encode_png(const Image& img) {
    require(img.channels == 1 || img.channels == 3, Errc::invalid_argument, "PNG needs 1 or 3 channels");
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const auto px = to_bytes(img);
    png_alloc_size_t size = 0;
    require(png_image_write_to_memory(&png, nullptr, &size, 0, px.data(), 0, nullptr) != 0, Errc::io,
            std::string("PNG encode: ") + png.message);
    std::vector<std::uint8_t> out(size);
    require(png_image_write_to_memory(&png, out.data(), &size, 0, px.data(), 0, nullptr) != 0, Errc::io,
            std::string("PNG encode: ") + png.message);
    out.resize(size);
    return out;
}

// Format chosen from the file's signature.
inline Image read_image(const std::string& path) {
    const auto bytes = read_file(path);
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes);
    return decode_pnm(bytes);
}

// Format chosen from the extension: .png, otherwise PPM/PGM.
inline void write_image(const std::string& path, const Image& img) {
    const bool png = path.size() >= 4 && path.compare(path.size() - 4, 4, ".png") == 0;
    write_file(path, png ? encode_png(img) : encode_pnm(img));
}

} // namespace mdq
