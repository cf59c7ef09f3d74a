#include "lfrain/lightfield/io.hpp"

#include "lfrain/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <regex>
#include <string>
#include <vector>

namespace lfrain {

namespace fs = std::filesystem;

Image read_png(const fs::path& file) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, file.string().c_str())) {
        throw FormatError("cannot read " + file.string() + ": " + image.message);
    }
    if (image.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&image);
        throw FormatError(file.string() + " is not an 8-bit image");
    }
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const std::size_t c = color ? 3 : 1;
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        throw FormatError("cannot decode " + file.string() + ": " + image.message);
    }
    Image img(c, image.height, image.width);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t k = 0; k < c; ++k) img.at(k, y, x) = buf[(y * img.width + x) * c + k] / 255.0;
    return img;
}

void write_png(const Image& img, const fs::path& file) {
    if (img.channels != 1 && img.channels != 3) throw ShapeError("png output needs 1 or 3 channels");
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const std::size_t c = img.channels;
    std::vector<png_byte> buf(img.width * img.height * c);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t k = 0; k < c; ++k) {
                const double v = std::clamp(img.at(k, y, x), 0.0, 1.0);
                buf[(y * img.width + x) * c + k] = static_cast<png_byte>(std::lround(v * 255.0));
            }
    if (!png_image_write_to_file(&image, file.string().c_str(), 0, buf.data(), 0, nullptr)) {
        throw FormatError("cannot write " + file.string() + ": " + image.message);
    }
}

LightField read_lfi(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw FormatError("light field directory not found: " + dir.string());
    static const std::regex pattern(R"(view_(\d+)_(\d+)\.png)");
    std::size_t rows = 0, cols = 0;
    bool any = false;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (!std::regex_match(name, m, pattern)) continue;
        rows = std::max<std::size_t>(rows, std::stoul(m[1]) + 1);
        cols = std::max<std::size_t>(cols, std::stoul(m[2]) + 1);
        any = true;
    }
    if (!any) throw FormatError("no view_{u}_{v}.png files in " + dir.string());
    LightField lf;
    for (std::size_t u = 0; u < rows; ++u)
        for (std::size_t v = 0; v < cols; ++v) {
            const std::string name = "view_" + std::to_string(u) + "_" + std::to_string(v) + ".png";
            const fs::path file = dir / name;
            if (!fs::exists(file)) throw FormatError("missing " + name + " in " + dir.string());
            const Image img = read_png(file);
            if (lf.empty()) {
                lf = LightField(rows, cols, img.channels, img.height, img.width);
            } else if (img.channels != lf.channels() || img.height != lf.height() || img.width != lf.width()) {
                throw FormatError(name + " in " + dir.string() + " differs in size or channels from view_0_0.png");
            }
            lf.set_view(u, v, img);
        }
    return lf;
}

void write_lfi(const LightField& lf, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw FormatError("cannot create " + dir.string() + ": " + ec.message());
    for (std::size_t u = 0; u < lf.rows(); ++u)
        for (std::size_t v = 0; v < lf.cols(); ++v)
            write_png(lf.view(u, v), dir / ("view_" + std::to_string(u) + "_" + std::to_string(v) + ".png"));
}

} // namespace lfrain
