#include "lfcap/lf_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>

#include <json.hpp>

#include "lfcap/binary.hpp"

namespace fs = std::filesystem;

namespace lfcap {

Image8 read_png(const fs::path& path)
{
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw IoError("cannot read PNG " + path.string() + ": " + image.message);

    Image8 out;
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    out.height = image.height;
    out.width = image.width;
    out.channels = color ? 3 : 1;
    out.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
    }
    return out;
}

void write_png(const Image8& img, const fs::path& path)
{
    if (img.channels != 1 && img.channels != 3)
        throw ValidationError("PNG output needs 1 or 3 channels");
    if (img.pixels.size() != img.height * img.width * img.channels)
        throw ValidationError("PNG pixel buffer size mismatch");
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr))
        throw IoError("cannot write PNG " + path.string() + ": " + image.message);
}

void write_lf_binary(const LightField& lf, const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    const auto& s = lf.shape();
    out.write("LF4D", 4);
    binary::write_u32(out, kLfFormatVersion);
    for (std::size_t d : {s.M, s.N, s.H, s.W, s.C})
        binary::write_u32(out, static_cast<std::uint32_t>(d));
    binary::write_f32s(out, lf.data());
    if (!out)
        throw IoError("write failed for " + path.string());
}

LightField read_lf_binary(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    binary::expect_magic(in, "LF4D");
    const auto version = binary::read_u32(in, "version");
    if (version != kLfFormatVersion)
        throw IoError("unsupported LF4D version " + std::to_string(version));
    LfShape s;
    s.M = binary::read_u32(in, "M");
    s.N = binary::read_u32(in, "N");
    s.H = binary::read_u32(in, "H");
    s.W = binary::read_u32(in, "W");
    s.C = binary::read_u32(in, "C");
    try {
        validate_shape(s);
    } catch (const ValidationError& e) {
        throw IoError("malformed LF4D header in " + path.string() + ": " + e.what());
    }
    std::vector<float> data(s.size());
    binary::read_f32s(in, data, "LF4D samples");
    return LightField(s, std::move(data));
}

namespace {

std::string view_name(std::size_t u, std::size_t v)
{
    return "view_" + std::to_string(u) + "_" + std::to_string(v) + ".png";
}

std::uint8_t quantize(float v)
{
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

} // namespace

void write_lf_image_grid(const LightField& lf, const fs::path& dir)
{
    fs::create_directories(dir);
    const auto& s = lf.shape();
    nlohmann::json manifest = {{"M", s.M}, {"N", s.N}, {"H", s.H}, {"W", s.W}, {"channels", s.C}};
    {
        std::ofstream out(dir / "manifest.json");
        if (!out)
            throw IoError("cannot write manifest in " + dir.string());
        out << manifest.dump(2) << "\n";
    }
    for (std::size_t u = 0; u < s.M; ++u)
        for (std::size_t v = 0; v < s.N; ++v) {
            Image8 img{s.H, s.W, s.C, {}};
            const auto sai = lf.view(u, v);
            img.pixels.resize(sai.size());
            std::transform(sai.begin(), sai.end(), img.pixels.begin(), quantize);
            write_png(img, dir / view_name(u, v));
        }
}

LightField read_lf_image_grid(const fs::path& dir)
{
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in)
        throw IoError("missing manifest.json in " + dir.string());
    LfShape s;
    try {
        const auto manifest = nlohmann::json::parse(in);
        s.M = manifest.at("M").get<std::size_t>();
        s.N = manifest.at("N").get<std::size_t>();
        s.H = manifest.at("H").get<std::size_t>();
        s.W = manifest.at("W").get<std::size_t>();
        s.C = manifest.value("channels", std::size_t{1});
        validate_shape(s);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }

    static const std::regex view_pattern(R"(view_\d+_\d+\.png)");
    std::size_t view_files = 0;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() &&
            std::regex_match(entry.path().filename().string(), view_pattern))
            ++view_files;
    if (view_files != s.views())
        throw IoError("dimension mismatch in " + dir.string() + ": manifest declares " +
                      std::to_string(s.M) + "x" + std::to_string(s.N) + " views but " +
                      std::to_string(view_files) + " view files are present");

    std::vector<float> data(s.size());
    for (std::size_t u = 0; u < s.M; ++u)
        for (std::size_t v = 0; v < s.N; ++v) {
            const fs::path p = dir / view_name(u, v);
            if (!fs::exists(p))
                throw IoError("dimension mismatch: missing " + p.string());
            const Image8 img = read_png(p);
            if (img.height != s.H || img.width != s.W)
                throw IoError("dimension mismatch: " + p.string() + " is " +
                              std::to_string(img.height) + "x" + std::to_string(img.width) +
                              ", manifest says " + std::to_string(s.H) + "x" +
                              std::to_string(s.W));
            for (std::size_t x = 0; x < s.H; ++x)
                for (std::size_t y = 0; y < s.W; ++y)
                    for (std::size_t c = 0; c < s.C; ++c) {
                        const auto* px = &img.pixels[(x * s.W + y) * img.channels];
                        float value = 0.0f;
                        if (img.channels == 1)
                            value = px[0];
                        else if (s.C == 3)
                            value = px[c];
                        else // Rec.601 luma
                            value = std::round(0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2]);
                        data[canonical_index(s, u, v, x, y, c)] = value / 255.0f;
                    }
        }
    return LightField(s, std::move(data));
}

LightField read_lf(const fs::path& path)
{
    if (fs::is_directory(path))
        return read_lf_image_grid(path);
    return read_lf_binary(path);
}

void write_lf(const LightField& lf, const fs::path& path)
{
    if (fs::is_directory(path) || !path.has_extension())
        write_lf_image_grid(lf, path);
    else
        write_lf_binary(lf, path);
}

} // namespace lfcap
