#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cgrips/cgr.hpp"
#include "cgrips/rips.hpp"

namespace cgrips {

enum class CoordinateFrame {
    fixed_unit_box,    // world [-1,1]^2 always maps to the same canvas area
    per_sequence_bbox  // each image is scaled to its own bounding box
};

struct RenderConfig {
    int image_size = 224;
    double margin_frac = 0.05;
    int vertex_radius = 2;
    std::uint8_t background = 255;
    std::uint8_t ink = 0;
    std::uint8_t triangle_fill = 160;
    CoordinateFrame frame = CoordinateFrame::fixed_unit_box;

    // Throws InputError unless image_size >= 32, 0 <= margin_frac < 0.5 and
    // vertex_radius >= 1.
    void validate() const;
};

struct PixelPoint {
    int col = 0;
    int row = 0;
    friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

// Square 8-bit grayscale raster, row-major.
class ImageGrid {
public:
    ImageGrid() = default;
    ImageGrid(int size, std::uint8_t fill);

    int size() const noexcept { return size_; }
    std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
    std::span<std::uint8_t> pixels() noexcept { return pixels_; }

    std::uint8_t at(int col, int row) const { return pixels_[index(col, row)]; }
    // Darkest wins: stores min(current, value). Out-of-canvas writes are dropped.
    void ink(int col, int row, std::uint8_t value);

    std::size_t count_not_equal(std::uint8_t value) const;

    friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

private:
    std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(size_) +
               static_cast<std::size_t>(col);
    }

    int size_ = 0;
    std::vector<std::uint8_t> pixels_;
};

// Affine world-to-pixel mapping for one image. Under fixed_unit_box,
// world x = -1 lands at `margin` and x = +1 at `size - margin`; y is flipped.
class PixelMapper {
public:
    PixelMapper(const RenderConfig& cfg, std::span<const Point2> coords);
    double col_of(double x) const noexcept { return offset_x_ + scale_ * x; }
    double row_of(double y) const noexcept { return offset_y_ - scale_ * y; }
    PixelPoint operator()(Point2 p) const;

private:
    double scale_ = 1.0;
    double offset_x_ = 0.0;
    double offset_y_ = 0.0;
    int size_ = 0;
};

// Triangles, then edges (1 px, endpoint-inclusive integer line), then vertex
// discs. coords.size() must equal complex.vertex_count.
ImageGrid render_complex(const RipsComplex& complex, std::span<const Point2> coords,
                         const RenderConfig& cfg = {});

// Integer midpoint line between two pixels, both endpoints included.
void draw_line(ImageGrid& img, PixelPoint a, PixelPoint b, std::uint8_t value);
// Every pixel within `radius` (Euclidean, integer test) of the centre.
void draw_disc(ImageGrid& img, PixelPoint centre, int radius, std::uint8_t value);
// Pixels whose centre lies inside or on the triangle.
void fill_triangle(ImageGrid& img, PixelPoint a, PixelPoint b, PixelPoint c, std::uint8_t value);

// 8-bit grayscale PNG: no interlacing, no filtering, zlib level 9, no
// timestamp or text chunks.
std::vector<std::uint8_t> encode_png(const ImageGrid& img);
ImageGrid decode_png(std::span<const std::uint8_t> bytes);
void write_image(const ImageGrid& img, const std::filesystem::path& path);
ImageGrid read_image(const std::filesystem::path& path);

// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
inline std::string content_hash(const ImageGrid& img) { return sha256_hex(img.pixels()); }

}  // namespace cgrips
