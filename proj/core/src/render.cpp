#include "cgrips/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <ranges>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <png.h>

#include "cgrips/error.hpp"

namespace cgrips {

void RenderConfig::validate() const {
    if (image_size < 32) throw InputError(fmt::format("image_size must be >= 32, got {}", image_size));
    if (!(margin_frac >= 0.0 && margin_frac < 0.5))
        throw InputError(fmt::format("margin_frac must lie in [0, 0.5), got {}", margin_frac));
    if (vertex_radius < 1) throw InputError(fmt::format("vertex_radius must be >= 1, got {}", vertex_radius));
}

ImageGrid::ImageGrid(int size, std::uint8_t fill)
    : size_(size), pixels_(static_cast<std::size_t>(size) * static_cast<std::size_t>(size), fill) {}

void ImageGrid::ink(int col, int row, std::uint8_t value) {
    if (col < 0 || row < 0 || col >= size_ || row >= size_) return;
    auto& px = pixels_[index(col, row)];
    px = std::min(px, value);
}

std::size_t ImageGrid::count_not_equal(std::uint8_t value) const {
    return static_cast<std::size_t>(std::ranges::count_if(pixels_, [&](std::uint8_t p) { return p != value; }));
}

PixelMapper::PixelMapper(const RenderConfig& cfg, std::span<const Point2> coords)
    : size_(cfg.image_size) {
    const double size = cfg.image_size;
    const double margin = cfg.margin_frac * size;
    if (cfg.frame == CoordinateFrame::fixed_unit_box || coords.empty()) {
        scale_ = (size - 2.0 * margin) / 2.0;
        offset_x_ = margin + scale_;
        offset_y_ = margin + scale_;
        return;
    }
    auto [min_x, max_x] = std::ranges::minmax(coords | std::views::transform(&Point2::x));
    auto [min_y, max_y] = std::ranges::minmax(coords | std::views::transform(&Point2::y));
    const double extent = std::max(max_x - min_x, max_y - min_y);
    // A single point (or identical points) has no extent; centre it.
    scale_ = extent > 0.0 ? (size - 2.0 * margin) / extent : 0.0;
    offset_x_ = size / 2.0 - scale_ * (min_x + max_x) / 2.0;
    offset_y_ = size / 2.0 + scale_ * (min_y + max_y) / 2.0;
}

PixelPoint PixelMapper::operator()(Point2 p) const {
    auto snap = [&](double v) {
        return std::clamp(static_cast<int>(std::floor(v + 0.5)), 0, size_ - 1);
    };
    return {snap(col_of(p.x)), snap(row_of(p.y))};
}

void draw_line(ImageGrid& img, PixelPoint a, PixelPoint b, std::uint8_t value) {
    int x = a.col, y = a.row;
    const int dx = std::abs(b.col - a.col), sx = a.col < b.col ? 1 : -1;
    const int dy = -std::abs(b.row - a.row), sy = a.row < b.row ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        img.ink(x, y, value);
        if (x == b.col && y == b.row) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y += sy;
        }
    }
}

void draw_disc(ImageGrid& img, PixelPoint centre, int radius, std::uint8_t value) {
    const int r2 = radius * radius;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= r2) img.ink(centre.col + dx, centre.row + dy, value);
}

void fill_triangle(ImageGrid& img, PixelPoint a, PixelPoint b, PixelPoint c, std::uint8_t value) {
    auto edge = [](PixelPoint p, PixelPoint q, int x, int y) -> std::int64_t {
        return static_cast<std::int64_t>(q.col - p.col) * (y - p.row) -
               static_cast<std::int64_t>(q.row - p.row) * (x - p.col);
    };
    if (edge(a, b, c.col, c.row) == 0) return;  // collinear
    const int x0 = std::min({a.col, b.col, c.col}), x1 = std::max({a.col, b.col, c.col});
    const int y0 = std::min({a.row, b.row, c.row}), y1 = std::max({a.row, b.row, c.row});
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const auto w0 = edge(a, b, x, y), w1 = edge(b, c, x, y), w2 = edge(c, a, x, y);
            if ((w0 >= 0 && w1 >= 0 && w2 >= 0) || (w0 <= 0 && w1 <= 0 && w2 <= 0))
                img.ink(x, y, value);
        }
    }
}

ImageGrid render_complex(const RipsComplex& complex, std::span<const Point2> coords,
                         const RenderConfig& cfg) {
    cfg.validate();
    if (coords.size() != complex.vertex_count)
        throw InputError(fmt::format("complex has {} vertices but {} coordinates were given",
                                     complex.vertex_count, coords.size()));
    const PixelMapper to_pixel(cfg, coords);
    std::vector<PixelPoint> px;
    px.reserve(coords.size());
    for (const auto& p : coords) px.push_back(to_pixel(p));

    ImageGrid img(cfg.image_size, cfg.background);
    if (complex.triangles)
        for (const auto& t : *complex.triangles) fill_triangle(img, px[t.i], px[t.j], px[t.k], cfg.triangle_fill);
    for (const auto& e : complex.edges) draw_line(img, px[e.i], px[e.j], cfg.ink);
    for (const auto& p : px) draw_disc(img, p, cfg.vertex_radius, cfg.ink);
    return img;
}

namespace {

struct PngWriteState {
    std::vector<std::uint8_t>* out;
};

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* state = static_cast<PngWriteState*>(png_get_io_ptr(png));
    state->out->insert(state->out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct PngReadState {
    const std::uint8_t* bytes;
    std::size_t size;
    std::size_t offset;
};

void png_read_from_span(png_structp png, png_bytep data, png_size_t length) {
    auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (state->offset + length > state->size) png_error(png, "truncated PNG data");
    std::memcpy(data, state->bytes + state->offset, length);
    state->offset += length;
}

void png_warn(png_structp, png_const_charp) {}

// libpng reports errors by longjmp; these two functions keep nothing with a
// destructor alive between setjmp and the libpng calls.
bool encode_rows(const ImageGrid& img, PngWriteState* state) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_set_write_fn(png, state, png_write_to_vector, png_flush_noop);
    const auto size = static_cast<png_uint_32>(img.size());
    png_set_IHDR(png, info, size, size, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
    png_set_compression_level(png, 9);
    png_set_compression_strategy(png, 0);
    png_write_info(png, info);
    const std::uint8_t* pixels = img.pixels().data();
    for (png_uint_32 row = 0; row < size; ++row)
        png_write_row(png, const_cast<png_bytep>(pixels + static_cast<std::size_t>(row) * size));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

enum class DecodeStatus { ok, failed, not_square, wrong_format };

DecodeStatus decode_rows(PngReadState* state, ImageGrid* img) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
    if (!png) return DecodeStatus::failed;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return DecodeStatus::failed;
    }
    png_set_read_fn(png, state, png_read_from_span);
    png_read_info(png, info);
    const auto width = png_get_image_width(png, info);
    const auto height = png_get_image_height(png, info);
    DecodeStatus status = DecodeStatus::ok;
    if (width != height) status = DecodeStatus::not_square;
    else if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8 ||
             png_get_interlace_type(png, info) != PNG_INTERLACE_NONE)
        status = DecodeStatus::wrong_format;
    if (status == DecodeStatus::ok) {
        *img = ImageGrid(static_cast<int>(width), 0);
        std::uint8_t* pixels = img->pixels().data();
        for (png_uint_32 row = 0; row < height; ++row)
            png_read_row(png, pixels + static_cast<std::size_t>(row) * width, nullptr);
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return status;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ImageGrid& img) {
    std::vector<std::uint8_t> out;
    PngWriteState state{&out};
    if (!encode_rows(img, &state)) throw IoError("png encoding failed");
    return out;
}

ImageGrid decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("not a PNG file");
    PngReadState state{bytes.data(), bytes.size(), 0};
    ImageGrid img;
    switch (decode_rows(&state, &img)) {
        case DecodeStatus::ok: return img;
        case DecodeStatus::not_square: throw IoError("PNG is not square");
        case DecodeStatus::wrong_format: throw IoError("PNG is not 8-bit non-interlaced grayscale");
        case DecodeStatus::failed: break;
    }
    throw IoError("png decoding failed");
}

void write_image(const ImageGrid& img, const std::filesystem::path& path) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

ImageGrid read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot read image {}", path.string()));
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw PipelineError("sha256 digest failed");
    std::string hex;
    hex.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

}  // namespace cgrips
