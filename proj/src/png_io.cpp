#include "masklift/png_io.hpp"

#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

#include "masklift/core.hpp"

namespace masklift {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) {
      std::fclose(f);
    }
  }
};

using FileHandle = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void save_png16(const Image16& image, const std::filesystem::path& path) {
  if (image.rows() < 1 || image.cols() < 1) {
    fail("save_png16: empty image for " + path.string());
  }
  FileHandle file(std::fopen(path.c_str(), "wb"));
  if (!file) {
    fail("save_png16: cannot open " + path.string() + " for writing");
  }
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) {
    fail("save_png16: png_create_write_struct failed");
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    fail("save_png16: png_create_info_struct failed");
  }
  const auto width = static_cast<png_uint_32>(image.cols());
  const auto height = static_cast<png_uint_32>(image.rows());
  std::vector<unsigned char> row(static_cast<std::size_t>(width) * 2);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("save_png16: libpng error while writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  for (Eigen::Index r = 0; r < image.rows(); ++r) {
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      const std::uint16_t value = image(r, c);
      row[static_cast<std::size_t>(c) * 2] =
          static_cast<unsigned char>(value >> 8);
      row[static_cast<std::size_t>(c) * 2 + 1] =
          static_cast<unsigned char>(value & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image16 load_png16(const std::filesystem::path& path) {
  FileHandle file(std::fopen(path.c_str(), "rb"));
  if (!file) {
    fail("load_png16: cannot open " + path.string());
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) {
    fail("load_png16: png_create_read_struct failed");
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("load_png16: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("load_png16: libpng error while reading " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth != 16 || color_type != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("load_png16: " + path.string() + " is not 16-bit grayscale (depth " +
         std::to_string(bit_depth) + ", color type " +
         std::to_string(color_type) + ")");
  }

  Image16 image(static_cast<Eigen::Index>(height),
                static_cast<Eigen::Index>(width));
  std::vector<unsigned char> row(static_cast<std::size_t>(width) * 2);
  for (png_uint_32 r = 0; r < height; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 c = 0; c < width; ++c) {
      image(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          static_cast<std::uint16_t>(
              (static_cast<unsigned>(row[c * 2]) << 8) | row[c * 2 + 1]);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

}  // namespace masklift
