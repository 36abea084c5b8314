#include "png_codec.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <string>

#include "adisep/errors.hpp"

namespace adisep::detail {

namespace {

struct ReadCursor {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
};

void on_error(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  *err = msg ? msg : "libpng error";
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

void on_read(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + n > cur->data.size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, cur->data.data() + cur->pos, n);
  cur->pos += n;
}

void on_write(png_structp png, png_bytep in, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + n);
}

void on_flush(png_structp) {}

}  // namespace

RawPng decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("not a PNG stream");

  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (!png) throw FormatError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("png_create_info_struct failed");
  }

  ReadCursor cursor{bytes, 0};
  RawPng raw;
  std::vector<std::uint8_t> buffer;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG decode failed: " + err);
  }

  png_set_read_fn(png, &cursor, on_read);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);

  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  raw.had_alpha = (png_get_color_type(png, info) & PNG_COLOR_MASK_ALPHA) != 0;

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * static_cast<std::size_t>(raw.height));
  rows.resize(raw.height);
  for (int y = 0; y < raw.height; ++y) rows[y] = buffer.data() + rowbytes * static_cast<std::size_t>(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = static_cast<std::size_t>(raw.width) * raw.height * raw.channels;
  raw.samples.resize(count);
  if (raw.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      raw.samples[i] = static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) raw.samples[i] = buffer[i];
  }
  return raw;
}

std::vector<std::uint8_t> encode_png(int width, int height, int channels, int bit_depth,
                                     std::span<const std::uint16_t> samples) {
  if (width < 1 || height < 1) throw FormatError("PNG dimensions must be >= 1");
  if (channels != 1 && channels != 3) throw FormatError("PNG writer supports gray or RGB only");
  if (bit_depth != 8 && bit_depth != 16) throw FormatError("PNG writer supports 8 or 16 bits only");
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  if (samples.size() != count) throw FormatError("PNG sample count does not match dimensions");

  const std::size_t bps = bit_depth / 8;
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * bps;
  std::vector<std::uint8_t> buffer(rowbytes * height);
  for (std::size_t i = 0; i < count; ++i) {
    if (bit_depth == 16) {
      buffer[2 * i] = static_cast<std::uint8_t>(samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<std::uint8_t>(samples[i] & 0xff);
    } else {
      buffer[i] = static_cast<std::uint8_t>(samples[i]);
    }
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + rowbytes * static_cast<std::size_t>(y);

  std::string err;
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (!png) throw FormatError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw FormatError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("PNG encode failed: " + err);
  }
  png_set_write_fn(png, &out, on_write, on_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace adisep::detail
