/*
 * Copyright 2026 The editmine Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "editmine/image.hpp"

#include <png.h>

#include <cstring>
#include <memory>

#include "editmine/common.hpp"

namespace editmine {

std::string image_digest(const Image& img) {
  std::string header = "RGB8:" + std::to_string(img.width) + "x" + std::to_string(img.height) + ":";
  std::vector<std::uint8_t> buf(header.begin(), header.end());
  buf.insert(buf.end(), img.rgb.begin(), img.rgb.end());
  return sha256_hex(std::span<const std::uint8_t>(buf));
}

namespace {

void png_error_fn(png_structp, png_const_charp msg) { throw std::runtime_error(std::string("png: ") + msg); }
void png_warning_fn(png_structp, png_const_charp) {}

struct WriteCtx {
  std::vector<std::uint8_t>* out;
};

void png_write_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* ctx = static_cast<WriteCtx*>(png_get_io_ptr(png));
  ctx->out->insert(ctx->out->end(), data, data + len);
}

void png_flush_fn(png_structp) {}

struct ReadCtx {
  std::span<const std::uint8_t> in;
  std::size_t pos = 0;
};

void png_read_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* ctx = static_cast<ReadCtx*>(png_get_io_ptr(png));
  if (ctx->pos + len > ctx->in.size()) png_error(png, "truncated stream");
  std::memcpy(data, ctx->in.data() + ctx->pos, len);
  ctx->pos += len;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img, int compression_level) {
  if (img.width <= 0 || img.height <= 0 || img.rgb.size() != img.pixel_count() * 3) {
    throw std::invalid_argument("encode_png: malformed image");
  }
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  if (!png) throw std::runtime_error("png: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (!info) throw std::runtime_error("png: cannot create info struct");

  WriteCtx ctx{&out};
  png_set_write_fn(png, &ctx, png_write_fn, png_flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, compression_level);
  png_set_filter(png, 0, PNG_FILTER_SUB);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(img.rgb.data() + stride * y));
  }
  png_write_end(png, nullptr);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw std::runtime_error("png: bad signature");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  if (!png) throw std::runtime_error("png: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  if (!info) throw std::runtime_error("png: cannot create info struct");

  ReadCtx ctx{bytes, 0};
  png_set_read_fn(png, &ctx, png_read_fn);
  png_read_info(png, info);

  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  Image img(static_cast<int>(png_get_image_width(png, info)), static_cast<int>(png_get_image_height(png, info)));
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(img.width) * 3) {
    throw std::runtime_error("png: unexpected row layout");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = img.at(0, y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return img;
}

}  // namespace editmine
