#include "xaikit/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace xaikit {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Tensor rgb8_to_tensor(const std::vector<unsigned char>& rgb, std::size_t h, std::size_t w) {
  Tensor out({3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const unsigned char* px = &rgb[(y * w + x) * 3];
      for (std::size_t c = 0; c < 3; ++c) out(c, y, x) = px[c] / 255.0;
    }
  }
  return out;
}

bool has_png_signature(std::FILE* f) {
  unsigned char sig[8];
  const std::size_t got = std::fread(sig, 1, 8, f);
  std::rewind(f);
  return got == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

Tensor load_png(std::FILE* f, const std::string& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestError("cannot initialize PNG reader for " + path);
  }
  std::vector<unsigned char> rgb;
  png_uint_32 w = 0, h = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestError("cannot decode PNG file " + path);
  }
  png_init_io(png, f);
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);

  // Normalize every variant (palette, gray, 16-bit, alpha) to 8-bit RGB.
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  rgb.resize(static_cast<std::size_t>(w) * h * 3);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = rgb.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return rgb8_to_tensor(rgb, h, w);
}

struct JpegErrorMgr {
  jpeg_error_mgr base;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(mgr->jump, 1);
}

Tensor load_jpeg(std::FILE* f, const std::string& path) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IngestError("cannot decode JPEG file " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  const std::size_t w = cinfo.output_width, h = cinfo.output_height;
  std::vector<unsigned char> rgb(w * h * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return rgb8_to_tensor(rgb, h, w);
}

unsigned char to_byte(double v) {
  const double scaled = std::lround(std::min(1.0, std::max(0.0, v)) * 255.0);
  return static_cast<unsigned char>(scaled);
}

std::vector<unsigned char> tensor_to_rgb8(const Tensor& image, std::size_t* out_h, std::size_t* out_w) {
  std::size_t h, w;
  const bool chw = image.rank() == 3;
  if (chw) {
    if (image.dim(0) != 3) throw DimensionError("image tensor must be [3,H,W] or [H,W]");
    h = image.dim(1);
    w = image.dim(2);
  } else if (image.rank() == 2) {
    h = image.dim(0);
    w = image.dim(1);
  } else {
    throw DimensionError("image tensor must be [3,H,W] or [H,W]");
  }
  std::vector<unsigned char> rgb(h * w * 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        rgb[(y * w + x) * 3 + c] = to_byte(chw ? image(c, y, x) : image(y, x));
      }
    }
  }
  *out_h = h;
  *out_w = w;
  return rgb;
}

}  // namespace

Tensor load_image(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IngestError("cannot open image file " + path);
  if (has_png_signature(f.get())) return load_png(f.get(), path);

  unsigned char sig[2] = {0, 0};
  if (std::fread(sig, 1, 2, f.get()) == 2 && sig[0] == 0xFF && sig[1] == 0xD8) {
    std::rewind(f.get());
    return load_jpeg(f.get(), path);
  }
  throw IngestError("file is neither PNG nor JPEG: " + path);
}

void write_png(const std::string& path, const Tensor& image) {
  std::size_t h, w;
  const std::vector<unsigned char> rgb = tensor_to_rgb8(image, &h, &w);

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IngestError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IngestError("cannot initialize PNG writer for " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IngestError("cannot encode PNG file " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
  png_write_info(png, info);
  for (std::size_t y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(rgb.data() + y * w * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_jpeg(const std::string& path, const Tensor& image, int quality) {
  std::size_t h, w;
  std::vector<unsigned char> rgb = tensor_to_rgb8(image, &h, &w);

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IngestError("cannot open " + path + " for writing");
  jpeg_compress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    throw IngestError("cannot encode JPEG file " + path);
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f.get());
  cinfo.image_width = static_cast<JDIMENSION>(w);
  cinfo.image_height = static_cast<JDIMENSION>(h);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    unsigned char* row = rgb.data() + static_cast<std::size_t>(cinfo.next_scanline) * w * 3;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ContractError("resize target dimensions must be positive");
  std::size_t channels, in_h, in_w;
  if (image.rank() == 3) {
    channels = image.dim(0);
    in_h = image.dim(1);
    in_w = image.dim(2);
  } else if (image.rank() == 2) {
    channels = 1;
    in_h = image.dim(0);
    in_w = image.dim(1);
  } else {
    throw DimensionError("resize_bilinear expects [C,H,W] or [H,W]");
  }

  Tensor out(image.rank() == 3 ? Shape{channels, out_h, out_w} : Shape{out_h, out_w});
  const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);

  std::vector<std::size_t> x0(out_w), x1(out_w);
  std::vector<double> fx(out_w);
  for (std::size_t x = 0; x < out_w; ++x) {
    double s = (static_cast<double>(x) + 0.5) * sx - 0.5;
    s = std::min(static_cast<double>(in_w - 1), std::max(0.0, s));
    x0[x] = static_cast<std::size_t>(s);
    x1[x] = std::min(in_w - 1, x0[x] + 1);
    fx[x] = s - static_cast<double>(x0[x]);
  }

  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = image.data() + c * in_h * in_w;
    double* oplane = out.data() + c * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      double s = (static_cast<double>(y) + 0.5) * sy - 0.5;
      s = std::min(static_cast<double>(in_h - 1), std::max(0.0, s));
      const std::size_t y0 = static_cast<std::size_t>(s);
      const std::size_t y1 = std::min(in_h - 1, y0 + 1);
      const double fy = s - static_cast<double>(y0);
      for (std::size_t x = 0; x < out_w; ++x) {
        const double tl = plane[y0 * in_w + x0[x]], tr = plane[y0 * in_w + x1[x]];
        const double bl = plane[y1 * in_w + x0[x]], br = plane[y1 * in_w + x1[x]];
        const double top = tl + (tr - tl) * fx[x];
        const double bottom = bl + (br - bl) * fx[x];
        oplane[y * out_w + x] = top + (bottom - top) * fy;
      }
    }
  }
  return out;
}

}  // namespace xaikit
