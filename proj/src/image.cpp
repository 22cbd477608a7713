#include "rankdehaze/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

namespace rankdehaze::image {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageIoError("cannot open '" + path.string() + "'");
  return f;
}

struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3 after alpha stripping
  std::vector<float> values;
};

void png_error_to_exception(png_structp png, png_const_charp message) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = message;
  png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

RawImage read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_to_exception,
                                           png_warning_ignore);
  if (!png) throw ImageIoError("libpng: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  RawImage raw;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("'" + path.string() + "': " + error);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  raw.width = static_cast<int>(width);
  raw.height = static_cast<int>(height);
  raw.channels = channels;
  raw.values.resize(static_cast<std::size_t>(width) * height * channels);
  const std::size_t n = raw.values.size();
  if (depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t y = i / (static_cast<std::size_t>(width) * channels);
      const std::size_t off = i % (static_cast<std::size_t>(width) * channels);
      const png_bytep p = rows[y] + 2 * off;
      raw.values[i] = static_cast<float>((p[0] << 8) | p[1]) / 65535.0f;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t y = i / (static_cast<std::size_t>(width) * channels);
      const std::size_t off = i % (static_cast<std::size_t>(width) * channels);
      raw.values[i] = static_cast<float>(rows[y][off]) / 255.0f;
    }
  }
  return raw;
}

// Binary PNM (P5 gray / P6 RGB) header token, skipping comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

RawImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open '" + path.string() + "'");
  const std::string magic = pnm_token(in);
  if (magic != "P6" && magic != "P5") {
    throw ImageIoError("'" + path.string() + "': unsupported PNM type '" + magic + "'");
  }
  RawImage raw;
  try {
    raw.width = std::stoi(pnm_token(in));
    raw.height = std::stoi(pnm_token(in));
    const int maxval = std::stoi(pnm_token(in));
    if (raw.width <= 0 || raw.height <= 0 || maxval <= 0 || maxval > 65535) {
      throw ImageIoError("bad header values");
    }
    raw.channels = magic == "P6" ? 3 : 1;
    const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height * raw.channels;
    const int bytes_per = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> bytes(n * bytes_per);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw ImageIoError("truncated pixel data");
    raw.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int v = bytes_per == 2 ? (bytes[2 * i] << 8) | bytes[2 * i + 1] : bytes[i];
      raw.values[i] = static_cast<float>(v) / static_cast<float>(maxval);
    }
  } catch (const std::invalid_argument&) {
    throw ImageIoError("'" + path.string() + "': malformed PNM header");
  } catch (const ImageIoError& e) {
    throw ImageIoError("'" + path.string() + "': " + e.what());
  }
  return raw;
}

RawImage read_raw(const std::filesystem::path& path) {
  unsigned char sig[8] = {};
  {
    FilePtr f = open_file(path, "rb");
    const std::size_t got = std::fread(sig, 1, sizeof(sig), f.get());
    if (got == 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
    if (got < 2 || sig[0] != 'P') {
      throw ImageIoError("'" + path.string() + "': not a PNG or binary PPM/PGM file");
    }
  }
  return read_pnm(path);
}

void write_png(const std::filesystem::path& path, int width, int height, int channels, int depth,
               const std::vector<png_byte>& bytes) {
  FilePtr file = open_file(path, "wb");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_to_exception,
                                            png_warning_ignore);
  if (!png) throw ImageIoError("libpng: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  const std::size_t stride = static_cast<std::size_t>(width) * channels * (depth / 8);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(bytes.data()) + y * stride;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("'" + path.string() + "': " + error);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::uint16_t quantize(float v, float scale) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * scale));
}

}  // namespace

RgbImage::RgbImage(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw std::invalid_argument("negative image size");
  data_.resize(pixels() * 3);
  for (std::size_t i = 0; i < pixels(); ++i) {
    for (int c = 0; c < 3; ++c) data_[i * 3 + c] = fill[c];
  }
}

void RgbImage::clamp01() {
  for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
}

Plane::Plane(int width, int height, float fill)
    : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
  if (width < 0 || height < 0) throw std::invalid_argument("negative plane size");
}

bool same_size(const RgbImage& a, const RgbImage& b) {
  return a.width() == b.width() && a.height() == b.height();
}
bool same_size(const RgbImage& a, const Plane& b) {
  return a.width() == b.width() && a.height() == b.height();
}
bool same_size(const Plane& a, const Plane& b) {
  return a.width() == b.width() && a.height() == b.height();
}

Plane luminance(const RgbImage& image) {
  Plane out(image.width(), image.height());
  const auto& d = image.data();
  for (std::size_t i = 0; i < image.pixels(); ++i) {
    out.data()[i] = 0.299f * d[3 * i] + 0.587f * d[3 * i + 1] + 0.114f * d[3 * i + 2];
  }
  return out;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

nn::Tensor<float> extract_patch(const RgbImage& image, int x0, int y0, int size) {
  if (image.empty()) throw std::invalid_argument("extract_patch: empty image");
  nn::Tensor<float> patch({3, size, size});
  for (int dy = 0; dy < size; ++dy) {
    const int y = reflect_index(y0 + dy, image.height());
    for (int dx = 0; dx < size; ++dx) {
      const int x = reflect_index(x0 + dx, image.width());
      for (int c = 0; c < 3; ++c) patch.at(c, dy, dx) = image.at(x, y, c);
    }
  }
  return patch;
}

RgbImage read_image(const std::filesystem::path& path) {
  const RawImage raw = read_raw(path);
  RgbImage img(raw.width, raw.height);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) {
      img.data()[3 * i + c] = raw.values[i * raw.channels + (raw.channels == 3 ? c : 0)];
    }
  }
  return img;
}

Plane read_plane(const std::filesystem::path& path) {
  const RawImage raw = read_raw(path);
  if (raw.channels == 3) return luminance(read_image(path));
  Plane p(raw.width, raw.height);
  p.data() = raw.values;
  return p;
}

void write_image(const std::filesystem::path& path, const RgbImage& image) {
  const std::size_t n = image.pixels() * 3;
  std::vector<png_byte> bytes(n);
  for (std::size_t i = 0; i < n; ++i) bytes[i] = static_cast<png_byte>(quantize(image.data()[i], 255.f));
  if (path.extension() == ".png") {
    write_png(path, image.width(), image.height(), 3, 8, bytes);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageIoError("cannot open '" + path.string() + "' for writing");
  out << "P6\n" << image.width() << " " << image.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (!out) throw ImageIoError("write failed for '" + path.string() + "'");
}

void write_plane_png16(const std::filesystem::path& path, const Plane& plane) {
  std::vector<png_byte> bytes(plane.pixels() * 2);
  for (std::size_t i = 0; i < plane.pixels(); ++i) {
    const std::uint16_t v = quantize(plane.data()[i], 65535.f);
    bytes[2 * i] = static_cast<png_byte>(v >> 8);
    bytes[2 * i + 1] = static_cast<png_byte>(v & 0xff);
  }
  write_png(path, plane.width(), plane.height(), 1, 16, bytes);
}

bool is_image_file(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

}  // namespace rankdehaze::image
