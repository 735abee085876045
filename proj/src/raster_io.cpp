#include "s3/raster_io.hpp"

#include <png.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace s3 {

static_assert(std::numeric_limits<float>::is_iec559, "PFM I/O assumes IEEE-754 floats");

namespace {

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32_le(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes[at + b]) << (8 * b);
  return v;
}

void put_f32_le(std::vector<std::uint8_t>& out, float f) {
  put_u32_le(out, std::bit_cast<std::uint32_t>(f));
}

float get_f32(std::span<const std::uint8_t> bytes, std::size_t at, bool little_endian) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) {
    const int shift = little_endian ? 8 * b : 8 * (3 - b);
    v |= static_cast<std::uint32_t>(bytes[at + b]) << shift;
  }
  return std::bit_cast<float>(v);
}

bool is_space(std::uint8_t c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; }

struct PfmHeader {
  int channels = 0;
  int width = 0;
  int height = 0;
  bool little_endian = true;
  std::size_t data_offset = 0;
};

// Reads one whitespace-delimited token starting at `pos` (after skipping blanks).
std::string_view next_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size() && is_space(bytes[pos])) ++pos;
  const std::size_t start = pos;
  while (pos < bytes.size() && !is_space(bytes[pos])) ++pos;
  return {reinterpret_cast<const char*>(bytes.data()) + start, pos - start};
}

PfmHeader parse_pfm_header(std::span<const std::uint8_t> bytes) {
  PfmHeader h;
  std::size_t pos = 0;
  const auto magic = next_token(bytes, pos);
  if (magic == "Pf") {
    h.channels = 1;
  } else if (magic == "PF") {
    h.channels = 3;
  } else {
    throw FormatError("malformed header: bad PFM magic", 0);
  }
  auto parse_int = [&](const char* what) {
    std::size_t at = pos;
    while (at < bytes.size() && is_space(bytes[at])) ++at;
    const auto tok = next_token(bytes, pos);
    int v = 0;
    auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || end != tok.data() + tok.size() || v < 1) {
      throw FormatError(std::string("malformed header: bad ") + what, at);
    }
    return v;
  };
  h.width = parse_int("width");
  h.height = parse_int("height");
  std::size_t scale_at = pos;
  while (scale_at < bytes.size() && is_space(bytes[scale_at])) ++scale_at;
  const auto scale_tok = next_token(bytes, pos);
  double scale = 0.0;
  {
    std::string s(scale_tok);
    char* end = nullptr;
    scale = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || scale == 0.0 || !std::isfinite(scale)) {
      throw FormatError("malformed header: bad scale", scale_at);
    }
  }
  h.little_endian = scale < 0.0;
  if (pos >= bytes.size() || !is_space(bytes[pos])) {
    throw FormatError("malformed header: missing separator before payload", pos);
  }
  h.data_offset = pos + 1;
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height * h.channels * 4;
  if (bytes.size() - h.data_offset < need) {
    throw FormatError("truncated payload: expected " + std::to_string(need) + " bytes",
                      bytes.size());
  }
  return h;
}

std::vector<std::uint8_t> pfm_header(const char* magic, int width, int height) {
  std::string header = std::string(magic) + "\n" + std::to_string(width) + " " +
                       std::to_string(height) + "\n-1.0\n";
  return {header.begin(), header.end()};
}

}  // namespace

RasterFormat raster_format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pfm") return RasterFormat::Pfm;
  if (ext == ".png") return RasterFormat::Png16;
  throw Error("cannot infer raster format from '" + path.string() + "'");
}

// PFM stores the bottom row first.
std::vector<std::uint8_t> encode_pfm(const DenseField& field) {
  auto out = pfm_header("Pf", field.width(), field.height());
  out.reserve(out.size() + field.pixel_count() * 4);
  for (int i = field.height() - 1; i >= 0; --i) {
    for (int j = 0; j < field.width(); ++j) {
      const float v = field.valid(i, j) ? static_cast<float>(field.at(i, j))
                                        : std::numeric_limits<float>::infinity();
      put_f32_le(out, v);
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_pfm(const IntensityImage& image) {
  auto out = pfm_header(image.channels() == 3 ? "PF" : "Pf", image.width(), image.height());
  for (int i = image.height() - 1; i >= 0; --i) {
    for (int j = 0; j < image.width(); ++j) {
      for (int c = 0; c < image.channels(); ++c) {
        put_f32_le(out, static_cast<float>(image.at(i, j, c)));
      }
    }
  }
  return out;
}

DenseField decode_pfm_field(std::span<const std::uint8_t> bytes, Representation repr) {
  const auto h = parse_pfm_header(bytes);
  if (h.channels != 1) throw FormatError("malformed header: field rasters are single channel", 0);
  const auto n = static_cast<std::size_t>(h.width) * h.height;
  std::vector<double> values(n, 0.0);
  std::vector<std::uint8_t> valid(n, 0);
  std::size_t at = h.data_offset;
  for (int i = h.height - 1; i >= 0; --i) {
    for (int j = 0; j < h.width; ++j, at += 4) {
      const float v = get_f32(bytes, at, h.little_endian);
      if (std::isinf(v) && v > 0) continue;
      if (std::isnan(v)) throw FormatError("out-of-range value: NaN", at);
      const bool ok = repr == Representation::Unitless ? (v >= 0.0f && v <= 1.0f) : v > 0.0f;
      if (!ok) throw FormatError("out-of-range value " + std::to_string(v), at);
      const auto idx = static_cast<std::size_t>(i) * h.width + j;
      values[idx] = v;
      valid[idx] = 1;
    }
  }
  return DenseField(h.width, h.height, repr, std::move(values), std::move(valid));
}

IntensityImage decode_pfm_image(std::span<const std::uint8_t> bytes) {
  const auto h = parse_pfm_header(bytes);
  std::vector<double> values(static_cast<std::size_t>(h.width) * h.height * h.channels);
  std::size_t at = h.data_offset;
  for (int i = h.height - 1; i >= 0; --i) {
    for (int j = 0; j < h.width; ++j) {
      for (int c = 0; c < h.channels; ++c, at += 4) {
        const float v = get_f32(bytes, at, h.little_endian);
        if (!(v >= 0.0f && v <= 1.0f)) {
          throw FormatError("out-of-range intensity " + std::to_string(v), at);
        }
        values[(static_cast<std::size_t>(i) * h.width + j) * h.channels + c] = v;
      }
    }
  }
  return IntensityImage(h.width, h.height, h.channels, std::move(values));
}

// ---------------------------------------------------------------------------
// 16-bit PNG through libpng. libpng reports errors by longjmp, so the C-level
// work happens in functions without non-trivial locals and the C++ wrappers
// throw afterwards.

namespace {

struct PngStatus {
  char message[256] = {0};
  std::size_t offset = 0;
  png_bytep row = nullptr;  // scratch row, owned here so it survives longjmp
};

struct PngReadState {
  const std::uint8_t* data = nullptr;
  std::size_t size = 0;
  std::size_t pos = 0;
  PngStatus* status = nullptr;
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* status = static_cast<PngStatus*>(png_get_error_ptr(png));
  std::snprintf(status->message, sizeof(status->message), "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

void png_read_fn(png_structp png, png_bytep out, png_size_t len) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->size - st->pos < len) {
    st->status->offset = st->size;
    png_error(png, "truncated payload");
  }
  std::memcpy(out, st->data + st->pos, len);
  st->pos += len;
  st->status->offset = st->pos;
}

// Returns false on error; `pixels` receives width*height raw 16-bit values.
bool decode_png16_raw(const std::uint8_t* data, std::size_t size, PngStatus* status,
                      std::uint32_t* width, std::uint32_t* height, std::uint16_t** pixels) {
  if (size < 8 || png_sig_cmp(data, 0, 8) != 0) {
    std::snprintf(status->message, sizeof(status->message), "malformed header: not a PNG");
    status->offset = 0;
    return false;
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, status, png_error_fn, png_warning_fn);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  PngReadState state{data, size, 0, status};
  if (setjmp(png_jmpbuf(png))) {
    std::free(status->row);
    status->row = nullptr;
    std::free(*pixels);
    *pixels = nullptr;
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &state, png_read_fn);
  png_read_info(png, info);
  *width = png_get_image_width(png, info);
  *height = png_get_image_height(png, info);
  if (png_get_bit_depth(png, info) != 16 || png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    png_error(png, "malformed header: expected 16-bit grayscale PNG");
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  const std::size_t w = *width;
  const std::size_t h = *height;
  *pixels = static_cast<std::uint16_t*>(std::malloc(w * h * sizeof(std::uint16_t)));
  status->row = static_cast<png_bytep>(std::malloc(w * 2));
  for (std::size_t i = 0; i < h; ++i) {
    png_bytep row = status->row;
    png_read_row(png, row, nullptr);
    for (std::size_t j = 0; j < w; ++j) {
      (*pixels)[i * w + j] = static_cast<std::uint16_t>((row[2 * j] << 8) | row[2 * j + 1]);
    }
  }
  png_read_end(png, nullptr);
  std::free(status->row);
  status->row = nullptr;
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

struct PngWriteState {
  std::vector<std::uint8_t>* out;
};

void png_write_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<PngWriteState*>(png_get_io_ptr(png));
  st->out->insert(st->out->end(), data, data + len);
}

void png_flush_fn(png_structp) {}

bool encode_png16_raw(const std::uint16_t* pixels, std::uint32_t width, std::uint32_t height,
                      PngWriteState* state, PngStatus* status) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, status, png_error_fn, png_warning_fn);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    std::free(status->row);
    status->row = nullptr;
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, state, png_write_fn, png_flush_fn);
  png_set_IHDR(png, info, width, height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  status->row = static_cast<png_bytep>(std::malloc(static_cast<std::size_t>(width) * 2));
  for (std::uint32_t i = 0; i < height; ++i) {
    png_bytep row = status->row;
    for (std::uint32_t j = 0; j < width; ++j) {
      const std::uint16_t v = pixels[static_cast<std::size_t>(i) * width + j];
      row[2 * j] = static_cast<png_byte>(v >> 8);
      row[2 * j + 1] = static_cast<png_byte>(v & 0xff);
    }
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  std::free(status->row);
  status->row = nullptr;
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

std::vector<std::uint8_t> encode_png16(const DenseField& field) {
  if (field.representation() == Representation::Unitless) {
    throw Error("representation mismatch: 16-bit rasters hold depth or disparity only");
  }
  std::vector<std::uint16_t> raw(field.pixel_count(), 0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!field.valid(i)) continue;
    const double q = std::round(field.at(i) * kPng16Scale);
    if (q < 1.0 || q > 65535.0) {
      throw Error("value " + std::to_string(field.at(i)) + " exceeds 16-bit format range");
    }
    raw[i] = static_cast<std::uint16_t>(q);
  }
  std::vector<std::uint8_t> out;
  PngWriteState state{&out};
  PngStatus status;
  if (!encode_png16_raw(raw.data(), static_cast<std::uint32_t>(field.width()),
                        static_cast<std::uint32_t>(field.height()), &state, &status)) {
    throw Error(std::string("png encode failed: ") + status.message);
  }
  return out;
}

DenseField decode_png16(std::span<const std::uint8_t> bytes, Representation repr) {
  if (repr == Representation::Unitless) {
    throw Error("representation mismatch: 16-bit rasters hold depth or disparity only");
  }
  PngStatus status;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint16_t* pixels = nullptr;
  if (!decode_png16_raw(bytes.data(), bytes.size(), &status, &width, &height, &pixels)) {
    throw FormatError(status.message, status.offset);
  }
  const auto n = static_cast<std::size_t>(width) * height;
  std::vector<double> values(n, 0.0);
  std::vector<std::uint8_t> valid(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (pixels[i] == 0) continue;
    values[i] = pixels[i] / kPng16Scale;
    valid[i] = 1;
  }
  std::free(pixels);
  return DenseField(static_cast<int>(width), static_cast<int>(height), repr, std::move(values),
                    std::move(valid));
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

DenseField read_raster(const std::filesystem::path& path, RasterFormat format,
                       Representation repr) {
  const auto bytes = read_file_bytes(path);
  return format == RasterFormat::Pfm ? decode_pfm_field(bytes, repr) : decode_png16(bytes, repr);
}

void write_raster(const DenseField& field, const std::filesystem::path& path,
                  RasterFormat format) {
  write_file_bytes(path, format == RasterFormat::Pfm ? encode_pfm(field) : encode_png16(field));
}

IntensityImage read_image(const std::filesystem::path& path) {
  return decode_pfm_image(read_file_bytes(path));
}

void write_image(const IntensityImage& image, const std::filesystem::path& path) {
  write_file_bytes(path, encode_pfm(image));
}

// ---------------------------------------------------------------------------

SparseSignalMap parse_sparse(std::string_view text) {
  std::size_t pos = 0;
  auto next_line = [&](std::size_t& start) -> std::optional<std::string_view> {
    if (pos >= text.size()) return std::nullopt;
    start = pos;
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };

  std::size_t at = 0;
  const auto header = next_line(at);
  if (!header || !header->starts_with("#")) {
    throw FormatError("malformed header: expected '# rows=H cols=W repr=...'", 0);
  }
  int rows = -1;
  int cols = -1;
  std::optional<Representation> repr;
  {
    std::istringstream fields{std::string(header->substr(1))};
    std::string kv;
    while (fields >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw FormatError("malformed header field '" + kv + "'", 0);
      const auto key = kv.substr(0, eq);
      const auto val = kv.substr(eq + 1);
      try {
        if (key == "rows") {
          rows = std::stoi(val);
        } else if (key == "cols") {
          cols = std::stoi(val);
        } else if (key == "repr") {
          repr = parse_representation(val);
        } else {
          throw FormatError("malformed header: unknown key '" + key + "'", 0);
        }
      } catch (const std::logic_error&) {
        throw FormatError("malformed header value '" + kv + "'", 0);
      } catch (const FormatError&) {
        throw;
      } catch (const Error&) {
        throw FormatError("malformed header value '" + kv + "'", 0);
      }
    }
  }
  if (rows < 1 || cols < 1 || !repr) {
    throw FormatError("malformed header: rows, cols and repr are required", 0);
  }

  std::vector<SparsePoint> points;
  while (auto line = next_line(at)) {
    if (line->empty() || line->starts_with("#")) continue;
    SparsePoint p;
    const char* b = line->data();
    const char* e = b + line->size();
    auto expect_comma = [&](const char* p0) {
      if (p0 == e || *p0 != ',') throw FormatError("malformed record", at);
      return p0 + 1;
    };
    auto r1 = std::from_chars(b, e, p.row);
    if (r1.ec != std::errc()) throw FormatError("malformed record", at);
    auto r2 = std::from_chars(expect_comma(r1.ptr), e, p.col);
    if (r2.ec != std::errc()) throw FormatError("malformed record", at);
    const char* vb = expect_comma(r2.ptr);
    std::string vs(vb, e);
    char* vend = nullptr;
    p.value = std::strtod(vs.c_str(), &vend);
    if (vs.empty() || vend != vs.c_str() + vs.size()) throw FormatError("malformed record", at);
    if (p.row < 0 || p.row >= rows || p.col < 0 || p.col >= cols) {
      throw FormatError("out-of-range pixel index", at);
    }
    if (!std::isfinite(p.value) || p.value <= 0.0) throw FormatError("out-of-range value", at);
    points.push_back(p);
  }
  return SparseSignalMap(cols, rows, *repr, std::move(points));
}

std::string format_sparse(const SparseSignalMap& sparse) {
  std::string out = "# rows=" + std::to_string(sparse.height()) +
                    " cols=" + std::to_string(sparse.width()) +
                    " repr=" + std::string(to_string(sparse.representation())) + "\n";
  char buf[64];
  for (const auto& p : sparse.points()) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g\n", p.row, p.col, p.value);
    out += buf;
  }
  return out;
}

SparseSignalMap read_sparse(const std::filesystem::path& path) {
  return parse_sparse(read_text_file(path));
}

void write_sparse(const SparseSignalMap& sparse, const std::filesystem::path& path) {
  write_text_file(path, format_sparse(sparse));
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_cost_volume(const CostVolume& cv) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + cv.data().size() * 4);
  put_u32_le(out, static_cast<std::uint32_t>(cv.height()));
  put_u32_le(out, static_cast<std::uint32_t>(cv.width()));
  put_u32_le(out, static_cast<std::uint32_t>(cv.disparities()));
  put_u32_le(out, static_cast<std::uint32_t>(cv.features()));
  for (float v : cv.data()) put_f32_le(out, v);
  return out;
}

CostVolume decode_cost_volume(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw FormatError("malformed header: cost volume header truncated", 0);
  std::uint32_t dims[4];
  for (int k = 0; k < 4; ++k) {
    dims[k] = get_u32_le(bytes, 4 * k);
    if (dims[k] == 0 || dims[k] > (1u << 20)) {
      throw FormatError("malformed header: bad dimension", 4 * static_cast<std::size_t>(k));
    }
  }
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2] * dims[3];
  if ((bytes.size() - 16) / 4 < n) throw FormatError("truncated payload", bytes.size());
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = get_f32(bytes, 16 + 4 * i, true);
    if (!std::isfinite(data[i])) throw FormatError("out-of-range value: non-finite", 16 + 4 * i);
  }
  return CostVolume(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                    static_cast<int>(dims[2]), static_cast<int>(dims[3]), std::move(data));
}

CostVolume read_cost_volume(const std::filesystem::path& path) {
  return decode_cost_volume(read_file_bytes(path));
}

void write_cost_volume(const CostVolume& cv, const std::filesystem::path& path) {
  write_file_bytes(path, encode_cost_volume(cv));
}

}  // namespace s3
