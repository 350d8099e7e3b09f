#include "fisum/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <regex>
#include <sstream>
#include <string>

#include "fisum/error.hpp"

static_assert(std::endian::native == std::endian::little, "NPY codec assumes a little-endian host");

namespace fisum {

namespace {

constexpr std::string_view kNpyMagic = "\x93NUMPY";

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  if (shape.size() == 1) s += ",";
  return s + ")";
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

FileFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".npy") return FileFormat::Npy;
  if (ext == ".png") return FileFormat::Png;
  if (ext == ".csv") return FileFormat::Csv;
  if (ext == ".json") return FileFormat::Json;
  throw ValidationError("cannot infer file format from '" + path.string() + "'");
}

std::string_view to_string(FileFormat format) {
  switch (format) {
    case FileFormat::Npy:
      return "npy";
    case FileFormat::Png:
      return "png";
    case FileFormat::Csv:
      return "csv";
    case FileFormat::Json:
      return "json";
  }
  return "?";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

// ---- NPY ------------------------------------------------------------------

NpyArray decode_npy(std::string_view bytes) {
  if (bytes.size() < 10 || bytes.substr(0, 6) != kNpyMagic) {
    throw IngestionError("npy: bad magic string");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t header_start = 0;
  if (major == 1) {
    header_len = static_cast<unsigned char>(bytes[8]) |
                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    header_start = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw IngestionError("npy: truncated header");
    for (int i = 3; i >= 0; --i) {
      header_len = (header_len << 8) | static_cast<unsigned char>(bytes[8 + i]);
    }
    header_start = 12;
  } else {
    throw IngestionError("npy: unsupported format version " + std::to_string(major));
  }
  if (bytes.size() < header_start + header_len) throw IngestionError("npy: truncated header");
  const std::string header(bytes.substr(header_start, header_len));

  std::smatch m;
  static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
  if (!std::regex_search(header, m, descr_re)) throw IngestionError("npy: header lacks 'descr'");
  const std::string descr = m[1];
  if (!std::regex_search(header, m, order_re)) {
    throw IngestionError("npy: header lacks 'fortran_order'");
  }
  if (m[1] == "True") throw IngestionError("npy: 'fortran_order' arrays are not supported");
  if (!std::regex_search(header, m, shape_re)) throw IngestionError("npy: header lacks 'shape'");

  NpyArray out;
  std::stringstream dims(m[1].str());
  for (std::string item; std::getline(dims, item, ',');) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item.empty()) continue;
    try {
      out.shape.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw IngestionError("npy: malformed 'shape' entry '" + item + "'");
    }
  }

  std::size_t width = 0;
  if (descr == "<f8" || descr == "=f8") {
    width = 8;
  } else if (descr == "<f4" || descr == "=f4") {
    width = 4;
  } else {
    throw IngestionError("npy: unsupported dtype 'descr' = '" + descr +
                         "' (expected little-endian float32/float64)");
  }

  std::size_t count = 1;
  for (std::size_t d : out.shape) count *= d;
  const std::string_view payload = bytes.substr(header_start + header_len);
  if (payload.size() < count * width) {
    throw IngestionError("npy: data holds " + std::to_string(payload.size()) + " bytes, 'shape' " +
                         shape_string(out.shape) + " needs " + std::to_string(count * width));
  }
  out.data.resize(count);
  if (width == 8) {
    std::memcpy(out.data.data(), payload.data(), count * 8);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, payload.data() + 4 * i, 4);
      out.data[i] = f;
    }
  }
  return out;
}

std::string encode_npy(const std::vector<std::size_t>& shape, std::span<const double> data) {
  std::string header =
      "{'descr': '<f8', 'fortran_order': False, 'shape': " + shape_string(shape) + ", }";
  // magic(6) + version(2) + length(2) + header + '\n' is a multiple of 64.
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header += '\n';

  std::string out(kNpyMagic);
  out += '\x01';
  out += '\x00';
  out += static_cast<char>(header.size() & 0xff);
  out += static_cast<char>((header.size() >> 8) & 0xff);
  out += header;
  const std::size_t start = out.size();
  out.resize(start + data.size() * 8);
  std::memcpy(out.data() + start, data.data(), data.size() * 8);
  return out;
}

// ---- tensors --------------------------------------------------------------

namespace {

DataTensor tensor_from_npy(const NpyArray& arr) {
  std::vector<std::size_t> extents;
  std::size_t channels = 1;
  switch (arr.shape.size()) {
    case 1:
    case 2:
      extents = arr.shape;
      break;
    case 3:
    case 4:
      channels = arr.shape[0];
      extents.assign(arr.shape.begin() + 1, arr.shape.end());
      break;
    default:
      throw IngestionError("npy: 'shape' " + shape_string(arr.shape) +
                           " is not (T1), (T1,T2), (d,T1,T2) or (d,T1,T2,T3)");
  }
  if (channels == 0 || std::find(extents.begin(), extents.end(), 0) != extents.end()) {
    throw IngestionError("npy: 'shape' " + shape_string(arr.shape) + " has an empty axis");
  }
  GridShape shape(extents);
  const std::size_t points = shape.size();
  std::vector<double> values(points * channels);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < points; ++p) {
      const double v = arr.data[c * points + p];
      if (!std::isfinite(v)) {
        throw IngestionError("npy: data element " + std::to_string(c * points + p) +
                             " is not finite");
      }
      values[p * channels + c] = v;
    }
  }
  return DataTensor(std::move(shape), channels, std::move(values));
}

struct PngImage {
  png_image image{};
  PngImage() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
};

DataTensor load_png(const std::filesystem::path& path) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.image, path.c_str())) {
    throw IngestionError("png: " + path.string() + ": " + png.image.message);
  }
  const auto format = png.image.format;
  if (format & PNG_FORMAT_FLAG_ALPHA) {
    throw IngestionError("png: images with an alpha channel are not supported");
  }
  if (format & PNG_FORMAT_FLAG_LINEAR) {
    throw IngestionError("png: only 8-bit images are supported");
  }
  const bool color = (format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = color ? 3 : 1;
  const std::size_t height = png.image.height;
  const std::size_t width = png.image.width;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, pixels.data(), 0, nullptr)) {
    throw IngestionError("png: " + path.string() + ": " + png.image.message);
  }
  std::vector<double> values(pixels.size());
  std::transform(pixels.begin(), pixels.end(), values.begin(),
                 [](std::uint8_t v) { return v / 255.0; });
  return DataTensor(GridShape{height, width}, channels, std::move(values));
}

}  // namespace

DataTensor parse_csv_tensor(std::string_view text) {
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t col = 0;
    std::stringstream cells(line);
    for (std::string cell; std::getline(cells, cell, ',');) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      const std::string trimmed = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
      double v;
      try {
        v = parse_value(trimmed);
      } catch (const IngestionError&) {
        throw IngestionError("csv: row " + std::to_string(rows) + ", column " +
                             std::to_string(col) + ": cannot parse '" + trimmed + "'");
      }
      if (!std::isfinite(v)) {
        throw IngestionError("csv: row " + std::to_string(rows) + ", column " +
                             std::to_string(col) + " is not finite");
      }
      values.push_back(v);
      ++col;
    }
    if (rows == 0) {
      cols = col;
    } else if (col != cols) {
      throw IngestionError("csv: row " + std::to_string(rows) + " has " + std::to_string(col) +
                           " columns, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0 || cols == 0) throw IngestionError("csv: no data");
  return DataTensor(GridShape{rows, cols}, 1, std::move(values));
}

DataTensor load_tensor(const std::filesystem::path& path, FileFormat format) {
  switch (format) {
    case FileFormat::Npy:
      return tensor_from_npy(decode_npy(read_file(path)));
    case FileFormat::Png:
      return load_png(path);
    case FileFormat::Csv:
      return parse_csv_tensor(read_file(path));
    case FileFormat::Json:
      break;
  }
  throw ValidationError("tensors load from npy, png or csv, not " + std::string(to_string(format)));
}

DataTensor load_tensor(const std::filesystem::path& path) {
  return load_tensor(path, format_from_path(path));
}

void save_tensor(const DataTensor& tensor, const std::filesystem::path& path) {
  const std::size_t points = tensor.points();
  const std::size_t channels = tensor.channels();
  std::vector<std::size_t> shape = tensor.shape().extents();
  if (shape.size() == 1 && channels > 1) {
    throw ValidationError("npy: an order-1 tensor with several channels has no readable layout");
  }
  if (channels > 1 || shape.size() > 2) shape.insert(shape.begin(), channels);
  std::vector<double> data(points * channels);
  for (std::size_t p = 0; p < points; ++p) {
    for (std::size_t c = 0; c < channels; ++c) data[c * points + p] = tensor(p, c);
  }
  write_file(path, encode_npy(shape, data));
}

void save_png(const std::filesystem::path& path, std::size_t height, std::size_t width,
              std::size_t channels, std::span<const std::uint8_t> pixels) {
  if (channels != 1 && channels != 3) throw ValidationError("png: channels must be 1 or 3");
  if (pixels.size() != height * width * channels) throw ValidationError("png: pixel count mismatch");
  PngImage png;
  png.image.width = static_cast<png_uint_32>(width);
  png.image.height = static_cast<png_uint_32>(height);
  png.image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png.image, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw std::runtime_error("png: " + path.string() + ": " + png.image.message);
  }
}

// ---- fields ---------------------------------------------------------------

std::string field_to_json(const ScalarField& field) {
  nlohmann::json values = nlohmann::json::array();
  for (double v : field.values()) {
    if (v == kNegInf) {
      values.push_back("-inf");
    } else {
      values.push_back(v);
    }
  }
  nlohmann::json j = {{"semiring", std::string(to_string(field.tag()))},
                      {"shape", field.shape().extents()},
                      {"values", std::move(values)}};
  return j.dump();
}

ScalarField field_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IngestionError(std::string("field json: ") + e.what());
  }
  try {
    const SemiringTag tag = parse_semiring(j.at("semiring").get<std::string>());
    GridShape shape(j.at("shape").get<std::vector<std::size_t>>());
    const auto& vals = j.at("values");
    std::vector<double> values;
    values.reserve(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (vals[i].is_string()) {
        values.push_back(parse_value(vals[i].get<std::string>()));
      } else if (vals[i].is_number()) {
        values.push_back(vals[i].get<double>());
      } else {
        throw IngestionError("field json: /values/" + std::to_string(i) + " is not a number");
      }
    }
    return ScalarField(std::move(shape), tag, values);
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("field json: ") + e.what());
  }
}

void save_field(const ScalarField& field, const std::filesystem::path& path, FileFormat format) {
  switch (format) {
    case FileFormat::Npy:
      write_file(path, encode_npy(field.shape().extents(), field.values()));
      return;
    case FileFormat::Json:
      write_file(path, field_to_json(field) + "\n");
      return;
    case FileFormat::Csv: {
      const std::size_t cols = field.shape().extent(field.shape().order() - 1);
      std::string out;
      char buf[40];
      for (std::size_t i = 0; i < field.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", field[i]);
        out += buf;
        out += (i + 1) % cols == 0 ? '\n' : ',';
      }
      write_file(path, out);
      return;
    }
    case FileFormat::Png:
      break;
  }
  throw ValidationError("fields save as npy, csv or json, not png");
}

void save_field(const ScalarField& field, const std::filesystem::path& path) {
  save_field(field, path, format_from_path(path));
}

ScalarField load_field(const std::filesystem::path& path, FileFormat format, SemiringTag npy_tag) {
  if (format == FileFormat::Json) return field_from_json(read_file(path));
  if (format == FileFormat::Npy) {
    NpyArray arr = decode_npy(read_file(path));
    return ScalarField(GridShape(arr.shape), npy_tag, arr.data);
  }
  throw ValidationError("fields load from npy or json");
}

}  // namespace fisum
