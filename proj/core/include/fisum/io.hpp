#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fisum/grid.hpp"

namespace fisum {

enum class FileFormat { Npy, Png, Csv, Json };

/// Picks the format from a path's extension (.npy, .png, .csv, .json).
FileFormat format_from_path(const std::filesystem::path& path);
std::string_view to_string(FileFormat format);

/// Raw contents of an NPY v1.0 array, decoded to doubles in C order.
struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

/// Parses NPY bytes. Accepts little-endian float32/float64, C order only.
NpyArray decode_npy(std::string_view bytes);
/// Encodes as NPY v1.0, '<f8', C order.
std::string encode_npy(const std::vector<std::size_t>& shape, std::span<const double> data);

/// Loads a data tensor.
///  npy: (T1), (T1,T2) with d=1; (d,T1,T2) or (d,T1,T2,T3) channel-first.
///  png: 8-bit gray (d=1) or RGB (d=3), scaled by 1/255.
///  csv: one 2-D grid, d=1.
DataTensor load_tensor(const std::filesystem::path& path, FileFormat format);
DataTensor load_tensor(const std::filesystem::path& path);

DataTensor parse_csv_tensor(std::string_view text);

/// Writes `tensor` as NPY using the same channel-first layout load_tensor reads.
/// Order-1 tensors must have d=1.
void save_tensor(const DataTensor& tensor, const std::filesystem::path& path);

/// 8-bit PNG writer; `channels` is 1 (gray) or 3 (RGB), pixels row-major.
void save_png(const std::filesystem::path& path, std::size_t height, std::size_t width,
              std::size_t channels, std::span<const std::uint8_t> pixels);

/// Writes a field as npy, csv ("%.17g", last axis as columns) or json.
void save_field(const ScalarField& field, const std::filesystem::path& path, FileFormat format);
void save_field(const ScalarField& field, const std::filesystem::path& path);

/// Reads a field written by save_field (npy or json). NPY carries no semiring
/// tag, so the caller supplies it; JSON records its own.
ScalarField load_field(const std::filesystem::path& path, FileFormat format,
                       SemiringTag npy_tag = SemiringTag::Real);

std::string field_to_json(const ScalarField& field);
ScalarField field_from_json(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace fisum
