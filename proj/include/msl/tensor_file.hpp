#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "msl/decode.hpp"

namespace msl {

enum class OutputMode { Raw, Pretransformed };

const char* to_string(OutputMode mode) noexcept;
OutputMode output_mode_from_string(const std::string& s);

/// Whatever a backend returns for one frame.
using ModelOutput = std::variant<RawHeadOutput, PretransformedOutput>;

/// Replay fixture: one JSON header line, then little-endian f32 payload.
///
/// Header keys: dims, dtype ("f32"), mode ("raw" | "pretransformed"), reg_max,
/// nc, strides, input_w, input_h. dims is [channels, anchors] with anchors
/// concatenated level by level in stride order; payload length is the
/// product of dims.
struct TensorFile
{
  std::vector<std::size_t> dims;
  OutputMode mode = OutputMode::Pretransformed;
  int reg_max = kDefaultRegMax;
  int nc = 0;
  std::vector<int> strides = kDefaultStrides;
  int input_w = 0;
  int input_h = 0;
  std::vector<float> payload;

  ModelOutput to_output() const;
};

TensorFile tensor_file_from(const RawHeadOutput& raw, int input_w, int input_h);
TensorFile tensor_file_from(const PretransformedOutput& out, int input_w, int input_h);

std::string encode_tensor_file(const TensorFile& tf);
TensorFile decode_tensor_file(const std::string& bytes);

void write_tensor_file(const std::filesystem::path& path, const TensorFile& tf);
TensorFile read_tensor_file(const std::filesystem::path& path);

}  // namespace msl
