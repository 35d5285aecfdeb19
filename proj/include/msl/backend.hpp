#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msl/tensor_file.hpp"

namespace msl {

/// What a backend produces and expects.
struct ModelInfo
{
  OutputMode mode = OutputMode::Pretransformed;
  int reg_max = kDefaultRegMax;
  int nc = 0;
  std::vector<int> strides = kDefaultStrides;
  int input_w = 640;
  int input_h = 640;
  std::vector<std::string> names;
  /// infer() may be called from several threads at once.
  bool concurrent_safe = false;
};

/// Reads the exporter's metadata JSON
/// {mode, reg_max, nc, strides, input_w, input_h, names}.
ModelInfo load_model_metadata(const std::filesystem::path& path);

class BackendFailure : public std::runtime_error
{
public:
  BackendFailure(std::int64_t frame_index, const std::string& what);
  std::int64_t frame_index() const noexcept { return frame_index_; }

private:
  std::int64_t frame_index_;
};

/// Model execution boundary. `input` is a 3 x H x W planar RGB tensor in [0,1].
class ModelBackend
{
public:
  virtual ~ModelBackend() = default;

  virtual const ModelInfo& info() const = 0;
  virtual ModelOutput infer(std::span<const float> input, std::int64_t frame_index) = 0;
};

/// Serves recorded TensorFile outputs: a single file is returned for every
/// frame, a directory of *.tensor files is indexed by frame position.
class ReplayBackend : public ModelBackend
{
public:
  explicit ReplayBackend(const std::filesystem::path& source,
                         std::vector<std::string> names = {});

  const ModelInfo& info() const override { return info_; }
  ModelOutput infer(std::span<const float> input, std::int64_t frame_index) override;

  std::size_t fixture_count() const noexcept { return files_.size(); }

private:
  std::vector<std::filesystem::path> files_;
  ModelInfo info_;
};

/// Runs an ONNX model through OpenCV's DNN module. Output layout is taken
/// from the metadata; calls are serialized.
class OnnxBackend : public ModelBackend
{
public:
  OnnxBackend(const std::filesystem::path& model, ModelInfo info);
  ~OnnxBackend() override;

  const ModelInfo& info() const override { return info_; }
  ModelOutput infer(std::span<const float> input, std::int64_t frame_index) override;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  ModelInfo info_;
  std::mutex mutex_;
};

/// Picks a backend for `path`: *.onnx (metadata from `metadata`, or
/// <model>.json / metadata.json beside it) or a replay file/directory.
std::unique_ptr<ModelBackend> open_backend(const std::filesystem::path& path,
                                           const std::filesystem::path& metadata = {},
                                           std::vector<std::string> names = {});

}  // namespace msl
