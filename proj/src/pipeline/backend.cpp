#include "msl/backend.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <opencv2/dnn.hpp>

namespace msl {

BackendFailure::BackendFailure(std::int64_t frame_index, const std::string& what)
    : std::runtime_error(fmt::format("frame {}: {}", frame_index, what)),
      frame_index_(frame_index)
{
}

ModelInfo load_model_metadata(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error(fmt::format("cannot read model metadata {}", path.string()));
  }
  ModelInfo info;
  try {
    const auto j = nlohmann::json::parse(in);
    info.mode = output_mode_from_string(j.at("mode").get<std::string>());
    info.reg_max = j.value("reg_max", kDefaultRegMax);
    info.nc = j.at("nc").get<int>();
    info.strides = j.value("strides", kDefaultStrides);
    info.input_w = j.at("input_w").get<int>();
    info.input_h = j.at("input_h").get<int>();
    info.names = j.value("names", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(fmt::format("model metadata {}: {}", path.string(), e.what()));
  }
  if (!info.names.empty() && static_cast<int>(info.names.size()) != info.nc) {
    throw std::runtime_error(fmt::format("model metadata {}: nc is {} but {} names are listed",
                                         path.string(), info.nc, info.names.size()));
  }
  for (int s : info.strides) {
    if (s <= 0 || info.input_w % s != 0 || info.input_h % s != 0) {
      throw std::runtime_error(fmt::format("model metadata {}: input {}x{} not divisible by {}",
                                           path.string(), info.input_w, info.input_h, s));
    }
  }
  return info;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& source, std::vector<std::string> names)
{
  if (std::filesystem::is_directory(source)) {
    for (const auto& entry : std::filesystem::directory_iterator(source)) {
      if (entry.is_regular_file() && entry.path().extension() == ".tensor") {
        files_.push_back(entry.path());
      }
    }
    std::sort(files_.begin(), files_.end());
  } else if (std::filesystem::is_regular_file(source)) {
    files_.push_back(source);
  }
  if (files_.empty()) {
    throw std::runtime_error(fmt::format("no tensor fixtures at {}", source.string()));
  }
  const TensorFile first = read_tensor_file(files_.front());
  info_.mode = first.mode;
  info_.reg_max = first.reg_max;
  info_.nc = first.nc;
  info_.strides = first.strides;
  info_.input_w = first.input_w;
  info_.input_h = first.input_h;
  info_.names = std::move(names);
  info_.concurrent_safe = true;
  if (!info_.names.empty() && static_cast<int>(info_.names.size()) != info_.nc) {
    throw std::runtime_error(fmt::format("replay fixtures declare nc={} but {} names were given",
                                         info_.nc, info_.names.size()));
  }
}

ModelOutput ReplayBackend::infer(std::span<const float> input, std::int64_t frame_index)
{
  const std::size_t expected = 3ULL * info_.input_w * info_.input_h;
  if (input.size() != expected) {
    throw std::runtime_error(
        fmt::format("replay: input has {} values, expected {}", input.size(), expected));
  }
  std::size_t slot = 0;
  if (files_.size() > 1) {
    if (frame_index < 0 || static_cast<std::size_t>(frame_index) >= files_.size()) {
      throw std::runtime_error(fmt::format("replay: no fixture for frame {}", frame_index));
    }
    slot = static_cast<std::size_t>(frame_index);
  }
  const TensorFile tf = read_tensor_file(files_[slot]);
  if (tf.mode != info_.mode || tf.nc != info_.nc || tf.input_w != info_.input_w ||
      tf.input_h != info_.input_h) {
    throw std::runtime_error(
        fmt::format("replay: fixture {} disagrees with the first fixture", files_[slot].string()));
  }
  return tf.to_output();
}

struct OnnxBackend::Impl
{
  cv::dnn::Net net;
  std::vector<std::string> output_names;
};

OnnxBackend::OnnxBackend(const std::filesystem::path& model, ModelInfo info)
    : impl_(std::make_unique<Impl>()), info_(std::move(info))
{
  try {
    impl_->net = cv::dnn::readNetFromONNX(model.string());
  } catch (const cv::Exception& e) {
    throw std::runtime_error(fmt::format("cannot load model {}: {}", model.string(), e.what()));
  }
  if (impl_->net.empty()) {
    throw std::runtime_error(fmt::format("cannot load model {}", model.string()));
  }
  impl_->output_names = impl_->net.getUnconnectedOutLayersNames();
  info_.concurrent_safe = false;
}

OnnxBackend::~OnnxBackend() = default;

namespace {

// (1, rows, cols) or (rows, cols) -> row-major rows x cols, transposing a
// (1, anchors, channels) layout when rows must equal `channels`.
std::vector<float> channel_major(const cv::Mat& m, std::size_t channels, std::size_t& anchors)
{
  std::vector<int> shape(m.size.p, m.size.p + m.dims);
  while (shape.size() > 2 && shape.front() == 1) {
    shape.erase(shape.begin());
  }
  if (shape.size() != 2) {
    throw std::runtime_error("model output is not a 2-D tensor after batch removal");
  }
  const cv::Mat flat = m.isContinuous() ? m : m.clone();
  const auto* p = flat.ptr<float>();
  const auto rows = static_cast<std::size_t>(shape[0]);
  const auto cols = static_cast<std::size_t>(shape[1]);
  if (rows == channels) {
    anchors = cols;
    return {p, p + rows * cols};
  }
  if (cols == channels) {
    anchors = rows;
    std::vector<float> out(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        out[c * rows + r] = p[r * cols + c];
      }
    }
    return out;
  }
  throw std::runtime_error(fmt::format("model output {}x{} has no dimension of {} channels", rows,
                                       cols, channels));
}

}  // namespace

ModelOutput OnnxBackend::infer(std::span<const float> input, std::int64_t /*frame_index*/)
{
  const std::size_t expected = 3ULL * info_.input_w * info_.input_h;
  if (input.size() != expected) {
    throw std::runtime_error(
        fmt::format("onnx: input has {} values, expected {}", input.size(), expected));
  }
  std::vector<cv::Mat> outputs;
  {
    std::lock_guard lock(mutex_);
    const int shape[] = {1, 3, info_.input_h, info_.input_w};
    const cv::Mat blob(4, shape, CV_32F, const_cast<float*>(input.data()));
    impl_->net.setInput(blob);
    impl_->net.forward(outputs, impl_->output_names);
    for (auto& o : outputs) {
      o = o.clone();
    }
  }
  if (outputs.empty()) {
    throw std::runtime_error("onnx: model produced no outputs");
  }

  if (info_.mode == OutputMode::Pretransformed) {
    std::size_t anchors = 0;
    auto data = channel_major(outputs.front(), 4 + info_.nc, anchors);
    return PretransformedOutput{info_.nc, static_cast<int>(anchors), std::move(data)};
  }

  RawHeadOutput raw;
  raw.reg_max = info_.reg_max;
  raw.nc = info_.nc;
  if (outputs.size() == info_.strides.size() && outputs.front().dims == 4) {
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const cv::Mat& o = outputs[i];
      const int s = info_.strides[i];
      if (o.size[1] != raw.channels() || o.size[2] != info_.input_h / s ||
          o.size[3] != info_.input_w / s) {
        throw std::runtime_error(fmt::format("onnx: output {} has unexpected shape", i));
      }
      const auto* p = o.ptr<float>();
      raw.scales.push_back(
          {s, o.size[2], o.size[3], std::vector<float>(p, p + o.total())});
    }
    return raw;
  }
  // Single concatenated (channels x anchors) output: reuse the replay layout.
  TensorFile tf;
  tf.mode = OutputMode::Raw;
  tf.reg_max = info_.reg_max;
  tf.nc = info_.nc;
  tf.strides = info_.strides;
  tf.input_w = info_.input_w;
  tf.input_h = info_.input_h;
  std::size_t anchors = 0;
  tf.payload = channel_major(outputs.front(), raw.channels(), anchors);
  tf.dims = {static_cast<std::size_t>(raw.channels()), anchors};
  return tf.to_output();
}

std::unique_ptr<ModelBackend> open_backend(const std::filesystem::path& path,
                                           const std::filesystem::path& metadata,
                                           std::vector<std::string> names)
{
  if (path.extension() == ".onnx") {
    std::filesystem::path meta = metadata;
    if (meta.empty()) {
      const auto sibling = std::filesystem::path(path).replace_extension(".json");
      meta = std::filesystem::exists(sibling) ? sibling : path.parent_path() / "metadata.json";
    }
    ModelInfo info = load_model_metadata(meta);
    if (!names.empty()) {
      info.names = std::move(names);
    }
    return std::make_unique<OnnxBackend>(path, std::move(info));
  }
  return std::make_unique<ReplayBackend>(path, std::move(names));
}

}  // namespace msl
