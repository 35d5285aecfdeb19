#include "msl/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace msl {

static_assert(sizeof(float) == 4, "f32 payload requires 32-bit float");

const char* to_string(OutputMode mode) noexcept
{
  return mode == OutputMode::Raw ? "raw" : "pretransformed";
}

OutputMode output_mode_from_string(const std::string& s)
{
  if (s == "raw") return OutputMode::Raw;
  if (s == "pretransformed") return OutputMode::Pretransformed;
  throw std::invalid_argument(fmt::format("unknown output mode '{}'", s));
}

namespace {

std::size_t product(const std::vector<std::size_t>& dims)
{
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::uint32_t to_le(std::uint32_t v)
{
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffU) << 24) | ((v & 0xff00U) << 8) | ((v >> 8) & 0xff00U) | (v >> 24);
  } else {
    return v;
  }
}

}  // namespace

ModelOutput TensorFile::to_output() const
{
  if (dims.size() != 2 || payload.size() != product(dims)) {
    throw DecodeError(DecodeError::Kind::ShapeMismatch, "tensor file: dims do not match payload");
  }
  const std::size_t channels = dims[0];
  const std::size_t anchors = dims[1];
  if (mode == OutputMode::Pretransformed) {
    if (channels != static_cast<std::size_t>(4 + nc)) {
      throw DecodeError(DecodeError::Kind::ShapeMismatch,
                        fmt::format("tensor file: {} rows, expected 4+nc={}", channels, 4 + nc));
    }
    return PretransformedOutput{nc, static_cast<int>(anchors), payload};
  }

  RawHeadOutput raw;
  raw.reg_max = reg_max;
  raw.nc = nc;
  if (channels != static_cast<std::size_t>(raw.channels())) {
    throw DecodeError(DecodeError::Kind::ShapeMismatch,
                      fmt::format("tensor file: {} channels, expected {}", channels,
                                  raw.channels()));
  }
  std::size_t offset = 0;
  for (int s : strides) {
    if (s <= 0 || input_w % s != 0 || input_h % s != 0) {
      throw DecodeError(DecodeError::Kind::NotDivisible,
                        fmt::format("tensor file: input {}x{} not divisible by stride {}",
                                    input_w, input_h, s));
    }
    ScaleTensor level{s, input_h / s, input_w / s, {}};
    const std::size_t plane = static_cast<std::size_t>(level.height) * level.width;
    if (offset + plane > anchors) {
      throw DecodeError(DecodeError::Kind::ShapeMismatch, "tensor file: too few anchors");
    }
    level.data.resize(plane * channels);
    for (std::size_t c = 0; c < channels; ++c) {
      std::memcpy(level.data.data() + c * plane, payload.data() + c * anchors + offset,
                  plane * sizeof(float));
    }
    offset += plane;
    raw.scales.push_back(std::move(level));
  }
  if (offset != anchors) {
    throw DecodeError(DecodeError::Kind::ShapeMismatch, "tensor file: anchor count mismatch");
  }
  return raw;
}

TensorFile tensor_file_from(const RawHeadOutput& raw, int input_w, int input_h)
{
  TensorFile tf;
  tf.mode = OutputMode::Raw;
  tf.reg_max = raw.reg_max;
  tf.nc = raw.nc;
  tf.input_w = input_w;
  tf.input_h = input_h;
  tf.strides.clear();
  const std::size_t channels = raw.channels();
  const std::size_t anchors = raw.anchor_count();
  tf.dims = {channels, anchors};
  tf.payload.resize(channels * anchors);
  std::size_t offset = 0;
  for (const auto& level : raw.scales) {
    tf.strides.push_back(level.stride);
    const std::size_t plane = static_cast<std::size_t>(level.height) * level.width;
    for (std::size_t c = 0; c < channels; ++c) {
      std::memcpy(tf.payload.data() + c * anchors + offset, level.data.data() + c * plane,
                  plane * sizeof(float));
    }
    offset += plane;
  }
  return tf;
}

TensorFile tensor_file_from(const PretransformedOutput& out, int input_w, int input_h)
{
  TensorFile tf;
  tf.mode = OutputMode::Pretransformed;
  tf.nc = out.nc;
  tf.input_w = input_w;
  tf.input_h = input_h;
  tf.dims = {static_cast<std::size_t>(4 + out.nc), static_cast<std::size_t>(out.anchors)};
  tf.payload = out.data;
  return tf;
}

std::string encode_tensor_file(const TensorFile& tf)
{
  if (tf.payload.size() != product(tf.dims)) {
    throw std::invalid_argument("tensor file: payload length does not match dims");
  }
  nlohmann::ordered_json header;
  header["dims"] = tf.dims;
  header["dtype"] = "f32";
  header["mode"] = to_string(tf.mode);
  header["reg_max"] = tf.reg_max;
  header["nc"] = tf.nc;
  header["strides"] = tf.strides;
  header["input_w"] = tf.input_w;
  header["input_h"] = tf.input_h;

  std::string bytes = header.dump();
  bytes += '\n';
  const std::size_t start = bytes.size();
  bytes.resize(start + tf.payload.size() * 4);
  for (std::size_t i = 0; i < tf.payload.size(); ++i) {
    const std::uint32_t v = to_le(std::bit_cast<std::uint32_t>(tf.payload[i]));
    std::memcpy(bytes.data() + start + i * 4, &v, 4);
  }
  return bytes;
}

TensorFile decode_tensor_file(const std::string& bytes)
{
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos) {
    throw std::runtime_error("tensor file: missing header line");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(fmt::format("tensor file: bad header: {}", e.what()));
  }

  TensorFile tf;
  try {
    if (header.at("dtype").get<std::string>() != "f32") {
      throw std::runtime_error("tensor file: only dtype f32 is supported");
    }
    tf.dims = header.at("dims").get<std::vector<std::size_t>>();
    tf.mode = output_mode_from_string(header.at("mode").get<std::string>());
    tf.reg_max = header.value("reg_max", kDefaultRegMax);
    tf.nc = header.at("nc").get<int>();
    tf.strides = header.value("strides", kDefaultStrides);
    tf.input_w = header.value("input_w", 0);
    tf.input_h = header.value("input_h", 0);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(fmt::format("tensor file: bad header: {}", e.what()));
  }

  const std::size_t count = product(tf.dims);
  if (bytes.size() - nl - 1 != count * 4) {
    throw std::runtime_error(fmt::format("tensor file: payload is {} bytes, header implies {}",
                                         bytes.size() - nl - 1, count * 4));
  }
  tf.payload.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t v = 0;
    std::memcpy(&v, bytes.data() + nl + 1 + i * 4, 4);
    tf.payload[i] = std::bit_cast<float>(to_le(v));
  }
  return tf;
}

void write_tensor_file(const std::filesystem::path& path, const TensorFile& tf)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  }
  const std::string bytes = encode_tensor_file(tf);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TensorFile read_tensor_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error(fmt::format("cannot read {}", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_tensor_file(ss.str());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace msl
