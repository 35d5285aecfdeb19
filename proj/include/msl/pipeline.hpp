#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "msl/backend.hpp"
#include "msl/caption.hpp"
#include "msl/decode.hpp"
#include "msl/geometry.hpp"

namespace msl {

/// Letterbox fill value, per channel, before scaling to [0,1].
inline constexpr int kLetterboxFill = 114;

struct Preprocessed
{
  std::vector<float> tensor;  // 3 x H x W, RGB, [0,1]
  LetterboxMeta meta;
};

/// Letterboxes a BGR (or gray/BGRA) 8-bit image into target_w x target_h.
/// Throws std::invalid_argument unless both targets are multiples of 32.
Preprocessed preprocess(const cv::Mat& image, int target_w, int target_h);

/// Detections in source pixel coordinates, best score first.
std::vector<Detection> run_frame(const cv::Mat& image, std::int64_t frame_index,
                                 ModelBackend& backend, const DecodeConfig& config);

struct Frame
{
  std::int64_t index = 0;
  cv::Mat image;
  double timestamp = 0.0;
  std::string name;
};

/// Ordered frame stream with strictly increasing indices.
class FrameSource
{
public:
  virtual ~FrameSource() = default;
  virtual std::optional<Frame> next() = 0;
};

/// Sorted images of a directory; timestamps assume `fps`.
class DirectorySource : public FrameSource
{
public:
  explicit DirectorySource(const std::filesystem::path& dir, double fps = 60.0);
  std::optional<Frame> next() override;
  std::size_t size() const noexcept { return files_.size(); }

private:
  std::vector<std::filesystem::path> files_;
  std::size_t pos_ = 0;
  double fps_;
};

class ImageSource : public FrameSource
{
public:
  explicit ImageSource(std::filesystem::path path) : path_(std::move(path)) {}
  std::optional<Frame> next() override;

private:
  std::filesystem::path path_;
  bool done_ = false;
};

/// Live capture adapter over cv::VideoCapture (camera index).
class CaptureSource : public FrameSource
{
public:
  explicit CaptureSource(int device, std::int64_t max_frames = -1);
  ~CaptureSource() override;
  std::optional<Frame> next() override;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::int64_t next_index_ = 0;
  std::int64_t max_frames_;
};

struct FrameResult
{
  std::int64_t frame_index = 0;
  std::string name;
  cv::Mat image;
  std::vector<Detection> detections;
};

class DetectionSink
{
public:
  virtual ~DetectionSink() = default;
  virtual void on_frame(const FrameResult& result) = 0;
  virtual void on_event(const CaptionEvent& event) = 0;
  virtual void finish() {}
};

/// One JSON record per frame, plus one {"event": ...} record per caption.
class JsonLinesSink : public DetectionSink
{
public:
  JsonLinesSink(std::ostream& out, std::vector<std::string> names);
  void on_frame(const FrameResult& result) override;
  void on_event(const CaptionEvent& event) override;
  void finish() override;

private:
  std::ostream& out_;
  std::vector<std::string> names_;
};

/// Writes frames with boxes and labels drawn as numbered PNG files.
class AnnotatingSink : public DetectionSink
{
public:
  AnnotatingSink(std::filesystem::path dir, std::vector<std::string> names);
  void on_frame(const FrameResult& result) override;
  void on_event(const CaptionEvent&) override {}

private:
  std::filesystem::path dir_;
  std::vector<std::string> names_;
};

class FanoutSink : public DetectionSink
{
public:
  void add(DetectionSink& sink) { sinks_.push_back(&sink); }
  void on_frame(const FrameResult& result) override;
  void on_event(const CaptionEvent& event) override;
  void finish() override;

private:
  std::vector<DetectionSink*> sinks_;
};

std::string label_for(const std::vector<std::string>& names, int class_id);

struct PipelineConfig
{
  DecodeConfig decode;
  CaptionConfig caption;
  bool captions = true;
  /// Frames in flight on worker threads; <= 1 runs inline.
  int workers = 1;
};

struct StageLatency
{
  double mean_ms = 0.0;
  double median_ms = 0.0;
};

struct StreamSummary
{
  std::size_t frames = 0;
  std::size_t detections = 0;
  std::size_t events = 0;
  double fps = 0.0;
  StageLatency preprocess;
  StageLatency infer;
  StageLatency decode;
  StageLatency total;
};

/// Runs every frame through run_frame and the caption tracker, delivering
/// results to `sink` strictly in frame order whatever the worker count.
/// Open captions are flushed at the end. A backend error aborts the stream
/// with BackendFailure after all earlier frames were delivered.
StreamSummary run_stream(FrameSource& source, ModelBackend& backend, const PipelineConfig& config,
                         DetectionSink& sink);

}  // namespace msl
