#include "msl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>
#include <spdlog/spdlog.h>

#include "msl/dataset.hpp"

namespace msl {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since)
{
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

struct Timings
{
  double preprocess = 0.0;
  double infer = 0.0;
  double decode = 0.0;
  double total = 0.0;
};

std::vector<Detection> process(const cv::Mat& image, std::int64_t frame_index,
                               ModelBackend& backend, const DecodeConfig& config, Timings& t)
{
  const auto start = Clock::now();
  const ModelInfo& info = backend.info();
  Preprocessed pre = preprocess(image, info.input_w, info.input_h);
  t.preprocess = elapsed_ms(start);

  auto mark = Clock::now();
  ModelOutput output;
  try {
    output = backend.infer(pre.tensor, frame_index);
  } catch (const BackendFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendFailure(frame_index, e.what());
  }
  t.infer = elapsed_ms(mark);

  mark = Clock::now();
  std::vector<Detection> candidates;
  if (const auto* raw = std::get_if<RawHeadOutput>(&output)) {
    const auto grid = make_grid(info.input_w, info.input_h, info.strides);
    candidates = decode_raw(*raw, grid, config.conf_threshold);
  } else {
    candidates = decode_pretransformed(std::get<PretransformedOutput>(output),
                                       config.conf_threshold);
  }
  auto kept = nms(std::move(candidates), config.nms_iou_threshold, config.class_aware,
                  config.max_detections);
  for (auto& d : kept) {
    d.box = unmap_box(d.box, pre.meta);
  }
  t.decode = elapsed_ms(mark);
  t.total = elapsed_ms(start);
  return kept;
}

StageLatency summarize(std::vector<double> samples)
{
  StageLatency s;
  if (samples.empty()) {
    return s;
  }
  double sum = 0.0;
  for (double v : samples) {
    sum += v;
  }
  s.mean_ms = sum / static_cast<double>(samples.size());
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  s.median_ms = n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  return s;
}

}  // namespace

std::vector<Detection> run_frame(const cv::Mat& image, std::int64_t frame_index,
                                 ModelBackend& backend, const DecodeConfig& config)
{
  Timings t;
  return process(image, frame_index, backend, config, t);
}

std::string label_for(const std::vector<std::string>& names, int class_id)
{
  if (class_id >= 0 && static_cast<std::size_t>(class_id) < names.size()) {
    return names[class_id];
  }
  return std::to_string(class_id);
}

// ---------------------------------------------------------------------------
// Sources

DirectorySource::DirectorySource(const std::filesystem::path& dir, double fps) : fps_(fps)
{
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error(fmt::format("{} is not a directory", dir.string()));
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) {
      files_.push_back(entry.path());
    }
  }
  std::sort(files_.begin(), files_.end());
}

std::optional<Frame> DirectorySource::next()
{
  if (pos_ >= files_.size()) {
    return std::nullopt;
  }
  const auto& path = files_[pos_];
  Frame f;
  f.index = static_cast<std::int64_t>(pos_);
  f.timestamp = fps_ > 0.0 ? static_cast<double>(pos_) / fps_ : 0.0;
  f.name = path.filename().string();
  f.image = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (f.image.empty()) {
    throw std::runtime_error(fmt::format("cannot decode image {}", path.string()));
  }
  ++pos_;
  return f;
}

std::optional<Frame> ImageSource::next()
{
  if (done_) {
    return std::nullopt;
  }
  done_ = true;
  Frame f;
  f.name = path_.filename().string();
  f.image = cv::imread(path_.string(), cv::IMREAD_COLOR);
  if (f.image.empty()) {
    throw std::runtime_error(fmt::format("cannot decode image {}", path_.string()));
  }
  return f;
}

struct CaptureSource::Impl
{
  cv::VideoCapture capture;
  Clock::time_point start = Clock::now();
};

CaptureSource::CaptureSource(int device, std::int64_t max_frames)
    : impl_(std::make_unique<Impl>()), max_frames_(max_frames)
{
  if (!impl_->capture.open(device)) {
    throw std::runtime_error(fmt::format("cannot open capture device {}", device));
  }
}

CaptureSource::~CaptureSource() = default;

std::optional<Frame> CaptureSource::next()
{
  if (max_frames_ >= 0 && next_index_ >= max_frames_) {
    return std::nullopt;
  }
  Frame f;
  if (!impl_->capture.read(f.image) || f.image.empty()) {
    return std::nullopt;
  }
  f.index = next_index_++;
  f.timestamp = std::chrono::duration<double>(Clock::now() - impl_->start).count();
  f.name = fmt::format("capture_{:06d}", f.index);
  return f;
}

// ---------------------------------------------------------------------------
// Sinks

JsonLinesSink::JsonLinesSink(std::ostream& out, std::vector<std::string> names)
    : out_(out), names_(std::move(names))
{
}

void JsonLinesSink::on_frame(const FrameResult& result)
{
  nlohmann::ordered_json rec;
  rec["frame"] = result.frame_index;
  rec["image"] = result.name;
  auto dets = nlohmann::ordered_json::array();
  for (const auto& d : result.detections) {
    nlohmann::ordered_json j;
    j["box"] = {d.box.x1, d.box.y1, d.box.x2, d.box.y2};
    j["class"] = d.class_id;
    j["label"] = label_for(names_, d.class_id);
    j["score"] = d.score;
    dets.push_back(std::move(j));
  }
  rec["detections"] = std::move(dets);
  out_ << rec.dump() << '\n';
}

void JsonLinesSink::on_event(const CaptionEvent& e)
{
  nlohmann::ordered_json ev;
  ev["class"] = e.class_id;
  ev["label"] = e.label;
  ev["start_frame"] = e.start_frame;
  ev["end_frame"] = e.end_frame;
  ev["mean_score"] = e.mean_score;
  nlohmann::ordered_json rec;
  rec["event"] = std::move(ev);
  out_ << rec.dump() << '\n';
}

void JsonLinesSink::finish()
{
  out_.flush();
}

AnnotatingSink::AnnotatingSink(std::filesystem::path dir, std::vector<std::string> names)
    : dir_(std::move(dir)), names_(std::move(names))
{
  std::filesystem::create_directories(dir_);
}

void AnnotatingSink::on_frame(const FrameResult& result)
{
  if (result.image.empty()) {
    return;
  }
  cv::Mat canvas = result.image.clone();
  const int thickness = std::max(1, canvas.cols / 400);
  for (const auto& d : result.detections) {
    const cv::Scalar color((37 * d.class_id) % 256, (97 * d.class_id + 80) % 256,
                           (173 * d.class_id + 160) % 256);
    const cv::Point p1(static_cast<int>(std::lround(d.box.x1)),
                       static_cast<int>(std::lround(d.box.y1)));
    const cv::Point p2(static_cast<int>(std::lround(d.box.x2)),
                       static_cast<int>(std::lround(d.box.y2)));
    cv::rectangle(canvas, p1, p2, color, thickness);
    const std::string text = fmt::format("{} {:.2f}", label_for(names_, d.class_id), d.score);
    cv::putText(canvas, text, cv::Point(p1.x, std::max(12, p1.y - 4)), cv::FONT_HERSHEY_SIMPLEX,
                0.5 * thickness, color, thickness);
  }
  const auto path = dir_ / fmt::format("frame_{:06d}.png", result.frame_index);
  if (!cv::imwrite(path.string(), canvas)) {
    throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  }
}

void FanoutSink::on_frame(const FrameResult& result)
{
  for (auto* s : sinks_) s->on_frame(result);
}

void FanoutSink::on_event(const CaptionEvent& event)
{
  for (auto* s : sinks_) s->on_event(event);
}

void FanoutSink::finish()
{
  for (auto* s : sinks_) s->finish();
}

// ---------------------------------------------------------------------------
// Stream driver

namespace {

struct Outcome
{
  FrameResult result;
  Timings timings;
  std::exception_ptr error;
};

class Collector
{
public:
  Collector(const PipelineConfig& config, const std::vector<std::string>& names,
            DetectionSink& sink)
      : config_(config), tracker_(config.caption, names), sink_(sink)
  {
  }

  void deliver(Outcome& o)
  {
    if (o.error) {
      std::rethrow_exception(o.error);
    }
    ++summary_.frames;
    summary_.detections += o.result.detections.size();
    pre_.push_back(o.timings.preprocess);
    infer_.push_back(o.timings.infer);
    decode_.push_back(o.timings.decode);
    total_.push_back(o.timings.total);
    sink_.on_frame(o.result);
    if (config_.captions) {
      emit(tracker_.step(o.result.frame_index, o.result.detections));
    }
  }

  StreamSummary finish(Clock::time_point start)
  {
    if (config_.captions) {
      emit(tracker_.flush());
    }
    sink_.finish();
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    summary_.fps = seconds > 0.0 ? static_cast<double>(summary_.frames) / seconds : 0.0;
    summary_.preprocess = summarize(pre_);
    summary_.infer = summarize(infer_);
    summary_.decode = summarize(decode_);
    summary_.total = summarize(total_);
    return summary_;
  }

private:
  void emit(const std::vector<CaptionEvent>& events)
  {
    for (const auto& e : events) {
      sink_.on_event(e);
      ++summary_.events;
    }
  }

  const PipelineConfig& config_;
  CaptionTracker tracker_;
  DetectionSink& sink_;
  StreamSummary summary_;
  std::vector<double> pre_, infer_, decode_, total_;
};

// Serializes infer() for backends that are not concurrency-safe.
class SerializedBackend : public ModelBackend
{
public:
  explicit SerializedBackend(ModelBackend& inner) : inner_(inner) {}
  const ModelInfo& info() const override { return inner_.info(); }
  ModelOutput infer(std::span<const float> input, std::int64_t frame_index) override
  {
    std::lock_guard lock(mutex_);
    return inner_.infer(input, frame_index);
  }

private:
  ModelBackend& inner_;
  std::mutex mutex_;
};

Outcome run_one(Frame frame, ModelBackend& backend, const DecodeConfig& decode)
{
  Outcome o;
  o.result.frame_index = frame.index;
  o.result.name = std::move(frame.name);
  try {
    o.result.detections = process(frame.image, frame.index, backend, decode, o.timings);
  } catch (...) {
    o.error = std::current_exception();
  }
  o.result.image = std::move(frame.image);
  return o;
}

StreamSummary run_inline(FrameSource& source, ModelBackend& backend, const PipelineConfig& config,
                         Collector& collector, Clock::time_point start)
{
  while (auto frame = source.next()) {
    Outcome o = run_one(std::move(*frame), backend, config.decode);
    collector.deliver(o);
  }
  return collector.finish(start);
}

StreamSummary run_parallel(FrameSource& source, ModelBackend& backend,
                           const PipelineConfig& config, Collector& collector,
                           Clock::time_point start)
{
  const auto workers = static_cast<std::size_t>(config.workers);
  const std::size_t in_flight_limit = 2 * workers;

  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::pair<std::size_t, Frame>> jobs;
  std::map<std::size_t, Outcome> ready;
  std::size_t produced = 0;
  std::size_t released = 0;
  bool source_done = false;
  bool stop = false;
  std::exception_ptr source_error;

  std::unique_ptr<SerializedBackend> serialized;
  ModelBackend* shared = &backend;
  if (!backend.info().concurrent_safe) {
    serialized = std::make_unique<SerializedBackend>(backend);
    shared = serialized.get();
  }

  std::thread producer([&] {
    try {
      for (;;) {
        {
          std::unique_lock lock(mutex);
          cv.wait(lock, [&] { return stop || produced - released < in_flight_limit; });
          if (stop) {
            break;
          }
        }
        auto frame = source.next();
        std::lock_guard lock(mutex);
        if (!frame) {
          break;
        }
        jobs.emplace_back(produced++, std::move(*frame));
        cv.notify_all();
      }
    } catch (...) {
      std::lock_guard lock(mutex);
      source_error = std::current_exception();
    }
    std::lock_guard lock(mutex);
    source_done = true;
    cv.notify_all();
  });

  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::pair<std::size_t, Frame> job;
        {
          std::unique_lock lock(mutex);
          cv.wait(lock, [&] { return stop || !jobs.empty() || source_done; });
          if (stop || jobs.empty()) {
            return;
          }
          job = std::move(jobs.front());
          jobs.pop_front();
        }
        Outcome o = run_one(std::move(job.second), *shared, config.decode);
        std::lock_guard lock(mutex);
        ready.emplace(job.first, std::move(o));
        cv.notify_all();
      }
    });
  }

  auto shutdown = [&] {
    {
      std::lock_guard lock(mutex);
      stop = true;
      cv.notify_all();
    }
    producer.join();
    for (auto& t : pool) {
      t.join();
    }
  };

  try {
    for (;;) {
      Outcome o;
      {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&] {
          return ready.count(released) > 0 || (source_done && released == produced);
        });
        auto it = ready.find(released);
        if (it == ready.end()) {
          break;
        }
        o = std::move(it->second);
        ready.erase(it);
        ++released;
        cv.notify_all();
      }
      collector.deliver(o);
    }
  } catch (...) {
    shutdown();
    throw;
  }
  shutdown();
  if (source_error) {
    std::rethrow_exception(source_error);
  }
  return collector.finish(start);
}

}  // namespace

StreamSummary run_stream(FrameSource& source, ModelBackend& backend, const PipelineConfig& config,
                         DetectionSink& sink)
{
  config.decode.validate();
  config.caption.validate();
  const auto start = Clock::now();
  Collector collector(config, backend.info().names, sink);
  try {
    if (config.workers <= 1) {
      return run_inline(source, backend, config, collector, start);
    }
    return run_parallel(source, backend, config, collector, start);
  } catch (const BackendFailure& e) {
    spdlog::error("aborting stream at frame {}: {}", e.frame_index(), e.what());
    sink.finish();
    throw;
  }
}

}  // namespace msl
