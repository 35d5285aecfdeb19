#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "msl/backend.hpp"
#include "msl/dataset.hpp"
#include "msl/pipeline.hpp"

namespace msl::cli {

namespace {

struct DetectArgs
{
  std::string model;
  std::filesystem::path metadata;
  std::filesystem::path manifest;  // names only
  std::filesystem::path out;
  std::filesystem::path annotate;
  PipelineConfig pipeline;
  bool agnostic = false;

  // source
  std::filesystem::path input;
  int device = 0;
  std::int64_t max_frames = -1;
  double fps = 60.0;
};

int run_detect(DetectArgs& a, FrameSource& source)
{
  if (a.model.empty()) {
    if (const char* env = std::getenv("MSL_MODEL"); env != nullptr) {
      a.model = env;
    }
  }
  if (a.model.empty()) {
    spdlog::error("no model: pass --model or set MSL_MODEL");
    return kUsage;
  }
  a.pipeline.decode.class_aware = !a.agnostic;
  a.pipeline.decode.validate();
  a.pipeline.caption.validate();

  std::vector<std::string> names;
  if (!a.manifest.empty()) {
    names = load_manifest(a.manifest).names;
  }
  auto backend = open_backend(a.model, a.metadata, names);
  spdlog::debug("backend {}: mode {}, nc {}, input {}x{}", a.model,
                to_string(backend->info().mode), backend->info().nc, backend->info().input_w,
                backend->info().input_h);

  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out, std::ios::binary);
    if (!file) {
      throw std::runtime_error(fmt::format("cannot write {}", a.out.string()));
    }
  }
  std::ostream& out = a.out.empty() ? std::cout : file;
  const auto& sink_names = backend->info().names.empty() ? names : backend->info().names;
  JsonLinesSink json(out, sink_names);
  FanoutSink fanout;
  fanout.add(json);
  std::unique_ptr<AnnotatingSink> annotate;
  if (!a.annotate.empty()) {
    annotate = std::make_unique<AnnotatingSink>(a.annotate, sink_names);
    fanout.add(*annotate);
  }

  const StreamSummary s = run_stream(source, *backend, a.pipeline, fanout);
  spdlog::info("{} frames, {} detections, {} caption events, {:.1f} fps", s.frames, s.detections,
               s.events, s.fps);
  spdlog::info("latency ms (mean/median): preprocess {:.2f}/{:.2f}, infer {:.2f}/{:.2f}, "
               "decode {:.2f}/{:.2f}, total {:.2f}/{:.2f}",
               s.preprocess.mean_ms, s.preprocess.median_ms, s.infer.mean_ms, s.infer.median_ms,
               s.decode.mean_ms, s.decode.median_ms, s.total.mean_ms, s.total.median_ms);
  return kOk;
}

void add_common(CLI::App& cmd, DetectArgs& a)
{
  cmd.add_option("--model", a.model,
                 "ONNX model or recorded tensor file/directory (default: $MSL_MODEL)");
  cmd.add_option("--metadata", a.metadata, "model metadata JSON (default: beside the model)");
  cmd.add_option("--manifest", a.manifest, "data.yaml supplying class names");
  cmd.add_option("--out", a.out, "JSON-lines output file (default: stdout)");
  cmd.add_option("--annotate", a.annotate, "directory for rendered frames");
  cmd.add_option("--conf", a.pipeline.decode.conf_threshold, "score threshold")
      ->capture_default_str();
  cmd.add_option("--iou", a.pipeline.decode.nms_iou_threshold, "NMS IoU threshold")
      ->capture_default_str();
  cmd.add_option("--max-det", a.pipeline.decode.max_detections)->capture_default_str();
  cmd.add_flag("--agnostic", a.agnostic, "suppress across classes");
  cmd.add_flag("--captions,!--no-captions", a.pipeline.captions, "emit caption events")
      ->capture_default_str();
  cmd.add_option("--caption-window", a.pipeline.caption.window)->capture_default_str();
  cmd.add_option("--caption-hits", a.pipeline.caption.hits)->capture_default_str();
  cmd.add_option("--workers", a.pipeline.workers, "frames processed in parallel")
      ->capture_default_str();
}

}  // namespace

void register_detect(CLI::App& parent, int& status)
{
  auto* detect = parent.add_subcommand("detect", "Detect signs in images, folders or a camera");
  detect->require_subcommand(1);

  const auto make_args = [] {
    auto a = std::make_shared<DetectArgs>();
    a->pipeline.captions = false;
    a->pipeline.workers = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
    return a;
  };

  auto img = make_args();
  auto* i = detect->add_subcommand("image", "Detect in one image");
  i->add_option("path", img->input)->required()->check(CLI::ExistingFile);
  add_common(*i, *img);
  i->callback([img, &status] {
    ImageSource source(img->input);
    status = run_detect(*img, source);
  });

  auto dir = make_args();
  auto* d = detect->add_subcommand("dir", "Detect in every image of a directory, in name order");
  d->add_option("path", dir->input)->required()->check(CLI::ExistingDirectory);
  d->add_option("--fps", dir->fps, "frame rate used for timestamps")->capture_default_str();
  add_common(*d, *dir);
  d->callback([dir, &status] {
    DirectorySource source(dir->input, dir->fps);
    status = run_detect(*dir, source);
  });

  auto stream = make_args();
  auto* s = detect->add_subcommand("stream", "Detect on a live camera");
  s->add_option("--device", stream->device, "camera index")->capture_default_str();
  s->add_option("--max-frames", stream->max_frames, "stop after n frames (-1: never)")
      ->capture_default_str();
  add_common(*s, *stream);
  s->callback([stream, &status] {
    CaptureSource source(stream->device, stream->max_frames);
    status = run_detect(*stream, source);
  });
}

}  // namespace msl::cli
