#include <cstdlib>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "msl/backend.hpp"
#include "msl/dataset.hpp"
#include "msl/decode.hpp"
#include "msl/report.hpp"

namespace {

int run(int argc, char** argv)
{
  spdlog::set_default_logger(spdlog::stderr_color_mt("msl"));
  spdlog::set_pattern("%^%l%$: %v");

  CLI::App app{"Sign language detection toolkit: datasets, detection and evaluation"};
  app.name("msl");
  app.set_config("--config", "", "TOML/INI file with default flag values; flags win");
  app.require_subcommand(1);
  app.add_option_function<std::string>(
         "--log-level",
         [](const std::string& v) { spdlog::set_level(spdlog::level::from_str(v)); },
         "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  int status = msl::cli::kOk;
  msl::cli::register_dataset(app, status);
  msl::cli::register_detect(app, status);
  msl::cli::register_eval(app, status);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return msl::cli::kUsage;
  }
  return status;
}

}  // namespace

int main(int argc, char** argv)
{
  try {
    return run(argc, argv);
  } catch (const msl::LabelError& e) {
    spdlog::error("{}:{}: {}", e.file().string(), e.line(), e.detail());
  } catch (const msl::BackendFailure& e) {
    spdlog::error("backend failed at frame {}: {}", e.frame_index(), e.what());
  } catch (const msl::CsvError& e) {
    spdlog::error("training log: {}", e.what());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
  }
  return msl::cli::kError;
}
