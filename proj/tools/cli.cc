#include "cli.h"

#include <fmt/format.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "rqi/error.h"
#include "rqi/util/file.h"
#include "rqi/util/parallel.h"

namespace rqi::cli {

int Context::resolved_jobs() const { return resolve_jobs(jobs); }

void add_protocol_options(CLI::App& cmd, InferenceProtocol& p, const std::string& seed_flags) {
  cmd.add_option("--scales", p.scales, "Pyramid levels for RQI inference")->capture_default_str()->check(
      CLI::Range(1, 8));
  cmd.add_option("--crops", p.crops_per_scale, "Aligned crops per level")->capture_default_str()->check(
      CLI::Range(1, 10000));
  cmd.add_option(seed_flags, p.seed, "Seed of the crop positions")->capture_default_str();
}

void add_direction_option(CLI::App& cmd, std::vector<std::string>& specs) {
  cmd.add_option("--direction", specs, "Ranking direction override, e.g. lpips=lower (repeatable)");
}

MetricDirections directions_from(const std::vector<std::string>& specs) {
  MetricDirections d;
  for (const auto& s : specs) d.set_from_spec(s);
  return d;
}

void emit_text(const std::filesystem::path& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
  } else {
    write_text_file(out, text);
  }
}

void progress(const std::string& message) { std::fprintf(stderr, "%s\n", message.c_str()); }

namespace {

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

// Flat "key = value" lines; '#' starts a comment. Repeated keys accumulate.
std::vector<ConfigEntry> read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::vector<ConfigEntry> out;
  std::string line;
  for (int no = 1; std::getline(in, line); ++no) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ConversionError(fmt::format("{}:{}: expected 'key = value'", path.string(), no));
    }
    out.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1)), no});
  }
  return out;
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

bool known_anywhere(const CLI::App* app, const std::string& flag) {
  if (app->get_option_no_throw(flag)) return true;
  for (const CLI::App* sub : app->get_subcommands([](const CLI::App*) { return true; })) {
    if (known_anywhere(sub, flag)) return true;
  }
  return false;
}

// Expands "--config FILE" into options of the selected subcommand chain.
// Command-line flags win; keys belonging to other subcommands are ignored,
// keys unknown to every subcommand are a usage error.
std::vector<std::string> apply_config(CLI::App& app, std::vector<std::string> args) {
  std::filesystem::path config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file");
      config = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
      break;
    }
  }
  if (config.empty()) return args;

  // The selected chain: leading positional tokens naming nested subcommands.
  std::vector<CLI::App*> chain{&app};
  std::size_t consumed = 0;
  while (consumed < args.size()) {
    CLI::App* sub = nullptr;
    try {
      sub = chain.back()->get_subcommand(args[consumed]);
    } catch (const CLI::OptionNotFound&) {
      break;
    }
    chain.push_back(sub);
    ++consumed;
  }

  std::vector<std::string> injected;
  for (const auto& e : read_config(config)) {
    const std::string flag = "--" + e.key;
    CLI::Option* opt = nullptr;
    for (auto it = chain.rbegin(); it != chain.rend() && !opt; ++it) opt = (*it)->get_option_no_throw(flag);
    if (!opt) {
      if (!known_anywhere(&app, flag)) {
        throw CLI::ExtrasError(fmt::format("{}:{}: unknown key '{}'", config.string(), e.line, e.key), CLI::ExitCodes::ExtrasError);
      }
      continue;
    }
    if (given_on_command_line(args, flag)) continue;
    if (opt->get_expected_max() == 0) {
      if (e.value == "true" || e.value == "1") injected.push_back(flag);
      continue;
    }
    injected.push_back(flag + "=" + e.value);
  }
  // Injected options go right after the subcommand names so that positional
  // arguments keep their meaning.
  args.insert(args.begin() + static_cast<long>(consumed), injected.begin(), injected.end());
  return args;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Image quality toolkit: full- and no-reference metrics, RQI training and scoring, GT-quality\n"
               "discard sweeps, 2AFC studies and consistency statistics.",
               "rqi"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.fallthrough();
  Context ctx;
  app.add_option("--jobs,-j", ctx.jobs, "Worker threads (default: RQI_EVAL_JOBS or all cores)")->check(
      CLI::NonNegativeNumber);
  app.add_option("--config", "Flat key = value file of option defaults; flags win");

  add_metrics_command(app, ctx);
  add_niqe_command(app, ctx);
  add_synth_command(app, ctx);
  add_rqi_command(app, ctx);
  add_sweep_command(app, ctx);
  add_consistency_command(app, ctx);
  add_study_command(app, ctx);
  add_demo_command(app, ctx);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = apply_config(app, std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace rqi::cli
