// mcflow command-line front end: run, analyze, export, verify.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mcflow/acceptance.hpp"
#include "mcflow/config.hpp"
#include "mcflow/pipeline.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kNumerical = 3,
  kIncomplete = 4,
  kFormat = 5,
  kVerify = 6,
};

int exit_code_for(mcflow::ErrorKind k) {
  using mcflow::ErrorKind;
  switch (k) {
    case ErrorKind::config:
    case ErrorKind::invalid_parameter:
    case ErrorKind::domain_too_small:
    case ErrorKind::not_mean_convex:
      return kConfig;
    case ErrorKind::incomplete_sweep:
      return kIncomplete;
    case ErrorKind::format:
    case ErrorKind::partial_field:
      return kFormat;
    default:
      return kNumerical;
  }
}

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  std::string field;
};

mcflow::RunConfig resolve(const Options& o) {
  mcflow::Config c;
  if (!o.config_path.empty()) c = mcflow::Config::load(o.config_path);
  for (const auto& kv : o.overrides) c.apply_override(kv);
  if (!o.out_dir.empty()) c.set("output.dir", o.out_dir);
  if (o.seed) c.set("seed", std::to_string(*o.seed));
  return mcflow::RunConfig::from(c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean curvature flow arrival-time solver and C2 analyzer"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "config file (key = value lines)");
    sub->add_option("--set", o.overrides, "override, key=value (repeatable)")->allow_extra_args(false);
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--seed", o.seed, "seed for profile sampling");
    sub->add_flag("--quiet", o.quiet, "suppress progress output");
  };

  auto* run = app.add_subcommand("run", "evolve a scenario and analyze its arrival time");
  common(run);
  auto* analyze = app.add_subcommand("analyze", "analyze a stored arrival field (MCAF)");
  common(analyze);
  analyze->add_option("field", o.field, "MCAF file")->required();
  auto* exp = app.add_subcommand("export", "convert an MCAF field to CSV and PGM");
  exp->add_option("field", o.field, "MCAF file")->required();
  exp->add_option("--out", o.out_dir, "output directory");
  exp->add_flag("--quiet", o.quiet, "suppress progress output");
  auto* verify = app.add_subcommand("verify", "run the acceptance suite");
  verify->add_option("--seed", o.seed, "seed for profile sampling");
  verify->add_flag("--quiet", o.quiet, "suppress progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  mcflow::RunContext ctx;
  ctx.log = o.quiet ? nullptr : &std::cerr;
  try {
    if (*run) {
      ctx.stage = "config";
      mcflow::run_pipeline(resolve(o), ctx);
    } else if (*analyze) {
      ctx.stage = "config";
      mcflow::analyze_pipeline(o.field, resolve(o), ctx);
    } else if (*exp) {
      mcflow::export_pipeline(o.field, o.out_dir.empty() ? std::string(".") : o.out_dir, ctx);
    } else if (*verify) {
      ctx.stage = "verify";
      mcflow::AcceptanceOptions opts;
      opts.seed = o.seed.value_or(0);
      opts.log = ctx.log;
      const auto results = mcflow::run_acceptance(opts);
      mcflow::print_acceptance(std::cout, results);
      for (const auto& r : results) {
        if (!r.passed) return kVerify;
      }
    }
    return kOk;
  } catch (const mcflow::Error& e) {
    std::cerr << ctx.stage << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << ctx.stage << ": " << e.what() << '\n';
    return kNumerical;
  }
}
