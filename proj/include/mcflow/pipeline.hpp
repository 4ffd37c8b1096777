#ifndef MCFLOW_PIPELINE_HPP_
#define MCFLOW_PIPELINE_HPP_

// Orchestration for the run / analyze / export commands.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mcflow/analysis.hpp"
#include "mcflow/config.hpp"
#include "mcflow/evolver.hpp"
#include "mcflow/mcaf.hpp"
#include "mcflow/report.hpp"
#include "mcflow/scenarios.hpp"

namespace mcflow {

//! Tracks the current stage (for error messages) and progress output.
struct RunContext {
  std::string stage = "setup";
  std::ostream* log = nullptr;  // null silences progress

  void note(const std::string& msg) const {
    if (log) *log << msg << '\n';
  }
};

struct RunOutcome {
  Analysis analysis;
  Json report;
  std::filesystem::path dir;
};

namespace detail {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline void emit(const std::filesystem::path& dir, const std::string& name, const std::string& text,
                 Manifest& m) {
  write_text(dir / name, text);
  m.outputs.push_back(name);
}

inline void emit_field(const std::filesystem::path& dir, const std::string& name, const ScalarField& f,
                       Manifest& m) {
  mcaf::write_file((dir / name).string(), f);
  m.outputs.push_back(name);
}

inline std::string diagnostics_csv(const DiagnosticsLog& log) {
  std::ostringstream os;
  log.write_csv(os);
  return os.str();
}

// Writes the analyzer outputs shared by run and analyze.
inline Json emit_analysis(const std::filesystem::path& dir, const ArrivalField& u, const Analysis& a,
                          const RunConfig& cfg, Manifest& m) {
  Json report = report_json(a, u.spec, cfg.settings(), cfg.echo());
  emit(dir, "report.json", report.dump(2) + "\n", m);
  emit(dir, "points.csv", points_csv(a.report), m);
  emit(dir, "cone_continuity.csv", profiles_csv(a, false), m);
  emit(dir, "normal_alignment.csv", profiles_csv(a, true), m);
  emit(dir, "rescaled.csv", rescaled_csv(a), m);
  emit(dir, "residual.csv", nodes_csv(u.spec, a.residual.nodes, a.residual.values, "residual"), m);
  std::vector<double> res(u.spec.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < a.residual.nodes.size(); ++i) res[a.residual.nodes[i]] = a.residual.values[i];
  emit(dir, "residual.pgm", pgm(u.spec, res), m);
  emit(dir, "u.pgm", pgm(u.spec, u.u), m);
  return report;
}

inline void finish_manifest(const std::filesystem::path& dir, const Manifest& m, bool partial) {
  write_text(dir / (partial ? "manifest.json.partial" : "manifest.json"), m.to_json(dir).dump(2) + "\n");
}

}  // namespace detail

//! sample -> evolve -> arrival -> analysis, writing every artifact into
//! cfg.output_dir. On failure, files already produced stay in place and the
//! manifest (plus any partial field) gets a .partial suffix.
inline RunOutcome run_pipeline(const RunConfig& cfg, RunContext& ctx) {
  namespace fs = std::filesystem;
  detail::Stopwatch clock;
  Manifest manifest;
  manifest.command = "run";
  manifest.config = cfg.echo();

  ctx.stage = "config";
  const Shape shape = cfg.shape();
  GridSpec spec;
  try {
    spec = shape.grid(cfg.N);
  } catch (const Error& e) {
    throw Error(ErrorKind::config, e.what());
  }
  if (shape.thinness_warning) ctx.note("warning: torus is not thin (r0 >= R0/3); no expected verdict");

  ctx.stage = "sample";
  const ScalarField v0 = sample_implicit(shape, spec);
  manifest.timings.emplace_back("sample", clock.lap());

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  try {
    ctx.stage = "evolve";
    ctx.note("evolving " + cfg.scenario + " on " + std::to_string(spec.counts[0]) + "x" +
             std::to_string(spec.counts[1]) + (spec.dim == 3 ? "x" + std::to_string(spec.counts[2]) : "") +
             " nodes");
    SnapshotObserver observer;
    if (cfg.snapshots) {
      fs::create_directories(dir / "snapshots");
      observer = [&](const ScalarField& v, std::size_t step, double) {
        char name[64];
        std::snprintf(name, sizeof name, "snapshots/v_%08zu.mcaf", step);
        detail::emit_field(dir, name, v, manifest);
      };
    }
    EvolveResult result;
    try {
      result = evolve(v0, cfg.evolve, observer);
    } catch (const IncompleteSweepError& e) {
      manifest.timings.emplace_back("evolve", clock.lap());
      detail::emit_field(dir, "u.mcaf.partial", e.result().arrival.to_scalar_field(), manifest);
      detail::emit(dir, "diagnostics.csv.partial", detail::diagnostics_csv(e.result().log), manifest);
      throw;
    }
    manifest.timings.emplace_back("evolve", clock.lap());
    ctx.note("swept in " + std::to_string(result.log.steps) + " steps");
    detail::emit_field(dir, "u.mcaf", result.arrival.to_scalar_field(), manifest);
    detail::emit(dir, "diagnostics.csv", detail::diagnostics_csv(result.log), manifest);

    ctx.stage = "analyze";
    RunOutcome out;
    out.dir = dir;
    out.analysis = analyze_field(result.arrival, cfg.settings());
    manifest.timings.emplace_back("analyze", clock.lap());
    ctx.stage = "report";
    out.report = detail::emit_analysis(dir, result.arrival, out.analysis, cfg, manifest);
    manifest.timings.emplace_back("report", clock.lap());
    detail::finish_manifest(dir, manifest, false);
    ctx.note("verdict " + std::string(to_string(out.analysis.report.verdict)));
    return out;
  } catch (...) {
    try {
      detail::finish_manifest(dir, manifest, true);
    } catch (...) {
    }
    throw;
  }
}

//! Analyzer only, on a stored arrival field.
inline RunOutcome analyze_pipeline(const std::filesystem::path& field_path, const RunConfig& cfg,
                                   RunContext& ctx) {
  namespace fs = std::filesystem;
  detail::Stopwatch clock;
  Manifest manifest;
  manifest.command = "analyze";
  manifest.config = cfg.echo();
  manifest.inputs.push_back(field_path);

  ctx.stage = "read";
  const ScalarField f = mcaf::read_file(field_path.string());
  const ArrivalField u = ArrivalField::from_scalar_field(f);
  manifest.timings.emplace_back("read", clock.lap());

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  try {
    ctx.stage = "analyze";
    RunOutcome out;
    out.dir = dir;
    out.analysis = analyze_field(u, cfg.settings());
    manifest.timings.emplace_back("analyze", clock.lap());
    ctx.stage = "report";
    out.report = detail::emit_analysis(dir, u, out.analysis, cfg, manifest);
    manifest.timings.emplace_back("report", clock.lap());
    detail::finish_manifest(dir, manifest, false);
    ctx.note("verdict " + std::string(to_string(out.analysis.report.verdict)));
    return out;
  } catch (...) {
    try {
      detail::finish_manifest(dir, manifest, true);
    } catch (...) {
    }
    throw;
  }
}

//! Converts a stored field to CSV (index, position, value) plus a heatmap.
inline void export_pipeline(const std::filesystem::path& field_path, const std::filesystem::path& dir,
                            RunContext& ctx) {
  ctx.stage = "read";
  const ScalarField f = mcaf::read_file(field_path.string());
  ctx.stage = "export";
  std::filesystem::create_directories(dir);
  const std::string stem = field_path.stem().string();
  Manifest manifest;
  manifest.command = "export";
  manifest.inputs.push_back(field_path);
  detail::emit(dir, stem + ".csv", field_csv(f), manifest);
  detail::emit(dir, stem + ".pgm", pgm(f.spec, f.values), manifest);
  detail::finish_manifest(dir, manifest, false);
}

}  // namespace mcflow

#endif  // MCFLOW_PIPELINE_HPP_
