#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lrperc/aniso.hpp"
#include "lrperc/contact.hpp"
#include "lrperc/harness/config.hpp"
#include "lrperc/harness/sweep.hpp"
#include "lrperc/harness/verify_suite.hpp"
#include "lrperc/renorm.hpp"
#include "lrperc/renorm_verify.hpp"

namespace fs = std::filesystem;
using namespace lrperc;
using namespace lrperc::harness;

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::string> seed, replicas, horizon, k, out, format, sabotage, workers, j_max;
  std::vector<std::string> sets;
  bool timing = false;
  bool svg = false;
  std::string trace_out;
  std::string trace_in;
  std::string export_sample;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_path, "key = value config file");
  sub->add_option("--seed", f.seed, "base seed seed0");
  sub->add_option("--replicas", f.replicas, "number of replicas N");
  sub->add_option("--horizon", f.horizon, "horizon T (layers, or time for contact)");
  sub->add_option("--k", f.k, "truncation ranges, e.g. 3,6,9 or auto");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--format", f.format, "stdout format")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--workers", f.workers, "worker threads (default: LRPERC_WORKERS or hardware)");
  sub->add_option("--j-max", f.j_max, "coarse levels for renormalized explorations");
  sub->add_option("--set", f.sets, "extra key=value override (repeatable)");
  sub->add_flag("--timing", f.timing, "report wall_time instead of '-'");
}

ExperimentConfig build_config(const Flags& f, std::optional<ExperimentModel> model) {
  ExperimentConfig c = f.config_path.empty() ? ExperimentConfig{} : load_config(f.config_path);
  if (model) c.model = *model;
  auto apply = [&](const char* key, const std::optional<std::string>& v, const char* flag) {
    if (v) c.set(key, *v, flag);
  };
  apply("seed", f.seed, "--seed");
  apply("replicas", f.replicas, "--replicas");
  apply("horizon", f.horizon, "--horizon");
  apply("k", f.k, "--k");
  apply("out", f.out, "--out");
  apply("format", f.format, "--format");
  apply("sabotage", f.sabotage, "--sabotage");
  apply("workers", f.workers, "--workers");
  apply("j_max", f.j_max, "--j-max");
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set", kv, "expected key=value");
    c.set(harness::detail::trim(kv.substr(0, eq)), kv.substr(eq + 1), "--set");
  }
  if (f.timing) c.timing = true;
  if (f.svg) c.svg = true;
  c.validate();
  return c;
}

std::ofstream open_output(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

void print_rows(const ExperimentConfig& c, const std::vector<SweepRow>& rows) {
  if (c.format == OutputFormat::json) {
    std::cout << sweep_json(c, rows).dump(2) << '\n';
  } else {
    write_csv(std::cout, rows, c.timing);
  }
}

int run_pipeline(const ExperimentConfig& c, const Flags& f) {
  const auto rows = run_sweep(c);
  print_rows(c, rows);
  if (!f.export_sample.empty()) {
    const auto k = resolve_k_list(c).back();
    auto os = open_output(f.export_sample);
    if (c.model == ExperimentModel::aniso) {
      const auto cfg = aniso_config(c, TruncationRange::at(k));
      for (std::uint64_t i = 1; i <= c.replicas; ++i) {
        const auto r = explore_aniso(mix_seed(c.seed0, i), cfg, static_cast<std::int64_t>(c.horizon));
        if (!r.survived) continue;
        os << "# replica " << i << " k " << k << '\n';
        write_bonds(os, r.lifted);
        break;
      }
    } else if (c.model == ExperimentModel::contact) {
      const auto model = contact_model(c, TruncationRange::at(k));
      const auto radius = c.window > 0 ? c.window : std::min<std::int64_t>(default_contact_radius(model, c.horizon), 64);
      const auto sample = sample_graphical(mix_seed(c.seed0, 1), model,
                                           Window{Point{-radius}, Point{radius}, c.horizon});
      write_events(os, sample);
    } else {
      const auto cfg = SeededConfig(mix_seed(c.seed0, 1), truncate(c.family.build(), k));
      ExploreOptions eo;
      eo.track_parents = true;
      const auto r = explore(cfg, static_cast<std::int64_t>(c.horizon), Vertex{Point::zero(c.family.dim), 0}, eo);
      os << "# replica 1 k " << k << (r.survived ? " survived" : " died") << '\n';
      if (r.survived)
        for (const auto& v : certificate_path(r)) os << v.x.to_string() << ' ' << v.t << '\n';
    }
  }
  return kExitPass;
}

int run_renorm(const ExperimentConfig& c, const Flags& f) {
  const auto params = experiment_params(c);
  const auto workers = resolve_workers(c);
  std::vector<ExplorationTrace> traces;
  if (c.replicas > 0) traces = explore_replicas(c.family.build(), params, c.j_max, c.replicas, c.seed0, workers);
  if (!f.trace_out.empty()) {
    if (traces.empty()) throw Error("no trace to write (replicas = 0)");
    auto os = open_output(f.trace_out);
    write_trace(os, traces.front());
  }
  nlohmann::ordered_json j;
  j["epsilon"] = params.epsilon;
  j["delta"] = params.delta;
  j["L0"] = params.L0;
  j["L1"] = params.L1;
  j["R"] = params.R;
  j["L2"] = params.L2;
  j["k_star"] = params.k_star;
  j["a_L1"] = params.aL1();
  j["a_2L1"] = params.a2L1();
  j["a_L2"] = params.aL2();
  if (!traces.empty()) {
    const auto dom = domination_report(traces, c.delta, ComparisonMode::independent, c.confidence);
    j["traces"] = dom.traces;
    j["steps"] = dom.steps;
    j["good_frequency"] = dom.frequency;
    j["ci_lo"] = dom.ci.lo;
    j["ci_hi"] = dom.ci.hi;
    j["threshold"] = dom.threshold;
    j["domination"] = dom.pass ? "PASS" : "FAIL";
    j["reached_level"] = dom.reached_level;
    nlohmann::ordered_json buckets = nlohmann::ordered_json::array();
    for (const auto& b : dom.by_depth)
      buckets.push_back({{"lo", b.lo}, {"hi", b.hi}, {"steps", b.steps}, {"good", b.good}});
    j["by_depth"] = buckets;
  }
  if (c.format == OutputFormat::json) {
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& [k, v] : j.items())
      if (k != "by_depth") std::cout << k << ',' << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
  }
  return kExitPass;
}

int run_sweep_command(const ExperimentConfig& c) {
  const fs::path dir(c.out);
  fs::create_directories(dir);
  auto csv = open_output(dir / "sweep.csv");
  csv << kCsvHeader << '\n' << std::flush;
  std::vector<SweepRow> rows;
  auto flush_side_files = [&] {
    auto dat = open_output(dir / "sweep.dat");
    write_plot_data(dat, c, rows);
    if (c.format == OutputFormat::json) {
      auto js = open_output(dir / "sweep.json");
      js << sweep_json(c, rows).dump(2) << '\n';
    }
    if (c.svg) {
      auto svg = open_output(dir / "sweep.svg");
      write_svg(svg, to_string(c.model) + " survival vs k", rows);
    }
  };
  try {
    run_sweep(c, 0, [&](const SweepRow& r) {
      rows.push_back(r);
      csv << csv_line(r, c.timing) << '\n' << std::flush;
    });
  } catch (...) {
    flush_side_files();
    throw;
  }
  flush_side_files();
  print_rows(c, rows);
  return kExitPass;
}

int run_verify(const ExperimentConfig& c, const Flags& f) {
  SuiteOptions opt;
  if (!f.trace_in.empty()) {
    std::ifstream in(f.trace_in);
    if (!in) throw ConfigError(f.trace_in, "", "cannot open trace file");
    std::vector<ExplorationTrace> list;
    in.peek();
    if (!in.eof()) list.push_back(read_trace(in));
    opt.external_traces = std::move(list);
  }
  const auto report = run_verification_suite(c, opt);
  const auto j = report_json(c, report);
  const fs::path dir(c.out);
  fs::create_directories(dir);
  auto os = open_output(dir / "verify.json");
  os << j.dump(2) << '\n';
  if (c.format == OutputFormat::json) {
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& chk : report.checks)
      std::cout << to_string(chk.status) << ' ' << chk.name << " evaluations=" << chk.evaluations
                << " violations=" << chk.violations << (chk.detail.empty() ? "" : " | " + chk.detail) << '\n';
    std::cout << "status " << to_string(report.status()) << '\n';
  }
  return report.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truncated long-range oriented percolation: simulation and checks"};
  app.require_subcommand(1);
  Flags f;
  auto* perc = app.add_subcommand("perc", "survival of the truncated oriented model");
  auto* renorm = app.add_subcommand("renorm", "parameters and renormalized explorations");
  auto* aniso = app.add_subcommand("aniso", "survival of the induced anisotropic model");
  auto* contact = app.add_subcommand("contact", "survival of the truncated contact process");
  auto* sweep = app.add_subcommand("sweep", "coupled sweep over k with CSV, plot data and SVG");
  auto* verify = app.add_subcommand("verify", "invariant suite with PASS/FAIL report");
  for (auto* s : {perc, renorm, aniso, contact, sweep, verify}) add_common(s, f);
  for (auto* s : {perc, aniso, contact})
    s->add_option("--export-sample", f.export_sample, "write one realization (path, bonds or events)");
  renorm->add_option("--trace-out", f.trace_out, "write the first exploration trace");
  verify->add_option("--trace", f.trace_in, "also verify this trace file");
  verify->add_option("--sabotage", f.sabotage, "flip this fraction of sampled edge states");
  sweep->add_flag("--svg", f.svg, "also write sweep.svg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (perc->parsed()) return run_pipeline(build_config(f, ExperimentModel::perc), f);
    if (aniso->parsed()) return run_pipeline(build_config(f, ExperimentModel::aniso), f);
    if (contact->parsed()) return run_pipeline(build_config(f, ExperimentModel::contact), f);
    if (renorm->parsed()) return run_renorm(build_config(f, ExperimentModel::renorm), f);
    if (sweep->parsed()) return run_sweep_command(build_config(f, std::nullopt));
    if (verify->parsed()) return run_verify(build_config(f, std::nullopt), f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
  return kExitFail;
}
