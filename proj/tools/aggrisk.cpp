// aggrisk: generate inputs, run the aggregate risk engines, benchmark them
// and report risk metrics.
//
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <aggrisk/aggrisk.hpp>

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace aggrisk;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string human_bytes(std::uintmax_t bytes) {
  const char* units[] = {"B", "KiB", "MiB", "GiB", "TiB"};
  double v = static_cast<double>(bytes);
  int u = 0;
  while (v >= 1024.0 && u < 4) {
    v /= 1024.0;
    ++u;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f %s", v, units[u]);
  return buf;
}

void print_profile(const char* label, const PhaseProfile& p) {
  std::printf("%-8s total %.6f s | map_compute %.6f | map_io %.6f | shuffle %.6f | "
              "reduce_compute %.6f | reduce_io %.6f\n",
              label, p.total, p.map_compute, p.map_io, p.shuffle, p.reduce_compute, p.reduce_io);
}

// "metric,parameter,value" rows; a row whose tail is not resolvable gets an
// error marker instead of a value.
void print_metrics(const TrialLossTable& ylt, const std::vector<double>& return_periods,
                   double alpha) {
  std::printf("metric,parameter,value\n");
  for (double rp : return_periods) {
    try {
      std::printf("PML,%s,%s\n", num(rp).c_str(), num(compute_pml(ylt, rp)).c_str());
    } catch (const PreconditionError& e) {
      std::printf("PML,%s,ERROR: %s\n", num(rp).c_str(), e.what());
    }
  }
  try {
    std::printf("TVaR,%s,%s\n", num(alpha).c_str(), num(compute_tvar(ylt, alpha)).c_str());
  } catch (const PreconditionError& e) {
    std::printf("TVaR,%s,ERROR: %s\n", num(alpha).c_str(), e.what());
  }
}

GenConfig load_config(const fs::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::detail::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

ExecutionPlan make_plan(std::size_t workers, std::size_t chunks) {
  ExecutionPlan plan = bench::plan_for_workers(workers);
  if (chunks != 0) plan.chunk_count = chunks;
  return plan;
}

struct Options {
  std::string config_path;
  std::string data_dir;
  std::string engine = "mr";
  std::vector<std::size_t> workers{1};
  std::size_t chunks = 0;  // 0: two per worker
  std::size_t reps = 3;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<double> return_periods{100, 250, 500};
  double alpha = 0.99;
  std::vector<std::size_t> layers;
  std::string ylt_path;
  std::string spill_dir;
};

int cmd_gen(const Options& o) {
  GenConfig cfg = load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  require_valid_config(cfg);

  const io::DataDir dir{o.out};
  std::error_code ec;
  fs::create_directories(dir.root, ec);
  if (ec) throw IoError("cannot create " + dir.root.string() + ": " + ec.message());

  const YearEventTable yet = generate_yet(cfg);
  const Portfolio pf = generate_portfolio(cfg, generate_elt_pool(cfg));
  io::save_dataset(dir, yet, pf, cfg.seed);
  io::detail::write_text(dir.config(), config_to_json(cfg).dump(2) + "\n");

  std::uintmax_t elt_bytes = 0;
  for (const auto& [id, elt] : pf.elt_pool) elt_bytes += fs::file_size(dir.elts() / io::elt_file_name(id));
  std::printf("seed %llu\n", static_cast<unsigned long long>(cfg.seed));
  std::printf("%s  %zu trials x %u events  %s\n", dir.yet().string().c_str(), yet.trial_count(),
              yet.events_per_trial(), human_bytes(fs::file_size(dir.yet())).c_str());
  std::printf("%s  %zu ELT files  %s\n", dir.elts().string().c_str(), pf.elt_pool.size(),
              human_bytes(elt_bytes).c_str());
  std::printf("%s  %zu programs, %zu layers  %s\n", dir.portfolio().string().c_str(),
              pf.programs.size(), pf.layer_count(),
              human_bytes(fs::file_size(dir.portfolio())).c_str());
  return 0;
}

int cmd_run(const Options& o) {
  if (o.engine != "seq" && o.engine != "mr") {
    throw ValidationError("unknown engine '" + o.engine + "' (expected seq or mr)");
  }
  if (o.workers.size() != 1) throw ValidationError("run takes a single --workers value");
  const io::Dataset ds = io::load_dataset(io::DataDir{o.data_dir});
  require_valid_portfolio(ds.portfolio);

  TrialLossTable ylt;
  std::optional<MapReduceResult> mr_result;
  if (o.engine == "seq") {
    ylt = run_sequential(ds.yet, ds.portfolio).ylt;
  } else {
    mr_result = run_mapreduce(ds.yet, ds.portfolio, make_plan(o.workers.front(), o.chunks));
    ylt = mr_result->ylt;
  }

  const fs::path out = o.out.empty() ? fs::path(o.data_dir) / ("ylt_" + o.engine + ".csv") : fs::path(o.out);
  io::write_ylt(out, ylt);

  const YltSummary s = summarize(ylt);
  std::printf("engine %s\nylt %s\ntrials %zu\nmean_loss %s\nstd_loss %s\nmin_loss %s\nmax_loss %s\n",
              o.engine.c_str(), out.string().c_str(), s.trial_count, num(s.mean).c_str(),
              num(s.std_dev).c_str(), num(s.min).c_str(), num(s.max).c_str());
  print_metrics(ylt, o.return_periods, o.alpha);
  if (mr_result) {
    print_profile("round1", mr_result->round1_profile);
    print_profile("round2", mr_result->round2_profile);
    print_profile("run", mr_result->profile);
  }
  return 0;
}

int cmd_bench(const Options& o) {
  const io::Dataset ds = io::load_dataset(io::DataDir{o.data_dir});
  std::optional<fs::path> spill;
  if (!o.spill_dir.empty()) spill = fs::path(o.spill_dir);
  const bench::BenchReport report = bench::run_bench(ds.yet, ds.portfolio, o.workers, o.reps, spill);
  const fs::path out = o.out.empty() ? fs::path(o.data_dir) / "bench.csv" : fs::path(o.out);
  io::detail::write_text(out, report.to_csv());
  std::fputs(report.to_table().c_str(), stdout);
  std::printf("report %s\n", out.string().c_str());
  return 0;
}

int cmd_layer_scaling(const Options& o) {
  bench::check_layer_counts(o.layers);
  if (o.workers.size() != 1) throw ValidationError("layer-scaling takes a single --workers value");
  const io::DataDir dir{o.data_dir};
  GenConfig cfg = load_config(dir.config());
  if (o.seed) cfg.seed = *o.seed;
  const YearEventTable yet = io::read_yet(dir.yet());
  const EltPool pool = io::read_elt_pool(dir.elts());
  const auto rows = bench::run_layer_scaling(yet, pool, cfg, o.layers,
                                             make_plan(o.workers.front(), o.chunks), o.reps);
  const std::string csv = bench::layer_scaling_csv(rows);
  if (!o.out.empty()) io::detail::write_text(o.out, csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

int cmd_metrics(const Options& o) {
  const TrialLossTable ylt = io::read_ylt(o.ylt_path);
  print_metrics(ylt, o.return_periods, o.alpha);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aggregate risk analysis for catastrophe reinsurance portfolios"};
  app.require_subcommand(1);
  Options o;

  auto add_workers = [&](CLI::App* c, const char* help) {
    c->add_option("--workers", o.workers, help)->delimiter(',')->check(CLI::PositiveNumber);
  };

  CLI::App* gen = app.add_subcommand("gen", "Generate a YET, ELT pool and portfolio from a config");
  gen->add_option("config", o.config_path, "Generator config (JSON)")->required();
  gen->add_option("--out", o.out, "Output data directory")->required();
  gen->add_option("--seed", o.seed, "Override the config seed");

  CLI::App* run = app.add_subcommand("run", "Run an engine over a data directory and write the YLT");
  run->add_option("--data", o.data_dir, "Data directory")->required();
  run->add_option("--engine", o.engine, "seq or mr")->check(CLI::IsMember({"seq", "mr"}));
  add_workers(run, "Mappers and reducers (mr engine)");
  run->add_option("--chunks", o.chunks, "Input splits per round (default 2 x workers)");
  run->add_option("--out", o.out, "YLT output path (default <data>/ylt_<engine>.csv)");
  run->add_option("--return-periods", o.return_periods, "PML return periods")->delimiter(',');
  run->add_option("--alpha", o.alpha, "TVaR level");

  CLI::App* bench = app.add_subcommand("bench", "Worker scaling benchmark of the mr engine");
  bench->add_option("--data", o.data_dir, "Data directory")->required();
  add_workers(bench, "Worker counts, e.g. 1,2,4");
  bench->add_option("--reps", o.reps, "Repetitions per worker count (median reported)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--out", o.out, "CSV report path (default <data>/bench.csv)");
  bench->add_option("--spill", o.spill_dir, "Route map output through files in this directory");

  CLI::App* layers = app.add_subcommand("layer-scaling", "Second-round time vs number of layers");
  layers->add_option("--data", o.data_dir, "Data directory")->required();
  layers->add_option("--layers", o.layers, "Layer counts, e.g. 1,10,100")->delimiter(',')->required();
  add_workers(layers, "Mappers and reducers");
  layers->add_option("--chunks", o.chunks, "Input splits per round (default 2 x workers)");
  layers->add_option("--reps", o.reps, "Repetitions per layer count")->check(CLI::PositiveNumber);
  layers->add_option("--seed", o.seed, "Override the portfolio seed");
  layers->add_option("--out", o.out, "CSV output path");

  CLI::App* metrics = app.add_subcommand("metrics", "PML and TVaR of a YLT file");
  metrics->add_option("ylt", o.ylt_path, "YLT file")->required();
  metrics->add_option("--return-periods", o.return_periods, "PML return periods")->delimiter(',');
  metrics->add_option("--alpha", o.alpha, "TVaR level");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*run) return cmd_run(o);
    if (*bench) return cmd_bench(o);
    if (*layers) return cmd_layer_scaling(o);
    if (*metrics) return cmd_metrics(o);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const ShuffleFault& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
