#include "liftpool/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "CLI11.hpp"
#include "liftpool/bench.hpp"
#include "liftpool/checkpoint.hpp"
#include "liftpool/compare.hpp"
#include "liftpool/errors.hpp"
#include "liftpool/gradcheck.hpp"
#include "liftpool/signal_io.hpp"
#include "liftpool/spectrum.hpp"
#include "liftpool/text.hpp"
#include "liftpool/tlp.hpp"
#include "liftpool/train.hpp"

namespace liftpool::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

harness::ModelConfig model_config(const CommandConfig& c) {
  harness::ModelConfig m;
  m.pool = c.pool;
  harness::parse_pool_spec(c.pool);
  m.hidden = c.hidden;
  m.placement = harness::parse_placement(c.placement);
  m.tlp.kernel = c.kernel;
  m.tlp.weighting_kernel = c.weighting_kernel;
  m.tlp.fusion = tlp::parse_fusion(c.fusion);
  m.tlp.sharing = tlp::parse_sharing(c.sharing);
  m.tlp.weighting_form = tlp::parse_weighting_form(c.weighting_form);
  m.tlp.weighting_norm = kernels::parse_norm(c.weighting_norm);
  m.tlp.arch = tlp::parse_subnet_arch(c.arch);
  return m;
}

harness::TrainConfig train_config(const CommandConfig& c) {
  harness::TrainConfig t;
  t.lr = c.lr;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.alpha_u = c.alpha_u;
  t.alpha_p = c.alpha_p;
  t.weight_decay = c.weight_decay;
  t.seed = c.seed;
  return t;
}

harness::DatasetOptions data_options(const CommandConfig& c) {
  harness::DatasetOptions d;
  d.noise_sigma = c.noise;
  return d;
}

std::vector<std::uint64_t> seed_list(std::uint64_t base, std::size_t n) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(base + i);
  return out;
}

fs::path out_dir(const CommandConfig& c) {
  fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void add_model_options(CLI::App* sub, CommandConfig& c) {
  sub->add_option("--pool", c.pool, "pool spec: max, avg, lp:<p>, mixed, stochastic, soft, tlp")->capture_default_str();
  sub->add_option("--K", c.kernel, "predictor/updater kernel width")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--fusion", c.fusion, "sum, concat, bottleneck, s_only")->capture_default_str();
  sub->add_option("--weighting-kernel", c.weighting_kernel)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--sharing", c.sharing, "independent, shared, none")->capture_default_str();
  sub->add_option("--weighting-form", c.weighting_form, "residual, direct")->capture_default_str();
  sub->add_option("--weighting-norm", c.weighting_norm, "instance, batch")->capture_default_str();
  sub->add_option("--arch", c.arch, "standard, simple")->capture_default_str();
  sub->add_option("--placement", c.placement, "both, first, second, none")->capture_default_str();
  sub->add_option("--hidden", c.hidden, "backbone width")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed)->capture_default_str();
}

void add_train_options(CLI::App* sub, CommandConfig& c) {
  sub->add_option("--task", c.task, "band-mix, spike-pattern")->capture_default_str();
  sub->add_option("--epochs", c.epochs)->capture_default_str();
  sub->add_option("--batch-size", c.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--lr", c.lr)->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--weight-decay", c.weight_decay)->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--alpha-u", c.alpha_u)->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--alpha-p", c.alpha_p)->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--train-size", c.train_size)->capture_default_str();
  sub->add_option("--dev-size", c.dev_size)->capture_default_str();
  sub->add_option("--test-size", c.test_size)->capture_default_str();
  sub->add_option("--noise", c.noise, "band-mix / spike-pattern noise sigma")->capture_default_str();
}

// ---------------------------------------------------------------------------

double row_energy(const Tensor& x, harness::Band band) {
  // A single frame carries only the DC term.
  if (x.length() < 2) return band == harness::Band::low ? harness::signal_energy(x) : 0.0;
  return harness::band_energy(x, band);
}

std::string bands_csv(const std::vector<std::pair<std::string, const Tensor*>>& signals) {
  std::string out = "signal,length,low,high,high_fraction\n";
  for (const auto& [name, x] : signals) {
    const double lo = row_energy(*x, harness::Band::low), hi = row_energy(*x, harness::Band::high);
    out += name + "," + std::to_string(x->length()) + "," + format_exact(lo) + "," + format_exact(hi) + "," +
           format_exact(lo + hi > 0.0 ? hi / (lo + hi) : 0.0) + "\n";
  }
  return out;
}

tlp::TlpParams load_lift_params(const CommandConfig& c) {
  const json j = tlp::read_json_file(c.checkpoint);
  if (j.contains("tlp_layers")) {
    const std::string key = "pool" + std::to_string(c.layer);
    const json& layers = j.at("tlp_layers");
    if (!layers.contains(key)) throw IoError("checkpoint '" + c.checkpoint + "' has no TLP layer " + key);
    return tlp::tlp_from_json(layers.at(key)).params;
  }
  return tlp::tlp_from_json(j).params;
}

int run_decompose(const CommandConfig& c, std::ostream& out) {
  const Tensor x = harness::read_signal_csv(c.input);
  tlp::LiftPair pair;
  std::optional<tlp::TlpParams> params;
  if (c.checkpoint.empty()) {
    pair = tlp::haar_lift(x);
  } else {
    params = load_lift_params(c);
    if (params->config.channels != x.channels()) {
      throw ShapeError("signal has " + std::to_string(x.channels()) + " channels, checkpoint layer expects " +
                       std::to_string(params->config.channels));
    }
    pair = tlp::lift(x, *params);
  }
  const fs::path dir = out_dir(c);
  harness::write_text_file((dir / "s.csv").string(), harness::signal_csv(pair.s));
  harness::write_text_file((dir / "d.csv").string(), harness::signal_csv(pair.d));
  harness::write_text_file((dir / "bands.csv").string(), bands_csv({{"x", &x}, {"s", &pair.s}, {"d", &pair.d}}));
  out << "wrote " << (dir / "s.csv").string() << ", d.csv, bands.csv (" << (params ? "learned" : "haar")
      << " filters)\n";
  if (c.reconstruct) {
    const Tensor back = params ? tlp::inverse_lift(pair, *params, x.length()) : tlp::haar_inverse(pair, x.length());
    harness::write_text_file((dir / "reconstruction.csv").string(), harness::signal_csv(back));
    out << "reconstruction max abs error " << format_exact(max_abs_diff(x, back)) << '\n';
  }
  return kExitOk;
}

int run_train(const CommandConfig& c, std::ostream& out) {
  const harness::DatasetSplits data = harness::make_splits(
      harness::parse_task(c.task), c.seed, {c.train_size, c.dev_size, c.test_size}, data_options(c));
  harness::SequenceModel model = harness::build_model(model_config(c), c.seed);
  const harness::TrainConfig tc = train_config(c);
  const fs::path dir = out_dir(c);
  const std::string metrics_path = (dir / "metrics.csv").string();
  harness::write_text_file(metrics_path, std::string(harness::kMetricsHeader) + "\n");
  std::ofstream metrics(metrics_path, std::ios::binary | std::ios::app);
  if (!metrics) throw IoError("cannot open '" + metrics_path + "' for appending");

  const harness::TrainResult result = harness::train(model, data.train, data.dev, tc, [&](const auto& m) {
    metrics << harness::metrics_row(m) << '\n' << std::flush;
    out << "epoch " << m.epoch << " task " << std::setprecision(6) << m.task_loss << " c_u " << m.c_u << " c_p "
        << m.c_p << " dev_acc " << m.dev_acc << '\n';
  });
  const double test_acc = harness::evaluate(model, data.test);
  tlp::write_json_file((dir / "checkpoint.json").string(), harness::model_to_json(model, tc));
  const json summary{{"pool", c.pool},
                     {"seed", c.seed},
                     {"parameters", model.parameter_count()},
                     {"train_acc", result.train_acc},
                     {"dev_acc", result.log.empty() ? 0.0 : result.log.back().dev_acc},
                     {"test_acc", test_acc}};
  tlp::write_json_file((dir / "summary.json").string(), summary);
  out << "test_acc " << format_exact(test_acc) << "\n";
  return kExitOk;
}

int run_compare(const CommandConfig& c, std::ostream& out) {
  harness::CompareOptions o;
  if (!c.specs.empty()) o.specs = c.specs;
  o.seeds = seed_list(c.seed, c.seeds ? c.seeds : 5);
  o.task = harness::parse_task(c.task);
  o.sizes = {c.train_size, c.dev_size, c.test_size};
  o.data = data_options(c);
  o.model = model_config(c);
  o.train = train_config(c);
  o.threads = c.threads;
  const harness::CompareReport report = harness::run_compare(o);
  const std::string table = harness::compare_csv(report, o.seeds);
  harness::write_text_file((out_dir(c) / "compare.csv").string(), table);
  out << table;
  return kExitOk;
}

int run_bench(const CommandConfig& c, std::ostream& out) {
  harness::BenchOptions o;
  if (!c.specs.empty()) o.specs = c.specs;
  o.length = c.length;
  o.batch = c.bench_batch;
  o.model = model_config(c);
  o.repetitions = c.repetitions;
  o.warmup = c.warmup;
  o.seed = c.seed;
  o.accuracy_seeds = seed_list(c.seed, c.accuracy_seeds);
  o.accuracy_epochs = c.accuracy_epochs;
  const harness::BenchReport r = harness::run_benchmark(o);
  const fs::path dir = out_dir(c);
  tlp::write_json_file((dir / "report.json").string(), harness::bench_report_json(r));
  tlp::write_json_file((dir / "timing.json").string(), harness::bench_timing_json(r));
  for (const auto& m : r.methods) {
    out << std::left << std::setw(12) << m.spec << " flops " << m.flops.total_flops << "  params " << m.parameters
        << "  median step " << std::setprecision(4) << m.median_seconds * 1e3 << " ms  " << m.throughput
        << " seq/s\n";
  }
  if (r.has_overhead) {
    out << "tlp added flops " << r.tlp_added_flops << " (" << std::setprecision(4) << 100.0 * r.tlp_added_fraction
        << "% of the tlp model)\n";
  }
  return kExitOk;
}

int run_gradcheck(const CommandConfig& c, std::ostream& out) {
  harness::GradCheckOptions o;
  o.seeds = c.seeds ? c.seeds : 20;
  o.base_seed = c.seed;
  const auto results =
      c.cases.empty() ? harness::run_gradcheck(o) : harness::run_gradcheck(o, c.cases);
  bool ok = true;
  std::string csv = "case,kind,seeds,max_rel_error,tolerance,passed\n";
  for (const auto& r : results) {
    ok = ok && r.passed;
    out << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(32) << r.name << " max rel err "
        << std::scientific << std::setprecision(3) << r.max_rel_error << " < " << r.tolerance << std::defaultfloat
        << '\n';
    csv += r.name + "," + (r.composition ? "composition" : "op") + "," + std::to_string(r.seeds) + "," +
           format_exact(r.max_rel_error) + "," + format_exact(r.tolerance) + "," + (r.passed ? "1" : "0") + "\n";
  }
  if (!c.out.empty()) harness::write_text_file((out_dir(c) / "gradcheck.csv").string(), csv);
  out << (ok ? "all gradient checks passed\n" : "gradient check FAILED\n");
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

std::string command_name(Command c) {
  switch (c) {
    case Command::decompose: return "decompose";
    case Command::train: return "train";
    case Command::compare: return "compare";
    case Command::bench: return "bench";
    case Command::gradcheck: return "gradcheck";
  }
  return "?";
}

CommandConfig parse_args(const std::vector<std::string>& args) {
  if (args.empty()) throw UsageError("missing subcommand (decompose, train, compare, bench, gradcheck)");
  CommandConfig c;
  CLI::App app{"Temporal lift pooling toolkit", "liftpool"};
  app.require_subcommand(1);

  CLI::App* decompose = app.add_subcommand("decompose", "split a signal CSV into s and d sub-bands");
  decompose->add_option("--input", c.input, "signal CSV (channel,t0,t1,...)")->required();
  decompose->add_option("--out", c.out, "output directory")->required();
  decompose->add_option("--checkpoint", c.checkpoint, "TLP or model checkpoint; Haar filters when omitted");
  decompose->add_option("--layer", c.layer, "TLP layer of a model checkpoint (1 or 2)")
      ->capture_default_str()
      ->check(CLI::Range(1, 2));
  decompose->add_flag("--reconstruct", c.reconstruct, "also write the inverse lift as reconstruction.csv");

  CLI::App* train = app.add_subcommand("train", "train one model on a synthetic task");
  add_model_options(train, c);
  add_train_options(train, c);
  train->add_option("--out", c.out, "output directory");

  CLI::App* compare = app.add_subcommand("compare", "pool specs x seeds, ranked by test accuracy");
  add_model_options(compare, c);
  add_train_options(compare, c);
  compare->add_option("--specs", c.specs, "comma-separated pool specs")->delimiter(',');
  compare->add_option("--seeds", c.seeds, "number of seeds, starting at --seed (default 5)");
  compare->add_option("--threads", c.threads, "worker threads (LIFTPOOL_THREADS caps the default)");
  compare->add_option("--out", c.out, "output directory");

  CLI::App* bench = app.add_subcommand("bench", "FLOPs, working set and throughput per pool spec");
  add_model_options(bench, c);
  bench->add_option("--specs", c.specs, "comma-separated pool specs")->delimiter(',');
  bench->add_option("--length", c.length)->capture_default_str()->check(CLI::Range(2, 1 << 20));
  bench->add_option("--batch", c.bench_batch)->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--repetitions", c.repetitions)->capture_default_str()->check(CLI::Range(5, 1 << 20));
  bench->add_option("--warmup", c.warmup)->capture_default_str();
  bench->add_option("--accuracy-seeds", c.accuracy_seeds, "train this many seeds for the accuracy summary")
      ->capture_default_str();
  bench->add_option("--accuracy-epochs", c.accuracy_epochs)->capture_default_str();
  bench->add_option("--out", c.out, "output directory");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck->add_option("--seeds", c.seeds, "seeds per case (default 20)");
  gradcheck->add_option("--seed", c.seed, "first seed")->capture_default_str();
  gradcheck->add_option("--case", c.cases, "run only these cases (repeatable)");
  gradcheck->add_option("--out", c.out, "write gradcheck.csv here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    for (CLI::App* sub : app.get_subcommands()) throw HelpRequested{sub->help()};
    throw HelpRequested{app.help()};
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested{app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  if (*decompose) c.command = Command::decompose;
  if (*train) c.command = Command::train;
  if (*compare) c.command = Command::compare;
  if (*bench) c.command = Command::bench;
  if (*gradcheck) c.command = Command::gradcheck;

  try {
    model_config(c);
    harness::parse_task(c.task);
    for (const auto& s : c.specs) harness::parse_pool_spec(s);
    if (c.command == Command::gradcheck && !c.cases.empty()) {
      const auto known = harness::gradcheck_case_names();
      for (const auto& name : c.cases) {
        if (std::find(known.begin(), known.end(), name) == known.end()) {
          throw ConfigError("unknown gradcheck case '" + name + "'");
        }
      }
    }
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  return c;
}

json resolved_config(const CommandConfig& c) {
  json j{{"command", command_name(c.command)}, {"seed", c.seed}, {"out", c.out}};
  switch (c.command) {
    case Command::decompose:
      j.update({{"input", c.input},
                {"filters", c.checkpoint.empty() ? "haar" : "checkpoint"},
                {"checkpoint", c.checkpoint},
                {"layer", c.layer},
                {"reconstruct", c.reconstruct}});
      return j;
    case Command::gradcheck:
      j.update({{"seeds", c.seeds ? c.seeds : 20}, {"cases", c.cases}, {"eps", harness::GradCheckOptions{}.eps}});
      return j;
    default: break;
  }
  j.update({{"pool", c.pool},
            {"K", c.kernel},
            {"fusion", c.fusion},
            {"weighting_kernel", c.weighting_kernel},
            {"sharing", c.sharing},
            {"weighting_form", c.weighting_form},
            {"weighting_norm", c.weighting_norm},
            {"arch", c.arch},
            {"placement", c.placement},
            {"hidden", c.hidden}});
  if (c.command == Command::bench) {
    j.update({{"specs", c.specs.empty() ? harness::BenchOptions{}.specs : c.specs},
              {"length", c.length},
              {"batch", c.bench_batch},
              {"repetitions", c.repetitions},
              {"warmup", c.warmup},
              {"accuracy_seeds", c.accuracy_seeds},
              {"accuracy_epochs", c.accuracy_epochs}});
    return j;
  }
  j.update({{"task", c.task},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"alpha_u", c.alpha_u},
            {"alpha_p", c.alpha_p},
            {"train_size", c.train_size},
            {"dev_size", c.dev_size},
            {"test_size", c.test_size},
            {"noise", c.noise}});
  if (c.command == Command::compare) {
    j.update({{"specs", c.specs.empty() ? harness::CompareOptions{}.specs : c.specs},
              {"seeds", c.seeds ? c.seeds : 5},
              {"threads", c.threads ? c.threads : harness::compare_thread_count()}});
  }
  return j;
}

int dispatch(const CommandConfig& c, std::ostream& out, std::ostream& err) {
  try {
    err << "liftpool: resolved config " << resolved_config(c).dump() << '\n';
    switch (c.command) {
      case Command::decompose: return run_decompose(c, out);
      case Command::train: return run_train(c, out);
      case Command::compare: return run_compare(c, out);
      case Command::bench: return run_bench(c, out);
      case Command::gradcheck: return run_gradcheck(c, out);
    }
    return kExitUsage;
  } catch (const IoError& e) {
    err << "liftpool: I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ShapeError& e) {
    err << "liftpool: input error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericalError& e) {
    err << "liftpool: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << "liftpool: configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "liftpool: usage error: " << e.what() << '\n';
    return kExitUsage;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CommandConfig config;
  try {
    config = parse_args(args);
  } catch (const HelpRequested& h) {
    out << h.text;
    return kExitOk;
  } catch (const UsageError& e) {
    err << "liftpool: " << e.what() << "\nrun 'liftpool --help' for usage\n";
    return kExitUsage;
  }
  return dispatch(config, out, err);
}

}  // namespace liftpool::cli
