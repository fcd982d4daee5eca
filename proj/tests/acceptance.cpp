// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "liftpool/bench.hpp"
#include "liftpool/cli.hpp"
#include "liftpool/compare.hpp"
#include "liftpool/gradcheck.hpp"
#include "liftpool/model.hpp"
#include "liftpool/pooling.hpp"
#include "liftpool/signal_io.hpp"
#include "liftpool/spectrum.hpp"
#include "liftpool/tlp.hpp"
#include "liftpool/train.hpp"
#include "liftpool/wer.hpp"

using namespace liftpool;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor gaussian(std::mt19937_64& rng, Shape shape, double sigma) {
  std::normal_distribution<double> g(0.0, sigma);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = g(rng);
  return t;
}

Outcome invertibility() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  const std::size_t cs[] = {1, 4, 16}, ts[] = {8, 64, 127};
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    tlp::TlpConfig cfg;
    cfg.channels = cs[i % 3];
    const std::size_t t = ts[(i / 3) % 3];
    tlp::TlpParams p = tlp::make_tlp(cfg, rng);
    std::normal_distribution<double> g(0.0, 0.6);
    p.visit([&](const std::string&, Tensor& w) {
      for (double& v : w.values()) v = g(rng);
    });
    const Tensor x = gaussian(rng, {2, cfg.channels, t}, 3.0);
    worst = std::max(worst, max_abs_diff(x, tlp::inverse_lift(tlp::lift(x, p), p, t)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0, fmt("50 pairs, max |x - inv(lift(x))| = %.3g (<= 1e-9), %.2f s (< 10 s)", worst, secs)};
}

Outcome haar_oracle() {
  std::mt19937_64 rng(202);
  std::size_t mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t t = 2 + rng() % 127;
    const Tensor x = gaussian(rng, {1, 1 + rng() % 4, t}, 5.0);
    const tlp::LiftPair pr = tlp::haar_lift(x);
    if (pr.s != pooling::pool_fixed(pooling::PoolKind::average, x)) ++mismatches;
    // Pairwise differences x[2j] - x[2j+1], last frame replicated.
    Tensor diff(pr.d.shape());
    for (std::size_t c = 0; c < x.channels(); ++c) {
      for (std::size_t j = 0; j < diff.length(); ++j) {
        diff.at(0, c, j) = x.at(0, c, 2 * j) - x.at(0, c, std::min(2 * j + 1, t - 1));
      }
    }
    if (pr.d != diff) ++mismatches;
  }
  return {mismatches == 0, fmt("100 signals, %zu bitwise mismatches in s/avg-pool and d/pairwise-diff", mismatches)};
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = harness::run_gradcheck();
  const double secs = seconds_since(t0);
  std::size_t failed = 0, comps = 0;
  double worst_op = 0.0, worst_comp = 0.0;
  std::size_t min_seeds = SIZE_MAX;
  for (const auto& r : results) {
    failed += !r.passed;
    min_seeds = std::min(min_seeds, r.seeds);
    if (r.composition) {
      ++comps;
      worst_comp = std::max(worst_comp, r.max_rel_error);
    } else {
      worst_op = std::max(worst_op, r.max_rel_error);
    }
  }
  const bool pass = failed == 0 && comps > 0 && min_seeds >= 20 && worst_op < 1e-5 && worst_comp < 1e-4 && secs < 60.0;
  return {pass, fmt("%zu cases (%zu compositions) x %zu seeds, worst op %.2g (< 1e-5), worst composition %.2g "
                    "(< 1e-4), %.1f s (< 60 s)",
                    results.size(), comps, min_seeds, worst_op, worst_comp, secs)};
}

Outcome identity_at_init() {
  std::mt19937_64 rng(404);
  double worst_sum = 0.0;
  bool gate_exact = true;
  for (int i = 0; i < 10; ++i) {
    tlp::TlpConfig cfg;
    cfg.channels = 1 + rng() % 8;
    tlp::TlpParams p = tlp::make_tlp(cfg, rng);
    const Tensor x = gaussian(rng, {2, cfg.channels, 5 + rng() % 60}, 2.0);
    {
      Tape tape;
      const Tensor y = tlp::tlp_forward(tape, tape.constant(x), p, false).y.value();
      const Tensor avg = pooling::pool_fixed(pooling::PoolKind::average, x);
      for (std::size_t k = 0; k < y.size(); ++k) worst_sum = std::max(worst_sum, std::abs(y[k] - 2.0 * avg[k]));
    }
    Tape tape;
    const Tensor s = gaussian(rng, {2, cfg.channels, 9}, 2.0);
    if (tlp::component_weight(tape, tape.constant(s), p.weight_s, cfg, false).value() != s) gate_exact = false;
  }
  return {worst_sum <= 1e-12 && gate_exact,
          fmt("max |y - 2 avg| = %.3g (<= 1e-12); W = 1/2 gate exact identity: %s", worst_sum, gate_exact ? "yes" : "no")};
}

Outcome loss_wiring() {
  const harness::DatasetSplits sp = harness::make_splits(harness::Task::band_mix, 5, {160, 40, 40});
  harness::ModelConfig mc;
  harness::SequenceModel m = harness::build_model(mc, 5);
  harness::TrainConfig tc;
  tc.epochs = 4;
  double worst = 0.0;
  for (const auto& e : harness::train(m, sp.train, sp.dev, tc).log) {
    worst = std::max(worst, std::abs((e.total - e.task_loss) - 0.001 * (e.c_u + e.c_p)));
  }
  return {worst <= 1e-12, fmt("alpha_u = alpha_p = 0.001, max |(total - task) - 0.001 (c_u + c_p)| = %.3g (<= 1e-12)", worst)};
}

Outcome subband_analogue() {
  std::size_t ok = 0;
  double worst_gap = -1.0, worst_frac = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const harness::SpikeSignal sig = harness::spike_signal(seed);
    const tlp::LiftPair pr = tlp::haar_lift(sig.x);
    const double fx = harness::high_band_fraction(sig.x), fs_ = harness::high_band_fraction(pr.s);
    const double near = harness::near_spike_energy_fraction(pr.d, sig.spikes, 1);
    worst_gap = std::max(worst_gap, fs_ - fx);
    worst_frac = std::min(worst_frac, near);
    ok += fs_ < fx && near >= 0.8;
  }
  return {ok == 20, fmt("%zu/20 signals; max (high-band fraction s - x) = %.3g (< 0), min d energy near spikes = %.3f "
                        "(>= 0.8)",
                        ok, worst_gap, worst_frac)};
}

Outcome pooling_comparison() {
  const auto t0 = std::chrono::steady_clock::now();
  harness::CompareOptions o;
  o.specs = {"max", "tlp"};
  o.seeds = {0, 1, 2, 3, 4};
  const harness::CompareReport r = harness::run_compare(o);
  const double secs = seconds_since(t0);
  double tlp = 0.0, mx = 0.0;
  for (const auto& s : r.ranked) (s.spec == "tlp" ? tlp : mx) = s.mean_acc;
  return {tlp >= mx && tlp >= 0.90 && secs < 600.0,
          fmt("band-mix 800/200/200, 5 seeds: tlp %.4f, max %.4f (tlp >= max, tlp >= 0.90), %.0f s (< 600 s)", tlp, mx,
              secs)};
}

Outcome flop_accounting() {
  std::mt19937_64 rng(808);
  std::size_t exact = 0;
  for (int i = 0; i < 10; ++i) {
    tlp::TlpConfig cfg;
    cfg.channels = 1 + rng() % 48;
    cfg.kernel = 1 + 2 * (rng() % 5);
    const std::uint64_t t_out = 1 + rng() % 300;
    const std::uint64_t c = cfg.channels, k = cfg.kernel;
    const std::uint64_t want = k * c * t_out + c * c * t_out;
    const auto pred = kernels::count_flops(harness::describe_subnet(cfg, t_out, "P"));
    const auto upd = kernels::count_flops(harness::describe_subnet(cfg, t_out, "U"));
    exact += pred.total_macs == want && upd.total_macs == want;
  }
  harness::BenchOptions bo;
  bo.specs = {"max", "tlp"};
  bo.warmup = 0;
  bo.batch = 1;
  const harness::BenchReport br = harness::run_benchmark(bo);
  const double frac = br.tlp_added_fraction;
  return {exact == 10 && frac < 0.02,
          fmt("closed-form MACs exact on %zu/10 shapes; TLP-added FLOPs = %.2f%% of the default model's %llu (< 2%%)",
              exact, 100.0 * frac, static_cast<unsigned long long>(br.methods.back().flops.total_flops))};
}

std::size_t reference_distance(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    }
  }
  return d[a.size()][b.size()];
}

Outcome wer_metric() {
  std::mt19937_64 rng(909);
  std::size_t agree = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<int> ref(1 + rng() % 15), hyp(rng() % 16);
    const int vocab = 1 + static_cast<int>(rng() % 6);
    for (int& t : ref) t = static_cast<int>(rng() % vocab);
    for (int& t : hyp) t = static_cast<int>(rng() % vocab);
    const auto b = harness::wer(hyp, ref);
    const std::size_t dist = reference_distance(hyp, ref);
    agree += b.errors() == dist && b.wer == static_cast<double>(dist) / static_cast<double>(ref.size());
  }
  const auto e1 = harness::wer_text("a b c", "a b c");
  const auto e2 = harness::wer_text("", "a");
  const auto e3 = harness::wer_text("a x c", "a b c");
  const bool examples = e1.errors() == 0 && e1.wer == 0.0 && e2.deletions == 1 && e2.errors() == 1 && e2.wer == 1.0 &&
                        e3.substitutions == 1 && e3.errors() == 1 && e3.wer == 1.0 / 3.0;
  return {agree == 1000 && examples,
          fmt("%zu/1000 random pairs agree exactly; worked examples %s", agree, examples ? "match" : "differ")};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "liftpool_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  std::mt19937_64 rng(1010);
  harness::write_text_file((root / "sig.csv").string(), harness::signal_csv(gaussian(rng, {1, 2, 41}, 1.0)));

  const std::vector<std::pair<std::string, std::vector<std::string>>> commands{
      {"decompose", {"decompose", "--input", (root / "sig.csv").string(), "--reconstruct", "--out"}},
      {"train", {"train", "--epochs", "2", "--train-size", "64", "--dev-size", "16", "--test-size", "16", "--seed", "3",
                 "--out"}},
      {"compare", {"compare", "--specs", "max,stochastic,tlp", "--seeds", "2", "--epochs", "1", "--train-size", "32",
                   "--dev-size", "16", "--test-size", "16", "--out"}},
      {"bench", {"bench", "--batch", "2", "--length", "64", "--warmup", "0", "--out"}},
  };
  std::size_t identical = 0, files = 0;
  std::string bad;
  for (const auto& [name, args] : commands) {
    for (const char* run : {"a", "b"}) {
      auto full = args;
      full.push_back((root / name / run).string());
      std::ostringstream out, err;
      if (cli::run(full, out, err) != cli::kExitOk) bad += " " + name + "(exit)";
    }
    for (const auto& entry : fs::directory_iterator(root / name / "a")) {
      const std::string f = entry.path().filename().string();
      if (f == "timing.json") continue;  // wall-clock, not a data output
      ++files;
      if (harness::read_text_file(entry.path().string()) ==
          harness::read_text_file((root / name / "b" / f).string())) {
        ++identical;
      } else {
        bad += " " + name + "/" + f;
      }
    }
  }
  fs::remove_all(root);
  return {bad.empty() && files > 0 && identical == files,
          fmt("%zu/%zu data files byte-identical across repeated decompose/train/compare/bench runs%s", identical, files,
              bad.c_str())};
}

}  // namespace

// With arguments, only the listed criterion numbers run.
int main(int argc, char** argv) {
  std::vector<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::strtoul(argv[i], nullptr, 10));
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"invertibility", invertibility},   {"haar oracle", haar_oracle},     {"gradient suite", gradient_suite},
      {"identity at init", identity_at_init}, {"loss wiring", loss_wiring}, {"sub-band analogue", subband_analogue},
      {"pooling comparison", pooling_comparison}, {"flop accounting", flop_accounting}, {"wer metric", wer_metric},
      {"determinism", determinism},
  };
  int failures = 0;
  std::size_t ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), i + 1) == only.end()) continue;
    ++ran;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, ran);
  return failures == 0 ? 0 : 1;
}
