#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "liftpool/bench.hpp"
#include "liftpool/compare.hpp"
#include "liftpool/dataset.hpp"
#include "liftpool/errors.hpp"
#include "liftpool/gradcheck.hpp"
#include "liftpool/model.hpp"
#include "liftpool/signal_io.hpp"
#include "liftpool/spectrum.hpp"
#include "liftpool/train.hpp"
#include "liftpool/wer.hpp"

using namespace liftpool;
using namespace liftpool::harness;

namespace {

std::vector<Tensor> parameters(SequenceModel& m) {
  std::vector<Tensor> out;
  m.visit([&](const std::string&, Tensor& t) { out.push_back(t); });
  return out;
}

// Nearest class by log amplitude ratio, estimated from the band energies.
int ratio_oracle(const Tensor& x) {
  const double r = std::sqrt(band_energy(x, Band::high) / band_energy(x, Band::low));
  int best = 0;
  for (int k = 1; k < 4; ++k) {
    if (std::abs(std::log(r / band_mix_ratio(k))) < std::abs(std::log(r / band_mix_ratio(best)))) best = k;
  }
  return best;
}

// Plain Levenshtein distance, rolling rows, written independently of wer().
std::size_t edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

SplitSizes small_sizes() { return SplitSizes{96, 32, 32}; }

}  // namespace

TEST(Dataset, DeterministicAndBalanced) {
  for (Task task : {Task::band_mix, Task::spike_pattern}) {
    const SyntheticDataset a = gen_dataset(task, 7, 100), b = gen_dataset(task, 7, 100);
    ASSERT_EQ(a.size(), 100u);
    std::map<int, int> hist;
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a.samples[i].signal, b.samples[i].signal);
      EXPECT_EQ(a.samples[i].label, b.samples[i].label);
      EXPECT_EQ(a.samples[i].signal.shape(), (Shape{1, 2, 128}));
      ++hist[a.samples[i].label];
    }
    ASSERT_EQ(hist.size(), 4u);
    for (auto [label, count] : hist) EXPECT_NEAR(count, 25, 1) << "label " << label;
    EXPECT_EQ(dataset_csv(a), dataset_csv(b));
    EXPECT_NE(dataset_csv(a), dataset_csv(gen_dataset(task, 8, 100)));
  }
  const SyntheticDataset a = gen_dataset(Task::band_mix, 7, 100, {}, "train");
  const SyntheticDataset d = gen_dataset(Task::band_mix, 7, 100, {}, "dev");
  EXPECT_NE(a.samples[0].signal, d.samples[0].signal);
}

TEST(Dataset, CsvLayout) {
  const SyntheticDataset ds = gen_dataset(Task::band_mix, 1, 4);
  const std::string csv = dataset_csv(ds);
  EXPECT_EQ(csv.substr(0, csv.find('\n')).rfind("sample_id,channel,label,t0,t1,", 0), 0u);
  EXPECT_NE(csv.find(",t127\n"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 2);
}

TEST(Dataset, NoiseFreeBandMixSeparableByBandEnergy) {
  DatasetOptions o;
  o.noise_sigma = 0.0;
  const SyntheticDataset ds = gen_dataset(Task::band_mix, 3, 200, o);
  for (const auto& s : ds.samples) EXPECT_EQ(ratio_oracle(s.signal), s.label);
}

TEST(Dataset, Errors) {
  EXPECT_THROW(parse_task("mnist"), ConfigError);
  EXPECT_EQ(parse_task(task_name(Task::spike_pattern)), Task::spike_pattern);
}

TEST(Model, ParameterCounts) {
  ModelConfig mc;
  mc.pool = "max";
  const std::size_t base = build_model(mc, 0).parameter_count();
  mc.pool = "avg";
  EXPECT_EQ(build_model(mc, 0).parameter_count(), base);
  // conv1 2->16 k5, conv2 16->16 k5, classifier 16->4.
  EXPECT_EQ(base, (5 * 2 * 16 + 16) + (5 * 16 * 16 + 16) + (16 * 4 + 4));
  mc.pool = "mixed";
  EXPECT_EQ(build_model(mc, 0).parameter_count(), base + 2);
  mc.pool = "tlp";
  const SequenceModel tlp = build_model(mc, 0);
  EXPECT_EQ(tlp.parameter_count(), base + 2 * tlp.slots[0].tlp->parameter_count());
  mc.placement = Placement::first;
  EXPECT_EQ(build_model(mc, 0).parameter_count(), base + tlp.slots[0].tlp->parameter_count());
  mc.placement = Placement::none;
  EXPECT_EQ(build_model(mc, 0).parameter_count(), base);
  EXPECT_THROW(parse_pool_spec("bogus"), ConfigError);
}

TEST(Model, InitIsDeterministic) {
  ModelConfig mc;
  SequenceModel a = build_model(mc, 5), b = build_model(mc, 5), c = build_model(mc, 6);
  EXPECT_EQ(parameters(a), parameters(b));
  EXPECT_NE(parameters(a), parameters(c));
}

TEST(Model, JsonRoundTripPreservesPredictions) {
  ModelConfig mc;
  mc.tlp.fusion = tlp::Fusion::bottleneck;
  SequenceModel m = build_model(mc, 2);
  const SyntheticDataset ds = gen_dataset(Task::band_mix, 2, 40);
  TrainConfig tc;
  tc.epochs = 1;
  train(m, ds, ds, tc);
  const nlohmann::json j = model_to_json(m, tc);
  SequenceModel back = model_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(parameters(back), parameters(m));
  EXPECT_EQ(predict_labels(back, ds), predict_labels(m, ds));
  EXPECT_EQ(model_to_json(back, tc).dump(), j.dump());
  nlohmann::json broken = j;
  broken["parameters"].erase("conv1.weight");
  EXPECT_THROW(model_from_json(broken), IoError);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  ModelConfig mc;
  SequenceModel m = build_model(mc, 1);
  const auto before = parameters(m);
  const SyntheticDataset ds = gen_dataset(Task::band_mix, 1, 48);
  TrainConfig tc;
  tc.lr = 0.0;
  tc.epochs = 2;
  train(m, ds, ds, tc);
  EXPECT_EQ(parameters(m), before);
}

TEST(Train, DeterministicLogs) {
  auto run = [] {
    ModelConfig mc;
    mc.pool = "stochastic";
    SequenceModel m = build_model(mc, 4);
    const DatasetSplits sp = make_splits(Task::band_mix, 4, small_sizes());
    TrainConfig tc;
    tc.epochs = 3;
    tc.seed = 4;
    return metrics_csv(train(m, sp.train, sp.dev, tc).log);
  };
  const std::string a = run();
  EXPECT_EQ(a, run());
  EXPECT_EQ(a.rfind(std::string(kMetricsHeader) + "\n", 0), 0u);
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 4);
}

TEST(Train, LoggedTotalFollowsLossWiring) {
  ModelConfig mc;
  SequenceModel m = build_model(mc, 3);
  const DatasetSplits sp = make_splits(Task::band_mix, 3, small_sizes());
  TrainConfig tc;
  tc.epochs = 3;
  for (const auto& e : train(m, sp.train, sp.dev, tc).log) {
    EXPECT_NEAR(e.total - e.task_loss, 0.001 * (e.c_u + e.c_p), 1e-12);
    EXPECT_GT(e.c_u, 0.0);
    EXPECT_GT(e.c_p, 0.0);
  }
}

TEST(Train, DoublingAlphaUDoublesItsTerm) {
  ModelConfig mc;
  SequenceModel m = build_model(mc, 3);
  const SyntheticDataset ds = gen_dataset(Task::band_mix, 3, 32);
  TrainConfig tc;
  tc.epochs = 1;
  train(m, ds, ds, tc);
  const double ap = 0.004;
  const tlp::LossReport one = batch_loss(m, ds, 0, 16, 0.003, ap);
  const tlp::LossReport two = batch_loss(m, ds, 0, 16, 0.006, ap);
  EXPECT_EQ(one.c_u, two.c_u);
  const double t1 = one.total - one.task_loss - ap * one.c_p, t2 = two.total - two.task_loss - ap * two.c_p;
  EXPECT_GT(t1, 0.0);
  EXPECT_NEAR(t2, 2.0 * t1, 1e-15);
}

TEST(Train, NonFiniteLossAborts) {
  ModelConfig mc;
  mc.pool = "max";
  SequenceModel m = build_model(mc, 0);
  const SyntheticDataset ds = gen_dataset(Task::band_mix, 0, 16);
  TrainConfig tc;
  tc.lr = 1e300;
  tc.epochs = 3;
  EXPECT_THROW(train(m, ds, ds, tc), NumericalError);
}

TEST(Evaluate, Properties) {
  ModelConfig mc;
  mc.pool = "stochastic";
  SequenceModel m = build_model(mc, 9);
  SyntheticDataset ds = gen_dataset(Task::band_mix, 9, 64);
  const double acc = evaluate(m, ds);
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  EXPECT_EQ(evaluate(m, ds), acc);

  SyntheticDataset own = ds;
  const auto labels = predict_labels(m, ds);
  for (std::size_t i = 0; i < own.size(); ++i) own.samples[i].label = labels[i];
  EXPECT_EQ(evaluate(m, own), 1.0);

  m.classifier.weight = Tensor(m.classifier.weight.shape(), 0.0);
  m.classifier.bias = Tensor({4}, {0.0, 0.0, 1.0, 0.0});
  EXPECT_EQ(evaluate(m, ds), 0.25);

  SyntheticDataset empty = ds;
  empty.samples.clear();
  EXPECT_THROW(evaluate(m, empty), ConfigError);
}

TEST(Wer, Examples) {
  const std::vector<std::string> abc{"a", "b", "c"};
  WerBreakdown b = wer(abc, abc);
  EXPECT_EQ(b.errors(), 0u);
  EXPECT_EQ(b.wer, 0.0);
  b = wer(std::vector<std::string>{}, std::vector<std::string>{"a"});
  EXPECT_EQ(b.deletions, 1u);
  EXPECT_EQ(b.wer, 1.0);
  b = wer_text("a x c", "a b c");
  EXPECT_EQ(b.substitutions, 1u);
  EXPECT_EQ(b.insertions + b.deletions, 0u);
  EXPECT_DOUBLE_EQ(b.wer, 1.0 / 3.0);
  b = wer_text("a b c d", "a b");
  EXPECT_EQ(b.insertions, 2u);
  EXPECT_EQ(b.wer, 1.0);
  EXPECT_THROW(wer_text("a", ""), ConfigError);
}

TEST(Wer, MatchesIndependentDp) {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> len(0, 12), tok(0, 4);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> ref(static_cast<std::size_t>(len(rng) + 1)), hyp(static_cast<std::size_t>(len(rng)));
    for (int& t : ref) t = tok(rng);
    for (int& t : hyp) t = tok(rng);
    const WerBreakdown b = wer(hyp, ref);
    const std::size_t dist = edit_distance(hyp, ref);
    ASSERT_EQ(b.errors(), dist);
    EXPECT_EQ(b.wer, static_cast<double>(dist) / static_cast<double>(ref.size()));
    EXPECT_EQ(hyp.size() + b.deletions, ref.size() + b.insertions);
  }
}

TEST(BandEnergy, Examples) {
  const std::size_t T = 64;
  Tensor low({1, 1, T}), nyq({1, 1, T});
  for (std::size_t t = 0; t < T; ++t) {
    low[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / T);
    nyq[t] = t % 2 ? -1.0 : 1.0;
  }
  EXPECT_LE(band_energy(low, Band::high), 1e-9 * signal_energy(low));
  EXPECT_LE(band_energy(nyq, Band::low), 1e-9 * signal_energy(nyq));
  EXPECT_NEAR(band_energy(nyq, Band::high), static_cast<double>(T), 1e-9);
  EXPECT_EQ(high_band_fraction(Tensor({1, 1, 8}, 0.0)), 0.0);
  EXPECT_THROW(band_energy(Tensor({1, 1, 1}, 1.0), Band::low), ShapeError);
}

TEST(BandEnergy, ParsevalAndWhiteNoise) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  double mean_low = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    Tensor x({1, 3, 101 + static_cast<std::size_t>(seed)});
    for (double& v : x.values()) v = g(rng);
    const double lo = band_energy(x, Band::low), hi = band_energy(x, Band::high), e = signal_energy(x);
    EXPECT_NEAR(lo + hi, e, 1e-9 * e);
    EXPECT_NEAR(lo / e, 0.5, 0.25);
    mean_low += lo / e / 100.0;
  }
  EXPECT_NEAR(mean_low, 0.5, 0.1);
  EXPECT_NEAR(mean_low, 0.5, 0.02);
}

TEST(SpikeSignal, Shape) {
  const SpikeSignal a = spike_signal(3), b = spike_signal(3);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.x.shape(), (Shape{1, 1, 128}));
  ASSERT_EQ(a.spikes.size(), 4u);
  EXPECT_TRUE(std::is_sorted(a.spikes.begin(), a.spikes.end()));
  const Tensor d({1, 1, 64}, 1.0);
  EXPECT_NEAR(near_spike_energy_fraction(d, a.spikes, 1), 12.0 / 64.0, 1e-15);
}

TEST(SignalCsv, RoundTripAndErrors) {
  const Tensor x = Tensor::signal({{1.0 / 3.0, -2.5e-7, 4}, {0.1, 0.2, 0.30000000000000004}});
  const std::string csv = signal_csv(x);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "channel,t0,t1,t2");
  EXPECT_EQ(parse_signal_csv(csv), x);
  EXPECT_EQ(parse_signal_csv("channel,t0,t1\n0,1,2\n").storage(), (std::vector<double>{1, 2}));
  EXPECT_THROW(parse_signal_csv(""), IoError);
  EXPECT_THROW(parse_signal_csv("time,t0\n0,1\n"), IoError);
  EXPECT_THROW(parse_signal_csv("channel,t0,t1\n0,1\n"), IoError);
  EXPECT_THROW(parse_signal_csv("channel,t0\n1,1\n"), IoError);
  EXPECT_THROW(parse_signal_csv("channel,t0\n0,abc\n"), IoError);
  EXPECT_THROW(parse_signal_csv("channel,t0\n0,nan\n"), NumericalError);
  EXPECT_THROW(read_signal_csv("/nonexistent/x.csv"), IoError);
}

TEST(GradCheck, AllCasesPass) {
  const auto results = run_gradcheck();
  EXPECT_GE(results.size(), 40u);
  for (const auto& r : results) {
    EXPECT_TRUE(r.passed) << r.name << " " << r.max_rel_error;
    EXPECT_EQ(r.seeds, 20u);
    EXPECT_EQ(r.tolerance, r.composition ? kCompositionTolerance : kOpTolerance);
  }
  EXPECT_THROW(run_gradcheck({}, {"no_such_case"}), ConfigError);
}

TEST(GradCheck, DetectsWrongGradient) {
  // A node whose backward is deliberately off by a factor 2.
  Tensor leaf({3}, {0.3, -1.2, 2.0});
  const ScalarBuilder build = [&](Tape& tape) {
    Var x = tape.param(leaf);
    const std::size_t in = x.id;
    Var y = tape.record(x.value(), {in}, [in](Tape& t, std::size_t self) {
      for (std::size_t i = 0; i < t.grad(in).size(); ++i) t.grad(in)[i] += 2.0 * t.grad(self)[i];
    });
    return kernels::sum(kernels::mul(y, y));
  };
  EXPECT_GT(leaf_gradient_error(build, {&leaf}, 1e-5), 0.1);
}

TEST(Bench, FlopProperties) {
  BenchOptions o;
  o.specs = {"max", "avg", "tlp"};
  o.repetitions = 5;
  o.warmup = 1;
  o.batch = 4;
  const BenchReport r = run_benchmark(o);
  ASSERT_EQ(r.methods.size(), 3u);
  EXPECT_EQ(r.methods[0].flops.total_flops, r.methods[1].flops.total_flops);
  ModelConfig mc;
  tlp::TlpConfig tc = mc.tlp;
  tc.channels = mc.hidden;
  const auto added = kernels::count_flops(describe_tlp(tc, 128, "pool1")).total_flops +
                     kernels::count_flops(describe_tlp(tc, 64, "pool2")).total_flops;
  EXPECT_EQ(r.methods[2].flops.total_flops - r.methods[0].flops.total_flops, added);
  EXPECT_TRUE(r.has_overhead);
  EXPECT_EQ(r.tlp_added_flops, added);
  for (const auto& m : r.methods) {
    EXPECT_EQ(m.step_seconds.size(), 5u);
    EXPECT_GT(m.working_set_bytes, 0u);
  }
  EXPECT_EQ(bench_report_json(run_benchmark(o)).dump(), bench_report_json(r).dump());
  o.repetitions = 4;
  EXPECT_THROW(run_benchmark(o), ConfigError);
}

TEST(Compare, TwoSpecsOneSeed) {
  CompareOptions o;
  o.specs = {"max", "avg"};
  o.seeds = {0};
  o.sizes = small_sizes();
  o.train.epochs = 2;
  o.threads = 2;
  const CompareReport r = run_compare(o);
  ASSERT_EQ(r.ranked.size(), 2u);
  EXPECT_GE(r.ranked[0].mean_acc, r.ranked[1].mean_acc);
  const std::string csv = compare_csv(r, o.seeds);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "rank,pool,mean_acc,std_acc,seeds,parameters,acc_seed0");
  o.threads = 1;
  EXPECT_EQ(compare_csv(run_compare(o), o.seeds), csv);
  EXPECT_EQ(r.experiments.at({"max", 0}).test_acc, run_experiment(o, "max", 0).test_acc);
}

// Noise-free band-mix with the default 800 training samples.
class NoiseFreeFit : public ::testing::TestWithParam<std::string> {};

TEST_P(NoiseFreeFit, ReachesFullTrainAccuracy) {
  DatasetOptions data;
  data.noise_sigma = 0.0;
  const DatasetSplits sp = make_splits(Task::band_mix, 0, {}, data);
  ModelConfig mc;
  mc.pool = GetParam();
  SequenceModel m = build_model(mc, 0);
  TrainConfig tc;
  tc.epochs = 30;
  const TrainResult r = train(m, sp.train, sp.dev, tc);
  EXPECT_EQ(r.train_acc, 1.0);
}

INSTANTIATE_TEST_SUITE_P(AllSpecs, NoiseFreeFit,
                         ::testing::Values("max", "avg", "lp:2", "mixed", "stochastic", "soft", "tlp"),
                         [](const auto& info) {
                           std::string n = info.param;
                           std::replace(n.begin(), n.end(), ':', '_');
                           return n;
                         });

TEST(LossTrend, PredictionLossSettles) {
  const DatasetSplits sp = make_splits(Task::band_mix, 0);
  ModelConfig mc;
  SequenceModel m = build_model(mc, 0);
  TrainConfig tc;
  const auto log = train(m, sp.train, sp.dev, tc).log;
  ASSERT_EQ(log.size(), 30u);
  // 10-epoch windows after epoch 5; each may exceed its predecessor by 5%.
  auto window = [&](std::size_t first) {
    double s = 0.0;
    for (std::size_t e = first; e < first + 10; ++e) s += log[e - 1].c_p;
    return s / 10.0;
  };
  for (std::size_t first = 7; first + 9 <= 30; ++first) {
    EXPECT_LE(window(first), 1.05 * window(first - 1)) << "window starting at epoch " << first;
  }
}
