#include "liftpool/compare.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "liftpool/errors.hpp"
#include "liftpool/text.hpp"

namespace liftpool::harness {

ExperimentResult run_experiment(const CompareOptions& options, const std::string& spec, std::uint64_t seed) {
  const DatasetSplits data = make_splits(options.task, seed, options.sizes, options.data);
  ModelConfig mc = options.model;
  mc.pool = spec;
  mc.in_channels = options.data.channels;
  mc.classes = options.data.classes;
  SequenceModel model = build_model(mc, seed);
  TrainConfig tc = options.train;
  tc.seed = seed;
  TrainResult tr = train(model, data.train, data.dev, tc);
  ExperimentResult r;
  r.spec = spec;
  r.seed = seed;
  r.test_acc = evaluate(model, data.test);
  r.dev_acc = tr.log.empty() ? 0.0 : tr.log.back().dev_acc;
  r.parameters = model.parameter_count();
  return r;
}

std::size_t compare_thread_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LIFTPOOL_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1) throw ConfigError("LIFTPOOL_THREADS must be a positive integer");
    n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

CompareReport run_compare(const CompareOptions& options) {
  if (options.specs.empty() || options.seeds.empty()) throw ConfigError("compare needs at least one spec and seed");
  for (const auto& s : options.specs) parse_pool_spec(s);

  std::vector<std::pair<std::string, std::uint64_t>> jobs;
  for (const auto& spec : options.specs) {
    for (auto seed : options.seeds) jobs.emplace_back(spec, seed);
  }
  const std::size_t workers = std::min(jobs.size(), options.threads ? options.threads : compare_thread_count());

  CompareReport report;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        ExperimentResult r = run_experiment(options, jobs[i].first, jobs[i].second);
        std::lock_guard lock(mu);
        report.experiments.emplace(jobs[i], std::move(r));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& spec : options.specs) {
    SpecSummary s;
    s.spec = spec;
    for (auto seed : options.seeds) {
      const ExperimentResult& r = report.experiments.at({spec, seed});
      s.accuracies.push_back(r.test_acc);
      s.parameters = r.parameters;
    }
    double sum = 0.0;
    for (double a : s.accuracies) sum += a;
    s.mean_acc = sum / static_cast<double>(s.accuracies.size());
    double var = 0.0;
    for (double a : s.accuracies) var += (a - s.mean_acc) * (a - s.mean_acc);
    s.std_acc = std::sqrt(var / static_cast<double>(s.accuracies.size()));
    report.ranked.push_back(std::move(s));
  }
  std::sort(report.ranked.begin(), report.ranked.end(), [](const SpecSummary& a, const SpecSummary& b) {
    return a.mean_acc != b.mean_acc ? a.mean_acc > b.mean_acc : a.spec < b.spec;
  });
  return report;
}

std::string compare_csv(const CompareReport& report, const std::vector<std::uint64_t>& seeds) {
  std::ostringstream os;
  os << "rank,pool,mean_acc,std_acc,seeds,parameters";
  for (auto s : seeds) os << ",acc_seed" << s;
  os << '\n';
  for (std::size_t i = 0; i < report.ranked.size(); ++i) {
    const SpecSummary& s = report.ranked[i];
    os << i + 1 << ',' << s.spec << ',' << format_exact(s.mean_acc) << ',' << format_exact(s.std_acc) << ','
       << s.accuracies.size() << ',' << s.parameters;
    for (double a : s.accuracies) os << ',' << format_exact(a);
    os << '\n';
  }
  return os.str();
}

}  // namespace liftpool::harness
