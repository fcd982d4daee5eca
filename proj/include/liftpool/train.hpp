#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "liftpool/dataset.hpp"
#include "liftpool/model.hpp"

namespace liftpool::harness {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double alpha_u = tlp::kDefaultAlpha;
  double alpha_p = tlp::kDefaultAlpha;
  double weight_decay = 1e-3;
  std::uint64_t seed = 0;  // batch order and stochastic pooling
};

// Epoch means over mini-batches. c_u and c_p are summed over TLP layers
// before averaging; total is the optimized objective.
struct EpochMetrics {
  std::size_t epoch = 0;
  double task_loss = 0.0;
  double c_u = 0.0;
  double c_p = 0.0;
  double total = 0.0;
  double dev_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> log;
  double train_acc = 0.0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Adam on cross-entropy plus the lifting losses. Throws NumericalError with
// the epoch and batch when the loss stops being finite.
TrainResult train(SequenceModel& model, const SyntheticDataset& train_set, const SyntheticDataset& dev_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Argmax accuracy in eval mode; ties go to the lowest class index.
double evaluate(const SequenceModel& model, const SyntheticDataset& ds);
std::vector<int> predict_labels(const SequenceModel& model, const SyntheticDataset& ds);

// Loss terms of one batch at the current parameters, without updating them.
tlp::LossReport batch_loss(SequenceModel& model, const SyntheticDataset& ds, std::size_t first, std::size_t count,
                           double alpha_u, double alpha_p);

// [count, channels, length] tensor stacking samples first .. first+count-1.
Tensor stack_signals(const SyntheticDataset& ds, std::size_t first, std::size_t count);

inline constexpr const char* kMetricsHeader = "epoch,task_loss,c_u,c_p,total,dev_acc";
std::string metrics_row(const EpochMetrics& m);
std::string metrics_csv(const std::vector<EpochMetrics>& log);

nlohmann::json model_to_json(const SequenceModel& model, const TrainConfig& config);
// Rebuilds the architecture from the stored config and loads every tensor.
SequenceModel model_from_json(const nlohmann::json& j);

}  // namespace liftpool::harness
