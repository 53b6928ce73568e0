#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "reconnet/dataset.hpp"
#include "reconnet/model.hpp"
#include "reconnet/numerics/network.hpp"
#include "reconnet/rng.hpp"

namespace reconnet {

struct TrainConfig {
  std::size_t batch_size = 128;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;    // epochs between checkpoints, 0 disables
  std::filesystem::path checkpoint_prefix;  // checkpoints go to <prefix>.<init>.ckpt.rnet
  bool reproducible = true;            // fixed-order gradient reduction
  InitOptions init;

  void validate() const;
};

template <typename T>
struct Example {
  std::span<const T> y;
  std::span<const T> x;
};

// Mean over examples of the squared Euclidean distance between the network
// output and the label (summed over pixels, averaged over examples).
template <typename T>
double loss(const Network<T>& net, std::span<const Example<T>> batch);

// Same loss; grad receives its gradient with respect to every parameter.
// With reproducible set, per-sample gradients are reduced in a fixed order
// independent of the thread count.
template <typename T>
double loss_and_gradient(const Network<T>& net, std::span<const Example<T>> batch, NetworkGrad<T>& grad,
                         bool reproducible = true);

std::vector<Example<float>> examples(const PatchDataset& data, std::span<const std::size_t> indices);
std::vector<Example<float>> examples(const PatchDataset& data);

// Loss over a whole dataset in fixed chunks (0 for an empty set).
double dataset_loss(const ReconNetModel& model, const PatchDataset& data);

struct TrainState {
  ReconNetModel model;
  Network<float> velocity;  // congruent with model.net
  std::size_t epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  Rng rng;

  TrainState(ReconNetModel initial, std::uint64_t seed);
};

// One momentum step: v <- momentum * v - lr * g, w <- w + v, with g the
// batch-mean gradient. Returns the batch loss before the update. Throws
// TrainingError naming the parameter buffer when g is not finite.
double sgd_step(TrainState& state, std::span<const Example<float>> batch, const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
  std::string init_mode;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Runs config.epochs shuffled passes over train. Epoch 0 (before any update)
// is recorded first when state.epoch == 0.
std::vector<EpochRecord> run_epochs(TrainState& state, const PatchDataset& train, const PatchDataset& validation,
                                    const TrainConfig& config, const std::string& label,
                                    const EpochCallback& on_epoch = {});

inline constexpr double kDefaultLrGrid[] = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1};

struct LrSearchResult {
  double best = 0.0;
  std::vector<double> candidates;
  std::vector<double> val_losses;  // NaN for candidates that diverged
  std::vector<EpochRecord> history;  // probe runs, init_mode "probe"
};

// Trains a fresh model (deterministic init when phi is given, random
// otherwise) for probe_epochs per candidate and returns the one with the
// lowest validation loss; ties go to the smaller rate.
LrSearchResult lr_search(const PatchDataset& train, const PatchDataset& validation, const MeasurementMatrix* phi,
                         std::span<const double> candidates, std::size_t probe_epochs, const TrainConfig& base,
                         const EpochCallback& on_epoch = {});

struct TrainResult {
  ReconNetModel model;
  InitMode selected = InitMode::Random;
  double random_val_loss = 0.0;
  double deterministic_val_loss = 0.0;
  std::vector<EpochRecord> history;
};

// Trains a random-init and a deterministic-init model under the same
// schedule and keeps the one with the lower final validation loss.
TrainResult train(const PatchDataset& train_set, const PatchDataset& validation, const MeasurementMatrix& phi,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// CSV with header epoch,train_loss,val_loss,lr,init_mode.
void write_training_log(const std::filesystem::path& path, std::span<const EpochRecord> records);
std::vector<EpochRecord> read_training_log(const std::filesystem::path& path);

}  // namespace reconnet
