#include "reconnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <omp.h>
#include <sstream>

#include "reconnet/error.hpp"

namespace reconnet {

namespace {

// Samples per reduction group in reproducible mode.
constexpr std::size_t kGroup = 8;

template <typename T>
double sample_pass(const Network<T>& net, const Example<T>& ex, NetworkGrad<T>* acc) {
  if (ex.x.size() != net.side * net.side) throw ArgumentError("label length does not match the network output");
  GradientTape<T> tape;
  Tensor3<T> out = forward(net, ex.y, acc ? &tape : nullptr);
  double sq = 0.0;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const T d = out.data[i] - ex.x[i];
    sq += static_cast<double>(d) * static_cast<double>(d);
    out.data[i] = T{2} * d;
  }
  if (acc) backward_accumulate(net, out, tape, *acc);
  return sq;
}

// Per-sample losses computed in parallel, summed in index order.
template <typename T>
double ordered_mean_loss(const Network<T>& net, std::span<const Example<T>> batch) {
  std::vector<double> per(batch.size());
  const auto n = static_cast<long>(batch.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) per[static_cast<std::size_t>(i)] = sample_pass<T>(net, batch[static_cast<std::size_t>(i)], nullptr);
  return std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(batch.size());
}

void require_shapes(const Network<float>& net, std::span<const Example<float>> batch) {
  for (const auto& ex : batch)
    if (ex.y.size() != net.fc.in_dim || ex.x.size() != net.side * net.side)
      throw ArgumentError("training example does not match the model dimensions");
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ArgumentError("batch size must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("momentum must lie in [0, 1)");
}

template <typename T>
double loss(const Network<T>& net, std::span<const Example<T>> batch) {
  if (batch.empty()) throw ArgumentError("loss needs a non-empty batch");
  for (const auto& ex : batch)
    if (ex.y.size() != net.fc.in_dim || ex.x.size() != net.side * net.side)
      throw ArgumentError("example does not match the network dimensions");
  return ordered_mean_loss(net, batch);
}

template <typename T>
double loss_and_gradient(const Network<T>& net, std::span<const Example<T>> batch, NetworkGrad<T>& grad,
                         bool reproducible) {
  if (batch.empty()) throw ArgumentError("loss needs a non-empty batch");
  for (const auto& ex : batch)
    if (ex.y.size() != net.fc.in_dim || ex.x.size() != net.side * net.side)
      throw ArgumentError("example does not match the network dimensions");

  const std::size_t count = batch.size();
  const std::size_t groups = reproducible ? (count + kGroup - 1) / kGroup
                                          : std::min<std::size_t>(count, static_cast<std::size_t>(omp_get_max_threads()));
  std::vector<NetworkGrad<T>> partial(groups, NetworkGrad<T>::zeros_like(net));
  std::vector<double> per(count, 0.0);
  const auto g = static_cast<long>(groups);
#pragma omp parallel for schedule(static)
  for (long k = 0; k < g; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const std::size_t begin = reproducible ? uk * kGroup : uk * count / groups;
    const std::size_t end = reproducible ? std::min(count, begin + kGroup) : (uk + 1) * count / groups;
    for (std::size_t i = begin; i < end; ++i) per[i] = sample_pass<T>(net, batch[i], &partial[uk]);
  }
  grad = std::move(partial[0]);
  for (std::size_t k = 1; k < groups; ++k) grad.accumulate(partial[k]);
  grad.scale(static_cast<T>(1.0 / static_cast<double>(count)));
  return std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(count);
}

std::vector<Example<float>> examples(const PatchDataset& data, std::span<const std::size_t> indices) {
  std::vector<Example<float>> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto& rec = data.records.at(i);
    out.push_back({rec.y, rec.x});
  }
  return out;
}

std::vector<Example<float>> examples(const PatchDataset& data) {
  std::vector<Example<float>> out;
  out.reserve(data.size());
  for (const auto& rec : data.records) out.push_back({rec.y, rec.x});
  return out;
}

double dataset_loss(const ReconNetModel& model, const PatchDataset& data) {
  if (data.empty()) return 0.0;
  const auto all = examples(data);
  require_shapes(model.net, all);
  return ordered_mean_loss(model.net, std::span<const Example<float>>(all));
}

TrainState::TrainState(ReconNetModel initial, std::uint64_t seed)
    : model(std::move(initial)), velocity(model.net), rng(seed) {
  for (auto& view : parameters(velocity)) std::fill(view.values.begin(), view.values.end(), 0.0f);
}

double sgd_step(TrainState& state, std::span<const Example<float>> batch, const TrainConfig& config) {
  if (batch.size() > config.batch_size)
    throw ArgumentError("batch of " + std::to_string(batch.size()) + " exceeds configured size " +
                        std::to_string(config.batch_size));
  if (!(config.learning_rate >= 0.0)) throw ArgumentError("learning rate must be non-negative");
  require_shapes(state.model.net, batch);

  NetworkGrad<float> grad;
  const double batch_loss = loss_and_gradient(state.model.net, batch, grad, config.reproducible);

  auto weights = parameters(state.model.net);
  auto velocity = parameters(state.velocity);
  const auto grads = parameters(std::as_const(grad.params));
  // Backward order, so the report names the layer where the blow-up starts.
  for (auto it = grads.rbegin(); it != grads.rend(); ++it)
    if (!all_finite<float>(it->values))
      throw TrainingError("non-finite gradient in " + it->name + " at step " + std::to_string(state.model.steps));

  const auto mu = static_cast<float>(config.momentum);
  const auto lr = static_cast<float>(config.learning_rate);
  for (std::size_t b = 0; b < weights.size(); ++b) {
    auto w = weights[b].values;
    auto v = velocity[b].values;
    auto gr = grads[b].values;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = mu * v[i] - lr * gr[i];
      w[i] += v[i];
    }
  }
  ++state.model.steps;
  return batch_loss;
}

std::vector<EpochRecord> run_epochs(TrainState& state, const PatchDataset& train, const PatchDataset& validation,
                                    const TrainConfig& config, const std::string& label,
                                    const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty()) throw ArgumentError("training set is empty");
  std::vector<EpochRecord> history;
  auto emit = [&](EpochRecord rec) {
    if (on_epoch) on_epoch(rec);
    history.push_back(std::move(rec));
  };
  auto val_loss = [&](double fallback) { return validation.empty() ? fallback : dataset_loss(state.model, validation); };

  if (state.epoch == 0) {
    const double initial = dataset_loss(state.model, train);
    const double v = val_loss(initial);
    state.best_val_loss = std::min(state.best_val_loss, v);
    emit({0, initial, v, config.learning_rate, label});
  }

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t e = 0; e < config.epochs; ++e) {
    shuffle(std::span<std::size_t>(order), state.rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const auto batch = examples(train, std::span<const std::size_t>(order).subspan(start, stop - start));
      weighted += sgd_step(state, batch, config) * static_cast<double>(stop - start);
    }
    ++state.epoch;
    const double train_loss = weighted / static_cast<double>(order.size());
    if (!std::isfinite(train_loss))
      throw TrainingError(label + " training loss became non-finite at epoch " + std::to_string(state.epoch));
    const double v = val_loss(train_loss);
    state.best_val_loss = std::min(state.best_val_loss, v);
    emit({state.epoch, train_loss, v, config.learning_rate, label});
    if (config.checkpoint_every > 0 && state.epoch % config.checkpoint_every == 0 && !config.checkpoint_prefix.empty()) {
      auto path = config.checkpoint_prefix;
      path += "." + label + ".ckpt.rnet";
      save_model(state.model, path);
    }
  }
  return history;
}

LrSearchResult lr_search(const PatchDataset& train_set, const PatchDataset& validation, const MeasurementMatrix* phi,
                         std::span<const double> candidates, std::size_t probe_epochs, const TrainConfig& base,
                         const EpochCallback& on_epoch) {
  if (candidates.size() < 2) throw ArgumentError("learning-rate search needs at least two candidates");
  if (train_set.empty()) throw ArgumentError("training set is empty");
  LrSearchResult result;
  result.candidates.assign(candidates.begin(), candidates.end());
  const InitMode mode = phi ? InitMode::Deterministic : InitMode::Random;
  for (double lr : candidates) {
    if (!(lr > 0.0)) throw ArgumentError("learning-rate candidates must be positive");
    TrainConfig cfg = base;
    cfg.learning_rate = lr;
    cfg.epochs = probe_epochs;
    cfg.checkpoint_every = 0;
    TrainState state(build_model(train_set.m, mode, phi, base.seed, base.init), base.seed);
    double final_loss = std::numeric_limits<double>::quiet_NaN();
    auto collect = [&](const EpochRecord& rec) {
      result.history.push_back(rec);
      if (on_epoch) on_epoch(rec);
    };
    try {
      final_loss = run_epochs(state, train_set, validation, cfg, "probe", collect).back().val_loss;
    } catch (const TrainingError&) {
      result.history.push_back({state.epoch, std::numeric_limits<double>::quiet_NaN(),
                                std::numeric_limits<double>::quiet_NaN(), lr, "probe"});
    }
    result.val_losses.push_back(std::isfinite(final_loss) ? final_loss : std::numeric_limits<double>::quiet_NaN());
  }

  std::size_t best = result.candidates.size();
  for (std::size_t i = 0; i < result.candidates.size(); ++i) {
    const double v = result.val_losses[i];
    if (std::isnan(v)) continue;
    if (best == result.candidates.size() || v < result.val_losses[best] ||
        (v == result.val_losses[best] && result.candidates[i] < result.candidates[best]))
      best = i;
  }
  const bool found = best < result.candidates.size();
  if (!found) throw TrainingError("learning-rate search: every candidate diverged");
  result.best = result.candidates[best];
  return result;
}

TrainResult train(const PatchDataset& train_set, const PatchDataset& validation, const MeasurementMatrix& phi,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw ArgumentError("training set is empty");
  if (train_set.matrix_seed != phi.seed || train_set.m != phi.m)
    throw ConfigError("dataset was built with matrix seed " + std::to_string(train_set.matrix_seed) + " (m=" +
                      std::to_string(train_set.m) + "), but the supplied matrix has seed " + std::to_string(phi.seed) +
                      " (m=" + std::to_string(phi.m) + ")");

  TrainResult result;
  std::vector<std::pair<ReconNetModel, double>> runs;
  for (InitMode mode : {InitMode::Random, InitMode::Deterministic}) {
    TrainState state(build_model(phi.m, mode, &phi, config.seed, config.init), config.seed);
    auto h = run_epochs(state, train_set, validation, config, to_string(mode), on_epoch);
    result.history.insert(result.history.end(), h.begin(), h.end());
    runs.emplace_back(std::move(state.model), h.back().val_loss);
  }
  result.random_val_loss = runs[0].second;
  result.deterministic_val_loss = runs[1].second;
  const bool pick_det = runs[1].second < runs[0].second;
  result.selected = pick_det ? InitMode::Deterministic : InitMode::Random;
  result.model = std::move(pick_det ? runs[1].first : runs[0].first);
  return result;
}

void write_training_log(const std::filesystem::path& path, std::span<const EpochRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "epoch,train_loss,val_loss,lr,init_mode\n";
  out << std::setprecision(10);
  for (const auto& r : records)
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.learning_rate << ',' << r.init_mode << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<EpochRecord> read_training_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_loss,val_loss,lr,init_mode")
    throw FormatError(path.string() + ": unexpected training log header");
  std::vector<EpochRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    EpochRecord r;
    std::getline(ss, field, ',');
    r.epoch = std::stoul(field);
    std::getline(ss, field, ',');
    r.train_loss = std::stod(field);
    std::getline(ss, field, ',');
    r.val_loss = std::stod(field);
    std::getline(ss, field, ',');
    r.learning_rate = std::stod(field);
    std::getline(ss, r.init_mode);
    records.push_back(std::move(r));
  }
  return records;
}

template double loss<float>(const Network<float>&, std::span<const Example<float>>);
template double loss<double>(const Network<double>&, std::span<const Example<double>>);
template double loss_and_gradient<float>(const Network<float>&, std::span<const Example<float>>, NetworkGrad<float>&,
                                         bool);
template double loss_and_gradient<double>(const Network<double>&, std::span<const Example<double>>,
                                          NetworkGrad<double>&, bool);

}  // namespace reconnet
