#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cif/model.hpp"

namespace cif {

/// A training run hit a non-finite loss or gradient; the message names the
/// epoch, batch and (when known) the flow layer.
class TrainingError : public NumericError {
 public:
  using NumericError::NumericError;
};

enum class Precision { F32, F64 };

std::string to_string(Precision p);
Precision parse_precision(const std::string& name);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double lr0 = 1e-4;
  double decay_factor = 0.8;
  std::size_t decay_every = 10;
  AdamHyper adam;
  std::size_t epochs = 100;
  std::size_t clouds_per_batch = 10;
  std::size_t points_f = 256;
  std::size_t points_h = 256;
  std::uint64_t seed = 0;
  Precision precision = Precision::F32;
  double max_grad_norm = 0.0;  // 0 disables clipping

  void validate() const;
};

/// lr0 · decay_factor^⌊epoch / decay_every⌋, epoch counted from 0.
double lr_at(const TrainConfig& config, std::size_t epoch);

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update, in place. Empty state is initialised to zeros.
template <typename T>
void adam_step(std::span<Tensor<T>> params, std::span<const std::vector<T>> grads, AdamState<T>& state, double lr,
               const AdamHyper& hyper = {});

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double mean_loss = 0.0;
  double mean_point_nll = 0.0;  // per point
  double mean_embed_nll = 0.0;

  /// epoch<TAB>lr<TAB>mean_loss<TAB>mean_point_nll<TAB>mean_embed_nll
  std::string tsv() const;
};

template <typename T>
struct TrainingState {
  TrainConfig config;
  AdamState<T> adam;
  std::size_t epoch = 0;  // completed epochs
  std::string rng_state;
};

/// Joint end-to-end optimisation of the model. One Adam step per batch of
/// clouds; every cloud gets a fresh disjoint (x^f, x^h) draw each epoch.
template <typename T>
class Trainer {
 public:
  Trainer(CifModel<T> model, TrainConfig config);
  Trainer(CifModel<T> model, TrainingState<T> state);

  EpochLog run_epoch(const std::vector<PointCloud>& dataset);

  std::size_t epoch() const { return epoch_; }
  const CifModel<T>& model() const { return model_; }
  const TrainConfig& config() const { return config_; }
  TrainingState<T> state() const;

 private:
  CifModel<T> model_;
  TrainConfig config_;
  AdamState<T> adam_;
  std::size_t epoch_ = 0;
  Rng rng_;
};

struct TrainOutput {
  std::filesystem::path dir;          // empty: nothing written
  std::size_t checkpoint_every = 0;   // also keep checkpoint_epochNNNN.bin every k epochs
  std::function<void(const EpochLog&)> on_epoch;
};

template <typename T>
struct TrainResult {
  CifModel<T> model;
  std::vector<EpochLog> log;
};

/// Train until config.epochs, writing <dir>/checkpoint.bin and <dir>/loss.tsv.
template <typename T>
TrainResult<T> train(const ModelConfig& model_config, const TrainConfig& config,
                     const std::vector<PointCloud>& dataset, const TrainOutput& output = {});

/// Continue a checkpointed run up to state.config.epochs (or `epochs` if nonzero).
template <typename T>
TrainResult<T> resume(CifModel<T> model, TrainingState<T> state, const std::vector<PointCloud>& dataset,
                      const TrainOutput& output = {}, std::size_t epochs = 0);

/// Small architecture used by the gradient check: every output layer random.
ModelConfig toy_model_config(std::uint64_t seed = 0);

/// Central-difference check of the summed training loss of a batch w.r.t. every
/// model parameter, at 64-bit. Each cloud is split into n_f / n_h points.
GradCheckReport gradcheck_loss(const CifModel<double>& model, const std::vector<PointCloud>& clouds, std::size_t n_f,
                               std::size_t n_h, std::uint64_t seed, double step = 1e-5);

/// Two random 16-point clouds, toy model, 8/8 split.
GradCheckReport gradcheck_toy(std::uint64_t seed);

}  // namespace cif
