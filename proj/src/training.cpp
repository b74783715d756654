#include "cif/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "cif/checkpoint.hpp"

namespace cif {

std::string to_string(Precision p) {
  return p == Precision::F32 ? "f32" : "f64";
}

Precision parse_precision(const std::string& name) {
  if (name == "f32" || name == "float32" || name == "32") return Precision::F32;
  if (name == "f64" || name == "float64" || name == "64") return Precision::F64;
  throw std::invalid_argument("unknown precision '" + name + "' (expected f32 or f64)");
}

void TrainConfig::validate() const {
  if (!(lr0 >= 0.0) || !std::isfinite(lr0)) throw std::invalid_argument("train: lr0 must be >= 0");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw std::invalid_argument("train: decay_factor must be in (0, 1]");
  if (decay_every == 0) throw std::invalid_argument("train: decay_every must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0)) {
    throw std::invalid_argument("train: invalid Adam hyperparameters");
  }
  if (clouds_per_batch == 0) throw std::invalid_argument("train: clouds_per_batch must be positive");
  if (points_f == 0 || points_h == 0) throw std::invalid_argument("train: points_f and points_h must be positive");
  if (!(max_grad_norm >= 0.0)) throw std::invalid_argument("train: max_grad_norm must be >= 0");
}

double lr_at(const TrainConfig& config, std::size_t epoch) {
  const auto decays = static_cast<double>(epoch / config.decay_every);
  return config.lr0 * std::pow(config.decay_factor, decays);
}

template <typename T>
void adam_step(std::span<Tensor<T>> params, std::span<const std::vector<T>> grads, AdamState<T>& state, double lr,
               const AdamHyper& hyper) {
  if (grads.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), T(0));
      state.v.emplace_back(p.size(), T(0));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state does not match the parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].size() || state.m[i].size() != params[i].size() ||
        state.v[i].size() != params[i].size()) {
      throw ShapeError("adam_step: size mismatch for parameter " + std::to_string(i) + " of shape " +
                       shape_str(params[i].shape()));
    }
  }

  state.step += 1;
  const double b1 = hyper.beta1, b2 = hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = static_cast<double>(grads[i][k]);
      const double mk = b1 * static_cast<double>(m[k]) + (1.0 - b1) * g;
      const double vk = b2 * static_cast<double>(v[k]) + (1.0 - b2) * g * g;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = lr * (mk / c1) / (std::sqrt(vk / c2) + hyper.eps);
      p[k] = static_cast<T>(static_cast<double>(p[k]) - update);
    }
  }
}

std::string EpochLog::tsv() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\t%.17g\t%.17g", epoch, lr, mean_loss, mean_point_nll,
                mean_embed_nll);
  return buf;
}

template <typename T>
Trainer<T>::Trainer(CifModel<T> model, TrainConfig config)
    : model_(std::move(model)), config_(std::move(config)), rng_(config_.seed) {
  config_.validate();
}

template <typename T>
Trainer<T>::Trainer(CifModel<T> model, TrainingState<T> state)
    : model_(std::move(model)),
      config_(std::move(state.config)),
      adam_(std::move(state.adam)),
      epoch_(state.epoch),
      rng_(rng_from_string(state.rng_state)) {
  config_.validate();
}

template <typename T>
TrainingState<T> Trainer<T>::state() const {
  return {config_, adam_, epoch_, rng_to_string(rng_)};
}

template <typename T>
EpochLog Trainer<T>::run_epoch(const std::vector<PointCloud>& dataset) {
  if (dataset.empty()) throw DataError("train: dataset is empty");
  const std::size_t need = config_.points_f + config_.points_h;
  for (const auto& c : dataset) {
    if (c.size() < need) {
      throw DataError("train: cloud '" + c.id + "' has " + std::to_string(c.size()) + " points, fewer than points_f + points_h = " +
                      std::to_string(need));
    }
  }

  const double lr = lr_at(config_, epoch_);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng_)]);
  }

  std::vector<NamedParameter<T>> named = model_.parameters();
  std::vector<Tensor<T>> params;
  params.reserve(named.size());
  for (auto& p : named) params.push_back(p.tensor);

  double loss_sum = 0.0, point_sum = 0.0, embed_sum = 0.0;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < order.size(); start += config_.clouds_per_batch, ++batch_index) {
    const std::size_t end = std::min(order.size(), start + config_.clouds_per_batch);
    const auto batch_size = static_cast<T>(end - start);
    std::vector<std::vector<T>> grads;
    try {
      Tape<T> tape;
      typename Tape<T>::Scope scope(tape);
      Tensor<T> total;
      for (std::size_t b = start; b < end; ++b) {
        FHSplit split = split_fh(dataset[order[b]], config_.points_f, config_.points_h, rng_);
        LossTerms<T> terms = model_.loss_terms(to_tensor<T>(split.xf), to_tensor<T>(split.xh));
        loss_sum += static_cast<double>(terms.loss.item());
        point_sum += -static_cast<double>(terms.point_loglik.item()) / static_cast<double>(terms.n_points);
        embed_sum += -static_cast<double>(terms.log_pw.item());
        total = total.defined() ? add(total, terms.loss) : terms.loss;
      }
      Tensor<T> batch_loss = scale(total, T(1) / batch_size);
      Gradients<T> g = tape.backward(batch_loss);
      for (const auto& p : params) grads.push_back(g.of(p));
    } catch (const NumericError& err) {
      throw TrainingError("epoch " + std::to_string(epoch_ + 1) + ", batch " + std::to_string(batch_index) + ": " +
                          err.what());
    }

    double norm2 = 0.0;
    for (const auto& g : grads)
      for (T v : g) norm2 += static_cast<double>(v) * static_cast<double>(v);
    if (!std::isfinite(norm2)) {
      throw TrainingError("epoch " + std::to_string(epoch_ + 1) + ", batch " + std::to_string(batch_index) +
                          ": non-finite gradient");
    }
    if (config_.max_grad_norm > 0.0 && std::sqrt(norm2) > config_.max_grad_norm) {
      const T factor = static_cast<T>(config_.max_grad_norm / std::sqrt(norm2));
      for (auto& g : grads)
        for (auto& v : g) v *= factor;
    }
    adam_step<T>(params, grads, adam_, lr, config_.adam);
  }

  ++epoch_;
  const auto n = static_cast<double>(dataset.size());
  EpochLog log{epoch_, lr, loss_sum / n, point_sum / n, embed_sum / n};
  if (!std::isfinite(log.mean_loss)) {
    throw TrainingError("epoch " + std::to_string(epoch_) + ": non-finite mean loss");
  }
  return log;
}

namespace {

template <typename T>
TrainResult<T> run(Trainer<T>& trainer, const std::vector<PointCloud>& dataset, const TrainOutput& output,
                   std::size_t epochs, bool append_log) {
  std::ofstream log_file;
  if (!output.dir.empty()) {
    std::filesystem::create_directories(output.dir);
    log_file.open(output.dir / "loss.tsv", append_log ? std::ios::app : std::ios::trunc);
    if (!log_file) throw DataError("cannot write " + (output.dir / "loss.tsv").string());
  }
  std::vector<EpochLog> log;
  while (trainer.epoch() < epochs) {
    EpochLog entry = trainer.run_epoch(dataset);
    log.push_back(entry);
    if (log_file.is_open()) log_file << entry.tsv() << '\n' << std::flush;
    if (output.on_epoch) output.on_epoch(entry);
    if (!output.dir.empty() && output.checkpoint_every > 0 && trainer.epoch() % output.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_epoch%04zu.bin", trainer.epoch());
      const auto state = trainer.state();
      save_checkpoint(output.dir / name, trainer.model(), &state);
    }
  }
  if (!output.dir.empty()) {
    const auto state = trainer.state();
    save_checkpoint(output.dir / "checkpoint.bin", trainer.model(), &state);
  }
  return {trainer.model(), std::move(log)};
}

}  // namespace

template <typename T>
TrainResult<T> train(const ModelConfig& model_config, const TrainConfig& config,
                     const std::vector<PointCloud>& dataset, const TrainOutput& output) {
  Trainer<T> trainer(CifModel<T>(model_config), config);
  return run(trainer, dataset, output, config.epochs, false);
}

template <typename T>
TrainResult<T> resume(CifModel<T> model, TrainingState<T> state, const std::vector<PointCloud>& dataset,
                      const TrainOutput& output, std::size_t epochs) {
  const std::size_t target = epochs > 0 ? epochs : state.config.epochs;
  Trainer<T> trainer(std::move(model), std::move(state));
  return run(trainer, dataset, output, target, true);
}

template void adam_step<float>(std::span<Tensor<float>>, std::span<const std::vector<float>>, AdamState<float>&, double,
                               const AdamHyper&);
template void adam_step<double>(std::span<Tensor<double>>, std::span<const std::vector<double>>, AdamState<double>&,
                                double, const AdamHyper&);
template class Trainer<float>;
template class Trainer<double>;
template TrainResult<float> train<float>(const ModelConfig&, const TrainConfig&, const std::vector<PointCloud>&,
                                         const TrainOutput&);
template TrainResult<double> train<double>(const ModelConfig&, const TrainConfig&, const std::vector<PointCloud>&,
                                           const TrainOutput&);
template TrainResult<float> resume<float>(CifModel<float>, TrainingState<float>, const std::vector<PointCloud>&,
                                          const TrainOutput&, std::size_t);
template TrainResult<double> resume<double>(CifModel<double>, TrainingState<double>, const std::vector<PointCloud>&,
                                            const TrainOutput&, std::size_t);

ModelConfig toy_model_config(std::uint64_t seed) {
  ModelConfig c;
  c.embedding_dim = 4;
  c.point_segments = 1;
  c.point_blocks = 2;
  c.prior_segments = 1;
  c.prior_blocks = 2;
  c.hidden = 8;
  c.residual_blocks = 1;
  c.encoder_point_widths = {8, 16};
  c.encoder_head_widths = {8};
  c.seed = seed;
  c.zero_init = false;
  return c;
}

GradCheckReport gradcheck_loss(const CifModel<double>& model, const std::vector<PointCloud>& clouds, std::size_t n_f,
                               std::size_t n_h, std::uint64_t seed, double step) {
  if (clouds.empty()) throw std::invalid_argument("gradcheck_loss: no clouds");
  Rng rng(seed);
  std::vector<std::pair<Tensor<double>, Tensor<double>>> batch;
  for (const auto& c : clouds) {
    FHSplit s = split_fh(c, n_f, n_h, rng);
    batch.emplace_back(to_tensor<double>(s.xf), to_tensor<double>(s.xh));
  }
  std::vector<Tensor<double>> params;
  for (auto& p : model.parameters()) params.push_back(p.tensor);
  auto loss = [&]() {
    Tensor<double> total = model.loss(batch[0].first, batch[0].second);
    for (std::size_t i = 1; i < batch.size(); ++i) total = add(total, model.loss(batch[i].first, batch[i].second));
    return total;
  };
  return gradient_check(loss, std::span<Tensor<double>>(params), step);
}

GradCheckReport gradcheck_toy(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PointCloud> clouds(2);
  for (std::size_t k = 0; k < clouds.size(); ++k) {
    clouds[k].id = "toy_" + std::to_string(k);
    for (int i = 0; i < 16; ++i)
      clouds[k].points.push_back({standard_normal(rng), standard_normal(rng), standard_normal(rng)});
  }
  CifModel<double> model(toy_model_config(seed));
  return gradcheck_loss(model, clouds, 8, 8, seed + 1);
}

}  // namespace cif
