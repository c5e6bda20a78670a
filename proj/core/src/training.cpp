#include "sindyae/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "sindyae/eval.hpp"

namespace sindyae {

void TrainConfig::validate() const {
  std::ostringstream msg;
  if (input_dim < 1) msg << "input_dim must be >= 1; ";
  if (latent_dim < 1) msg << "latent_dim must be >= 1; ";
  if (library.state_dim != latent_dim) msg << "library.state_dim must equal latent_dim; ";
  for (int w : encoder_widths)
    if (w < 1) msg << "encoder widths must be positive; ";
  if (!std::equal(encoder_widths.rbegin(), encoder_widths.rend(), decoder_widths.begin(),
                  decoder_widths.end()))
    msg << "decoder_widths must mirror encoder_widths; ";
  if (!(learning_rate > 0.0)) msg << "learning_rate must be positive; ";
  if (batch_size < 1) msg << "batch_size must be >= 1; ";
  if (epochs_main < 0 || epochs_refine < 0) msg << "epoch counts must be >= 0; ";
  if (threshold < 0.0) msg << "threshold must be >= 0; ";
  if (threshold_interval < 1) msg << "threshold_interval must be >= 1; ";
  if (validation_interval < 1) msg << "validation_interval must be >= 1; ";
  if (threshold_interval >= 1 && validation_interval >= 1 &&
      threshold_interval % validation_interval != 0)
    msg << "threshold_interval must be a multiple of validation_interval; ";
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) msg << "loss weights must be >= 0; ";
  try {
    library.validate();
  } catch (const std::exception& e) {
    msg << e.what() << "; ";
  }
  if (!msg.str().empty()) throw std::invalid_argument("TrainConfig: " + msg.str());
}

namespace {

// Parameter tensors in optimizer order: encoder (W, b) per layer, decoder
// (W, b) per layer, then Xi.
template <typename NetA, typename Fn>
void for_each_tensor(NetA& encoder, NetA& decoder, Fn&& fn) {
  for (auto& layer : encoder.layers) {
    fn(layer.weights.data(), static_cast<std::size_t>(layer.weights.size()));
    fn(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  for (auto& layer : decoder.layers) {
    fn(layer.weights.data(), static_cast<std::size_t>(layer.weights.size()));
    fn(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
}

std::vector<double*> tensor_pointers(NetworkParams& p, Matrix& xi, std::vector<std::size_t>* sizes) {
  std::vector<double*> out;
  for_each_tensor(p.encoder, p.decoder, [&](double* ptr, std::size_t n) {
    out.push_back(ptr);
    if (sizes) sizes->push_back(n);
  });
  out.push_back(xi.data());
  if (sizes) sizes->push_back(static_cast<std::size_t>(xi.size()));
  return out;
}

std::vector<const double*> gradient_pointers(Gradients& g) {
  std::vector<const double*> out;
  for_each_tensor(g.encoder, g.decoder, [&](double* ptr, std::size_t) { out.push_back(ptr); });
  out.push_back(g.xi.data());
  return out;
}

void zero_gradients(Gradients& g) {
  for_each_tensor(g.encoder, g.decoder,
                  [](double* ptr, std::size_t n) { std::fill(ptr, ptr + n, 0.0); });
  g.xi.setZero();
}

int mask_count(const Matrix& mask) { return static_cast<int>(mask.sum()); }

Matrix gather(const Matrix& src, const std::vector<std::size_t>& order, std::size_t begin,
              std::size_t end) {
  Matrix out(static_cast<Eigen::Index>(end - begin), src.cols());
  for (std::size_t k = begin; k < end; ++k)
    out.row(static_cast<Eigen::Index>(k - begin)) = src.row(static_cast<Eigen::Index>(order[k]));
  return out;
}

}  // namespace

TrainingState initialize(const TrainConfig& config) {
  config.validate();
  TrainingState s;
  s.network = make_autoencoder(config.input_dim, config.encoder_widths, config.latent_dim,
                               config.decoder_widths);
  RngStream rng = seeded_rng(config.seed);
  for (auto& layer : s.network.encoder.layers)
    layer.weights = xavier_init(static_cast<std::size_t>(layer.weights.rows()),
                                static_cast<std::size_t>(layer.weights.cols()), rng);
  for (auto& layer : s.network.decoder.layers)
    layer.weights = xavier_init(static_cast<std::size_t>(layer.weights.rows()),
                                static_cast<std::size_t>(layer.weights.cols()), rng);
  const int p = config.library.term_count();
  s.xi = Matrix::Ones(p, config.latent_dim);
  s.mask = Matrix::Ones(p, config.latent_dim);
  std::vector<std::size_t> sizes;
  tensor_pointers(s.network, s.xi, &sizes);
  for (auto n : sizes) s.optimizer.emplace_back(n);
  return s;
}

int apply_threshold(Matrix& xi, Matrix& mask, double threshold) {
  int removed = 0;
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    double& m = mask.data()[i];
    if (m != 0.0 && std::abs(xi.data()[i]) < threshold) {
      m = 0.0;
      ++removed;
    }
    if (m == 0.0) xi.data()[i] = 0.0;
  }
  return removed;
}

TrainOutcome train(const Dataset& train_set, const Dataset* validation, const TrainConfig& config,
                   const EpochCallback& on_epoch) {
  config.validate();
  train_set.validate();
  if (static_cast<int>(train_set.dim()) != config.input_dim) {
    std::ostringstream msg;
    msg << "dataset width " << train_set.dim() << " differs from config input_dim "
        << config.input_dim;
    throw DimensionError(msg.str());
  }
  if (config.library.model_order == 2 && !train_set.ddx)
    throw std::invalid_argument("second-order training requires ddX in the dataset");
  if (train_set.samples() == 0) throw std::invalid_argument("empty training set");

  TrainingState state = initialize(config);
  const Library library(config.library);
  RngStream shuffle_rng(split_seed(config.seed, 0));
  Gradients grads = Gradients::zeros_like(state.network, state.xi);

  std::vector<std::size_t> sizes;
  auto params = tensor_pointers(state.network, state.xi, &sizes);
  auto grad_ptrs = gradient_pointers(grads);

  TrainOutcome outcome;
  const std::size_t m = train_set.samples();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;

  const int total_epochs = config.epochs_main + config.epochs_refine;
  auto finish_model = [&]() {
    outcome.model.network = state.network;
    outcome.model.sindy = SindyModel{config.library, state.xi, state.mask};
    outcome.model.config = config;
  };

  for (int epoch = 1; epoch <= total_epochs; ++epoch) {
    const bool refining = epoch > config.epochs_main;
    LossWeights weights = config.weights();
    if (refining) weights.reg = 0.0;

    shuffle_indices(order, shuffle_rng);
    LossComponents sum;
    bool diverged = false;
    for (std::size_t begin = 0; begin < m; begin += batch) {
      const std::size_t end = std::min(m, begin + batch);
      const Matrix xb = gather(train_set.x, order, begin, end);
      const Matrix dxb = gather(train_set.dx, order, begin, end);
      Matrix ddxb;
      if (train_set.ddx) ddxb = gather(*train_set.ddx, order, begin, end);
      const BatchView view{xb, dxb, train_set.ddx ? &ddxb : nullptr};

      zero_gradients(grads);
      const auto c = loss_gradient(view, state.network, state.xi, state.mask, library, weights, grads);
      if (!std::isfinite(c.total)) {
        diverged = true;
        break;
      }
      const double w = static_cast<double>(end - begin);
      sum.recon += w * c.recon;
      sum.sindy_x += w * c.sindy_x;
      sum.sindy_z += w * c.sindy_z;

      for (std::size_t t = 0; t < params.size(); ++t)
        adam_step(std::span<double>(params[t], sizes[t]),
                  std::span<const double>(grad_ptrs[t], sizes[t]), state.optimizer[t],
                  config.learning_rate);
      // Masked coefficients stay removed even though their Adam moments persist.
      state.xi.array() *= state.mask.array();
    }

    if (!refining && epoch % config.threshold_interval == 0)
      apply_threshold(state.xi, state.mask, config.threshold);

    EpochRecord rec;
    rec.epoch = epoch;
    const double md = static_cast<double>(m);
    rec.loss.recon = sum.recon / md;
    rec.loss.sindy_x = sum.sindy_x / md;
    rec.loss.sindy_z = sum.sindy_z / md;
    rec.loss.reg = state.mask.cwiseProduct(state.xi).cwiseAbs().sum() /
                   static_cast<double>(state.xi.size());
    rec.loss.total = rec.loss.recon + weights.sindy_x * rec.loss.sindy_x +
                     weights.sindy_z * rec.loss.sindy_z + weights.reg * rec.loss.reg;
    rec.active_terms = mask_count(state.mask);

    if (diverged) {
      outcome.failed = true;
      std::ostringstream msg;
      msg << "non-finite loss at epoch " << epoch;
      outcome.failure = msg.str();
      finish_model();
      return outcome;
    }

    if (validation != nullptr && validation->samples() > 0 &&
        (epoch % config.validation_interval == 0 || epoch == total_epochs)) {
      try {
        const SindyModel current{config.library, state.xi, state.mask};
        const auto report = evaluate_model(&state.network, current, *validation, false);
        rec.val_fuv_x = report.fuv_x;
        rec.val_fuv_dx = report.fuv_dx;
        if (epoch == total_epochs) {
          outcome.model.metrics.val_fuv_x = report.fuv_x;
          outcome.model.metrics.val_fuv_dx = report.fuv_dx;
          outcome.model.metrics.val_fuv_dz = report.fuv_dz;
        }
      } catch (const std::domain_error&) {
        // zero-variance validation targets: leave the fields empty
      }
    }
    outcome.history.records.push_back(rec);
    if (on_epoch && !on_epoch(rec, state)) break;
  }

  finish_model();
  outcome.model.metrics.active_terms = mask_count(state.mask);
  return outcome;
}

std::uint64_t run_seed(const TrainConfig& config, int k) {
  return config.seed + static_cast<std::uint64_t>(k);
}

std::vector<TrainOutcome> run_multi_seed(const Dataset& train_set, const Dataset* validation,
                                         const TrainConfig& config, int n_seeds, int threads) {
  if (n_seeds < 1) throw std::invalid_argument("run_multi_seed: n_seeds must be >= 1");
  std::vector<TrainOutcome> results(static_cast<std::size_t>(n_seeds));
  auto run_one = [&](int k) {
    TrainConfig cfg = config;
    cfg.seed = run_seed(config, k);
    try {
      results[static_cast<std::size_t>(k)] = train(train_set, validation, cfg);
    } catch (const std::exception& e) {
      auto& r = results[static_cast<std::size_t>(k)];
      r.failed = true;
      r.failure = e.what();
      r.model.config = cfg;
    }
  };
  const int workers = std::clamp(threads, 1, n_seeds);
  if (workers == 1) {
    for (int k = 0; k < n_seeds; ++k) run_one(k);
    return results;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (int k = next++; k < n_seeds; k = next++) run_one(k);
    });
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace sindyae
