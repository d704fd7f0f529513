#include "svs/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "svs/binio.hpp"
#include "svs/rng.hpp"

namespace svs {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;
constexpr int kLayers = 6;

// Dropout precedes the second FC of MLP1 and the second/third FC of MLP2.
constexpr bool kDropoutOnInput[kLayers] = {false, true,  false,
                                           true,  true,  false};

std::array<int, kLayers> layer_outputs(const RegressorConfig& cfg) {
  return {cfg.mlp1_widths[0], cfg.mlp1_widths[1], cfg.mlp2_widths[0],
          cfg.mlp2_widths[1], cfg.mlp2_widths[2], 1};
}

std::array<int, kLayers> layer_inputs(const RegressorConfig& cfg) {
  return {cfg.embed_dim,
          cfg.mlp1_widths[0],
          cfg.mlp1_widths[1] + cfg.angle_dim(),
          cfg.mlp2_widths[0],
          cfg.mlp2_widths[1],
          cfg.mlp2_widths[2]};
}

void encode_angles(const RegressorConfig& cfg, double theta, double phi,
                   double* out) {
  if (cfg.angle_encoding == AngleEncoding::Raw) {
    out[0] = theta / 360.0;
    out[1] = phi / 90.0;
    return;
  }
  double t = std::fmod(theta, 360.0);
  if (t < 0.0) t += 360.0;
  const double tr = t * (kPi / 180.0);
  const double pr = phi * (kPi / 180.0);
  out[0] = std::sin(tr);
  out[1] = std::cos(tr);
  out[2] = std::sin(pr);
  out[3] = std::cos(pr);
}

struct LayerCache {
  std::vector<double> x;     // dense input after dropout, B x in
  std::vector<double> xhat;  // normalized pre-activation, B x out
  std::vector<double> y;     // BN output, B x out
  std::vector<double> var;   // variance used by BN, per feature
  std::vector<double> mask;  // dropout multipliers, B x in (empty if none)
};

struct Grads {
  // Per layer: w, b, gamma, beta — same shapes as the state tensors.
  std::vector<std::vector<double>> t;

  explicit Grads(const RegressorState& s) {
    for (int i = 0; i < kLayers; ++i) {
      t.emplace_back(s.dense[i].w.size(), 0.0);
      t.emplace_back(s.dense[i].b.size(), 0.0);
      t.emplace_back(s.bn[i].gamma.size(), 0.0);
      t.emplace_back(s.bn[i].beta.size(), 0.0);
    }
  }
};

template <typename Fn>
void visit_tensors(RegressorState& s, Fn&& fn) {
  for (int i = 0; i < kLayers; ++i) {
    fn(s.dense[i].w);
    fn(s.dense[i].b);
    fn(s.bn[i].gamma);
    fn(s.bn[i].beta);
  }
}

struct ForwardOpts {
  bool batch_stats = false;     // batch statistics instead of running ones
  bool update_running = false;  // fold batch stats into the running ones
  double dropout = 0.0;
  Rng* dropout_rng = nullptr;
};

/// Runs the network on a batch; fills caches when backward is intended and
/// returns the mean squared error against `targets` (or 0 if empty).
/// Running BN statistics are folded into *update_running_into when given.
double forward_batch(const RegressorState& state,
                     const std::vector<double>& emb,
                     const std::vector<double>& angles,
                     const std::vector<double>& targets, int B,
                     const ForwardOpts& opts,
                     RegressorState* update_running_into,
                     std::vector<LayerCache>* caches,
                     std::vector<double>& preds) {
  const RegressorConfig& cfg = state.config;
  const auto in_dims = layer_inputs(cfg);
  const auto out_dims = layer_outputs(cfg);
  const int a_dim = cfg.angle_dim();

  std::vector<double> prev = emb;  // activations flowing forward
  std::vector<LayerCache> local;
  std::vector<LayerCache>& cache = caches ? *caches : local;
  cache.assign(kLayers, {});

  for (int layer = 0; layer < kLayers; ++layer) {
    const int in = in_dims[layer];
    const int out = out_dims[layer];
    const DenseLayer& fc = state.dense[layer];
    const BatchNormLayer& bn = state.bn[layer];
    LayerCache& lc = cache[layer];

    if (layer == 2) {
      // Concatenate the MLP1 output with the angular inputs.
      std::vector<double> merged(static_cast<std::size_t>(B) * in);
      const int w1 = in - a_dim;
      for (int r = 0; r < B; ++r) {
        std::copy_n(prev.data() + static_cast<std::size_t>(r) * w1, w1,
                    merged.data() + static_cast<std::size_t>(r) * in);
        std::copy_n(angles.data() + static_cast<std::size_t>(r) * a_dim, a_dim,
                    merged.data() + static_cast<std::size_t>(r) * in + w1);
      }
      prev = std::move(merged);
    }

    lc.x = std::move(prev);
    if (kDropoutOnInput[layer] && opts.dropout > 0.0 && opts.dropout_rng) {
      const double keep = 1.0 - opts.dropout;
      lc.mask.resize(lc.x.size());
      for (std::size_t i = 0; i < lc.x.size(); ++i) {
        lc.mask[i] = opts.dropout_rng->uniform01() < keep ? 1.0 / keep : 0.0;
        lc.x[i] *= lc.mask[i];
      }
    }

    // z = x W^T + b
    std::vector<double> z(static_cast<std::size_t>(B) * out);
    for (int r = 0; r < B; ++r) {
      const double* xr = lc.x.data() + static_cast<std::size_t>(r) * in;
      double* zr = z.data() + static_cast<std::size_t>(r) * out;
      for (int o = 0; o < out; ++o) {
        const double* wo = fc.w.data() + static_cast<std::size_t>(o) * in;
        double acc = fc.b[o];
        for (int i = 0; i < in; ++i) acc += xr[i] * wo[i];
        zr[o] = acc;
      }
    }

    // Batch normalization.
    lc.var.resize(out);
    std::vector<double> mean(out);
    if (opts.batch_stats) {
      for (int o = 0; o < out; ++o) {
        double m = 0.0;
        for (int r = 0; r < B; ++r)
          m += z[static_cast<std::size_t>(r) * out + o];
        m /= B;
        double v = 0.0;
        for (int r = 0; r < B; ++r) {
          const double diff = z[static_cast<std::size_t>(r) * out + o] - m;
          v += diff * diff;
        }
        v /= B;
        mean[o] = m;
        lc.var[o] = v;
      }
      if (opts.update_running && update_running_into) {
        BatchNormLayer& target = update_running_into->bn[layer];
        for (int o = 0; o < out; ++o) {
          target.run_mean[o] =
              kBnMomentum * target.run_mean[o] + (1.0 - kBnMomentum) * mean[o];
          target.run_var[o] =
              kBnMomentum * target.run_var[o] + (1.0 - kBnMomentum) * lc.var[o];
        }
      }
    } else {
      mean.assign(bn.run_mean.begin(), bn.run_mean.end());
      lc.var.assign(bn.run_var.begin(), bn.run_var.end());
    }

    lc.xhat.resize(z.size());
    lc.y.resize(z.size());
    for (int o = 0; o < out; ++o) {
      const double inv_std = 1.0 / std::sqrt(lc.var[o] + kBnEps);
      for (int r = 0; r < B; ++r) {
        const std::size_t idx = static_cast<std::size_t>(r) * out + o;
        lc.xhat[idx] = (z[idx] - mean[o]) * inv_std;
        lc.y[idx] = bn.gamma[o] * lc.xhat[idx] + bn.beta[o];
      }
    }

    // Activation.
    prev.resize(lc.y.size());
    if (layer < kLayers - 1) {
      for (std::size_t i = 0; i < lc.y.size(); ++i)
        prev[i] = lc.y[i] > 0.0 ? lc.y[i] : 0.0;
    } else {
      for (std::size_t i = 0; i < lc.y.size(); ++i)
        prev[i] = 1.0 / (1.0 + std::exp(-lc.y[i]));
    }
  }

  preds = std::move(prev);
  if (targets.empty()) return 0.0;
  double loss = 0.0;
  for (int r = 0; r < B; ++r) {
    const double diff = preds[r] - targets[r];
    loss += diff * diff;
  }
  return loss / B;
}

/// Backward pass matching the caches left by forward_batch; accumulates
/// gradients of the mean squared error into `grads`.
void backward_batch(const RegressorState& state,
                    const std::vector<double>& targets, int B,
                    bool batch_stats, const std::vector<LayerCache>& cache,
                    const std::vector<double>& preds, Grads& grads) {
  const RegressorConfig& cfg = state.config;
  const auto in_dims = layer_inputs(cfg);
  const auto out_dims = layer_outputs(cfg);
  const int a_dim = cfg.angle_dim();

  // dL/d(sigmoid output)
  std::vector<double> da(B);
  for (int r = 0; r < B; ++r)
    da[r] = 2.0 * (preds[r] - targets[r]) / B;

  for (int layer = kLayers - 1; layer >= 0; --layer) {
    const int in = in_dims[layer];
    const int out = out_dims[layer];
    const DenseLayer& fc = state.dense[layer];
    const BatchNormLayer& bn = state.bn[layer];
    const LayerCache& lc = cache[layer];

    // Through the activation.
    std::vector<double> dy(static_cast<std::size_t>(B) * out);
    if (layer == kLayers - 1) {
      for (int r = 0; r < B; ++r) {
        const double s = preds[r];
        dy[r] = da[r] * s * (1.0 - s);
      }
    } else {
      for (std::size_t i = 0; i < dy.size(); ++i)
        dy[i] = lc.y[i] > 0.0 ? da[i] : 0.0;
    }

    // Through batch normalization.
    double* dgamma = grads.t[static_cast<std::size_t>(layer) * 4 + 2].data();
    double* dbeta = grads.t[static_cast<std::size_t>(layer) * 4 + 3].data();
    std::vector<double> dz(dy.size());
    for (int o = 0; o < out; ++o) {
      const double inv_std = 1.0 / std::sqrt(lc.var[o] + kBnEps);
      double sum_dy = 0.0;
      double sum_dy_xhat = 0.0;
      for (int r = 0; r < B; ++r) {
        const std::size_t idx = static_cast<std::size_t>(r) * out + o;
        sum_dy += dy[idx];
        sum_dy_xhat += dy[idx] * lc.xhat[idx];
      }
      dgamma[o] += sum_dy_xhat;
      dbeta[o] += sum_dy;
      if (batch_stats) {
        for (int r = 0; r < B; ++r) {
          const std::size_t idx = static_cast<std::size_t>(r) * out + o;
          dz[idx] = bn.gamma[o] * inv_std *
                    (dy[idx] - sum_dy / B - lc.xhat[idx] * sum_dy_xhat / B);
        }
      } else {
        for (int r = 0; r < B; ++r) {
          const std::size_t idx = static_cast<std::size_t>(r) * out + o;
          dz[idx] = dy[idx] * bn.gamma[o] * inv_std;
        }
      }
    }

    // Through the dense layer.
    double* dw = grads.t[static_cast<std::size_t>(layer) * 4].data();
    double* db = grads.t[static_cast<std::size_t>(layer) * 4 + 1].data();
    std::vector<double> dx(static_cast<std::size_t>(B) * in, 0.0);
    for (int r = 0; r < B; ++r) {
      const double* xr = lc.x.data() + static_cast<std::size_t>(r) * in;
      const double* dzr = dz.data() + static_cast<std::size_t>(r) * out;
      double* dxr = dx.data() + static_cast<std::size_t>(r) * in;
      for (int o = 0; o < out; ++o) {
        const double g = dzr[o];
        if (g == 0.0) continue;
        const double* wo = fc.w.data() + static_cast<std::size_t>(o) * in;
        double* dwo = dw + static_cast<std::size_t>(o) * in;
        db[o] += g;
        for (int i = 0; i < in; ++i) {
          dwo[i] += g * xr[i];
          dxr[i] += g * wo[i];
        }
      }
    }

    if (!lc.mask.empty())
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= lc.mask[i];

    if (layer == 2) {
      // Keep only the MLP1 part of the concatenated input gradient.
      const int w1 = in - a_dim;
      da.assign(static_cast<std::size_t>(B) * w1, 0.0);
      for (int r = 0; r < B; ++r)
        std::copy_n(dx.data() + static_cast<std::size_t>(r) * in, w1,
                    da.data() + static_cast<std::size_t>(r) * w1);
    } else {
      da = std::move(dx);
    }
  }
}

void pack_batch(const RegressorConfig& cfg,
                const std::vector<TrainingExample>& dataset,
                const std::vector<std::size_t>& order, std::size_t lo,
                std::size_t hi, std::vector<double>& emb,
                std::vector<double>& angles, std::vector<double>& targets) {
  const int B = static_cast<int>(hi - lo);
  const int E = cfg.embed_dim;
  const int A = cfg.angle_dim();
  emb.resize(static_cast<std::size_t>(B) * E);
  angles.resize(static_cast<std::size_t>(B) * A);
  targets.resize(B);
  for (int r = 0; r < B; ++r) {
    const TrainingExample& ex = dataset[order[lo + static_cast<std::size_t>(r)]];
    for (int i = 0; i < E; ++i)
      emb[static_cast<std::size_t>(r) * E + i] =
          static_cast<double>(ex.top_embedding[static_cast<std::size_t>(i)]);
    encode_angles(cfg, ex.theta, ex.phi,
                  angles.data() + static_cast<std::size_t>(r) * A);
    targets[r] = ex.target;
  }
}

}  // namespace

RegressorState::RegressorState(const RegressorConfig& cfg) : config(cfg) {
  require(cfg.embed_dim > 0, ErrorCode::InvalidArgument,
          "embed_dim must be positive");
  for (int w : cfg.mlp1_widths)
    require(w > 0, ErrorCode::InvalidArgument, "mlp1 widths must be positive");
  for (int w : cfg.mlp2_widths)
    require(w > 0, ErrorCode::InvalidArgument, "mlp2 widths must be positive");
  require(cfg.dropout >= 0.0 && cfg.dropout < 1.0, ErrorCode::InvalidArgument,
          "dropout must be in [0, 1)");
  require(cfg.learning_rate >= 0.0, ErrorCode::InvalidArgument,
          "learning_rate must be non-negative");

  Rng rng = Rng::substream(cfg.seed, "regressor-init");
  const auto in_dims = layer_inputs(cfg);
  const auto out_dims = layer_outputs(cfg);
  for (int layer = 0; layer < kLayers; ++layer) {
    DenseLayer fc;
    fc.in = in_dims[layer];
    fc.out = out_dims[layer];
    fc.w.resize(static_cast<std::size_t>(fc.in) * fc.out);
    fc.b.assign(fc.out, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fc.in));
    for (double& w : fc.w) w = rng.uniform(-bound, bound);
    dense.push_back(std::move(fc));

    BatchNormLayer norm;
    norm.dim = out_dims[layer];
    norm.gamma.assign(norm.dim, 1.0);
    norm.beta.assign(norm.dim, 0.0);
    norm.run_mean.assign(norm.dim, 0.0);
    norm.run_var.assign(norm.dim, 1.0);
    bn.push_back(std::move(norm));
  }
}

double forward(const RegressorState& state, std::span<const float> embedding,
               double theta, double phi, ForwardMode mode) {
  const RegressorConfig& cfg = state.config;
  require(static_cast<int>(embedding.size()) == cfg.embed_dim,
          ErrorCode::DimensionMismatch,
          "embedding dimension " + std::to_string(embedding.size()) +
              " != model embed_dim " + std::to_string(cfg.embed_dim));

  std::vector<double> emb(embedding.begin(), embedding.end());
  for (double v : emb)
    require(std::isfinite(v), ErrorCode::NonFiniteValue,
            "non-finite embedding value");
  std::vector<double> angles(cfg.angle_dim());
  encode_angles(cfg, theta, phi, angles.data());

  ForwardOpts opts;
  opts.batch_stats = mode == ForwardMode::Train;
  std::vector<double> preds;
  forward_batch(state, emb, angles, {}, 1, opts, nullptr, nullptr, preds);
  require(std::isfinite(preds[0]), ErrorCode::NonFiniteValue,
          "non-finite activation");
  return preds[0];
}

std::vector<double> forward_eval_batch(
    const RegressorState& state, const std::vector<TrainingExample>& batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const TrainingExample& ex : batch)
    out.push_back(forward(state, ex.top_embedding, ex.theta, ex.phi,
                          ForwardMode::Eval));
  return out;
}

TrainResult train(const std::vector<TrainingExample>& dataset,
                  const RegressorConfig& cfg) {
  require(!dataset.empty(), ErrorCode::InvalidArgument,
          "empty training dataset");
  require(cfg.batch_size >= 1, ErrorCode::InvalidArgument,
          "batch_size must be >= 1");
  require(cfg.epochs >= 0, ErrorCode::InvalidArgument,
          "epochs must be >= 0");
  for (const TrainingExample& ex : dataset) {
    require(static_cast<int>(ex.top_embedding.size()) == cfg.embed_dim,
            ErrorCode::DimensionMismatch,
            "training example embedding dimension mismatch");
    require(ex.target >= 0.0 && ex.target <= 1.0, ErrorCode::InvalidArgument,
            "target outside [0, 1]");
  }

  TrainResult result;
  result.state = RegressorState(cfg);
  RegressorState& state = result.state;

  // Adam moments per tensor, in visit order.
  std::vector<std::vector<double>> m, v;
  visit_tensors(state, [&](std::vector<double>& t) {
    m.emplace_back(t.size(), 0.0);
    v.emplace_back(t.size(), 0.0);
  });
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::uint64_t step = 0;

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> emb, angles, targets, preds;
  std::vector<LayerCache> caches;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = Rng::substream(cfg.seed, "epoch-shuffle",
                                     static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t lo = 0; lo < dataset.size();
         lo += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t hi =
          std::min(dataset.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      const int B = static_cast<int>(hi - lo);
      pack_batch(cfg, dataset, order, lo, hi, emb, angles, targets);

      Rng drop_rng = Rng::substream(cfg.seed, "dropout", step);
      ForwardOpts opts;
      opts.batch_stats = true;
      opts.update_running = true;
      opts.dropout = cfg.dropout;
      opts.dropout_rng = cfg.dropout > 0.0 ? &drop_rng : nullptr;

      const double loss = forward_batch(state, emb, angles, targets, B, opts,
                                        &state, &caches, preds);
      require(std::isfinite(loss), ErrorCode::NonFiniteValue,
              "non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += loss * B;
      seen += static_cast<std::size_t>(B);

      Grads grads(state);
      backward_batch(state, targets, B, /*batch_stats=*/true, caches, preds,
                     grads);

      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      std::size_t ti = 0;
      visit_tensors(state, [&](std::vector<double>& tensor) {
        const std::vector<double>& g = grads.t[ti];
        std::vector<double>& mt = m[ti];
        std::vector<double>& vt = v[ti];
        for (std::size_t i = 0; i < tensor.size(); ++i) {
          mt[i] = beta1 * mt[i] + (1.0 - beta1) * g[i];
          vt[i] = beta2 * vt[i] + (1.0 - beta2) * g[i] * g[i];
          tensor[i] -= cfg.learning_rate * (mt[i] / bc1) /
                       (std::sqrt(vt[i] / bc2) + adam_eps);
        }
        ++ti;
      });
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(seen));
  }
  return result;
}

double gradient_check(const RegressorState& state,
                      const std::vector<TrainingExample>& batch,
                      double epsilon, bool frozen_bn) {
  require(!batch.empty(), ErrorCode::InvalidArgument, "empty batch");
  RegressorState work = state;
  const RegressorConfig& cfg = work.config;
  const int B = static_cast<int>(batch.size());

  std::vector<std::size_t> order(batch.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> emb, angles, targets;
  pack_batch(cfg, batch, order, 0, batch.size(), emb, angles, targets);

  ForwardOpts opts;
  opts.batch_stats = !frozen_bn;

  std::vector<LayerCache> caches;
  std::vector<double> preds;
  forward_batch(work, emb, angles, targets, B, opts, nullptr, &caches, preds);
  Grads grads(work);
  backward_batch(work, targets, B, !frozen_bn, caches, preds, grads);

  const auto loss_at = [&]() {
    std::vector<double> p;
    return forward_batch(work, emb, angles, targets, B, opts, nullptr,
                         nullptr, p);
  };

  double max_rel = 0.0;
  std::size_t ti = 0;
  visit_tensors(work, [&](std::vector<double>& tensor) {
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor[i];
      tensor[i] = saved + epsilon;
      const double up = loss_at();
      tensor[i] = saved - epsilon;
      const double down = loss_at();
      tensor[i] = saved;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = grads.t[ti][i];
      const double denom = std::max(std::abs(numeric), std::abs(analytic));
      const double err = denom < 1e-7 ? std::abs(numeric - analytic)
                                      : std::abs(numeric - analytic) / denom;
      max_rel = std::max(max_rel, err);
    }
    ++ti;
  });
  return max_rel;
}

namespace {
constexpr char kModelMagic[4] = {'S', 'V', 'S', 'M'};
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

void save_model(const RegressorState& state, const std::filesystem::path& path,
                std::uint64_t config_digest) {
  const RegressorConfig& cfg = state.config;
  std::ostringstream buf(std::ios::binary);
  binio::write_magic(buf, kModelMagic);
  binio::write_u32(buf, kModelVersion);
  binio::write_u64(buf, config_digest);
  binio::write_u32(buf, static_cast<std::uint32_t>(cfg.embed_dim));
  binio::write_u8(buf, cfg.angle_encoding == AngleEncoding::Raw ? 0 : 1);
  binio::write_f64(buf, cfg.dropout);
  binio::write_f64(buf, cfg.learning_rate);
  binio::write_u32(buf, static_cast<std::uint32_t>(cfg.batch_size));
  binio::write_u32(buf, static_cast<std::uint32_t>(cfg.epochs));
  binio::write_u64(buf, cfg.seed);
  for (int w : cfg.mlp1_widths) binio::write_u32(buf, static_cast<std::uint32_t>(w));
  for (int w : cfg.mlp2_widths) binio::write_u32(buf, static_cast<std::uint32_t>(w));
  for (int layer = 0; layer < kLayers; ++layer) {
    for (double w : state.dense[layer].w) binio::write_f64(buf, w);
    for (double b : state.dense[layer].b) binio::write_f64(buf, b);
    for (double g : state.bn[layer].gamma) binio::write_f64(buf, g);
    for (double b : state.bn[layer].beta) binio::write_f64(buf, b);
    for (double r : state.bn[layer].run_mean) binio::write_f64(buf, r);
    for (double r : state.bn[layer].run_var) binio::write_f64(buf, r);
  }

  const std::string payload = buf.str();
  binio::Crc32 crc;
  crc.update(payload.data(), payload.size());

  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoFailure,
          "cannot open " + path.string() + " for writing");
  binio::write_bytes(out, payload.data(), payload.size());
  binio::write_u32(out, crc.value());
  out.flush();
  require(out.good(), ErrorCode::IoFailure, "write failed: " + path.string());
}

RegressorState load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream all;
  all << in.rdbuf();
  const std::string bytes = all.str();
  require(bytes.size() > 8, ErrorCode::MalformedHeader,
          "model file too short");

  const std::string payload = bytes.substr(0, bytes.size() - 4);
  binio::Crc32 crc;
  crc.update(payload.data(), payload.size());
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i)
    stored |= static_cast<std::uint32_t>(
                  static_cast<unsigned char>(bytes[bytes.size() - 4 + i]))
              << (8 * i);
  require(crc.value() == stored, ErrorCode::ChecksumMismatch,
          "model file checksum mismatch");

  std::istringstream buf(payload, std::ios::binary);
  binio::expect_magic(buf, kModelMagic, path.string());
  const std::uint32_t version = binio::read_u32(buf);
  require(version == kModelVersion, ErrorCode::VersionMismatch,
          "unsupported model version " + std::to_string(version));
  binio::read_u64(buf);  // config digest, informational

  RegressorConfig cfg;
  cfg.embed_dim = static_cast<int>(binio::read_u32(buf));
  cfg.angle_encoding =
      binio::read_u8(buf) == 0 ? AngleEncoding::Raw : AngleEncoding::SinCos;
  cfg.dropout = binio::read_f64(buf);
  cfg.learning_rate = binio::read_f64(buf);
  cfg.batch_size = static_cast<int>(binio::read_u32(buf));
  cfg.epochs = static_cast<int>(binio::read_u32(buf));
  cfg.seed = binio::read_u64(buf);
  for (int& w : cfg.mlp1_widths) w = static_cast<int>(binio::read_u32(buf));
  for (int& w : cfg.mlp2_widths) w = static_cast<int>(binio::read_u32(buf));

  RegressorState state(cfg);
  for (int layer = 0; layer < kLayers; ++layer) {
    for (double& w : state.dense[layer].w) w = binio::read_f64(buf);
    for (double& b : state.dense[layer].b) b = binio::read_f64(buf);
    for (double& g : state.bn[layer].gamma) g = binio::read_f64(buf);
    for (double& b : state.bn[layer].beta) b = binio::read_f64(buf);
    for (double& r : state.bn[layer].run_mean) r = binio::read_f64(buf);
    for (double& r : state.bn[layer].run_var) r = binio::read_f64(buf);
  }
  return state;
}

}  // namespace svs
