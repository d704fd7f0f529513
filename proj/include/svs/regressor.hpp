#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "svs/errors.hpp"

namespace svs {

enum class AngleEncoding { Raw, SinCos };

/// Architecture and training hyper-parameters of the score regressor:
/// an embedding MLP (two FC+BN+ReLU blocks), concatenation with the camera
/// angles, a second MLP (three FC+BN+ReLU blocks) and a FC(1)+BN+Sigmoid
/// head. Dropout precedes every FC except the first of each MLP and the
/// head.
struct RegressorConfig {
  int embed_dim = 512;
  std::array<int, 2> mlp1_widths{256, 256};
  std::array<int, 3> mlp2_widths{64, 64, 64};
  double dropout = 0.25;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 50;
  AngleEncoding angle_encoding = AngleEncoding::Raw;
  std::uint64_t seed = 0;

  int angle_dim() const { return angle_encoding == AngleEncoding::Raw ? 2 : 4; }
};

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
};

struct BatchNormLayer {
  int dim = 0;
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> run_mean;
  std::vector<double> run_var;
};

/// Full parameter state; value semantics, copyable. Weights are fan-in
/// scaled uniform, biases zero, BN scale 1 / shift 0 / running stats (0, 1).
struct RegressorState {
  RegressorConfig config;
  std::vector<DenseLayer> dense;  // 6 layers in forward order
  std::vector<BatchNormLayer> bn;

  RegressorState() = default;
  explicit RegressorState(const RegressorConfig& cfg);
};

struct TrainingExample {
  std::vector<float> top_embedding;
  double theta = 0.0;
  double phi = 0.0;
  double target = 0.0;  // scaled semantic score in [0, 1]
};

enum class ForwardMode {
  Eval,   // running BN statistics, no dropout
  Train,  // batch BN statistics (batch of one for the scalar entry point)
};

/// Scores one view proposal; always in (0, 1). Eval mode is deterministic
/// and side-effect free. Train mode here uses batch-of-one statistics and
/// no dropout; mini-batch training runs through train().
double forward(const RegressorState& state, std::span<const float> embedding,
               double theta, double phi, ForwardMode mode = ForwardMode::Eval);

/// Eval-mode scores for a batch; row i equals the scalar eval forward of
/// example i exactly.
std::vector<double> forward_eval_batch(
    const RegressorState& state, const std::vector<TrainingExample>& batch);

struct TrainResult {
  RegressorState state;
  std::vector<double> loss_history;  // mean train-mode MSE per epoch
};

/// Adam on mean squared error over shuffled mini-batches. Deterministic for
/// a fixed seed (single-threaded).
TrainResult train(const std::vector<TrainingExample>& dataset,
                  const RegressorConfig& cfg);

/// Compares the analytic gradient of the batch MSE against central finite
/// differences for every parameter; returns the maximum relative error.
/// Dropout is disabled. With frozen_bn the BN layers normalize with their
/// running statistics (examples stay independent); otherwise batch
/// statistics are used and differentiated through.
double gradient_check(const RegressorState& state,
                      const std::vector<TrainingExample>& batch,
                      double epsilon = 1e-5, bool frozen_bn = true);

// Model file, little-endian: magic "SVSM", u32 version=1, u64 config
// digest, architecture fields, then all tensors as f64 in declared order,
// with a trailing CRC32 over everything before it.
void save_model(const RegressorState& state, const std::filesystem::path& path,
                std::uint64_t config_digest = 0);
RegressorState load_model(const std::filesystem::path& path);

}  // namespace svs
