#include <doctest.h>

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "svs/regressor.hpp"
#include "svs/rng.hpp"

using svs::AngleEncoding;
using svs::ForwardMode;
using svs::RegressorConfig;
using svs::RegressorState;
using svs::TrainingExample;

namespace {

RegressorConfig tiny_config(std::uint64_t seed = 1) {
  RegressorConfig cfg;
  cfg.embed_dim = 16;
  cfg.mlp1_widths = {8, 8};
  cfg.mlp2_widths = {4, 4, 4};
  cfg.dropout = 0.0;
  cfg.seed = seed;
  return cfg;
}

std::vector<float> random_embedding(svs::Rng& rng, int dim) {
  std::vector<float> out(static_cast<std::size_t>(dim));
  for (float& v : out) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return out;
}

std::vector<TrainingExample> random_batch(svs::Rng& rng,
                                          const RegressorConfig& cfg, int n) {
  std::vector<TrainingExample> out;
  for (int i = 0; i < n; ++i) {
    TrainingExample ex;
    ex.top_embedding = random_embedding(rng, cfg.embed_dim);
    ex.theta = rng.uniform(0.0, 360.0);
    ex.phi = rng.uniform(30.0, 90.0);
    ex.target = rng.uniform01();
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

TEST_SUITE("regressor") {

TEST_CASE("zeroed head scores 0.5 everywhere") {
  RegressorState state(tiny_config());
  // Zero the final FC so the pre-activation is 0; BN leaves 0 at 0 both
  // with batch statistics (batch mean 0) and running ones (mean 0, var 1).
  for (double& w : state.dense.back().w) w = 0.0;
  for (double& b : state.dense.back().b) b = 0.0;

  svs::Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const auto emb = random_embedding(rng, 16);
    CHECK(svs::forward(state, emb, 45.0, 60.0, ForwardMode::Eval) == 0.5);
    CHECK(svs::forward(state, emb, 45.0, 60.0, ForwardMode::Train) == 0.5);
  }
}

TEST_CASE("eval forward is deterministic and in (0,1)") {
  svs::Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    RegressorState state(tiny_config(trial));
    const auto emb = random_embedding(rng, 16);
    const double a = svs::forward(state, emb, 90.0, 45.0);
    const double b = svs::forward(state, emb, 90.0, 45.0);
    CHECK(a == b);
    CHECK(a > 0.0);
    CHECK(a < 1.0);
  }
}

TEST_CASE("batched eval equals per-example eval") {
  svs::Rng rng(23);
  const RegressorConfig cfg = tiny_config(9);
  RegressorState state(cfg);
  const auto batch = random_batch(rng, cfg, 7);
  const std::vector<double> scores = svs::forward_eval_batch(state, batch);
  for (std::size_t i = 0; i < batch.size(); ++i)
    CHECK(scores[i] == svs::forward(state, batch[i].top_embedding,
                                    batch[i].theta, batch[i].phi));
}

TEST_CASE("dimension and finiteness errors") {
  RegressorState state(tiny_config());
  std::vector<float> wrong(8, 0.0f);
  try {
    (void)svs::forward(state, wrong, 0.0, 45.0);
    FAIL("expected dimension mismatch");
  } catch (const svs::SvsError& e) {
    CHECK(e.code() == svs::ErrorCode::DimensionMismatch);
  }
  std::vector<float> bad(16, 0.0f);
  bad[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS((void)svs::forward(state, bad, 0.0, 45.0), svs::SvsError);
}

TEST_CASE("gradient check over random small configurations") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    svs::Rng rng(seed * 11 + 1);
    RegressorConfig cfg = tiny_config(seed);
    RegressorState state(cfg);
    const auto batch = random_batch(rng, cfg, 3);
    const double err = svs::gradient_check(state, batch, 1e-5, true);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("gradient check differentiating through batch statistics") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    svs::Rng rng(seed + 100);
    RegressorConfig cfg = tiny_config(seed);
    RegressorState state(cfg);
    const auto batch = random_batch(rng, cfg, 5);
    const double err = svs::gradient_check(state, batch, 1e-5, false);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("frozen-BN gradients are batch-size independent") {
  // With frozen statistics examples do not interact, so the gradient of
  // the averaged loss equals the average of per-example gradients; the
  // check must pass on a batch of 1 exactly like on a batch of k.
  svs::Rng rng(55);
  RegressorConfig cfg = tiny_config(2);
  RegressorState state(cfg);
  const auto one = random_batch(rng, cfg, 1);
  CHECK(svs::gradient_check(state, one, 1e-5, true) < 1e-4);
}

TEST_CASE("zero input leaves the embedding path inert") {
  RegressorState state(tiny_config(4));
  TrainingExample ex;
  ex.top_embedding.assign(16, 0.0f);
  ex.theta = 90.0;
  ex.phi = 60.0;
  const double base = svs::forward(state, ex.top_embedding, ex.theta, ex.phi);

  // With a zero embedding the first dense layer contributes only its bias,
  // so its weights carry zero gradient and changing them cannot move the
  // output.
  svs::Rng rng(5);
  for (double& w : state.dense[0].w) w = rng.uniform(-1.0, 1.0);
  CHECK(svs::forward(state, ex.top_embedding, ex.theta, ex.phi) == base);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  svs::Rng rng(31);
  RegressorConfig cfg = tiny_config(8);
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  const auto dataset = random_batch(rng, cfg, 12);

  const RegressorState fresh(cfg);
  const svs::TrainResult result = svs::train(dataset, cfg);
  for (int layer = 0; layer < 6; ++layer) {
    CHECK(result.state.dense[layer].w == fresh.dense[layer].w);
    CHECK(result.state.dense[layer].b == fresh.dense[layer].b);
    CHECK(result.state.bn[layer].gamma == fresh.bn[layer].gamma);
  }
  for (std::size_t e = 1; e < result.loss_history.size(); ++e)
    CHECK(result.loss_history[e] ==
          doctest::Approx(result.loss_history[0]).epsilon(1e-12));
}

TEST_CASE("constant targets are fit to near-zero loss") {
  svs::Rng rng(41);
  RegressorConfig cfg = tiny_config(7);
  cfg.epochs = 60;
  cfg.batch_size = 16;
  auto dataset = random_batch(rng, cfg, 64);
  for (auto& ex : dataset) ex.target = 0.5;

  const svs::TrainResult result = svs::train(dataset, cfg);
  CHECK(result.loss_history.back() < 1e-3);
}

TEST_CASE("teacher network is fit below 1e-3") {
  svs::Rng rng(61);
  RegressorConfig cfg;
  cfg.embed_dim = 16;
  cfg.mlp1_widths = {16, 16};
  cfg.mlp2_widths = {8, 8, 8};
  cfg.dropout = 0.0;
  cfg.epochs = 100;
  cfg.batch_size = 32;
  cfg.seed = 13;

  std::vector<double> teacher(16);
  for (double& w : teacher) w = rng.uniform(-1.0, 1.0);

  std::vector<TrainingExample> dataset;
  for (int i = 0; i < 200; ++i) {
    TrainingExample ex;
    ex.top_embedding = random_embedding(rng, 16);
    ex.theta = rng.uniform(0.0, 360.0);
    ex.phi = rng.uniform(45.0, 90.0);
    double z = 0.0;
    for (int j = 0; j < 16; ++j) z += teacher[j] * ex.top_embedding[j];
    ex.target = 1.0 / (1.0 + std::exp(-z));
    dataset.push_back(std::move(ex));
  }

  const svs::TrainResult result = svs::train(dataset, cfg);
  CHECK(result.loss_history.back() < 1e-3);

  // Train/eval BN consistency: eval-mode loss on the training set stays
  // finite and lands near the final train-mode loss.
  const std::vector<double> eval_scores =
      svs::forward_eval_batch(result.state, dataset);
  double eval_loss = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const double diff = eval_scores[i] - dataset[i].target;
    eval_loss += diff * diff;
  }
  eval_loss /= static_cast<double>(dataset.size());
  CHECK(std::isfinite(eval_loss));
  CHECK(eval_loss <= 2.0 * result.loss_history.back() + 1e-4);
}

TEST_CASE("training is deterministic for a fixed seed") {
  svs::Rng rng(71);
  RegressorConfig cfg = tiny_config(19);
  cfg.epochs = 5;
  cfg.dropout = 0.25;
  const auto dataset = random_batch(rng, cfg, 32);

  const svs::TrainResult a = svs::train(dataset, cfg);
  const svs::TrainResult b = svs::train(dataset, cfg);
  CHECK(a.loss_history == b.loss_history);
  for (int layer = 0; layer < 6; ++layer)
    CHECK(a.state.dense[layer].w == b.state.dense[layer].w);
}

TEST_CASE("sincos encoding is exactly periodic in theta") {
  RegressorConfig cfg = tiny_config(3);
  cfg.angle_encoding = AngleEncoding::SinCos;
  RegressorState state(cfg);
  svs::Rng rng(83);
  for (int trial = 0; trial < 20; ++trial) {
    const auto emb = random_embedding(rng, 16);
    const double theta = static_cast<double>(rng.below(360));
    const double phi = 45.0 + static_cast<double>(rng.below(46));
    CHECK(svs::forward(state, emb, theta, phi) ==
          svs::forward(state, emb, theta + 360.0, phi));
  }

  // Raw encoding is not periodic; the regression target itself is.
  RegressorState raw(tiny_config(3));
  const auto emb = random_embedding(rng, 16);
  CHECK(svs::forward(raw, emb, 45.0, 60.0) !=
        svs::forward(raw, emb, 405.0, 60.0));
}

TEST_CASE("model file round-trip and corruption detection") {
  testutil::TempDir dir;
  svs::Rng rng(91);
  RegressorConfig cfg = tiny_config(29);
  cfg.epochs = 3;
  const auto dataset = random_batch(rng, cfg, 16);
  const svs::TrainResult result = svs::train(dataset, cfg);

  const auto path = dir.file("model.svsm");
  svs::save_model(result.state, path, 0xabcd);
  const RegressorState loaded = svs::load_model(path);

  for (int trial = 0; trial < 10; ++trial) {
    const auto emb = random_embedding(rng, 16);
    const double theta = rng.uniform(0.0, 360.0);
    const double phi = rng.uniform(45.0, 90.0);
    CHECK(svs::forward(result.state, emb, theta, phi) ==
          svs::forward(loaded, emb, theta, phi));
  }

  // Wrong embedding dimension surfaces as a structured error.
  std::vector<float> wrong(8, 0.1f);
  try {
    (void)svs::forward(loaded, wrong, 0.0, 45.0);
    FAIL("expected dimension mismatch");
  } catch (const svs::SvsError& e) {
    CHECK(e.code() == svs::ErrorCode::DimensionMismatch);
  }

  // Flip one payload byte: checksum must catch it.
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
  const auto corrupt = dir.file("corrupt.svsm");
  std::ofstream(corrupt, std::ios::binary)
      .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  try {
    (void)svs::load_model(corrupt);
    FAIL("expected checksum error");
  } catch (const svs::SvsError& e) {
    CHECK(e.code() == svs::ErrorCode::ChecksumMismatch);
  }
}

TEST_CASE("training input validation") {
  RegressorConfig cfg = tiny_config();
  CHECK_THROWS_AS((void)svs::train({}, cfg), svs::SvsError);

  svs::Rng rng(5);
  auto dataset = random_batch(rng, cfg, 4);
  dataset[2].target = 1.5;
  CHECK_THROWS_AS((void)svs::train(dataset, cfg), svs::SvsError);

  auto mixed = random_batch(rng, cfg, 4);
  mixed[1].top_embedding.resize(4);
  CHECK_THROWS_AS((void)svs::train(mixed, cfg), svs::SvsError);
}

}  // TEST_SUITE
