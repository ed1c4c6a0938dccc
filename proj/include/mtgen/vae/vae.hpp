// Toy-scale Seq2Seq variational autoencoder over SMILES token sequences:
// one-hot inputs -> encoder LSTM -> 256-unit ReLU FC -> (mu, logvar) in R^128
// -> reparameterized z -> 256-unit ReLU FC -> decoder LSTM initial state ->
// teacher-forced softmax over the vocabulary. Training is manual
// backpropagation-through-time on the ELBO; all arithmetic is double
// precision, parameters quantize to f32 at checkpoint boundaries.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mtgen/vae/vocab.hpp"

namespace mtgen::vae {

struct Dims {
  int vocab = Vocabulary::kSize;  // D, one-hot width
  int hidden = 256;               // H, LSTM state size (config; paper is silent)
  int latent = 128;               // mu/logvar/z length
  int fc = 256;                   // width of both ReLU FC layers
  bool feed_z = false;            // concatenate z to every decoder input step

  int dec_input() const { return vocab + (feed_z ? latent : 0); }
  bool operator==(const Dims&) const = default;
};

// All weights as named dense tensors; biases are column vectors. Gate rows of
// the LSTM weight blocks stack in (i, f, g, o) order.
struct VaeParams {
  Dims dims;
  uint64_t seed = 0;  // seed used for initialization (recorded in checkpoints)

  Eigen::MatrixXd enc_Wx, enc_Wh, enc_b;  // 4H x D, 4H x H, 4H x 1
  Eigen::MatrixXd fc_W, fc_b;             // F x H, F x 1
  Eigen::MatrixXd mu_W, mu_b;             // L x F, L x 1
  Eigen::MatrixXd lv_W, lv_b;             // L x F, L x 1
  Eigen::MatrixXd zf_W, zf_b;             // F x L, F x 1
  Eigen::MatrixXd ih_W, ih_b;             // H x F, H x 1  (decoder h0)
  Eigen::MatrixXd ic_W, ic_b;             // H x F, H x 1  (decoder c0)
  Eigen::MatrixXd dec_Wx, dec_Wh, dec_b;  // 4H x dec_input, 4H x H, 4H x 1
  Eigen::MatrixXd out_W, out_b;           // D x H, D x 1

  // Uniform(-0.08, 0.08) initialization, quantized to f32 values.
  static VaeParams init(const Dims& dims, uint64_t seed);
  static VaeParams zeros_like(const VaeParams& p);

  // Stable (name, tensor) registry used by checkpoints, the optimizer and
  // the finite-difference tests.
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> tensors();
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> tensors() const;

  // Snap every entry to the nearest f32 value (checkpoint representability).
  void quantize_f32();
};

struct TrainConfig {
  int epochs = 60;
  int batch_size = 16;
  double lr = 0.05;
  double momentum = 0.9;
  // KL weight ramps linearly 0 -> 1 over the first `kl_warmup_frac` of epochs.
  double kl_warmup_frac = 1.0 / 3.0;
  int max_len = 100;  // maximum token-sequence length incl. EOS
  uint64_t seed = 0;
  bool teacher_forcing = true;  // free-running decode during training when off
};

struct EpochStats {
  int epoch = 0;
  double total = 0, recon = 0, kl = 0;
  double kl_weight = 0;
};

struct EncodeResult {
  Eigen::VectorXd mu, logvar;  // logvar clamped to [-10, 10]
};

struct LossParts {
  double total = 0, recon = 0, kl = 0;  // batch means per sequence
};

struct TrainResult {
  VaeParams params;
  std::vector<EpochStats> trace;
};

// Tokenized rows for losses: raw tokens + EOS, padded with PAD to a common
// length. Teacher inputs (BOS-shifted) and loss masks derive from the rows.
// Throws std::invalid_argument on untokenizable or overlong input.
std::vector<std::vector<int>> prepare_batch(const Vocabulary& vocab,
                                            const std::vector<std::string>& smiles, int max_len);

// Encoder LSTM over the non-PAD prefix, then the ReLU FC and the two linear heads.
// Throws std::invalid_argument on out-of-range token indices.
EncodeResult encode(const VaeParams& p, const std::vector<int>& tokens);

// z = mu + exp(logvar / 2) * eps, elementwise.
Eigen::VectorXd reparameterize(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar,
                               const Eigen::VectorXd& eps);

// Teacher-forced softmax distributions; row t is the distribution over the
// token following inputs[0..t]. inputs start with BOS.
Eigen::MatrixXd decode_probs(const VaeParams& p, const Eigen::VectorXd& z,
                             const std::vector<int>& inputs);

// ELBO parts for a padded batch with one eps vector per row; means per
// sequence, recon masked to non-PAD positions; total = recon + kl_weight * kl.
LossParts elbo_loss(const VaeParams& p, const std::vector<std::vector<int>>& batch,
                    const std::vector<Eigen::VectorXd>& eps, double kl_weight);

// Same value, plus parameter gradients accumulated into `grads` (zeroed here).
LossParts elbo_loss_grad(const VaeParams& p, const std::vector<std::vector<int>>& batch,
                         const std::vector<Eigen::VectorXd>& eps, double kl_weight,
                         VaeParams& grads);

// Mini-batch SGD with momentum on the ELBO; deterministic given cfg.seed.
// Throws std::runtime_error with diagnostics when the loss goes non-finite.
TrainResult train(VaeParams params, const std::vector<std::string>& smiles,
                  const Vocabulary& vocab, const TrainConfig& cfg);

// train() starting from the general checkpoint; never from cycle weights.
TrainResult finetune(const VaeParams& general, const std::vector<std::string>& smiles,
                     const Vocabulary& vocab, const TrainConfig& cfg);

// n strings from z ~ N(0, I) and autoregressive multinomial decoding, each
// terminated at EOS or max_len tokens. PAD/BOS are masked out of the softmax
// so sampled strings contain printable tokens only. Deterministic per
// (params, seed); molecule k draws from its own derived stream.
std::vector<std::string> sample(const VaeParams& p, const Vocabulary& vocab, size_t n,
                                uint64_t seed, int max_len);

// Checkpoint file: magic "MTGW", u16 version, u16 vocab, u32 hidden, u32
// latent, u32 fc, u8 feed_z, u64 seed, u32 tensor count, then per tensor:
// u32 name length, name bytes, u32 rows, u32 cols, row-major f32 LE values.
// Round-trips bit-exactly (params are f32-quantized on save).
void save_checkpoint(const VaeParams& p, const std::string& path);
// Throws std::runtime_error on bad magic/version/shape or truncation.
VaeParams load_checkpoint(const std::string& path);

}  // namespace mtgen::vae
