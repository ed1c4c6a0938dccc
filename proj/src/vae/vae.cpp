#include "mtgen/vae/vae.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mtgen/util/rng.hpp"

namespace mtgen::vae {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd sigmoid(const VectorXd& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

VectorXd softmax(VectorXd logits) {
  double m = logits.maxCoeff();
  VectorXd e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

// One LSTM step. Gate rows stack as (i, f, g, o).
struct StepCache {
  int x_idx = -1;  // one-hot input index (decoder inputs may add z on top)
  VectorXd i, f, g, o, c, tc, h;
};

// x = one-hot(x_idx) [++ z when fed]; returns the new (h, c) inside cache.
StepCache lstm_step(const MatrixXd& Wx, const MatrixXd& Wh, const MatrixXd& b, int x_idx,
                    const VectorXd* z_feed, const VectorXd& h_prev, const VectorXd& c_prev) {
  const int H = static_cast<int>(Wh.cols());
  VectorXd a = Wh * h_prev + b.col(0);
  a += Wx.col(x_idx);  // one-hot input: a single column of Wx
  if (z_feed) a += Wx.rightCols(static_cast<int>(z_feed->size())) * (*z_feed);
  StepCache s;
  s.x_idx = x_idx;
  s.i = sigmoid(a.segment(0, H));
  s.f = sigmoid(a.segment(H, H));
  s.g = a.segment(2 * H, H).array().tanh().matrix();
  s.o = sigmoid(a.segment(3 * H, H));
  s.c = (s.f.array() * c_prev.array() + s.i.array() * s.g.array()).matrix();
  s.tc = s.c.array().tanh().matrix();
  s.h = (s.o.array() * s.tc.array()).matrix();
  return s;
}

struct StepGradOut {
  VectorXd dh_prev, dc_prev;
};

// Backward through one LSTM step; accumulates into dWx/dWh/db and optionally
// the z part of the input gradient.
StepGradOut lstm_step_backward(const MatrixXd& Wx, const MatrixXd& Wh, const StepCache& s,
                               const VectorXd& h_prev, const VectorXd& c_prev, const VectorXd& dh,
                               const VectorXd& dc_in, MatrixXd& dWx, MatrixXd& dWh, MatrixXd& db,
                               const VectorXd* z_feed, VectorXd* dz) {
  const int H = static_cast<int>(Wh.cols());
  VectorXd do_ = (dh.array() * s.tc.array()).matrix();
  VectorXd dc = dc_in + (dh.array() * s.o.array() * (1.0 - s.tc.array().square())).matrix();
  VectorXd di = (dc.array() * s.g.array()).matrix();
  VectorXd df = (dc.array() * c_prev.array()).matrix();
  VectorXd dg = (dc.array() * s.i.array()).matrix();

  VectorXd da(4 * H);
  da.segment(0, H) = (di.array() * s.i.array() * (1.0 - s.i.array())).matrix();
  da.segment(H, H) = (df.array() * s.f.array() * (1.0 - s.f.array())).matrix();
  da.segment(2 * H, H) = (dg.array() * (1.0 - s.g.array().square())).matrix();
  da.segment(3 * H, H) = (do_.array() * s.o.array() * (1.0 - s.o.array())).matrix();

  dWx.col(s.x_idx) += da;
  if (z_feed) {
    const int L = static_cast<int>(z_feed->size());
    dWx.rightCols(L) += da * z_feed->transpose();
    if (dz) *dz += Wx.rightCols(L).transpose() * da;
  }
  dWh += da * h_prev.transpose();
  db.col(0) += da;

  StepGradOut out;
  out.dh_prev = Wh.transpose() * da;
  out.dc_prev = (dc.array() * s.f.array()).matrix();
  return out;
}

void check_tokens(const VaeParams& p, const std::vector<int>& tokens) {
  for (int t : tokens)
    if (t < 0 || t >= p.dims.vocab)
      throw std::invalid_argument("token index " + std::to_string(t) + " outside vocabulary of " +
                                  std::to_string(p.dims.vocab));
}

// Encoder LSTM over the non-PAD prefix; caches for BPTT.
std::vector<StepCache> run_encoder(const VaeParams& p, const std::vector<int>& row) {
  const int H = p.dims.hidden;
  std::vector<StepCache> steps;
  VectorXd h = VectorXd::Zero(H), c = VectorXd::Zero(H);
  for (int t : row) {
    if (t == Vocabulary::kPad) break;
    steps.push_back(lstm_step(p.enc_Wx, p.enc_Wh, p.enc_b, t, nullptr, h, c));
    h = steps.back().h;
    c = steps.back().c;
  }
  if (steps.empty()) throw std::invalid_argument("cannot encode an empty sequence");
  return steps;
}

struct HeadCache {
  VectorXd h_T, hp, mu, lv_raw, lv;
};

HeadCache run_heads(const VaeParams& p, const VectorXd& h_T) {
  HeadCache hc;
  hc.h_T = h_T;
  hc.hp = (p.fc_W * h_T + p.fc_b.col(0)).cwiseMax(0.0);
  hc.mu = p.mu_W * hc.hp + p.mu_b.col(0);
  hc.lv_raw = p.lv_W * hc.hp + p.lv_b.col(0);
  hc.lv = hc.lv_raw.cwiseMax(-10.0).cwiseMin(10.0);
  return hc;
}

struct InitCache {
  VectorXd f0, h0, c0;
};

InitCache run_decoder_init(const VaeParams& p, const VectorXd& z) {
  InitCache ic;
  ic.f0 = (p.zf_W * z + p.zf_b.col(0)).cwiseMax(0.0);
  ic.h0 = p.ih_W * ic.f0 + p.ih_b.col(0);
  ic.c0 = p.ic_W * ic.f0 + p.ic_b.col(0);
  return ic;
}

double kl_divergence(const VectorXd& mu, const VectorXd& lv) {
  return 0.5 * (mu.array().square() + lv.array().exp() - 1.0 - lv.array()).sum();
}

// Full single-sequence forward (+ optional backward into `grads`).
// Returns (recon, kl). `row` = tokens + EOS (no padding).
std::pair<double, double> sequence_pass(const VaeParams& p, const std::vector<int>& row,
                                        const VectorXd& eps, double kl_weight, bool teacher_forcing,
                                        VaeParams* grads) {
  const int H = p.dims.hidden;
  const VectorXd* z_feed = nullptr;

  std::vector<StepCache> enc = run_encoder(p, row);
  HeadCache hc = run_heads(p, enc.back().h);
  VectorXd z = reparameterize(hc.mu, hc.lv, eps);
  if (p.dims.feed_z) z_feed = &z;
  InitCache ic = run_decoder_init(p, z);

  // teacher inputs: BOS then row[0..T-2]; targets: row[0..T-1]
  int T = 0;
  while (T < static_cast<int>(row.size()) && row[T] != Vocabulary::kPad) ++T;

  std::vector<StepCache> dec;
  std::vector<VectorXd> probs(T);
  double recon = 0;
  VectorXd h = ic.h0, c = ic.c0;
  int input = Vocabulary::kBos;
  for (int t = 0; t < T; ++t) {
    dec.push_back(lstm_step(p.dec_Wx, p.dec_Wh, p.dec_b, input, z_feed, h, c));
    h = dec.back().h;
    c = dec.back().c;
    VectorXd logits = p.out_W * h + p.out_b.col(0);
    probs[t] = softmax(std::move(logits));
    recon -= std::log(std::max(probs[t](row[t]), 1e-300));
    if (teacher_forcing) {
      input = row[t];
    } else {
      int best = 0;
      probs[t].maxCoeff(&best);
      input = best;
    }
  }
  double kl = kl_divergence(hc.mu, hc.lv);
  if (!grads) return {recon, kl};

  VaeParams& g = *grads;
  VectorXd dz = VectorXd::Zero(p.dims.latent);
  VectorXd dh = VectorXd::Zero(H), dc = VectorXd::Zero(H);
  for (int t = T - 1; t >= 0; --t) {
    VectorXd dlogits = probs[t];
    dlogits(row[t]) -= 1.0;
    g.out_W += dlogits * dec[t].h.transpose();
    g.out_b.col(0) += dlogits;
    dh += p.out_W.transpose() * dlogits;
    const VectorXd& h_prev = (t == 0) ? ic.h0 : dec[t - 1].h;
    const VectorXd& c_prev = (t == 0) ? ic.c0 : dec[t - 1].c;
    StepGradOut so = lstm_step_backward(p.dec_Wx, p.dec_Wh, dec[t], h_prev, c_prev, dh, dc,
                                        g.dec_Wx, g.dec_Wh, g.dec_b, z_feed, &dz);
    dh = std::move(so.dh_prev);
    dc = std::move(so.dc_prev);
  }

  // decoder init FCs
  VectorXd df0 = p.ih_W.transpose() * dh + p.ic_W.transpose() * dc;
  g.ih_W += dh * ic.f0.transpose();
  g.ih_b.col(0) += dh;
  g.ic_W += dc * ic.f0.transpose();
  g.ic_b.col(0) += dc;
  VectorXd df0_pre = (ic.f0.array() > 0.0).select(df0, 0.0);
  g.zf_W += df0_pre * z.transpose();
  g.zf_b.col(0) += df0_pre;
  dz += p.zf_W.transpose() * df0_pre;

  // reparameterization + KL into the heads
  VectorXd sigma_half = (hc.lv.array() / 2.0).exp().matrix();
  VectorXd dmu = dz + kl_weight * hc.mu;
  VectorXd dlv =
      (dz.array() * eps.array() * 0.5 * sigma_half.array()).matrix() +
      (kl_weight * 0.5 * (hc.lv.array().exp() - 1.0)).matrix();
  // clamp: zero gradient where lv_raw was clipped
  for (int d = 0; d < dlv.size(); ++d)
    if (hc.lv_raw(d) < -10.0 || hc.lv_raw(d) > 10.0) dlv(d) = 0.0;

  g.mu_W += dmu * hc.hp.transpose();
  g.mu_b.col(0) += dmu;
  g.lv_W += dlv * hc.hp.transpose();
  g.lv_b.col(0) += dlv;
  VectorXd dhp = p.mu_W.transpose() * dmu + p.lv_W.transpose() * dlv;
  VectorXd dhp_pre = (hc.hp.array() > 0.0).select(dhp, 0.0);
  g.fc_W += dhp_pre * hc.h_T.transpose();
  g.fc_b.col(0) += dhp_pre;

  // encoder BPTT
  VectorXd deh = p.fc_W.transpose() * dhp_pre;
  VectorXd dec_c = VectorXd::Zero(H);
  for (int t = static_cast<int>(enc.size()) - 1; t >= 0; --t) {
    VectorXd h_prev = (t == 0) ? VectorXd::Zero(H) : enc[t - 1].h;
    VectorXd c_prev = (t == 0) ? VectorXd::Zero(H) : enc[t - 1].c;
    StepGradOut so = lstm_step_backward(p.enc_Wx, p.enc_Wh, enc[t], h_prev, c_prev, deh, dec_c,
                                        g.enc_Wx, g.enc_Wh, g.enc_b, nullptr, nullptr);
    deh = std::move(so.dh_prev);
    dec_c = std::move(so.dc_prev);
  }
  return {recon, kl};
}

LossParts batch_pass(const VaeParams& p, const std::vector<std::vector<int>>& batch,
                     const std::vector<Eigen::VectorXd>& eps, double kl_weight,
                     bool teacher_forcing, VaeParams* grads) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (eps.size() != batch.size())
    throw std::invalid_argument("eps count does not match batch size");
  LossParts parts;
  for (size_t k = 0; k < batch.size(); ++k) {
    auto [recon, kl] = sequence_pass(p, batch[k], eps[k], kl_weight, teacher_forcing, grads);
    parts.recon += recon;
    parts.kl += kl;
  }
  const double n = static_cast<double>(batch.size());
  parts.recon /= n;
  parts.kl /= n;
  parts.total = parts.recon + kl_weight * parts.kl;
  if (grads) {
    for (auto& [name, t] : grads->tensors()) *t /= n;
  }
  return parts;
}

void init_tensor(MatrixXd& m, int rows, int cols, util::Rng& rng) {
  m.resize(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-0.08, 0.08);
}

}  // namespace

VaeParams VaeParams::init(const Dims& dims, uint64_t seed) {
  VaeParams p;
  p.dims = dims;
  p.seed = seed;
  util::Rng rng = util::Rng::derive(seed, "vae.init");
  const int D = dims.vocab, H = dims.hidden, L = dims.latent, F = dims.fc;
  init_tensor(p.enc_Wx, 4 * H, D, rng);
  init_tensor(p.enc_Wh, 4 * H, H, rng);
  init_tensor(p.enc_b, 4 * H, 1, rng);
  init_tensor(p.fc_W, F, H, rng);
  init_tensor(p.fc_b, F, 1, rng);
  init_tensor(p.mu_W, L, F, rng);
  init_tensor(p.mu_b, L, 1, rng);
  init_tensor(p.lv_W, L, F, rng);
  init_tensor(p.lv_b, L, 1, rng);
  init_tensor(p.zf_W, F, L, rng);
  init_tensor(p.zf_b, F, 1, rng);
  init_tensor(p.ih_W, H, F, rng);
  init_tensor(p.ih_b, H, 1, rng);
  init_tensor(p.ic_W, H, F, rng);
  init_tensor(p.ic_b, H, 1, rng);
  init_tensor(p.dec_Wx, 4 * H, dims.dec_input(), rng);
  init_tensor(p.dec_Wh, 4 * H, H, rng);
  init_tensor(p.dec_b, 4 * H, 1, rng);
  init_tensor(p.out_W, D, H, rng);
  init_tensor(p.out_b, D, 1, rng);
  p.quantize_f32();
  return p;
}

VaeParams VaeParams::zeros_like(const VaeParams& other) {
  VaeParams p;
  p.dims = other.dims;
  p.seed = other.seed;
  auto src = other.tensors();
  auto dst = p.tensors();
  for (size_t i = 0; i < src.size(); ++i)
    *dst[i].second = MatrixXd::Zero(src[i].second->rows(), src[i].second->cols());
  return p;
}

std::vector<std::pair<std::string, Eigen::MatrixXd*>> VaeParams::tensors() {
  return {
      {"enc.Wx", &enc_Wx}, {"enc.Wh", &enc_Wh}, {"enc.b", &enc_b},
      {"enc.fc.W", &fc_W}, {"enc.fc.b", &fc_b}, {"mu.W", &mu_W},
      {"mu.b", &mu_b},     {"logvar.W", &lv_W}, {"logvar.b", &lv_b},
      {"dec.zfc.W", &zf_W}, {"dec.zfc.b", &zf_b}, {"dec.h0.W", &ih_W},
      {"dec.h0.b", &ih_b}, {"dec.c0.W", &ic_W},  {"dec.c0.b", &ic_b},
      {"dec.Wx", &dec_Wx}, {"dec.Wh", &dec_Wh},  {"dec.b", &dec_b},
      {"out.W", &out_W},   {"out.b", &out_b},
  };
}

std::vector<std::pair<std::string, const Eigen::MatrixXd*>> VaeParams::tensors() const {
  auto mut = const_cast<VaeParams*>(this)->tensors();
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

void VaeParams::quantize_f32() {
  for (auto& [name, t] : tensors())
    *t = t->unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

std::vector<std::vector<int>> prepare_batch(const Vocabulary& vocab,
                                            const std::vector<std::string>& smiles, int max_len) {
  std::vector<std::vector<int>> rows;
  rows.reserve(smiles.size());
  size_t longest = 0;
  for (const std::string& s : smiles) {
    auto toks = vocab.tokenize(s);
    if (!toks) throw std::invalid_argument("cannot tokenize: " + s);
    toks->push_back(Vocabulary::kEos);
    if (static_cast<int>(toks->size()) > max_len)
      throw std::invalid_argument("sequence longer than max_len: " + s);
    longest = std::max(longest, toks->size());
    rows.push_back(std::move(*toks));
  }
  for (auto& r : rows) r.resize(longest, Vocabulary::kPad);
  return rows;
}

EncodeResult encode(const VaeParams& p, const std::vector<int>& tokens) {
  check_tokens(p, tokens);
  std::vector<StepCache> enc = run_encoder(p, tokens);
  HeadCache hc = run_heads(p, enc.back().h);
  return {hc.mu, hc.lv};
}

Eigen::VectorXd reparameterize(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar,
                               const Eigen::VectorXd& eps) {
  if (mu.size() != logvar.size() || mu.size() != eps.size())
    throw std::invalid_argument("reparameterize: length mismatch");
  return mu + ((logvar.array() / 2.0).exp() * eps.array()).matrix();
}

Eigen::MatrixXd decode_probs(const VaeParams& p, const Eigen::VectorXd& z,
                             const std::vector<int>& inputs) {
  check_tokens(p, inputs);
  if (z.size() != p.dims.latent) throw std::invalid_argument("decode_probs: z length mismatch");
  const VectorXd* z_feed = p.dims.feed_z ? &z : nullptr;
  InitCache ic = run_decoder_init(p, z);
  MatrixXd probs(static_cast<int>(inputs.size()), p.dims.vocab);
  VectorXd h = ic.h0, c = ic.c0;
  for (size_t t = 0; t < inputs.size(); ++t) {
    StepCache s = lstm_step(p.dec_Wx, p.dec_Wh, p.dec_b, inputs[t], z_feed, h, c);
    h = s.h;
    c = s.c;
    probs.row(static_cast<int>(t)) = softmax(p.out_W * h + p.out_b.col(0)).transpose();
  }
  return probs;
}

LossParts elbo_loss(const VaeParams& p, const std::vector<std::vector<int>>& batch,
                    const std::vector<Eigen::VectorXd>& eps, double kl_weight) {
  return batch_pass(p, batch, eps, kl_weight, /*teacher_forcing=*/true, nullptr);
}

LossParts elbo_loss_grad(const VaeParams& p, const std::vector<std::vector<int>>& batch,
                         const std::vector<Eigen::VectorXd>& eps, double kl_weight,
                         VaeParams& grads) {
  grads = VaeParams::zeros_like(p);
  return batch_pass(p, batch, eps, kl_weight, /*teacher_forcing=*/true, &grads);
}

TrainResult train(VaeParams params, const std::vector<std::string>& smiles,
                  const Vocabulary& vocab, const TrainConfig& cfg) {
  if (smiles.empty()) throw std::invalid_argument("train: empty dataset");
  if (params.dims.vocab != vocab.size())
    throw std::invalid_argument("train: params vocabulary size mismatch");

  // unpadded rows (tokens + EOS); batches pad locally
  std::vector<std::vector<int>> rows;
  rows.reserve(smiles.size());
  for (const std::string& s : smiles) {
    auto one = prepare_batch(vocab, {s}, cfg.max_len);
    rows.push_back(std::move(one.front()));
  }

  util::Rng rng = util::Rng::derive(cfg.seed, "vae.train");
  VaeParams vel = VaeParams::zeros_like(params);
  VaeParams grads = VaeParams::zeros_like(params);
  TrainResult result;

  const int warm = std::max(1, static_cast<int>(cfg.epochs * cfg.kl_warmup_frac));
  std::vector<size_t> order(rows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double kl_w = std::min(1.0, static_cast<double>(epoch) / warm);
    rng.shuffle(order);
    double sum_recon = 0, sum_kl = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::vector<int>> batch;
      std::vector<VectorXd> eps;
      size_t longest = 0;
      for (size_t k = start; k < end; ++k) longest = std::max(longest, rows[order[k]].size());
      for (size_t k = start; k < end; ++k) {
        std::vector<int> r = rows[order[k]];
        r.resize(longest, Vocabulary::kPad);
        batch.push_back(std::move(r));
        VectorXd e(params.dims.latent);
        for (int d = 0; d < e.size(); ++d) e(d) = rng.gaussian();
        eps.push_back(std::move(e));
      }
      for (auto& [name, t] : grads.tensors()) t->setZero();
      LossParts parts = batch_pass(params, batch, eps, kl_w, cfg.teacher_forcing, &grads);
      if (!std::isfinite(parts.total))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 " batch " + std::to_string(start / cfg.batch_size));
      const double bn = static_cast<double>(batch.size());
      sum_recon += parts.recon * bn;
      sum_kl += parts.kl * bn;

      auto ts = params.tensors();
      auto gs = grads.tensors();
      auto vs = vel.tensors();
      for (size_t i = 0; i < ts.size(); ++i) {
        *vs[i].second = cfg.momentum * (*vs[i].second) - cfg.lr * (*gs[i].second);
        *ts[i].second += *vs[i].second;
      }
    }
    EpochStats st;
    st.epoch = epoch;
    st.recon = sum_recon / static_cast<double>(rows.size());
    st.kl = sum_kl / static_cast<double>(rows.size());
    st.kl_weight = kl_w;
    st.total = st.recon + kl_w * st.kl;
    result.trace.push_back(st);
  }
  params.quantize_f32();
  result.params = std::move(params);
  return result;
}

TrainResult finetune(const VaeParams& general, const std::vector<std::string>& smiles,
                     const Vocabulary& vocab, const TrainConfig& cfg) {
  if (cfg.epochs == 0) return {general, {}};
  return train(general, smiles, vocab, cfg);
}

std::vector<std::string> sample(const VaeParams& p, const Vocabulary& vocab, size_t n,
                                uint64_t seed, int max_len) {
  if (p.dims.vocab != vocab.size())
    throw std::invalid_argument("sample: params vocabulary size mismatch");
  std::vector<std::string> out;
  out.reserve(n);
  for (size_t k = 0; k < n; ++k) {
    util::Rng rng = util::Rng::derive(seed, "vae.sample", k);
    VectorXd z(p.dims.latent);
    for (int d = 0; d < z.size(); ++d) z(d) = rng.gaussian();
    const VectorXd* z_feed = p.dims.feed_z ? &z : nullptr;
    InitCache ic = run_decoder_init(p, z);
    VectorXd h = ic.h0, c = ic.c0;
    std::vector<int> emitted;
    int input = Vocabulary::kBos;
    for (int t = 0; t < max_len; ++t) {
      StepCache s = lstm_step(p.dec_Wx, p.dec_Wh, p.dec_b, input, z_feed, h, c);
      h = s.h;
      c = s.c;
      VectorXd logits = p.out_W * h + p.out_b.col(0);
      logits(Vocabulary::kPad) = -1e30;  // sampled strings stay printable
      logits(Vocabulary::kBos) = -1e30;
      VectorXd probs = softmax(std::move(logits));
      double u = rng.uniform();
      double acc = 0;
      int pick = p.dims.vocab - 1;
      for (int d = 0; d < probs.size(); ++d) {
        acc += probs(d);
        if (u < acc) {
          pick = d;
          break;
        }
      }
      if (pick == Vocabulary::kEos) break;
      emitted.push_back(pick);
      input = pick;
    }
    out.push_back(vocab.detokenize(emitted));
  }
  return out;
}

namespace {

void put_u16(std::ofstream& f, uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); }
void put_u32(std::ofstream& f, uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ofstream& f, uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); }

uint16_t get_u16(std::ifstream& f) {
  uint16_t v = 0;
  if (!f.read(reinterpret_cast<char*>(&v), 2)) throw std::runtime_error("checkpoint truncated");
  return v;
}
uint32_t get_u32(std::ifstream& f) {
  uint32_t v = 0;
  if (!f.read(reinterpret_cast<char*>(&v), 4)) throw std::runtime_error("checkpoint truncated");
  return v;
}
uint64_t get_u64(std::ifstream& f) {
  uint64_t v = 0;
  if (!f.read(reinterpret_cast<char*>(&v), 8)) throw std::runtime_error("checkpoint truncated");
  return v;
}

constexpr uint16_t kVersion = 1;

}  // namespace

void save_checkpoint(const VaeParams& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f.write("MTGW", 4);
  put_u16(f, kVersion);
  put_u16(f, static_cast<uint16_t>(p.dims.vocab));
  put_u32(f, static_cast<uint32_t>(p.dims.hidden));
  put_u32(f, static_cast<uint32_t>(p.dims.latent));
  put_u32(f, static_cast<uint32_t>(p.dims.fc));
  f.put(p.dims.feed_z ? 1 : 0);
  put_u64(f, p.seed);
  auto ts = p.tensors();
  put_u32(f, static_cast<uint32_t>(ts.size()));
  for (auto& [name, t] : ts) {
    put_u32(f, static_cast<uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(f, static_cast<uint32_t>(t->rows()));
    put_u32(f, static_cast<uint32_t>(t->cols()));
    for (int r = 0; r < t->rows(); ++r)
      for (int c = 0; c < t->cols(); ++c) {
        float v = static_cast<float>((*t)(r, c));
        f.write(reinterpret_cast<const char*>(&v), 4);
      }
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

VaeParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4] = {};
  if (!f.read(magic, 4) || std::memcmp(magic, "MTGW", 4) != 0)
    throw std::runtime_error("not a checkpoint (bad magic): " + path);
  uint16_t version = get_u16(f);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  Dims dims;
  dims.vocab = get_u16(f);
  dims.hidden = static_cast<int>(get_u32(f));
  dims.latent = static_cast<int>(get_u32(f));
  dims.fc = static_cast<int>(get_u32(f));
  int fz = f.get();
  if (fz == EOF) throw std::runtime_error("checkpoint truncated");
  dims.feed_z = fz != 0;
  uint64_t seed = get_u64(f);
  uint32_t n_tensors = get_u32(f);

  VaeParams p;
  p.dims = dims;
  p.seed = seed;
  auto ts = p.tensors();
  if (n_tensors != ts.size())
    throw std::runtime_error("checkpoint tensor count mismatch: " + std::to_string(n_tensors));
  // expected shapes, derived from the header dims
  VaeParams shaped = VaeParams::zeros_like([&] {
    VaeParams tmp;
    tmp.dims = dims;
    const int D = dims.vocab, H = dims.hidden, L = dims.latent, F = dims.fc;
    tmp.enc_Wx.resize(4 * H, D);
    tmp.enc_Wh.resize(4 * H, H);
    tmp.enc_b.resize(4 * H, 1);
    tmp.fc_W.resize(F, H);
    tmp.fc_b.resize(F, 1);
    tmp.mu_W.resize(L, F);
    tmp.mu_b.resize(L, 1);
    tmp.lv_W.resize(L, F);
    tmp.lv_b.resize(L, 1);
    tmp.zf_W.resize(F, L);
    tmp.zf_b.resize(F, 1);
    tmp.ih_W.resize(H, F);
    tmp.ih_b.resize(H, 1);
    tmp.ic_W.resize(H, F);
    tmp.ic_b.resize(H, 1);
    tmp.dec_Wx.resize(4 * H, dims.dec_input());
    tmp.dec_Wh.resize(4 * H, H);
    tmp.dec_b.resize(4 * H, 1);
    tmp.out_W.resize(D, H);
    tmp.out_b.resize(D, 1);
    return tmp;
  }());
  auto expected = shaped.tensors();

  for (size_t i = 0; i < ts.size(); ++i) {
    uint32_t name_len = get_u32(f);
    if (name_len > 256) throw std::runtime_error("checkpoint tensor name too long");
    std::string name(name_len, '\0');
    if (!f.read(name.data(), name_len)) throw std::runtime_error("checkpoint truncated");
    if (name != ts[i].first)
      throw std::runtime_error("checkpoint tensor order mismatch: got " + name + ", want " +
                               ts[i].first);
    uint32_t rows = get_u32(f);
    uint32_t cols = get_u32(f);
    if (static_cast<int>(rows) != expected[i].second->rows() ||
        static_cast<int>(cols) != expected[i].second->cols())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    MatrixXd& m = *ts[i].second;
    m.resize(rows, cols);
    for (uint32_t r = 0; r < rows; ++r)
      for (uint32_t c = 0; c < cols; ++c) {
        float v = 0;
        if (!f.read(reinterpret_cast<char*>(&v), 4)) throw std::runtime_error("checkpoint truncated");
        m(static_cast<int>(r), static_cast<int>(c)) = static_cast<double>(v);
      }
  }
  if (f.peek() != EOF) throw std::runtime_error("trailing bytes in checkpoint: " + path);
  return p;
}

}  // namespace mtgen::vae
