#include "presstok/transformer.hpp"

#include <cmath>
#include <limits>

namespace presstok::nn {

MatrixXf build_causal_mask(int length) {
  if (length < 1) throw std::runtime_error("mask length must be >= 1");
  MatrixXf m = MatrixXf::Zero(length, length);
  for (int i = 0; i < length; ++i) {
    for (int j = 0; j <= i; ++j) m(i, j) = 1.0f;
  }
  return m;
}

void Transformer::init(const TransformerConfig& cfg, Rng& rng) {
  cfg_ = cfg;
  if (cfg_.dim % cfg_.heads != 0) throw std::runtime_error("dim must be divisible by heads");
  const float std_base = 0.02f;
  const float std_resid = std_base / std::sqrt(2.0f * cfg_.layers);
  tok_emb_.init("tok_emb", cfg_.vocab, cfg_.dim, rng, std_base);
  pos_emb_.init("pos_emb", cfg_.max_seq, cfg_.dim, rng, 0.01f);
  layers_.resize(static_cast<size_t>(cfg_.layers));
  for (int l = 0; l < cfg_.layers; ++l) {
    auto& L = layers_[static_cast<size_t>(l)];
    const std::string p = "layer" + std::to_string(l) + ".";
    auto ones = [&](Param& prm, const std::string& n) {
      prm.init_zero(n, 1, cfg_.dim);
      prm.w.setOnes();
    };
    ones(L.ln1_g, p + "ln1_g");
    L.ln1_b.init_zero(p + "ln1_b", 1, cfg_.dim);
    ones(L.ln2_g, p + "ln2_g");
    L.ln2_b.init_zero(p + "ln2_b", 1, cfg_.dim);
    L.wq.init(p + "wq", cfg_.dim, cfg_.dim, rng, std_base);
    L.wk.init(p + "wk", cfg_.dim, cfg_.dim, rng, std_base);
    L.wv.init(p + "wv", cfg_.dim, cfg_.dim, rng, std_base);
    L.wo.init(p + "wo", cfg_.dim, cfg_.dim, rng, std_resid);
    L.w1.init(p + "w1", cfg_.dim, 4 * cfg_.dim, rng, std_base);
    L.w2.init(p + "w2", 4 * cfg_.dim, cfg_.dim, rng, std_resid);
  }
  lnf_g_.init_zero("lnf_g", 1, cfg_.dim);
  lnf_g_.w.setOnes();
  lnf_b_.init_zero("lnf_b", 1, cfg_.dim);
  head_.init("head", cfg_.dim, cfg_.vocab, rng, std_base);
}

std::vector<Param*> Transformer::params() {
  std::vector<Param*> out = {&tok_emb_, &pos_emb_, &lnf_g_, &lnf_b_, &head_.W, &head_.b};
  for (auto& L : layers_) {
    for (Param* p : {&L.ln1_g, &L.ln1_b, &L.ln2_g, &L.ln2_b}) out.push_back(p);
    for (auto* lin : {&L.wq, &L.wk, &L.wv, &L.wo, &L.w1, &L.w2}) {
      out.push_back(&lin->W);
      out.push_back(&lin->b);
    }
  }
  return out;
}

MatrixXf Transformer::layer_norm(const MatrixXf& x, const Param& g, const Param& b,
                                 MatrixXf* mean, MatrixXf* rstd) const {
  const float eps = 1e-5f;
  const int T = static_cast<int>(x.rows());
  mean->resize(T, 1);
  rstd->resize(T, 1);
  MatrixXf out(T, x.cols());
  for (int r = 0; r < T; ++r) {
    const float mu = x.row(r).mean();
    const float var = (x.row(r).array() - mu).square().mean();
    const float rs = 1.0f / std::sqrt(var + eps);
    (*mean)(r, 0) = mu;
    (*rstd)(r, 0) = rs;
    out.row(r) = ((x.row(r).array() - mu) * rs) * g.w.row(0).array() + b.w.row(0).array();
  }
  return out;
}

MatrixXf Transformer::layer_norm_backward(const MatrixXf& x, const Param& g, Param& g_mut,
                                          Param& b_mut, const MatrixXf& mean,
                                          const MatrixXf& rstd, const MatrixXf& dy,
                                          bool update_params) {
  const int T = static_cast<int>(x.rows());
  const int D = static_cast<int>(x.cols());
  MatrixXf dx(T, D);
  for (int r = 0; r < T; ++r) {
    Eigen::ArrayXf xhat = (x.row(r).array() - mean(r, 0)) * rstd(r, 0);
    Eigen::ArrayXf dxhat = dy.row(r).array() * g.w.row(0).array();
    if (update_params) {
      g_mut.g.row(0).array() += dy.row(r).array() * xhat.transpose();
      b_mut.g.row(0).array() += dy.row(r).array();
    }
    const float m1 = dxhat.mean();
    const float m2 = (dxhat * xhat.transpose()).mean();
    dx.row(r) = (rstd(r, 0) * (dxhat - m1 - xhat.transpose() * m2)).transpose();
  }
  return dx;
}

MatrixXf Transformer::forward(const std::vector<int>& ids, const MatrixXf* ext,
                              Cache* cache) const {
  const int T = static_cast<int>(ids.size());
  if (T < 1) throw std::runtime_error("empty sequence");
  if (T > cfg_.max_seq) throw std::runtime_error("sequence longer than max_seq");
  const int D = cfg_.dim;
  const int H = cfg_.heads;
  const int hd = D / H;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

  MatrixXf x(T, D);
  int ext_row = 0;
  for (int t = 0; t < T; ++t) {
    if (ids[static_cast<size_t>(t)] == kExternalInput) {
      if (!ext || ext_row >= ext->rows()) throw std::runtime_error("missing external embedding");
      x.row(t) = ext->row(ext_row++);
    } else {
      x.row(t) = tok_emb_.w.row(ids[static_cast<size_t>(t)]);
    }
    x.row(t) += pos_emb_.w.row(t);
  }
  if (cache) {
    cache->x0 = x;
    cache->layers.assign(layers_.size(), LayerCache{});
  }

  Cache local;
  Cache* cc = cache ? cache : &local;
  if (!cache) cc->layers.assign(layers_.size(), LayerCache{});

  for (size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    auto& lc = cc->layers[l];
    lc.x_in = x;
    lc.ln1_out = layer_norm(x, L.ln1_g, L.ln1_b, &lc.ln1_mean, &lc.ln1_rstd);
    lc.q = L.wq.forward(lc.ln1_out);
    lc.k = L.wk.forward(lc.ln1_out);
    lc.v = L.wv.forward(lc.ln1_out);
    lc.att.assign(static_cast<size_t>(H), MatrixXf());
    lc.att_concat.resize(T, D);
    for (int h = 0; h < H; ++h) {
      auto qh = lc.q.middleCols(h * hd, hd);
      auto kh = lc.k.middleCols(h * hd, hd);
      auto vh = lc.v.middleCols(h * hd, hd);
      MatrixXf scores = qh * kh.transpose() * scale;
      // causal mask: position i attends to j <= i only
      MatrixXf att(T, T);
      for (int i = 0; i < T; ++i) {
        float mx = -std::numeric_limits<float>::infinity();
        for (int j = 0; j <= i; ++j) mx = std::max(mx, scores(i, j));
        double z = 0.0;
        for (int j = 0; j <= i; ++j) z += std::exp(static_cast<double>(scores(i, j) - mx));
        for (int j = 0; j < T; ++j) {
          att(i, j) = j <= i
                          ? static_cast<float>(std::exp(static_cast<double>(scores(i, j) - mx)) / z)
                          : 0.0f;
        }
      }
      lc.att[static_cast<size_t>(h)] = att;
      lc.att_concat.middleCols(h * hd, hd) = att * vh;
    }
    lc.att_proj = L.wo.forward(lc.att_concat);
    lc.x_mid = x + lc.att_proj;
    lc.ln2_out = layer_norm(lc.x_mid, L.ln2_g, L.ln2_b, &lc.ln2_mean, &lc.ln2_rstd);
    lc.mlp_h = L.w1.forward(lc.ln2_out);
    lc.mlp_out = L.w2.forward(relu(lc.mlp_h));
    x = lc.x_mid + lc.mlp_out;
  }

  cc->lnf_out = layer_norm(x, lnf_g_, lnf_b_, &cc->lnf_mean, &cc->lnf_rstd);
  return head_.forward(cc->lnf_out);
}

void Transformer::backward(const std::vector<int>& ids, const MatrixXf* ext, const Cache& cache,
                           const MatrixXf& dlogits, bool update_params, MatrixXf* d_ext) {
  const int T = static_cast<int>(ids.size());
  const int D = cfg_.dim;
  const int H = cfg_.heads;
  const int hd = D / H;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

  // head + final layer norm
  MatrixXf d_lnf_out;
  if (update_params) {
    d_lnf_out = head_.backward(cache.lnf_out, dlogits);
  } else {
    d_lnf_out = dlogits * head_.W.w;
  }
  // reconstruct the final-layer output x from lnf stats input cache
  // (the input of the final LN is the last layer's x_mid + mlp_out)
  MatrixXf x_final = cache.layers.empty()
                         ? cache.x0
                         : cache.layers.back().x_mid + cache.layers.back().mlp_out;
  MatrixXf dx = layer_norm_backward(x_final, lnf_g_, lnf_g_, lnf_b_, cache.lnf_mean,
                                    cache.lnf_rstd, d_lnf_out, update_params);

  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    auto& L = layers_[static_cast<size_t>(l)];
    const auto& lc = cache.layers[static_cast<size_t>(l)];

    // MLP branch
    MatrixXf d_mlp_out = dx;  // residual add
    MatrixXf relu_h = relu(lc.mlp_h);
    MatrixXf d_relu_h;
    if (update_params) {
      d_relu_h = L.w2.backward(relu_h, d_mlp_out);
    } else {
      d_relu_h = d_mlp_out * L.w2.W.w;
    }
    MatrixXf d_mlp_hidden = relu_backward(lc.mlp_h, d_relu_h);
    MatrixXf d_ln2_out;
    if (update_params) {
      d_ln2_out = L.w1.backward(lc.ln2_out, d_mlp_hidden);
    } else {
      d_ln2_out = d_mlp_hidden * L.w1.W.w;
    }
    MatrixXf d_x_mid =
        dx + layer_norm_backward(lc.x_mid, L.ln2_g, L.ln2_g, L.ln2_b, lc.ln2_mean, lc.ln2_rstd,
                                 d_ln2_out, update_params);

    // attention branch
    MatrixXf d_att_concat;
    if (update_params) {
      d_att_concat = L.wo.backward(lc.att_concat, d_x_mid);
    } else {
      d_att_concat = d_x_mid * L.wo.W.w;
    }
    MatrixXf dq = MatrixXf::Zero(T, D), dk = MatrixXf::Zero(T, D), dv = MatrixXf::Zero(T, D);
    for (int h = 0; h < H; ++h) {
      auto qh = lc.q.middleCols(h * hd, hd);
      auto kh = lc.k.middleCols(h * hd, hd);
      auto vh = lc.v.middleCols(h * hd, hd);
      const MatrixXf& att = lc.att[static_cast<size_t>(h)];
      MatrixXf d_oh = d_att_concat.middleCols(h * hd, hd);
      MatrixXf d_att = d_oh * vh.transpose();
      dv.middleCols(h * hd, hd) = att.transpose() * d_oh;
      // softmax backward per row; masked cells have att == 0
      MatrixXf d_scores(T, T);
      for (int i = 0; i < T; ++i) {
        const float dot = att.row(i).dot(d_att.row(i));
        d_scores.row(i) = att.row(i).cwiseProduct(d_att.row(i).array().matrix()) -
                          att.row(i) * dot;
      }
      dq.middleCols(h * hd, hd) = d_scores * kh * scale;
      dk.middleCols(h * hd, hd) = d_scores.transpose() * qh * scale;
    }
    MatrixXf d_ln1_out;
    if (update_params) {
      d_ln1_out = L.wq.backward(lc.ln1_out, dq) + L.wk.backward(lc.ln1_out, dk) +
                  L.wv.backward(lc.ln1_out, dv);
    } else {
      d_ln1_out = dq * L.wq.W.w + dk * L.wk.W.w + dv * L.wv.W.w;
    }
    dx = d_x_mid + layer_norm_backward(lc.x_in, L.ln1_g, L.ln1_g, L.ln1_b, lc.ln1_mean,
                                       lc.ln1_rstd, d_ln1_out, update_params);
  }

  // embeddings
  int ext_row = 0;
  for (int t = 0; t < T; ++t) {
    if (ids[static_cast<size_t>(t)] == kExternalInput) {
      if (d_ext) d_ext->row(ext_row) = dx.row(t);
      ++ext_row;
    } else if (update_params) {
      tok_emb_.g.row(ids[static_cast<size_t>(t)]) += dx.row(t);
    }
    if (update_params) pos_emb_.g.row(t) += dx.row(t);
  }
  (void)ext;
}

void Transformer::save(io::Checkpoint& ck, const std::string& prefix) const {
  ck.set_meta(prefix + "vocab", std::to_string(cfg_.vocab));
  ck.set_meta(prefix + "dim", std::to_string(cfg_.dim));
  ck.set_meta(prefix + "layers", std::to_string(cfg_.layers));
  ck.set_meta(prefix + "heads", std::to_string(cfg_.heads));
  ck.set_meta(prefix + "max_seq", std::to_string(cfg_.max_seq));
  auto self = const_cast<Transformer*>(this);
  for (Param* p : self->params()) ck.tensors[prefix + p->name] = p->w;
}

void Transformer::load(const io::Checkpoint& ck, const std::string& prefix) {
  TransformerConfig cfg;
  cfg.vocab = static_cast<int>(ck.meta_int(prefix + "vocab"));
  cfg.dim = static_cast<int>(ck.meta_int(prefix + "dim"));
  cfg.layers = static_cast<int>(ck.meta_int(prefix + "layers"));
  cfg.heads = static_cast<int>(ck.meta_int(prefix + "heads"));
  cfg.max_seq = static_cast<int>(ck.meta_int(prefix + "max_seq"));
  Rng rng(0);
  init(cfg, rng);
  for (Param* p : params()) p->w = ck.require(prefix + p->name);
}

uint64_t Transformer::weight_hash() const {
  auto self = const_cast<Transformer*>(this);
  uint64_t h = 0xcbf29ce484222325ull;
  for (Param* p : self->params()) {
    for (Eigen::Index r = 0; r < p->w.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->w.cols(); ++c) {
        float v = p->w(r, c);
        h = fnv1a(&v, sizeof(v), h);
      }
    }
  }
  return h;
}

int sample_greedy(const Eigen::RowVectorXf& logits) {
  int best = 0;
  for (int i = 1; i < logits.size(); ++i) {
    if (logits(i) > logits(best)) best = i;
  }
  return best;
}

int sample_top_k(const Eigen::RowVectorXf& logits, int k, Rng& rng) {
  const int n = static_cast<int>(logits.size());
  k = std::min(k, n);
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                    [&](int a, int b) { return logits(a) > logits(b); });
  VectorXf sub(k);
  for (int i = 0; i < k; ++i) sub(i) = logits(idx[static_cast<size_t>(i)]);
  const float mx = sub.maxCoeff();
  double z = 0.0;
  for (int i = 0; i < k; ++i) z += std::exp(static_cast<double>(sub(i) - mx));
  double u = rng.uniform() * z;
  double acc = 0.0;
  for (int i = 0; i < k; ++i) {
    acc += std::exp(static_cast<double>(sub(i) - mx));
    if (u <= acc) return idx[static_cast<size_t>(i)];
  }
  return idx[static_cast<size_t>(k - 1)];
}

int sample_temperature(const Eigen::RowVectorXf& logits, float temp, Rng& rng) {
  if (temp <= 0.0f) return sample_greedy(logits);
  Eigen::RowVectorXf scaled = logits / temp;
  const float mx = scaled.maxCoeff();
  double z = 0.0;
  for (int i = 0; i < scaled.size(); ++i) z += std::exp(static_cast<double>(scaled(i) - mx));
  double u = rng.uniform() * z;
  double acc = 0.0;
  for (int i = 0; i < scaled.size(); ++i) {
    acc += std::exp(static_cast<double>(scaled(i) - mx));
    if (u <= acc) return i;
  }
  return static_cast<int>(scaled.size()) - 1;
}

}  // namespace presstok::nn
