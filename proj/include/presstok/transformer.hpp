#pragma once

#include "presstok/nn.hpp"
#include "presstok/tensorio.hpp"

namespace presstok::nn {

// 1 = attend, 0 = blocked. Row i permits columns 0..i.
MatrixXf build_causal_mask(int length);

struct TransformerConfig {
  int vocab = 0;
  int dim = 96;
  int layers = 2;
  int heads = 4;
  int max_seq = 64;
};

// Decoder-only causal transformer with hand-written backprop. Input
// positions are token ids; an id of kExternalInput takes its content
// embedding from the caller instead of the token table (used for the
// text-condition prefix and for projected pressure embeddings).
class Transformer {
 public:
  static constexpr int kExternalInput = -1;

  void init(const TransformerConfig& cfg, Rng& rng);
  const TransformerConfig& config() const { return cfg_; }
  std::vector<Param*> params();

  struct LayerCache {
    MatrixXf x_in, ln1_out, q, k, v, att_concat, att_proj;
    std::vector<MatrixXf> att;  // per head, T x T softmax weights
    MatrixXf ln1_mean, ln1_rstd, ln2_mean, ln2_rstd;
    MatrixXf x_mid, ln2_out, mlp_h, mlp_out;
  };
  struct Cache {
    MatrixXf x0;
    std::vector<LayerCache> layers;
    MatrixXf lnf_out, lnf_mean, lnf_rstd;
  };

  // ext holds one row per kExternalInput position, in order.
  MatrixXf forward(const std::vector<int>& ids, const MatrixXf* ext, Cache* cache) const;

  // Accumulates parameter gradients when update_params is set; fills
  // d_ext (same layout as ext) when given. Needs the forward cache.
  void backward(const std::vector<int>& ids, const MatrixXf* ext, const Cache& cache,
                const MatrixXf& dlogits, bool update_params, MatrixXf* d_ext);

  void save(io::Checkpoint& ck, const std::string& prefix) const;
  void load(const io::Checkpoint& ck, const std::string& prefix);

  uint64_t weight_hash() const;

 private:
  struct Layer {
    Param ln1_g, ln1_b, ln2_g, ln2_b;
    Linear wq, wk, wv, wo, w1, w2;
  };

  MatrixXf layer_norm(const MatrixXf& x, const Param& g, const Param& b,
                      MatrixXf* mean, MatrixXf* rstd) const;
  MatrixXf layer_norm_backward(const MatrixXf& x, const Param& g, Param& g_mut, Param& b_mut,
                               const MatrixXf& mean, const MatrixXf& rstd,
                               const MatrixXf& dy, bool update_params);

  TransformerConfig cfg_;
  Param tok_emb_, pos_emb_;
  std::vector<Layer> layers_;
  Param lnf_g_, lnf_b_;
  Linear head_;
};

// Sampling policies over one logits row.
int sample_greedy(const Eigen::RowVectorXf& logits);
int sample_top_k(const Eigen::RowVectorXf& logits, int k, Rng& rng);
int sample_temperature(const Eigen::RowVectorXf& logits, float temp, Rng& rng);

}  // namespace presstok::nn
