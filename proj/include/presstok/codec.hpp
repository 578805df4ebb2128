#pragma once

#include "presstok/corpus.hpp"
#include "presstok/metrics.hpp"
#include "presstok/nn.hpp"
#include "presstok/tensorio.hpp"

namespace presstok::codec {

struct CodecConfig {
  int frames_per_window = 60;  // F: frames per token window
  int codebook_size = 1024;    // K: entries per level
  int levels = 4;              // V+1 quantization levels
  int latent_dim = 64;         // m
  int frame_dim = 48;          // per-frame code width
  int temporal_dim = 96;       // mid temporal code width
  float beta = 0.25f;          // commitment weight, shared across levels
  float dropout_q = 0.2f;      // quantization-dropout probability
  float ema_decay = 0.99f;
  int rows = 80;
  int cols = 28;
  float rate_hz = 30.0f;
};

struct WindowedSegment {
  MatrixXf frames;  // F x (rows*cols)
  int pad_count = 0;
};

// Splits into ceil(N/F) segments, zero-padding the last one.
std::vector<WindowedSegment> window(const PressureDynamics& dynamics, int frames_per_window);
// Concatenates segments and trims the final segment's padding.
PressureDynamics un_window(const std::vector<WindowedSegment>& segments, int rows, int cols,
                           float rate_hz);

// Discrete token sequence: one multi-level index tuple per content window
// plus a single trailing end marker.
struct TokenSequence {
  static constexpr int kEnd = -2;      // level-0 value of the end marker item
  static constexpr int kNoToken = -1;  // level carries no contribution

  std::vector<std::vector<int>> items;

  static std::vector<int> end_marker() { return {kEnd}; }
  static bool is_end(const std::vector<int>& item) {
    return item.size() == 1 && item[0] == kEnd;
  }

  int content_count() const;
  // Exactly one end marker, in final position.
  bool well_formed() const;
  void append_end() { items.push_back(end_marker()); }
};

struct Codebook {
  int entries = 0;  // K
  int dim = 0;      // m
  std::vector<MatrixXf> levels;      // per level: K x m
  std::vector<VectorXf> ema_counts;  // per level: K
  std::vector<MatrixXf> ema_sums;    // per level: K x m
  std::vector<Eigen::VectorXi> epoch_hits;
  bool initialized = false;

  void setup(int n_levels, int k, int m);
};

struct QuantizeResult {
  std::vector<int> indices;  // one per level
  VectorXf quantized_sum;
  VectorXf final_residual;
};

// Nearest-neighbor residual quantization across all levels; ties go to the
// lowest index. The telescoping identity latent == quantized_sum +
// final_residual holds exactly.
QuantizeResult quantize_residual(const VectorXf& latent, const Codebook& codebook);

// Eq-style training loss: |p - p_hat|_1 (mean over cells) plus
// sum_v beta_v * |r_v - sg[b_v]|_2^2 (mean over batch rows).
double rqvae_loss(const MatrixXf& p, const MatrixXf& p_hat,
                  const std::vector<MatrixXf>& residuals,
                  const std::vector<MatrixXf>& quantized, const std::vector<float>& betas);

// Fixed 2x2 mean pool / align-corners bilinear upsample between the full
// grid and the encoder's coarse grid.
struct GridResampler {
  int rows = 0, cols = 0, coarse_rows = 0, coarse_cols = 0;
  // per fine cell: 4 coarse neighbors and weights (upsampling)
  std::vector<std::array<int, 4>> up_idx;
  std::vector<std::array<float, 4>> up_w;

  void setup(int rows, int cols);
  int coarse_cells() const { return coarse_rows * coarse_cols; }
  // (T x fine) -> (T x coarse), block means
  MatrixXf pool(const MatrixXf& fine) const;
  // (T x coarse) -> (T x fine), bilinear
  MatrixXf up(const MatrixXf& coarse) const;
  // transpose of up, for gradients
  MatrixXf up_transpose(const MatrixXf& dfine) const;
};

// Strided encoder / decoder stacks. Windows enter as pooled frames
// flattened to (B*F x coarse_cells) and leave as one latent per window.
struct CodecNet {
  CodecConfig cfg;
  int group1 = 6, group2 = 10;  // F = group1 * group2
  nn::Linear enc_frame, enc_t1, enc_t2;
  nn::Linear dec_t2, dec_t1, dec_frame;

  void init(const CodecConfig& cfg, Rng& rng);
  std::vector<nn::Param*> params();

  struct Cache {
    MatrixXf pooled;   // B*F x coarse
    MatrixXf e1, e1g, e2, e2g;  // encoder intermediates
    MatrixXf z;        // B x m
    MatrixXf zq;       // decoder input
    MatrixXf d3, d3u, d2, d2u;  // decoder intermediates
    MatrixXf coarse_out;  // B*F x coarse
  };

  MatrixXf encode(const MatrixXf& pooled_windows, Cache* cache) const;
  MatrixXf decode(const MatrixXf& zq, Cache* cache) const;
  // d_coarse_out -> gradient at zq (and parameter grads)
  MatrixXf decode_backward(const Cache& cache, const MatrixXf& d_coarse_out);
  // d_z -> parameter grads (input gradient unused)
  void encode_backward(const Cache& cache, const MatrixXf& d_z);
};

struct TrainStats {
  std::vector<double> epoch_loss;   // training objective per epoch
  std::vector<double> val_loss;     // validation L1 per epoch
};

class PressureCodec {
 public:
  void init(const CodecConfig& cfg, uint64_t seed);

  const CodecConfig& config() const { return cfg_; }
  const Codebook& codebook() const { return book_; }
  Codebook& mutable_codebook() { return book_; }
  CodecNet& net() { return net_; }
  const GridResampler& resampler() const { return grid_; }

  // Tokenize: per window one multi-level token, then the end marker.
  TokenSequence encode(const PressureDynamics& dynamics) const;
  // Pre-quantization encoder latents, one row per window.
  MatrixXf encode_latents(const PressureDynamics& dynamics) const;
  // Decode content windows (missing levels contribute zero), clamp [0,1].
  // max_levels < 0 means all levels.
  PressureDynamics decode(const TokenSequence& tokens, int max_levels = -1) const;

  // EMA-trained on the given samples; deterministic for a fixed seed.
  TrainStats train(const std::vector<PressureDynamics>& train_set,
                   const std::vector<PressureDynamics>& val_set,
                   const nn::TrainSchedule& sched, uint64_t seed);

  void save(const std::string& path, const std::string& config_hash, uint64_t seed) const;
  static PressureCodec load(const std::string& path);

 private:
  MatrixXf latents_for_windows(const std::vector<WindowedSegment>& segs) const;

  CodecConfig cfg_;
  CodecNet net_;
  Codebook book_;
  GridResampler grid_;
};

// FID features: encoder latents averaged over windows, one row per sample.
evalkit::FeatureSet extract_features(const std::vector<PressureDynamics>& samples,
                                     const PressureCodec& codec, const std::string& tag);

}  // namespace presstok::codec
