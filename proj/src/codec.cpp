#include "presstok/codec.hpp"

#include <algorithm>
#include <cmath>

namespace presstok::codec {

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

std::vector<WindowedSegment> window(const PressureDynamics& dynamics, int frames_per_window) {
  if (frames_per_window < 1) throw std::runtime_error("frames_per_window must be >= 1");
  const int n = dynamics.frame_count();
  if (n == 0) throw std::runtime_error("empty dynamics");
  const int f = frames_per_window;
  const int count = (n + f - 1) / f;
  std::vector<WindowedSegment> out(static_cast<size_t>(count));
  for (int w = 0; w < count; ++w) {
    auto& seg = out[static_cast<size_t>(w)];
    seg.frames.setZero(f, dynamics.cells());
    const int start = w * f;
    const int take = std::min(f, n - start);
    seg.pad_count = f - take;
    for (int i = 0; i < take; ++i) seg.frames.row(i) = dynamics.frames.row(start + i);
  }
  return out;
}

PressureDynamics un_window(const std::vector<WindowedSegment>& segments, int rows, int cols,
                           float rate_hz) {
  if (segments.empty()) return make_dynamics(0, rows, cols, rate_hz);
  const int f = static_cast<int>(segments.front().frames.rows());
  const int total = f * static_cast<int>(segments.size()) - segments.back().pad_count;
  PressureDynamics d = make_dynamics(total, rows, cols, rate_hz);
  int at = 0;
  for (const auto& seg : segments) {
    const int take = f - (&seg == &segments.back() ? seg.pad_count : 0);
    for (int i = 0; i < take; ++i) d.frames.row(at++) = seg.frames.row(i);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Token sequences
// ---------------------------------------------------------------------------

int TokenSequence::content_count() const {
  int n = 0;
  for (const auto& item : items) {
    if (!is_end(item)) ++n;
  }
  return n;
}

bool TokenSequence::well_formed() const {
  int ends = 0;
  for (const auto& item : items) {
    if (is_end(item)) ++ends;
  }
  return ends == 1 && !items.empty() && is_end(items.back());
}

// ---------------------------------------------------------------------------
// Codebook and residual quantization
// ---------------------------------------------------------------------------

void Codebook::setup(int n_levels, int k, int m) {
  entries = k;
  dim = m;
  levels.assign(static_cast<size_t>(n_levels), MatrixXf::Zero(k, m));
  ema_counts.assign(static_cast<size_t>(n_levels), VectorXf::Ones(k));
  ema_sums.assign(static_cast<size_t>(n_levels), MatrixXf::Zero(k, m));
  epoch_hits.assign(static_cast<size_t>(n_levels), Eigen::VectorXi::Zero(k));
  initialized = false;
}

namespace {

// Double-precision nearest entry with lowest-index tie break.
int nearest_entry(const VectorXf& x, const MatrixXf& table) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < table.rows(); ++i) {
    double d = 0.0;
    for (int c = 0; c < table.cols(); ++c) {
      const double diff = static_cast<double>(x(c)) - table(i, c);
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

QuantizeResult quantize_residual(const VectorXf& latent, const Codebook& codebook) {
  QuantizeResult out;
  VectorXf r = latent;
  out.quantized_sum = VectorXf::Zero(latent.size());
  for (const auto& table : codebook.levels) {
    const int idx = nearest_entry(r, table);
    out.indices.push_back(idx);
    out.quantized_sum += table.row(idx).transpose();
    r -= table.row(idx).transpose();
  }
  out.final_residual = r;
  return out;
}

double rqvae_loss(const MatrixXf& p, const MatrixXf& p_hat,
                  const std::vector<MatrixXf>& residuals,
                  const std::vector<MatrixXf>& quantized, const std::vector<float>& betas) {
  if (p.rows() != p_hat.rows() || p.cols() != p_hat.cols()) {
    throw std::runtime_error("rqvae_loss: shape mismatch");
  }
  if (residuals.size() != quantized.size() || residuals.size() != betas.size()) {
    throw std::runtime_error("rqvae_loss: level count mismatch");
  }
  double recon = (p - p_hat).cwiseAbs().cast<double>().sum() /
                 static_cast<double>(p.size() > 0 ? p.size() : 1);
  double commit = 0.0;
  for (size_t v = 0; v < residuals.size(); ++v) {
    if (residuals[v].rows() != quantized[v].rows() ||
        residuals[v].cols() != quantized[v].cols()) {
      throw std::runtime_error("rqvae_loss: level shape mismatch");
    }
    const double rows = residuals[v].rows() > 0 ? static_cast<double>(residuals[v].rows()) : 1.0;
    commit += betas[v] * (residuals[v] - quantized[v]).cast<double>().squaredNorm() / rows;
  }
  return recon + commit;
}

// ---------------------------------------------------------------------------
// Grid resampler (fixed pool / upsample pair)
// ---------------------------------------------------------------------------

void GridResampler::setup(int r, int c) {
  rows = r;
  cols = c;
  coarse_rows = (r + 1) / 2;
  coarse_cols = (c + 1) / 2;
  up_idx.assign(static_cast<size_t>(r) * c, {0, 0, 0, 0});
  up_w.assign(static_cast<size_t>(r) * c, {0, 0, 0, 0});
  for (int i = 0; i < r; ++i) {
    double ci = coarse_rows == 1 ? 0.0 : static_cast<double>(i) * (coarse_rows - 1) / (r - 1);
    int i0 = static_cast<int>(ci);
    int i1 = std::min(i0 + 1, coarse_rows - 1);
    float fi = static_cast<float>(ci - i0);
    for (int j = 0; j < c; ++j) {
      double cj = coarse_cols == 1 ? 0.0 : static_cast<double>(j) * (coarse_cols - 1) / (c - 1);
      int j0 = static_cast<int>(cj);
      int j1 = std::min(j0 + 1, coarse_cols - 1);
      float fj = static_cast<float>(cj - j0);
      const size_t cell = static_cast<size_t>(i) * c + j;
      up_idx[cell] = {i0 * coarse_cols + j0, i0 * coarse_cols + j1, i1 * coarse_cols + j0,
                      i1 * coarse_cols + j1};
      up_w[cell] = {(1 - fi) * (1 - fj), (1 - fi) * fj, fi * (1 - fj), fi * fj};
    }
  }
}

MatrixXf GridResampler::pool(const MatrixXf& fine) const {
  const int t = static_cast<int>(fine.rows());
  MatrixXf out = MatrixXf::Zero(t, coarse_cells());
  for (int i = 0; i < coarse_rows; ++i) {
    const int r0 = 2 * i;
    const int rn = std::min(2, rows - r0);
    for (int j = 0; j < coarse_cols; ++j) {
      const int c0 = 2 * j;
      const int cn = std::min(2, cols - c0);
      const float inv = 1.0f / static_cast<float>(rn * cn);
      for (int a = 0; a < rn; ++a) {
        for (int b = 0; b < cn; ++b) {
          out.col(i * coarse_cols + j) += inv * fine.col((r0 + a) * cols + (c0 + b));
        }
      }
    }
  }
  return out;
}

MatrixXf GridResampler::up(const MatrixXf& coarse) const {
  const int t = static_cast<int>(coarse.rows());
  MatrixXf out(t, rows * cols);
  for (size_t cell = 0; cell < up_idx.size(); ++cell) {
    out.col(static_cast<Eigen::Index>(cell)) =
        up_w[cell][0] * coarse.col(up_idx[cell][0]) + up_w[cell][1] * coarse.col(up_idx[cell][1]) +
        up_w[cell][2] * coarse.col(up_idx[cell][2]) + up_w[cell][3] * coarse.col(up_idx[cell][3]);
  }
  (void)t;
  return out;
}

MatrixXf GridResampler::up_transpose(const MatrixXf& dfine) const {
  MatrixXf out = MatrixXf::Zero(dfine.rows(), coarse_cells());
  for (size_t cell = 0; cell < up_idx.size(); ++cell) {
    for (int k = 0; k < 4; ++k) {
      if (up_w[cell][k] != 0.0f) {
        out.col(up_idx[cell][k]) += up_w[cell][k] * dfine.col(static_cast<Eigen::Index>(cell));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoder / decoder nets
// ---------------------------------------------------------------------------

void CodecNet::init(const CodecConfig& c, Rng& rng) {
  cfg = c;
  group1 = 1;
  for (int d : {6, 5, 4, 3, 2}) {
    if (cfg.frames_per_window % d == 0) {
      group1 = d;
      break;
    }
  }
  group2 = cfg.frames_per_window / group1;
  GridResampler g;
  g.setup(cfg.rows, cfg.cols);
  const int coarse = g.coarse_cells();
  enc_frame.init("enc_frame", coarse, cfg.frame_dim, rng);
  enc_t1.init("enc_t1", group1 * cfg.frame_dim, cfg.temporal_dim, rng);
  enc_t2.init("enc_t2", group2 * cfg.temporal_dim, cfg.latent_dim, rng);
  dec_t2.init("dec_t2", cfg.latent_dim, group2 * cfg.temporal_dim, rng);
  dec_t1.init("dec_t1", cfg.temporal_dim, group1 * cfg.frame_dim, rng);
  dec_frame.init("dec_frame", cfg.frame_dim, coarse, rng);
}

std::vector<nn::Param*> CodecNet::params() {
  std::vector<nn::Param*> out;
  for (auto* lin : {&enc_frame, &enc_t1, &enc_t2, &dec_t2, &dec_t1, &dec_frame}) {
    out.push_back(&lin->W);
    out.push_back(&lin->b);
  }
  return out;
}

MatrixXf CodecNet::encode(const MatrixXf& pooled_windows, Cache* cache) const {
  Cache local;
  Cache& cc = cache ? *cache : local;
  cc.pooled = pooled_windows;
  cc.e1 = enc_frame.forward(pooled_windows);
  cc.e1g = nn::group_rows(nn::relu(cc.e1), group1);
  cc.e2 = enc_t1.forward(cc.e1g);
  cc.e2g = nn::group_rows(nn::relu(cc.e2), group2);
  cc.z = enc_t2.forward(cc.e2g);
  return cc.z;
}

MatrixXf CodecNet::decode(const MatrixXf& zq, Cache* cache) const {
  Cache local;
  Cache& cc = cache ? *cache : local;
  cc.zq = zq;
  cc.d3 = dec_t2.forward(zq);
  cc.d3u = nn::ungroup_rows(nn::relu(cc.d3), group2);
  cc.d2 = dec_t1.forward(cc.d3u);
  cc.d2u = nn::ungroup_rows(nn::relu(cc.d2), group1);
  cc.coarse_out = dec_frame.forward(cc.d2u);
  return cc.coarse_out;
}

MatrixXf CodecNet::decode_backward(const Cache& cache, const MatrixXf& d_coarse_out) {
  MatrixXf d_d2u = dec_frame.backward(cache.d2u, d_coarse_out);
  MatrixXf d_d2 = nn::relu_backward(cache.d2, nn::group_rows(d_d2u, group1));
  MatrixXf d_d3u = dec_t1.backward(cache.d3u, d_d2);
  MatrixXf d_d3 = nn::relu_backward(cache.d3, nn::group_rows(d_d3u, group2));
  return dec_t2.backward(cache.zq, d_d3);
}

void CodecNet::encode_backward(const Cache& cache, const MatrixXf& d_z) {
  MatrixXf d_e2g = enc_t2.backward(cache.e2g, d_z);
  MatrixXf d_e2 = nn::relu_backward(cache.e2, nn::ungroup_rows(d_e2g, group2));
  MatrixXf d_e1g = enc_t1.backward(cache.e1g, d_e2);
  MatrixXf d_e1 = nn::relu_backward(cache.e1, nn::ungroup_rows(d_e1g, group1));
  enc_frame.backward(cache.pooled, d_e1);
}

// ---------------------------------------------------------------------------
// PressureCodec
// ---------------------------------------------------------------------------

void PressureCodec::init(const CodecConfig& cfg, uint64_t seed) {
  cfg_ = cfg;
  Rng rng(seed ^ 0x51f15eedcafeull);
  net_.init(cfg, rng);
  grid_.setup(cfg.rows, cfg.cols);
  book_.setup(cfg.levels, cfg.codebook_size, cfg.latent_dim);
}

MatrixXf PressureCodec::latents_for_windows(const std::vector<WindowedSegment>& segs) const {
  const int b = static_cast<int>(segs.size());
  const int f = cfg_.frames_per_window;
  MatrixXf pooled(b * f, grid_.coarse_cells());
  for (int w = 0; w < b; ++w) {
    pooled.middleRows(w * f, f) = grid_.pool(segs[static_cast<size_t>(w)].frames);
  }
  return net_.encode(pooled, nullptr);
}

MatrixXf PressureCodec::encode_latents(const PressureDynamics& dynamics) const {
  if (dynamics.rows != cfg_.rows || dynamics.cols != cfg_.cols) {
    throw std::runtime_error("grid incompatible with codec");
  }
  return latents_for_windows(window(dynamics, cfg_.frames_per_window));
}

TokenSequence PressureCodec::encode(const PressureDynamics& dynamics) const {
  MatrixXf z = encode_latents(dynamics);
  TokenSequence seq;
  for (int w = 0; w < z.rows(); ++w) {
    QuantizeResult q = quantize_residual(z.row(w).transpose(), book_);
    seq.items.push_back(q.indices);
  }
  seq.append_end();
  return seq;
}

PressureDynamics PressureCodec::decode(const TokenSequence& tokens, int max_levels) const {
  if (!tokens.well_formed()) throw std::runtime_error("malformed token sequence");
  const int n = tokens.content_count();
  if (n == 0) return make_dynamics(0, cfg_.rows, cfg_.cols, cfg_.rate_hz);

  MatrixXf zq = MatrixXf::Zero(n, cfg_.latent_dim);
  int w = 0;
  for (const auto& item : tokens.items) {
    if (TokenSequence::is_end(item)) continue;
    for (size_t v = 0; v < item.size(); ++v) {
      if (max_levels >= 0 && static_cast<int>(v) >= max_levels) break;
      const int idx = item[v];
      if (idx == TokenSequence::kNoToken) continue;
      if (idx < 0 || idx >= book_.entries || static_cast<int>(v) >= cfg_.levels) {
        throw std::runtime_error("malformed token sequence");
      }
      zq.row(w) += book_.levels[v].row(idx);
    }
    ++w;
  }

  MatrixXf coarse = net_.decode(zq, nullptr);
  const int f = cfg_.frames_per_window;
  PressureDynamics out = make_dynamics(n * f, cfg_.rows, cfg_.cols, cfg_.rate_hz);
  for (int i = 0; i < n; ++i) {
    out.frames.middleRows(i * f, f) =
        grid_.up(coarse.middleRows(i * f, f)).cwiseMax(0.0f).cwiseMin(1.0f);
  }
  return out;
}

namespace {

struct WindowCache {
  std::vector<std::vector<uint8_t>> windows;  // F * cells bytes each
  int frames = 0;
  int cells = 0;

  void add(const PressureDynamics& d, int f) {
    for (const auto& seg : window(d, f)) {
      std::vector<uint8_t> w(static_cast<size_t>(f) * static_cast<size_t>(seg.frames.cols()));
      for (int r = 0; r < seg.frames.rows(); ++r) {
        for (int c = 0; c < seg.frames.cols(); ++c) {
          w[static_cast<size_t>(r) * seg.frames.cols() + c] = static_cast<uint8_t>(
              std::lround(std::clamp(seg.frames(r, c), 0.0f, 1.0f) * 255.0f));
        }
      }
      windows.push_back(std::move(w));
    }
    frames = f;
    cells = d.cells();
  }

  MatrixXf gather(const std::vector<int>& idx) const {
    MatrixXf out(static_cast<int>(idx.size()) * frames, cells);
    for (size_t k = 0; k < idx.size(); ++k) {
      const auto& w = windows[static_cast<size_t>(idx[k])];
      for (int r = 0; r < frames; ++r) {
        for (int c = 0; c < cells; ++c) {
          out(static_cast<int>(k) * frames + r, c) =
              static_cast<float>(w[static_cast<size_t>(r) * cells + c]) / 255.0f;
        }
      }
    }
    return out;
  }
};

}  // namespace

TrainStats PressureCodec::train(const std::vector<PressureDynamics>& train_set,
                                const std::vector<PressureDynamics>& val_set,
                                const nn::TrainSchedule& sched, uint64_t seed) {
  if (train_set.empty()) throw std::runtime_error("empty training corpus");
  Rng rng(seed);

  WindowCache train_cache, val_cache;
  for (const auto& d : train_set) train_cache.add(d, cfg_.frames_per_window);
  for (const auto& d : val_set) val_cache.add(d, cfg_.frames_per_window);

  nn::Adam opt(sched.learning_rate);
  opt.add_all(net_.params());

  const int n_windows = static_cast<int>(train_cache.windows.size());
  const int f = cfg_.frames_per_window;
  const float beta = cfg_.beta;
  TrainStats stats;

  std::vector<int> order(static_cast<size_t>(n_windows));
  for (int i = 0; i < n_windows; ++i) order[static_cast<size_t>(i)] = i;

  // Rolling per-level residual pool for dead-entry reseeding.
  std::vector<MatrixXf> reseed_pool(static_cast<size_t>(cfg_.levels));

  auto epoch_fn = [&](int epoch) -> double {
    rng.shuffle(order);
    for (auto& h : book_.epoch_hits) h.setZero();
    double train_loss = 0.0;
    int batches = 0;

    for (int start = 0; start < n_windows; start += sched.batch_size) {
      const int bsz = std::min(sched.batch_size, n_windows - start);
      std::vector<int> idx(order.begin() + start, order.begin() + start + bsz);
      MatrixXf target = train_cache.gather(idx);          // B*F x cells
      MatrixXf pooled(bsz * f, grid_.coarse_cells());
      for (int w = 0; w < bsz; ++w) {
        pooled.middleRows(w * f, f) = grid_.pool(target.middleRows(w * f, f));
      }

      CodecNet::Cache cache;
      MatrixXf z = net_.encode(pooled, &cache);

      if (!book_.initialized) {
        // Seed every level from the first batch's residual flow.
        MatrixXf r = z;
        for (int v = 0; v < cfg_.levels; ++v) {
          for (int i = 0; i < book_.entries; ++i) {
            const int pick = static_cast<int>(rng.uniform_int(r.rows()));
            book_.levels[static_cast<size_t>(v)].row(i) =
                r.row(pick) + 0.01f * r.row(pick).norm() *
                                  VectorXf::NullaryExpr(r.cols(), [&](Eigen::Index) {
                                    return rng.gaussian(1.0f);
                                  }).transpose();
          }
          book_.ema_counts[static_cast<size_t>(v)].setOnes();
          book_.ema_sums[static_cast<size_t>(v)] = book_.levels[static_cast<size_t>(v)];
          // advance the residual flow with the freshly seeded level
          for (int row = 0; row < r.rows(); ++row) {
            const int e = nearest_entry(r.row(row).transpose(),
                                        book_.levels[static_cast<size_t>(v)]);
            r.row(row) -= book_.levels[static_cast<size_t>(v)].row(e);
          }
        }
        book_.initialized = true;
      }

      // Quantization dropout: disable a uniformly chosen suffix of levels.
      int active = cfg_.levels;
      if (cfg_.dropout_q > 0.0f && rng.uniform() < cfg_.dropout_q) {
        active = cfg_.levels - static_cast<int>(rng.uniform_int(cfg_.levels));
      }

      // Residual quantization over the batch.
      std::vector<Eigen::VectorXi> assign(static_cast<size_t>(active));
      std::vector<MatrixXf> residuals_in(static_cast<size_t>(active));
      MatrixXf r = z;
      MatrixXf zq = MatrixXf::Zero(z.rows(), z.cols());
      for (int v = 0; v < active; ++v) {
        const MatrixXf& table = book_.levels[static_cast<size_t>(v)];
        residuals_in[static_cast<size_t>(v)] = r;
        // argmax of (r . e - |e|^2/2) == nearest entry
        MatrixXf score = r * table.transpose();
        VectorXf half_norm = 0.5f * table.rowwise().squaredNorm();
        Eigen::VectorXi& a = assign[static_cast<size_t>(v)];
        a.resize(r.rows());
        for (int row = 0; row < r.rows(); ++row) {
          int best = 0;
          float best_s = score(row, 0) - half_norm(0);
          for (int e = 1; e < table.rows(); ++e) {
            const float s = score(row, e) - half_norm(e);
            if (s > best_s) {
              best_s = s;
              best = e;
            }
          }
          a(row) = best;
          zq.row(row) += table.row(best);
          r.row(row) -= table.row(best);
          book_.epoch_hits[static_cast<size_t>(v)](best)++;
        }
      }

      MatrixXf coarse = net_.decode(zq, &cache);
      MatrixXf fine = grid_.up(coarse);

      const double numel = static_cast<double>(fine.size());
      MatrixXf diff = fine - target;
      double recon = diff.cwiseAbs().cast<double>().sum() / numel;
      double commit = 0.0;
      {
        // per-level commitment term |r_v - b_v|^2 == |r_{v+1}|^2
        MatrixXf acc = z;
        for (int v = 0; v < active; ++v) {
          const MatrixXf& table = book_.levels[static_cast<size_t>(v)];
          for (int row = 0; row < acc.rows(); ++row) {
            acc.row(row) -= table.row(assign[static_cast<size_t>(v)](row));
          }
          commit += beta * acc.cast<double>().squaredNorm() / acc.rows();
        }
      }
      const double loss = recon + commit;
      if (!std::isfinite(loss)) {
        throw std::runtime_error("codec training diverged (non-finite loss)");
      }
      train_loss += loss;
      ++batches;

      // Backward: L1 sign through the fixed upsample, straight-through into
      // the encoder, plus the commitment pull on z.
      MatrixXf d_fine = (diff.array() > 0).cast<float>() - (diff.array() < 0).cast<float>();
      d_fine /= static_cast<float>(numel);
      opt.zero_grad();
      MatrixXf dzq = net_.decode_backward(cache, grid_.up_transpose(d_fine));
      MatrixXf dz = dzq;
      {
        MatrixXf acc = z;
        for (int v = 0; v < active; ++v) {
          const MatrixXf& table = book_.levels[static_cast<size_t>(v)];
          for (int row = 0; row < acc.rows(); ++row) {
            acc.row(row) -= table.row(assign[static_cast<size_t>(v)](row));
          }
          dz += (2.0f * beta / static_cast<float>(z.rows())) * acc;
        }
      }
      net_.encode_backward(cache, dz);
      opt.step();

      // EMA codebook update on the levels that saw assignments.
      const float g = cfg_.ema_decay;
      for (int v = 0; v < active; ++v) {
        const Eigen::VectorXi& a = assign[static_cast<size_t>(v)];
        const MatrixXf& rin = residuals_in[static_cast<size_t>(v)];
        VectorXf counts = VectorXf::Zero(book_.entries);
        MatrixXf sums = MatrixXf::Zero(book_.entries, book_.dim);
        for (int row = 0; row < a.size(); ++row) {
          counts(a(row)) += 1.0f;
          sums.row(a(row)) += rin.row(row);
        }
        auto& ec = book_.ema_counts[static_cast<size_t>(v)];
        auto& es = book_.ema_sums[static_cast<size_t>(v)];
        ec = g * ec + (1.0f - g) * counts;
        es = g * es + (1.0f - g) * sums;
        const float total = ec.sum();
        const float delta = 1e-5f;
        for (int e = 0; e < book_.entries; ++e) {
          const float smoothed =
              (ec(e) + delta) / (total + book_.entries * delta) * total;
          book_.levels[static_cast<size_t>(v)].row(e) = es.row(e) / smoothed;
        }
        reseed_pool[static_cast<size_t>(v)] = rin;
      }
    }

    // Dead-entry reseeding: entries never hit this epoch restart from a
    // random residual of the last batch.
    for (int v = 0; v < cfg_.levels; ++v) {
      const MatrixXf& pool = reseed_pool[static_cast<size_t>(v)];
      if (pool.rows() == 0) continue;
      for (int e = 0; e < book_.entries; ++e) {
        if (book_.epoch_hits[static_cast<size_t>(v)](e) == 0) {
          const int pick = static_cast<int>(rng.uniform_int(pool.rows()));
          book_.levels[static_cast<size_t>(v)].row(e) = pool.row(pick);
          book_.ema_counts[static_cast<size_t>(v)](e) = 1.0f;
          book_.ema_sums[static_cast<size_t>(v)].row(e) = pool.row(pick);
        }
      }
    }

    stats.epoch_loss.push_back(train_loss / std::max(batches, 1));

    // Validation reconstruction L1 (all levels, no dropout).
    double val = stats.epoch_loss.back();
    if (!val_cache.windows.empty()) {
      double acc = 0.0;
      int vb = 0;
      for (int start = 0; start < static_cast<int>(val_cache.windows.size());
           start += sched.batch_size) {
        const int bsz =
            std::min<int>(sched.batch_size, static_cast<int>(val_cache.windows.size()) - start);
        std::vector<int> idx(static_cast<size_t>(bsz));
        for (int i = 0; i < bsz; ++i) idx[static_cast<size_t>(i)] = start + i;
        MatrixXf target = val_cache.gather(idx);
        MatrixXf pooled(bsz * f, grid_.coarse_cells());
        for (int w = 0; w < bsz; ++w) {
          pooled.middleRows(w * f, f) = grid_.pool(target.middleRows(w * f, f));
        }
        MatrixXf z = net_.encode(pooled, nullptr);
        MatrixXf zq = MatrixXf::Zero(z.rows(), z.cols());
        for (int row = 0; row < z.rows(); ++row) {
          zq.row(row) = quantize_residual(z.row(row).transpose(), book_).quantized_sum;
        }
        MatrixXf fine = grid_.up(net_.decode(zq, nullptr));
        acc += (fine - target).cwiseAbs().cast<double>().sum() / fine.size();
        ++vb;
      }
      val = acc / std::max(vb, 1);
    }
    stats.val_loss.push_back(val);
    if (sched.verbose) {
      std::printf("codec epoch %d train %.6f val %.6f\n", epoch, stats.epoch_loss.back(), val);
      std::fflush(stdout);
    }
    return val;
  };

  nn::run_training(sched, opt, epoch_fn);
  return stats;
}

void PressureCodec::save(const std::string& path, const std::string& config_hash,
                         uint64_t seed) const {
  io::Checkpoint ck;
  ck.magic = "PRQV";
  ck.set_meta("config_hash", config_hash);
  ck.set_meta("seed", std::to_string(seed));
  ck.set_meta("frames_per_window", std::to_string(cfg_.frames_per_window));
  ck.set_meta("codebook_size", std::to_string(cfg_.codebook_size));
  ck.set_meta("levels", std::to_string(cfg_.levels));
  ck.set_meta("latent_dim", std::to_string(cfg_.latent_dim));
  ck.set_meta("frame_dim", std::to_string(cfg_.frame_dim));
  ck.set_meta("temporal_dim", std::to_string(cfg_.temporal_dim));
  ck.set_meta("beta", std::to_string(cfg_.beta));
  ck.set_meta("dropout_q", std::to_string(cfg_.dropout_q));
  ck.set_meta("ema_decay", std::to_string(cfg_.ema_decay));
  ck.set_meta("rows", std::to_string(cfg_.rows));
  ck.set_meta("cols", std::to_string(cfg_.cols));
  ck.set_meta("rate_hz", std::to_string(cfg_.rate_hz));
  auto& self = const_cast<PressureCodec&>(*this);
  for (nn::Param* p : self.net_.params()) ck.tensors["net." + p->name] = p->w;
  for (int v = 0; v < cfg_.levels; ++v) {
    const std::string pre = "codebook." + std::to_string(v);
    ck.tensors[pre + ".entries"] = book_.levels[static_cast<size_t>(v)];
    ck.tensors[pre + ".ema_counts"] = book_.ema_counts[static_cast<size_t>(v)];
    ck.tensors[pre + ".ema_sums"] = book_.ema_sums[static_cast<size_t>(v)];
  }
  io::write_checkpoint(path, ck);
}

PressureCodec PressureCodec::load(const std::string& path) {
  io::Checkpoint ck = io::read_checkpoint(path, "PRQV");
  CodecConfig cfg;
  cfg.frames_per_window = static_cast<int>(ck.meta_int("frames_per_window"));
  cfg.codebook_size = static_cast<int>(ck.meta_int("codebook_size"));
  cfg.levels = static_cast<int>(ck.meta_int("levels"));
  cfg.latent_dim = static_cast<int>(ck.meta_int("latent_dim"));
  cfg.frame_dim = static_cast<int>(ck.meta_int("frame_dim"));
  cfg.temporal_dim = static_cast<int>(ck.meta_int("temporal_dim"));
  cfg.beta = static_cast<float>(ck.meta_double("beta"));
  cfg.dropout_q = static_cast<float>(ck.meta_double("dropout_q"));
  cfg.ema_decay = static_cast<float>(ck.meta_double("ema_decay"));
  cfg.rows = static_cast<int>(ck.meta_int("rows"));
  cfg.cols = static_cast<int>(ck.meta_int("cols"));
  cfg.rate_hz = static_cast<float>(ck.meta_double("rate_hz"));

  PressureCodec codec;
  codec.init(cfg, 0);
  for (nn::Param* p : codec.net_.params()) p->w = ck.require("net." + p->name);
  for (int v = 0; v < cfg.levels; ++v) {
    const std::string pre = "codebook." + std::to_string(v);
    codec.book_.levels[static_cast<size_t>(v)] = ck.require(pre + ".entries");
    codec.book_.ema_counts[static_cast<size_t>(v)] = ck.require(pre + ".ema_counts");
    codec.book_.ema_sums[static_cast<size_t>(v)] = ck.require(pre + ".ema_sums");
  }
  codec.book_.initialized = true;
  return codec;
}

evalkit::FeatureSet extract_features(const std::vector<PressureDynamics>& samples,
                                     const PressureCodec& codec, const std::string& tag) {
  if (samples.empty()) throw std::runtime_error("extract_features: no samples");
  evalkit::FeatureSet fs;
  fs.source = tag;
  fs.vectors.resize(static_cast<int>(samples.size()), codec.config().latent_dim);
  for (size_t i = 0; i < samples.size(); ++i) {
    MatrixXf z = codec.encode_latents(samples[i]);
    fs.vectors.row(static_cast<int>(i)) = z.colwise().mean();
  }
  return fs;
}

}  // namespace presstok::codec
