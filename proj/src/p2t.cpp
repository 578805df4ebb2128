#include "presstok/p2t.hpp"

#include <algorithm>
#include <cmath>

namespace presstok::p2t {

void ProjectionHead::init(int codec_dim, int lm_dim, const ProjectionConfig& cfg, Rng& rng) {
  cfg_ = cfg;
  codec_dim_ = codec_dim;
  lm_dim_ = lm_dim;
  l1_.init("proj.l1", codec_dim, cfg.hidden, rng);
  l2_.init("proj.l2", cfg.hidden, lm_dim, rng);
  z_begin_.init("proj.z_begin", 1, lm_dim, rng, 0.02f);
  z_end_.init("proj.z_end", 1, lm_dim, rng, 0.02f);
}

std::vector<nn::Param*> ProjectionHead::params() {
  return {&l1_.W, &l1_.b, &l2_.W, &l2_.b, &z_begin_, &z_end_};
}

MatrixXf ProjectionHead::project(const MatrixXf& zq_rows) const {
  if (zq_rows.rows() == 0) return MatrixXf(0, lm_dim_);
  return l2_.forward(nn::relu(l1_.forward(zq_rows)));
}

MatrixXf ProjectionHead::aligned(const MatrixXf& zq_rows) const {
  MatrixXf proj = project(zq_rows);
  MatrixXf out(proj.rows() + 2, lm_dim_);
  out.row(0) = z_begin_.w.row(0);
  if (proj.rows() > 0) out.middleRows(1, proj.rows()) = proj;
  out.row(out.rows() - 1) = z_end_.w.row(0);
  return out;
}

void ProjectionHead::aligned_backward(const MatrixXf& zq_rows, const MatrixXf& d_aligned) {
  z_begin_.g.row(0) += d_aligned.row(0);
  z_end_.g.row(0) += d_aligned.row(d_aligned.rows() - 1);
  const int n = static_cast<int>(zq_rows.rows());
  if (n == 0) return;
  MatrixXf d_proj = d_aligned.middleRows(1, n);
  MatrixXf h = l1_.forward(zq_rows);
  MatrixXf d_hr = l2_.backward(nn::relu(h), d_proj);
  MatrixXf d_h = nn::relu_backward(h, d_hr);
  l1_.backward(zq_rows, d_h);
}

MatrixXf project_tokens(const codec::TokenSequence& tokens, const codec::PressureCodec& codec,
                        const ProjectionHead& head) {
  if (!tokens.well_formed()) throw std::runtime_error("malformed token sequence");
  const int m = codec.config().latent_dim;
  MatrixXf zq(tokens.content_count(), m);
  int row = 0;
  for (const auto& item : tokens.items) {
    if (codec::TokenSequence::is_end(item)) continue;
    VectorXf z = VectorXf::Zero(m);
    for (size_t v = 0; v < item.size(); ++v) {
      const int idx = item[v];
      if (idx == codec::TokenSequence::kNoToken) continue;
      if (idx < 0 || idx >= codec.codebook().entries) {
        throw std::runtime_error("malformed token sequence");
      }
      z += codec.codebook().levels[v].row(idx).transpose();
    }
    zq.row(row++) = z.transpose();
  }
  return head.aligned(zq);
}

double p2t_nll(const MatrixXf& lm_logits, const std::vector<int>& targets) {
  return nn::softmax_cross_entropy(lm_logits, targets, nullptr);
}

namespace {

// ids layout: <bos> query... [ext rows: Z_begin, press..., Z_end] desc... <eos>
struct SequenceLayout {
  std::vector<int> ids;      // input ids (last element of the full sequence dropped)
  std::vector<int> targets;  // shifted targets; -1 outside description positions
  int ext_rows = 0;
};

SequenceLayout build_layout(const std::vector<int>& query_ids, int n_press,
                            const std::vector<int>& desc_ids, int max_text_tokens) {
  SequenceLayout out;
  std::vector<int> full;
  full.push_back(text::Vocab::kBos);
  for (int q : query_ids) full.push_back(q);
  const int ext_start = static_cast<int>(full.size());
  for (int i = 0; i < n_press + 2; ++i) full.push_back(nn::Transformer::kExternalInput);
  const int desc_start = static_cast<int>(full.size());
  int take = std::min<int>(static_cast<int>(desc_ids.size()), max_text_tokens);
  for (int i = 0; i < take; ++i) full.push_back(desc_ids[static_cast<size_t>(i)]);
  full.push_back(text::Vocab::kEos);

  out.ids.assign(full.begin(), full.end() - 1);
  out.targets.assign(out.ids.size(), -1);
  for (size_t i = 0; i + 1 < full.size(); ++i) {
    if (static_cast<int>(i + 1) >= desc_start) out.targets[i] = full[i + 1];
  }
  out.ext_rows = n_press + 2;
  (void)ext_start;
  return out;
}

}  // namespace

ProjectionTrainResult train_projection(const std::vector<P2TSample>& train_set,
                                       const std::vector<P2TSample>& val_set,
                                       const FrozenLM& lm, const std::string& query,
                                       int codec_dim, const ProjectionConfig& cfg,
                                       const nn::TrainSchedule& sched, uint64_t seed) {
  if (train_set.empty()) throw std::runtime_error("empty projection training set");
  ProjectionTrainResult out;
  out.lm_hash_before = lm.weight_hash();
  Rng rng(seed);
  out.head.init(codec_dim, lm.dim(), cfg, rng);

  nn::Adam opt(sched.learning_rate);
  opt.add_all(out.head.params());
  const std::vector<int> query_ids = lm.vocab().encode(query);

  auto sample_loss = [&](const P2TSample& s, bool learn) -> double {
    SequenceLayout lay = build_layout(query_ids, static_cast<int>(s.zq_rows.rows()), s.desc_ids,
                                      cfg.max_text_tokens);
    if (static_cast<int>(lay.ids.size()) > lm.max_seq()) {
      return -1.0;  // skip over-long sequences
    }
    MatrixXf ext = out.head.aligned(s.zq_rows);
    nn::Transformer::Cache cache;
    MatrixXf logits = lm.forward(lay.ids, &ext, learn ? &cache : nullptr);
    MatrixXf dlogits;
    const double loss = nn::softmax_cross_entropy(logits, lay.targets, learn ? &dlogits : nullptr);
    if (learn) {
      MatrixXf d_ext(lay.ext_rows, lm.dim());
      lm.backward_inputs(lay.ids, &ext, cache, dlogits, &d_ext);
      out.head.aligned_backward(s.zq_rows, d_ext);
    }
    return loss;
  };

  std::vector<int> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  auto epoch_fn = [&](int) -> double {
    rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(sched.batch_size)) {
      const size_t b = std::min<size_t>(sched.batch_size, order.size() - start);
      opt.zero_grad();
      int used = 0;
      for (size_t i = start; i < start + b; ++i) {
        if (sample_loss(train_set[static_cast<size_t>(order[i])], true) >= 0.0) ++used;
      }
      if (used > 0) opt.step();
    }
    const std::vector<P2TSample>& ev = val_set.empty() ? train_set : val_set;
    double nll = 0.0;
    int count = 0;
    for (const auto& s : ev) {
      const double l = sample_loss(s, false);
      if (l >= 0.0) {
        nll += l;
        ++count;
      }
    }
    return nll / std::max(count, 1);
  };

  out.val_curve = nn::run_training(sched, opt, epoch_fn);
  out.lm_hash_after = lm.weight_hash();
  return out;
}

std::string describe(const PressureDynamics& dynamics, const std::string& query,
                     const codec::PressureCodec& codec, const ProjectionHead& head,
                     const FrozenLM& lm) {
  codec::TokenSequence tokens = codec.encode(dynamics);
  MatrixXf ext = project_tokens(tokens, codec, head);

  std::vector<int> ids;
  ids.push_back(text::Vocab::kBos);
  for (int q : lm.vocab().encode(query)) ids.push_back(q);
  for (int i = 0; i < ext.rows(); ++i) ids.push_back(nn::Transformer::kExternalInput);

  std::vector<int> generated;
  for (int step = 0; step < head.config().max_text_tokens; ++step) {
    if (static_cast<int>(ids.size()) >= lm.max_seq()) break;
    MatrixXf logits = lm.forward(ids, &ext, nullptr);
    const int next = nn::sample_greedy(logits.row(logits.rows() - 1));
    if (next == text::Vocab::kEos) break;
    generated.push_back(next);
    ids.push_back(next);
  }
  return lm.vocab().decode(generated);
}

int classify_description(const std::string& description, const std::vector<std::string>& labels,
                         const FrozenLM& lm, bool generative) {
  if (labels.empty()) throw std::runtime_error("empty label set");
  const std::string prompt = classification_prompt(description, labels);
  std::vector<int> prefix;
  prefix.push_back(text::Vocab::kBos);
  for (int t : lm.vocab().encode(prompt)) prefix.push_back(t);

  if (generative) {
    std::vector<int> gen = lm.greedy_continue(prefix, 4);
    for (int t : gen) {
      const std::string& tok = lm.vocab().token(t);
      if (!tok.empty() && std::isdigit(static_cast<unsigned char>(tok[0]))) {
        const int v = std::atoi(tok.c_str());
        if (v >= 0 && v < static_cast<int>(labels.size())) return v;
      }
    }
    // fall through to scoring when no valid integer was produced
  }

  int best = 0;
  double best_lp = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < labels.size(); ++i) {
    std::vector<int> cont = lm.vocab().encode(std::to_string(i) + " (" + labels[i] + ")");
    const double lp = lm.continuation_logprob(prefix, cont);
    if (lp > best_lp) {
      best_lp = lp;
      best = static_cast<int>(i);
    }
  }
  return best;
}

void ProjectionHead::save(io::Checkpoint& ck) const {
  ck.set_meta("proj.hidden", std::to_string(cfg_.hidden));
  ck.set_meta("proj.max_text_tokens", std::to_string(cfg_.max_text_tokens));
  ck.set_meta("proj.codec_dim", std::to_string(codec_dim_));
  ck.set_meta("proj.lm_dim", std::to_string(lm_dim_));
  ck.tensors["proj.l1.W"] = l1_.W.w;
  ck.tensors["proj.l1.b"] = l1_.b.w;
  ck.tensors["proj.l2.W"] = l2_.W.w;
  ck.tensors["proj.l2.b"] = l2_.b.w;
  ck.tensors["proj.z_begin"] = z_begin_.w;
  ck.tensors["proj.z_end"] = z_end_.w;
}

void ProjectionHead::load(const io::Checkpoint& ck) {
  cfg_.hidden = static_cast<int>(ck.meta_int("proj.hidden"));
  cfg_.max_text_tokens = static_cast<int>(ck.meta_int("proj.max_text_tokens"));
  codec_dim_ = static_cast<int>(ck.meta_int("proj.codec_dim"));
  lm_dim_ = static_cast<int>(ck.meta_int("proj.lm_dim"));
  Rng rng(0);
  init(codec_dim_, lm_dim_, cfg_, rng);
  l1_.W.w = ck.require("proj.l1.W");
  l1_.b.w = ck.require("proj.l1.b");
  l2_.W.w = ck.require("proj.l2.W");
  l2_.b.w = ck.require("proj.l2.b");
  z_begin_.w = ck.require("proj.z_begin");
  z_end_.w = ck.require("proj.z_end");
}

void save_projection(const std::string& path, const ProjectionHead& head,
                     const std::string& config_hash, uint64_t seed, uint64_t lm_hash) {
  io::Checkpoint ck;
  ck.magic = "PP2T";
  ck.set_meta("config_hash", config_hash);
  ck.set_meta("seed", std::to_string(seed));
  ck.set_meta("lm_hash", hex64(lm_hash));
  head.save(ck);
  io::write_checkpoint(path, ck);
}

ProjectionHead load_projection(const std::string& path, uint64_t* lm_hash) {
  io::Checkpoint ck = io::read_checkpoint(path, "PP2T");
  ProjectionHead head;
  head.load(ck);
  if (lm_hash) *lm_hash = std::stoull(ck.require_meta("lm_hash"), nullptr, 16);
  return head;
}

}  // namespace presstok::p2t
