#include "presstok/textenc.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace presstok::text {

std::vector<std::string> Vocab::tokenize(const std::string& txt) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  for (char ch : txt) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      word.push_back(c);
    } else if (c == '.' || c == ',' || c == ':' || c == '(' || c == ')') {
      flush();
      out.push_back(std::string(1, c));
    } else {
      flush();  // whitespace, hyphens and anything else separate
    }
  }
  flush();
  return out;
}

void Vocab::build(const std::vector<std::string>& texts) {
  tokens_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
  std::set<std::string> seen(tokens_.begin(), tokens_.end());
  auto add = [&](const std::string& t) {
    if (seen.insert(t).second) tokens_.push_back(t);
  };
  for (int d = 0; d <= 9; ++d) add(std::to_string(d));
  for (const char* p : {".", ",", ":", "(", ")"}) add(p);
  // Sort corpus words for a stable id assignment.
  std::set<std::string> words;
  for (const auto& t : texts) {
    for (const auto& w : tokenize(t)) words.insert(w);
  }
  for (const auto& w : words) add(w);
  index_.clear();
  for (size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw std::runtime_error("token id out of range");
  return tokens_[static_cast<size_t>(id)];
}

std::vector<int> Vocab::encode(const std::string& txt) const {
  std::vector<int> out;
  for (const auto& w : tokenize(txt)) out.push_back(id(w));
  return out;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::ostringstream out;
  bool first = true;
  for (int i : ids) {
    if (i == kBos || i == kEos || i == kPad) continue;
    if (!first) out << ' ';
    out << token(i);
    first = false;
  }
  return out.str();
}

void Vocab::save(io::Checkpoint& ck, const std::string& key) const {
  std::ostringstream joined;
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (i) joined << '\n';
    joined << tokens_[i];
  }
  ck.set_meta(key, joined.str());
}

void Vocab::load(const io::Checkpoint& ck, const std::string& key) {
  tokens_.clear();
  index_.clear();
  std::istringstream in(ck.require_meta(key));
  std::string line;
  while (std::getline(in, line)) tokens_.push_back(line);
  for (size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
}

// ---------------------------------------------------------------------------

void TextEncoder::init(const Vocab& vocab, int pressure_dim, const TextEncoderConfig& cfg,
                       Rng& rng) {
  vocab_ = vocab;
  cfg_ = cfg;
  pressure_dim_ = pressure_dim;
  emb_.init("textenc.emb", vocab_.size(), cfg.embed_dim, rng, 0.1f);
  text_proj_.init("textenc.text_proj", cfg.embed_dim, cfg.out_dim, rng);
  press_proj_.init("textenc.press_proj", pressure_dim, cfg.out_dim, rng);
}

VectorXf TextEncoder::pool_text(const std::vector<int>& ids) const {
  VectorXf mean = VectorXf::Zero(cfg_.embed_dim);
  for (int i : ids) mean += emb_.w.row(i).transpose();
  mean /= static_cast<float>(ids.size());
  return mean;
}

VectorXf TextEncoder::encode_text(const std::string& prompt) const {
  std::vector<int> ids = vocab_.encode(prompt);
  if (ids.empty()) throw std::runtime_error("empty prompt");
  VectorXf pooled = pool_text(ids);
  VectorXf proj = text_proj_.forward(pooled.transpose()).row(0).transpose();
  const float n = proj.norm();
  if (n == 0.0f) throw std::runtime_error("degenerate text embedding");
  return proj / n;
}

VectorXf TextEncoder::embed_pressure(const VectorXf& feature) const {
  VectorXf proj = press_proj_.forward(feature.transpose()).row(0).transpose();
  const float n = proj.norm();
  if (n == 0.0f) throw std::runtime_error("degenerate pressure embedding");
  return proj / n;
}

namespace {

// y = x / |x| backward: dx = (dy - y (y . dy)) / |x|
MatrixXf normalize_rows(const MatrixXf& x, std::vector<float>* norms) {
  MatrixXf y = x;
  norms->resize(static_cast<size_t>(x.rows()));
  for (int r = 0; r < x.rows(); ++r) {
    float n = std::max(1e-12f, x.row(r).norm());
    (*norms)[static_cast<size_t>(r)] = n;
    y.row(r) /= n;
  }
  return y;
}

MatrixXf normalize_rows_backward(const MatrixXf& y, const std::vector<float>& norms,
                                 const MatrixXf& dy) {
  MatrixXf dx = dy;
  for (int r = 0; r < y.rows(); ++r) {
    const float dot = y.row(r).dot(dy.row(r));
    dx.row(r) = (dy.row(r) - y.row(r) * dot) / norms[static_cast<size_t>(r)];
  }
  return dx;
}

}  // namespace

std::vector<double> TextEncoder::train_contrastive(const std::vector<std::string>& texts,
                                                   const MatrixXf& features,
                                                   const std::vector<int>& val_indices,
                                                   const nn::TrainSchedule& sched,
                                                   uint64_t seed) {
  const int n = static_cast<int>(texts.size());
  if (n != features.rows()) throw std::runtime_error("contrastive pairs not aligned");
  Rng rng(seed);
  nn::Adam opt(sched.learning_rate);
  opt.add(&emb_);
  opt.add_all(text_proj_.params());
  opt.add_all(press_proj_.params());

  std::vector<std::vector<int>> tok(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    tok[static_cast<size_t>(i)] = vocab_.encode(texts[static_cast<size_t>(i)]);
    if (tok[static_cast<size_t>(i)].empty()) throw std::runtime_error("empty prompt");
  }
  std::set<int> val_set(val_indices.begin(), val_indices.end());
  std::vector<int> train_idx;
  for (int i = 0; i < n; ++i) {
    if (!val_set.count(i)) train_idx.push_back(i);
  }

  const int contrast = std::min<int>(128, std::max<int>(16, sched.batch_size * 2));
  const float inv_temp = 1.0f / cfg_.temperature;

  // Forward + optional backward over one index batch; returns the loss.
  auto run_batch = [&](const std::vector<int>& idx, bool learn) -> double {
    const int b = static_cast<int>(idx.size());
    MatrixXf pooled(b, cfg_.embed_dim);
    for (int r = 0; r < b; ++r) {
      pooled.row(r) = pool_text(tok[static_cast<size_t>(idx[static_cast<size_t>(r)])]).transpose();
    }
    MatrixXf feat(b, pressure_dim_);
    for (int r = 0; r < b; ++r) feat.row(r) = features.row(idx[static_cast<size_t>(r)]);

    MatrixXf t_lin = text_proj_.forward(pooled);
    MatrixXf p_lin = press_proj_.forward(feat);
    std::vector<float> tn, pn;
    MatrixXf u = normalize_rows(t_lin, &tn);
    MatrixXf w = normalize_rows(p_lin, &pn);
    MatrixXf logits = u * w.transpose() * inv_temp;

    std::vector<int> diag(static_cast<size_t>(b));
    for (int i = 0; i < b; ++i) diag[static_cast<size_t>(i)] = i;
    MatrixXf d1, d2;
    const double l1 = nn::softmax_cross_entropy(logits, diag, learn ? &d1 : nullptr);
    const double l2 =
        nn::softmax_cross_entropy(logits.transpose(), diag, learn ? &d2 : nullptr);
    const double loss = 0.5 * (l1 + l2);
    if (!learn) return loss;

    MatrixXf dlogits = 0.5f * (d1 + d2.transpose());
    MatrixXf du = dlogits * w * inv_temp;
    MatrixXf dw = dlogits.transpose() * u * inv_temp;
    opt.zero_grad();
    MatrixXf d_t_lin = normalize_rows_backward(u, tn, du);
    MatrixXf d_p_lin = normalize_rows_backward(w, pn, dw);
    MatrixXf d_pooled = text_proj_.backward(pooled, d_t_lin);
    press_proj_.backward(feat, d_p_lin);
    for (int r = 0; r < b; ++r) {
      const auto& ids = tok[static_cast<size_t>(idx[static_cast<size_t>(r)])];
      const float inv = 1.0f / static_cast<float>(ids.size());
      for (int id : ids) emb_.g.row(id) += inv * d_pooled.row(r);
    }
    opt.step();
    return loss;
  };

  auto epoch_fn = [&](int) -> double {
    rng.shuffle(train_idx);
    for (size_t start = 0; start + 1 < train_idx.size();
         start += static_cast<size_t>(contrast)) {
      const size_t b = std::min<size_t>(contrast, train_idx.size() - start);
      if (b < 4) break;
      std::vector<int> idx(train_idx.begin() + static_cast<long>(start),
                           train_idx.begin() + static_cast<long>(start + b));
      run_batch(idx, true);
    }
    // validation loss on a fixed batch
    if (!val_indices.empty() && val_indices.size() >= 4) {
      std::vector<int> idx(val_indices.begin(),
                           val_indices.begin() +
                               std::min<size_t>(val_indices.size(), static_cast<size_t>(contrast)));
      return run_batch(idx, false);
    }
    std::vector<int> idx(train_idx.begin(),
                         train_idx.begin() + std::min<size_t>(train_idx.size(),
                                                              static_cast<size_t>(contrast)));
    return run_batch(idx, false);
  };

  return nn::run_training(sched, opt, epoch_fn);
}

void TextEncoder::save(io::Checkpoint& ck, const std::string& prefix) const {
  vocab_.save(ck, prefix + "vocab");
  ck.set_meta(prefix + "embed_dim", std::to_string(cfg_.embed_dim));
  ck.set_meta(prefix + "out_dim", std::to_string(cfg_.out_dim));
  ck.set_meta(prefix + "temperature", std::to_string(cfg_.temperature));
  ck.set_meta(prefix + "pressure_dim", std::to_string(pressure_dim_));
  ck.tensors[prefix + "emb"] = emb_.w;
  ck.tensors[prefix + "text_proj.W"] = text_proj_.W.w;
  ck.tensors[prefix + "text_proj.b"] = text_proj_.b.w;
  ck.tensors[prefix + "press_proj.W"] = press_proj_.W.w;
  ck.tensors[prefix + "press_proj.b"] = press_proj_.b.w;
}

void TextEncoder::load(const io::Checkpoint& ck, const std::string& prefix) {
  vocab_.load(ck, prefix + "vocab");
  cfg_.embed_dim = static_cast<int>(ck.meta_int(prefix + "embed_dim"));
  cfg_.out_dim = static_cast<int>(ck.meta_int(prefix + "out_dim"));
  cfg_.temperature = static_cast<float>(ck.meta_double(prefix + "temperature"));
  pressure_dim_ = static_cast<int>(ck.meta_int(prefix + "pressure_dim"));
  Rng rng(0);
  emb_.init("textenc.emb", vocab_.size(), cfg_.embed_dim, rng, 0.1f);
  text_proj_.init("textenc.text_proj", cfg_.embed_dim, cfg_.out_dim, rng);
  press_proj_.init("textenc.press_proj", pressure_dim_, cfg_.out_dim, rng);
  emb_.w = ck.require(prefix + "emb");
  text_proj_.W.w = ck.require(prefix + "text_proj.W");
  text_proj_.b.w = ck.require(prefix + "text_proj.b");
  press_proj_.W.w = ck.require(prefix + "press_proj.W");
  press_proj_.b.w = ck.require(prefix + "press_proj.b");
}

}  // namespace presstok::text
