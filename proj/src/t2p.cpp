#include "presstok/t2p.hpp"

#include <algorithm>
#include <cmath>

namespace presstok::t2p {

std::vector<int> apply_random_masking(const std::vector<int>& tokens, float tau,
                                      int codebook_size, uint64_t seed) {
  if (tau < 0.0f || tau > 1.0f) throw std::runtime_error("tau must be in [0,1]");
  std::vector<int> out = tokens;
  const int n = static_cast<int>(tokens.size());
  const int k = static_cast<int>(std::lround(static_cast<double>(tau) * n));
  if (k == 0) return out;
  Rng rng(seed);
  std::vector<int> pos = rng.sample_without_replacement(n, k);
  for (int p : pos) {
    out[static_cast<size_t>(p)] = static_cast<int>(rng.uniform_int(codebook_size));
  }
  return out;
}

double ar_nll(const MatrixXf& logits, const std::vector<int>& targets) {
  return nn::softmax_cross_entropy(logits, targets, nullptr);
}

void Generator::init(const GeneratorConfig& cfg, Rng& rng) {
  cfg_ = cfg;
  nn::TransformerConfig tc;
  tc.vocab = cfg.codebook_size + 1;
  tc.dim = cfg.dim;
  tc.layers = cfg.layers;
  tc.heads = cfg.heads;
  tc.max_seq = cfg.max_len + 2;
  tf_.init(tc, rng);
  cond_proj_.init("cond_proj", cfg.text_dim, cfg.dim, rng);
}

std::vector<nn::Param*> Generator::params() {
  auto out = tf_.params();
  out.push_back(&cond_proj_.W);
  out.push_back(&cond_proj_.b);
  return out;
}

MatrixXf Generator::forward_ids(const std::vector<int>& content, const VectorXf& condition,
                                nn::Transformer::Cache* cache) const {
  std::vector<int> ids;
  ids.reserve(content.size() + 1);
  ids.push_back(nn::Transformer::kExternalInput);
  for (int t : content) ids.push_back(t);
  MatrixXf ext = cond_proj_.forward(condition.transpose());
  return tf_.forward(ids, &ext, cache);
}

Generator::GenerateResult Generator::generate(const VectorXf& condition, uint64_t seed) const {
  return generate(condition, seed, cfg_.sampling, cfg_.top_k, cfg_.temperature);
}

Generator::GenerateResult Generator::generate(const VectorXf& condition, uint64_t seed,
                                              Sampling sampling, int top_k,
                                              float temperature) const {
  GenerateResult out;
  Rng rng(seed);
  while (static_cast<int>(out.tokens.size()) < cfg_.max_len) {
    MatrixXf logits = forward_ids(out.tokens, condition, nullptr);
    Eigen::RowVectorXf last = logits.row(logits.rows() - 1);
    int next;
    switch (sampling) {
      case Sampling::kTopK: next = nn::sample_top_k(last, top_k, rng); break;
      case Sampling::kTemperature: next = nn::sample_temperature(last, temperature, rng); break;
      default: next = nn::sample_greedy(last); break;
    }
    if (next == end_token()) return out;
    out.tokens.push_back(next);
  }
  out.truncated = true;  // cap reached without the end token
  return out;
}

codec::TokenSequence Generator::to_token_sequence(const GenerateResult& g) const {
  codec::TokenSequence seq;
  for (int t : g.tokens) seq.items.push_back({t});
  seq.append_end();
  return seq;
}

double Generator::sequence_nll(const VectorXf& condition, const std::vector<int>& tokens) const {
  MatrixXf logits = forward_ids(tokens, condition, nullptr);
  std::vector<int> targets = tokens;
  targets.push_back(end_token());
  return nn::softmax_cross_entropy(logits, targets, nullptr);
}

double Generator::train_step(const std::vector<VectorXf>& conditions,
                             const std::vector<std::vector<int>>& tokens, float tau,
                             nn::Adam& opt, Rng& rng) {
  if (conditions.size() != tokens.size()) throw std::runtime_error("batch mismatch");
  opt.zero_grad();
  double total = 0.0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    std::vector<int> input = apply_random_masking(tokens[i], tau, cfg_.codebook_size, rng.raw());
    std::vector<int> ids;
    ids.push_back(nn::Transformer::kExternalInput);
    for (int t : input) ids.push_back(t);
    std::vector<int> targets = tokens[i];
    targets.push_back(end_token());

    MatrixXf ext = cond_proj_.forward(conditions[i].transpose());
    nn::Transformer::Cache cache;
    MatrixXf logits = tf_.forward(ids, &ext, &cache);
    MatrixXf dlogits;
    total += nn::softmax_cross_entropy(logits, targets, &dlogits);
    dlogits /= static_cast<float>(tokens.size());
    MatrixXf d_ext(1, cfg_.dim);
    tf_.backward(ids, &ext, cache, dlogits, true, &d_ext);
    cond_proj_.backward(conditions[i].transpose(), d_ext);
  }
  opt.step();
  return total / static_cast<double>(tokens.size());
}

void Generator::save(io::Checkpoint& ck) const {
  ck.set_meta("gen.codebook_size", std::to_string(cfg_.codebook_size));
  ck.set_meta("gen.max_len", std::to_string(cfg_.max_len));
  ck.set_meta("gen.masking_tau", std::to_string(cfg_.masking_tau));
  ck.set_meta("gen.sampling", std::to_string(static_cast<int>(cfg_.sampling)));
  ck.set_meta("gen.top_k", std::to_string(cfg_.top_k));
  ck.set_meta("gen.temperature", std::to_string(cfg_.temperature));
  ck.set_meta("gen.text_dim", std::to_string(cfg_.text_dim));
  tf_.save(ck, "gen.tf.");
  ck.tensors["gen.cond_proj.W"] = cond_proj_.W.w;
  ck.tensors["gen.cond_proj.b"] = cond_proj_.b.w;
}

void Generator::load(const io::Checkpoint& ck) {
  cfg_.codebook_size = static_cast<int>(ck.meta_int("gen.codebook_size"));
  cfg_.max_len = static_cast<int>(ck.meta_int("gen.max_len"));
  cfg_.masking_tau = static_cast<float>(ck.meta_double("gen.masking_tau"));
  cfg_.sampling = static_cast<Sampling>(ck.meta_int("gen.sampling"));
  cfg_.top_k = static_cast<int>(ck.meta_int("gen.top_k"));
  cfg_.temperature = static_cast<float>(ck.meta_double("gen.temperature"));
  cfg_.text_dim = static_cast<int>(ck.meta_int("gen.text_dim"));
  tf_.load(ck, "gen.tf.");
  cfg_.dim = tf_.config().dim;
  cfg_.layers = tf_.config().layers;
  cfg_.heads = tf_.config().heads;
  Rng rng(0);
  cond_proj_.init("cond_proj", cfg_.text_dim, cfg_.dim, rng);
  cond_proj_.W.w = ck.require("gen.cond_proj.W");
  cond_proj_.b.w = ck.require("gen.cond_proj.b");
}

std::vector<TokenizedSample> tokenize_corpus(const std::vector<corpus::PairedSample>& samples,
                                             const std::string& corpus_dir,
                                             const codec::PressureCodec& codec) {
  std::vector<TokenizedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    PressureDynamics d = corpus::load_sample(corpus_dir, s);
    codec::TokenSequence seq = codec.encode(d);
    TokenizedSample t;
    t.text = s.text;
    t.label = static_cast<int>(s.label);
    t.split = s.split;
    VectorXf mean = VectorXf::Zero(codec.config().latent_dim);
    int n = 0;
    for (const auto& item : seq.items) {
      if (codec::TokenSequence::is_end(item)) continue;
      t.level0.push_back(item[0]);
      VectorXf zq = VectorXf::Zero(codec.config().latent_dim);
      for (size_t v = 0; v < item.size(); ++v) {
        zq += codec.codebook().levels[v].row(item[static_cast<size_t>(v)]).transpose();
      }
      mean += zq;
      ++n;
    }
    t.pressure_embed = n > 0 ? VectorXf(mean / static_cast<float>(n)) : mean;
    out.push_back(std::move(t));
  }
  return out;
}

TrainedT2P train_generator(const std::vector<TokenizedSample>& samples,
                           const GeneratorConfig& cfg, const text::TextEncoderConfig& tcfg,
                           const nn::TrainSchedule& sched, uint64_t seed) {
  if (samples.empty()) throw std::runtime_error("empty corpus");
  TrainedT2P out;
  Rng rng(seed);

  // Stage 1: contrastive text-encoder pretraining on train-split pairs,
  // validated on the val split, then frozen.
  std::vector<std::string> texts;
  const int press_dim = static_cast<int>(samples.front().pressure_embed.size());
  MatrixXf features(static_cast<int>(samples.size()), press_dim);
  std::vector<int> val_idx;
  std::vector<int> train_rows;
  for (size_t i = 0; i < samples.size(); ++i) {
    texts.push_back(samples[i].text);
    features.row(static_cast<int>(i)) = samples[i].pressure_embed.transpose();
    if (samples[i].split == corpus::Split::kVal) val_idx.push_back(static_cast<int>(i));
    if (samples[i].split == corpus::Split::kTrain) train_rows.push_back(static_cast<int>(i));
  }
  text::Vocab vocab;
  vocab.build(texts);
  out.textenc.init(vocab, press_dim, tcfg, rng);
  {
    // Only train-split rows feed the contrastive loss; the encoder never
    // sees val/test descriptions.
    std::vector<std::string> tr_texts;
    MatrixXf tr_feat(static_cast<int>(train_rows.size()) + static_cast<int>(val_idx.size()),
                     press_dim);
    std::vector<int> tr_val;
    int at = 0;
    for (int r : train_rows) {
      tr_texts.push_back(texts[static_cast<size_t>(r)]);
      tr_feat.row(at++) = features.row(r);
    }
    for (int r : val_idx) {
      tr_val.push_back(at);
      tr_texts.push_back(texts[static_cast<size_t>(r)]);
      tr_feat.row(at++) = features.row(r);
    }
    nn::TrainSchedule contr = sched;
    contr.max_epochs = std::min(sched.max_epochs, 60);
    out.contrastive_curve =
        out.textenc.train_contrastive(tr_texts, tr_feat, tr_val, contr, rng.raw());
  }

  // Stage 2: AR training on (condition, level-0 tokens) with random masking.
  out.generator.init(cfg, rng);
  nn::Adam opt(sched.learning_rate);
  opt.add_all(out.generator.params());

  std::vector<VectorXf> conds(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    conds[i] = out.textenc.encode_text(samples[i].text);
  }
  std::vector<int> train_idx = train_rows;

  auto epoch_fn = [&](int) -> double {
    rng.shuffle(train_idx);
    for (size_t start = 0; start < train_idx.size();
         start += static_cast<size_t>(sched.batch_size)) {
      const size_t b = std::min<size_t>(sched.batch_size, train_idx.size() - start);
      std::vector<VectorXf> bc;
      std::vector<std::vector<int>> bt;
      for (size_t i = start; i < start + b; ++i) {
        bc.push_back(conds[static_cast<size_t>(train_idx[i])]);
        bt.push_back(samples[static_cast<size_t>(train_idx[i])].level0);
      }
      out.generator.train_step(bc, bt, cfg.masking_tau, opt, rng);
    }
    // held-out NLL on the val split (train split if val is empty)
    double nll = 0.0;
    int count = 0;
    const std::vector<int>& eval_idx = val_idx.empty() ? train_idx : val_idx;
    for (int i : eval_idx) {
      nll += out.generator.sequence_nll(conds[static_cast<size_t>(i)],
                                        samples[static_cast<size_t>(i)].level0);
      ++count;
    }
    return nll / std::max(count, 1);
  };

  out.ar_curve = nn::run_training(sched, opt, epoch_fn);
  return out;
}

PressureDynamics text_to_pressure(const std::string& prompt, const text::TextEncoder& textenc,
                                  const Generator& generator, const codec::PressureCodec& codec,
                                  uint64_t seed) {
  VectorXf c = textenc.encode_text(prompt);
  Generator::GenerateResult g = generator.generate(c, seed);
  return codec.decode(generator.to_token_sequence(g));
}

void save_t2p(const std::string& path, const text::TextEncoder& textenc, const Generator& gen,
              const std::string& config_hash, uint64_t seed) {
  io::Checkpoint ck;
  ck.magic = "PT2P";
  ck.set_meta("config_hash", config_hash);
  ck.set_meta("seed", std::to_string(seed));
  textenc.save(ck, "textenc.");
  gen.save(ck);
  io::write_checkpoint(path, ck);
}

void load_t2p(const std::string& path, text::TextEncoder* textenc, Generator* gen) {
  io::Checkpoint ck = io::read_checkpoint(path, "PT2P");
  if (textenc) textenc->load(ck, "textenc.");
  if (gen) gen->load(ck);
}

}  // namespace presstok::t2p
