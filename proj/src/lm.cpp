#include "presstok/lm.hpp"

#include <cmath>
#include <sstream>

namespace presstok::p2t {

double FrozenLM::continuation_logprob(const std::vector<int>& prefix,
                                      const std::vector<int>& continuation) const {
  if (continuation.empty()) throw std::runtime_error("empty continuation");
  std::vector<int> ids = prefix;
  ids.insert(ids.end(), continuation.begin(), continuation.end());
  ids.pop_back();  // last token is only a target
  MatrixXf logits = tf_.forward(ids, nullptr, nullptr);
  double lp = 0.0;
  const int base = static_cast<int>(prefix.size()) - 1;
  for (size_t k = 0; k < continuation.size(); ++k) {
    VectorXf ls = nn::log_softmax_row(logits.row(base + static_cast<int>(k)));
    lp += ls(continuation[k]);
  }
  return lp;
}

std::vector<int> FrozenLM::greedy_continue(const std::vector<int>& prefix, int max_new) const {
  std::vector<int> ids = prefix;
  std::vector<int> out;
  for (int step = 0; step < max_new; ++step) {
    if (static_cast<int>(ids.size()) >= tf_.config().max_seq) break;
    MatrixXf logits = tf_.forward(ids, nullptr, nullptr);
    const int next = nn::sample_greedy(logits.row(logits.rows() - 1));
    if (next == text::Vocab::kEos) break;
    out.push_back(next);
    ids.push_back(next);
  }
  return out;
}

double FrozenLM::perplexity(const std::vector<std::string>& texts) const {
  double nll = 0.0;
  int count = 0;
  for (const auto& t : texts) {
    std::vector<int> seq;
    seq.push_back(text::Vocab::kBos);
    for (int id : vocab_.encode(t)) seq.push_back(id);
    seq.push_back(text::Vocab::kEos);
    std::vector<int> ids(seq.begin(), seq.end() - 1);
    if (static_cast<int>(ids.size()) > tf_.config().max_seq) {
      ids.resize(static_cast<size_t>(tf_.config().max_seq));
    }
    MatrixXf logits = tf_.forward(ids, nullptr, nullptr);
    for (int i = 0; i < logits.rows(); ++i) {
      VectorXf ls = nn::log_softmax_row(logits.row(i));
      nll -= ls(seq[static_cast<size_t>(i) + 1]);
      ++count;
    }
  }
  return std::exp(nll / std::max(count, 1));
}

FrozenLM pretrain_lm(const std::vector<std::string>& train_texts,
                     const std::vector<std::string>& aux_texts,
                     const std::vector<std::string>& val_texts, const LmConfig& cfg,
                     const nn::TrainSchedule& sched, uint64_t seed) {
  FrozenLM lm;
  std::vector<std::string> all = train_texts;
  all.insert(all.end(), aux_texts.begin(), aux_texts.end());
  all.insert(all.end(), val_texts.begin(), val_texts.end());
  lm.vocab_.build(all);

  Rng rng(seed);
  nn::TransformerConfig tc;
  tc.vocab = lm.vocab_.size();
  tc.dim = cfg.dim;
  tc.layers = cfg.layers;
  tc.heads = cfg.heads;
  tc.max_seq = cfg.max_seq;
  lm.tf_.init(tc, rng);

  std::vector<std::vector<int>> seqs;
  auto add_seq = [&](const std::string& t) {
    std::vector<int> seq;
    seq.push_back(text::Vocab::kBos);
    for (int id : lm.vocab_.encode(t)) seq.push_back(id);
    seq.push_back(text::Vocab::kEos);
    if (static_cast<int>(seq.size()) > cfg.max_seq + 1) seq.resize(static_cast<size_t>(cfg.max_seq) + 1);
    if (seq.size() >= 2) seqs.push_back(std::move(seq));
  };
  for (const auto& t : train_texts) add_seq(t);
  for (const auto& t : aux_texts) add_seq(t);

  nn::Adam opt(sched.learning_rate);
  opt.add_all(lm.tf_.params());

  std::vector<int> order(seqs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  auto epoch_fn = [&](int) -> double {
    rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(sched.batch_size)) {
      const size_t b = std::min<size_t>(sched.batch_size, order.size() - start);
      opt.zero_grad();
      for (size_t i = start; i < start + b; ++i) {
        const auto& seq = seqs[static_cast<size_t>(order[i])];
        std::vector<int> ids(seq.begin(), seq.end() - 1);
        std::vector<int> targets(seq.begin() + 1, seq.end());
        nn::Transformer::Cache cache;
        MatrixXf logits = lm.tf_.forward(ids, nullptr, &cache);
        MatrixXf dlogits;
        nn::softmax_cross_entropy(logits, targets, &dlogits);
        dlogits /= static_cast<float>(b);
        lm.tf_.backward(ids, nullptr, cache, dlogits, true, nullptr);
      }
      opt.step();
    }
    const std::vector<std::string>& vt = val_texts.empty() ? train_texts : val_texts;
    return std::log(lm.perplexity(vt));  // mean val NLL
  };

  nn::run_training(sched, opt, epoch_fn);
  return lm;
}

std::string classification_prompt(const std::string& description,
                                  const std::vector<std::string>& labels) {
  std::ostringstream out;
  out << "Based on the description, classify the activity: " << description << ". Options:";
  for (size_t i = 0; i < labels.size(); ++i) {
    out << (i == 0 ? " " : ", ") << i << " (" << labels[i] << ")";
  }
  out << ". Answer:";
  return out.str();
}

void FrozenLM::save(const std::string& path, const std::string& config_hash,
                    uint64_t seed) const {
  io::Checkpoint ck;
  ck.magic = "PLM0";
  ck.set_meta("config_hash", config_hash);
  ck.set_meta("seed", std::to_string(seed));
  ck.set_meta("weight_hash", hex64(weight_hash()));
  vocab_.save(ck, "vocab");
  tf_.save(ck, "lm.");
  io::write_checkpoint(path, ck);
}

FrozenLM FrozenLM::load_file(const std::string& path) {
  io::Checkpoint ck = io::read_checkpoint(path, "PLM0");
  FrozenLM lm;
  lm.vocab_.load(ck, "vocab");
  lm.tf_.load(ck, "lm.");
  return lm;
}

}  // namespace presstok::p2t
