#include "presstok/config.hpp"

#include "presstok/common.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace presstok::cfg {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::defaults() {
  static const std::map<std::string, std::string> kDefaults = {
      // Shared training schedule.
      {"train.batch_size", "32"},
      {"train.learning_rate", "1e-4"},
      {"train.max_epochs", "500"},
      {"train.plateau_epochs", "15"},
      {"train.early_stop_epochs", "30"},

      // Synthetic corpus.
      {"corpus.size", "2000"},
      {"corpus.variants", "5"},
      {"corpus.grid_rows", "80"},
      {"corpus.grid_cols", "28"},
      {"corpus.rate_hz", "30"},

      // PressureRQVAE.
      {"codec.frames_per_window", "60"},
      {"codec.codebook_size", "1024"},
      {"codec.levels", "4"},
      {"codec.latent_dim", "64"},
      {"codec.frame_dim", "48"},
      {"codec.temporal_dim", "96"},
      {"codec.beta", "0.25"},
      {"codec.dropout_q", "0.2"},
      {"codec.ema_decay", "0.99"},

      // Text2Pressure.
      {"t2p.dim", "96"},
      {"t2p.layers", "2"},
      {"t2p.heads", "4"},
      {"t2p.max_len", "32"},
      {"t2p.masking_tau", "0.1"},
      {"t2p.sampling", "greedy"},
      {"t2p.top_k", "5"},
      {"t2p.temperature", "1.0"},
      {"t2p.text_dim", "64"},
      {"t2p.contrastive_temp", "0.07"},

      // Frozen LM and projection head.
      {"lm.dim", "96"},
      {"lm.layers", "3"},
      {"lm.heads", "4"},
      {"lm.max_seq", "96"},
      {"p2t.hidden", "128"},
      {"p2t.max_text_tokens", "64"},

      // Evaluation.
      {"eval.rp_pool", "32"},
      {"eval.binarize_threshold", "0.05"},

      // Mix ablation.
      {"ablate.total", "300"},
      {"ablate.ratios", "100/0,50/50,0/100"},
      {"ablate.seeds", "1,2,3"},
  };
  return kDefaults;
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (defaults().find(key) == defaults().end()) {
    throw std::runtime_error("unknown config key: " + key);
  }
  values_[key] = trim(value);
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
}

int64_t RunConfig::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  size_t pos = 0;
  int64_t out = std::stoll(v, &pos);
  if (pos != v.size()) throw std::runtime_error("config key " + key + " is not an integer: " + v);
  return out;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  size_t pos = 0;
  double out = std::stod(v, &pos);
  if (pos != v.size()) throw std::runtime_error("config key " + key + " is not a number: " + v);
  return out;
}

std::string RunConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("unknown config key: " + key);
  return it->second;
}

std::string RunConfig::canonical() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
  return out.str();
}

uint64_t RunConfig::hash() const { return fnv1a(canonical()); }

std::string RunConfig::hash_hex() const { return hex64(hash()); }

}  // namespace presstok::cfg
