#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cmmlp/network.hpp"
#include "cmmlp/train.hpp"

namespace cmmlp {

// Flat `key = value` configuration with dotted sections; '#' starts a
// comment. Typed getters record consumption so unknown keys can be rejected.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open '" + path + "'");
    KvConfig kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      size_t hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      size_t eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not 'key = value'");
      std::string key = trim(trimmed.substr(0, eq));
      std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw std::invalid_argument("config: empty key on line " + std::to_string(lineno));
      kv.values_[key] = value;
    }
    return kv;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  // "key=value" override strings from the command line
  void apply_override(const std::string& kv) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("override '" + kv + "' is not key=value");
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& def) const {
    consumed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }
  int get_int(const std::string& key, int def) const {
    consumed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? def : std::stoi(it->second);
  }
  uint64_t get_u64(const std::string& key, uint64_t def) const {
    consumed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? def : std::stoull(it->second);
  }
  double get_double(const std::string& key, double def) const {
    consumed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? def : std::stod(it->second);
  }
  bool get_bool(const std::string& key, bool def) const {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: '" + key + "' is not a boolean: " + v);
  }
  std::vector<int> get_int_list(const std::string& key, std::vector<int> def) const {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::vector<int> out;
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(trim(tok)));
    return out;
  }

  std::vector<std::string> unknown_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!consumed_.count(k)) out.push_back(k);
    return out;
  }

  static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

struct DataConfig {
  std::string dir;
  int size = 128;
  int split_train = 7, split_val = 1, split_test = 2;
  uint64_t split_seed = 1;
};

// Everything a run needs, merged from file plus overrides; serializes back
// to the same flat format for the resolved-config artifact.
struct RunConfig {
  ModelConfig model;
  std::string setting = "full";
  TrainConfig train;
  DataConfig data;
  std::string precision = "f32";

  static RunConfig from(const KvConfig& kv) {
    RunConfig rc;
    std::vector<int> w = kv.get_int_list("model.widths", {8, 16, 32, 64, 128});
    if (w.size() != 5) throw std::invalid_argument("model.widths must have exactly 5 entries");
    for (int i = 0; i < 5; ++i) rc.model.enc_widths[i] = w[i];
    rc.model.decoder_width = kv.get_int("model.decoder_width", 16);
    rc.model.in_channels = kv.get_int("model.in_channels", 3);
    rc.model.use_mfi = kv.get_bool("model.mfi", true);
    rc.model.use_local = kv.get_bool("model.local", true);
    rc.model.use_global = kv.get_bool("model.global", true);
    rc.model.use_acre = kv.get_bool("model.acre", true);
    rc.model.variant = mfi_variant_from_string(kv.get_string("model.variant", "series"));
    rc.setting = kv.get_string("model.setting", "full");
    apply_setting(rc.model, rc.setting);

    rc.data.dir = kv.get_string("data.dir", "");
    rc.data.size = kv.get_int("data.size", 128);
    std::vector<int> split = kv.get_int_list("data.split", {7, 1, 2});
    if (split.size() != 3) throw std::invalid_argument("data.split must have 3 entries");
    rc.data.split_train = split[0];
    rc.data.split_val = split[1];
    rc.data.split_test = split[2];
    rc.data.split_seed = kv.get_u64("data.split_seed", 1);

    rc.train.epochs = kv.get_int("train.epochs", 40);
    rc.train.batch_size = kv.get_int("train.batch_size", 4);
    rc.train.seed = kv.get_u64("train.seed", 1);
    rc.train.deterministic = kv.get_bool("train.deterministic", false);
    rc.train.augment = kv.get_bool("train.augment", false);
    rc.train.checkpoint_every = kv.get_int("train.checkpoint_every", 0);
    rc.train.optim.kind = optimizer_kind_from_string(kv.get_string("train.optimizer", "adam"));
    rc.train.optim.lr = kv.get_double("train.lr", 1e-3);
    rc.train.optim.momentum = kv.get_double("train.momentum", 0.9);
    rc.train.optim.beta1 = kv.get_double("train.beta1", 0.9);
    rc.train.optim.beta2 = kv.get_double("train.beta2", 0.999);
    rc.train.optim.eps = kv.get_double("train.eps", 1e-8);
    rc.train.optim.clip_norm = kv.get_double("train.clip_norm", 5.0);
    rc.train.optim.lookahead_k = kv.get_int("train.lookahead_k", 5);
    rc.train.optim.lookahead_alpha = kv.get_double("train.lookahead_alpha", 0.5);
    rc.train.loss.pool_k = kv.get_int("loss.pool_k", 15);
    rc.train.loss.gain = kv.get_double("loss.gain", 5.0);
    rc.train.aug.p_hflip = kv.get_double("aug.p_hflip", 0.5);
    rc.train.aug.p_vflip = kv.get_double("aug.p_vflip", 0.5);
    rc.train.aug.p_affine = kv.get_double("aug.p_affine", 0.5);
    rc.train.aug.max_rot_deg = kv.get_double("aug.rot_deg", 15.0);
    rc.train.aug.max_translate = kv.get_double("aug.translate", 0.05);
    rc.train.aug.scale_min = kv.get_double("aug.scale_min", 0.9);
    rc.train.aug.scale_max = kv.get_double("aug.scale_max", 1.1);
    rc.precision = kv.get_string("train.precision", "f32");
    if (rc.precision != "f32" && rc.precision != "f64")
      throw std::invalid_argument("train.precision must be f32 or f64");

    std::vector<std::string> unknown = kv.unknown_keys();
    if (!unknown.empty()) {
      std::string msg = "unknown config keys:";
      for (const auto& k : unknown) msg += " " + k;
      throw std::invalid_argument(msg);
    }
    return rc;
  }

  std::string resolved() const {
    std::ostringstream os;
    os.precision(17);
    os << "model.widths = " << model.enc_widths[0];
    for (int i = 1; i < 5; ++i) os << "," << model.enc_widths[i];
    os << "\n";
    os << "model.decoder_width = " << model.decoder_width << "\n";
    os << "model.in_channels = " << model.in_channels << "\n";
    os << "model.mfi = " << (model.use_mfi ? "true" : "false") << "\n";
    os << "model.local = " << (model.use_local ? "true" : "false") << "\n";
    os << "model.global = " << (model.use_global ? "true" : "false") << "\n";
    os << "model.acre = " << (model.use_acre ? "true" : "false") << "\n";
    os << "model.variant = "
       << (model.variant == MfiVariant::Series ? "series" : model.variant == MfiVariant::PP ? "pp" : "cp")
       << "\n";
    os << "model.setting = " << setting << "\n";
    os << "data.dir = " << data.dir << "\n";
    os << "data.size = " << data.size << "\n";
    os << "data.split = " << data.split_train << "," << data.split_val << "," << data.split_test << "\n";
    os << "data.split_seed = " << data.split_seed << "\n";
    os << "train.epochs = " << train.epochs << "\n";
    os << "train.batch_size = " << train.batch_size << "\n";
    os << "train.seed = " << train.seed << "\n";
    os << "train.deterministic = " << (train.deterministic ? "true" : "false") << "\n";
    os << "train.augment = " << (train.augment ? "true" : "false") << "\n";
    os << "train.checkpoint_every = " << train.checkpoint_every << "\n";
    os << "train.optimizer = "
       << (train.optim.kind == OptimConfig::Kind::Adam ? "adam" : "momentum") << "\n";
    os << "train.lr = " << train.optim.lr << "\n";
    os << "train.momentum = " << train.optim.momentum << "\n";
    os << "train.beta1 = " << train.optim.beta1 << "\n";
    os << "train.beta2 = " << train.optim.beta2 << "\n";
    os << "train.eps = " << train.optim.eps << "\n";
    os << "train.clip_norm = " << train.optim.clip_norm << "\n";
    os << "train.lookahead_k = " << train.optim.lookahead_k << "\n";
    os << "train.lookahead_alpha = " << train.optim.lookahead_alpha << "\n";
    os << "train.precision = " << precision << "\n";
    os << "loss.pool_k = " << train.loss.pool_k << "\n";
    os << "loss.gain = " << train.loss.gain << "\n";
    os << "aug.p_hflip = " << train.aug.p_hflip << "\n";
    os << "aug.p_vflip = " << train.aug.p_vflip << "\n";
    os << "aug.p_affine = " << train.aug.p_affine << "\n";
    os << "aug.rot_deg = " << train.aug.max_rot_deg << "\n";
    os << "aug.translate = " << train.aug.max_translate << "\n";
    os << "aug.scale_min = " << train.aug.scale_min << "\n";
    os << "aug.scale_max = " << train.aug.scale_max << "\n";
    return os.str();
  }
};

}  // namespace cmmlp
