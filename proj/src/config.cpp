// SPDX-License-Identifier: Apache-2.0

#include "ichor/config.hpp"

#include <fstream>
#include <set>
#include <vector>

#include "ichor/errors.hpp"
#include "ichor/hash.hpp"

namespace ichor {

namespace {

/// Reads the keys of one config section, remembering which were consumed so
/// every unconsumed key can be reported at once.
class Section {
 public:
  Section(const nlohmann::json* obj, std::string prefix, std::vector<std::string>* unknown)
      : obj_(obj), prefix_(std::move(prefix)), unknown_(unknown) {}

  template <class V>
  void get(const char* key, V& out) {
    known_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<V>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(prefix_ + key + ": " + e.what());
    }
  }

  const nlohmann::json* sub(const char* key) {
    known_.insert(key);
    if (!obj_ || !obj_->contains(key)) return nullptr;
    const nlohmann::json& v = obj_->at(key);
    if (!v.is_object()) throw ConfigError(prefix_ + key + " must be an object");
    return &v;
  }

  ~Section() {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items()) {
      if (!known_.count(key)) unknown_->push_back(prefix_ + key);
    }
  }

 private:
  const nlohmann::json* obj_;
  std::string prefix_;
  std::vector<std::string>* unknown_;
  std::set<std::string> known_;
};

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  RunConfig c;
  std::vector<std::string> unknown;
  {
    Section root(&j, "", &unknown);
    {
      Section s(root.sub("model"), "model.", &unknown);
      s.get("embed_dim", c.model.embed_dim);
      s.get("n_blocks", c.model.n_blocks);
      s.get("n_heads", c.model.n_heads);
      s.get("mlp_dim", c.model.mlp_dim);
      s.get("patch_size", c.model.patch_size);
      s.get("dec_dim", c.model.dec_dim);
      s.get("dec_blocks", c.model.dec_blocks);
      s.get("dec_heads", c.model.dec_heads);
      s.get("dec_mlp_dim", c.model.dec_mlp_dim);
    }
    {
      Section s(root.sub("pretrain"), "pretrain.", &unknown);
      s.get("epochs", c.pretrain.epochs);
      s.get("warmup_epochs", c.pretrain.warmup_epochs);
      s.get("batch_size", c.pretrain.batch_size);
      s.get("base_lr", c.pretrain.base_lr);
      s.get("weight_decay", c.pretrain.weight_decay);
      s.get("rho", c.pretrain.rho);
      s.get("alpha_bal", c.pretrain.alpha_bal);
      s.get("seed", c.pretrain.seed);
      s.get("checkpoint_every", c.pretrain.checkpoint_every);
      s.get("grad_clip", c.pretrain.grad_clip);
    }
    {
      Section s(root.sub("finetune"), "finetune.", &unknown);
      s.get("epochs", c.finetune.epochs);
      s.get("warmup_epochs", c.finetune.warmup_epochs);
      s.get("batch_size", c.finetune.batch_size);
      s.get("base_lr", c.finetune.base_lr);
      s.get("weight_decay", c.finetune.weight_decay);
      s.get("seed", c.finetune.seed);
      {
        Section lora(s.sub("lora"), "finetune.lora.", &unknown);
        lora.get("r", c.finetune.lora.r);
        lora.get("alpha", c.finetune.lora.alpha);
        lora.get("dropout", c.finetune.lora.dropout);
      }
    }
    {
      Section s(root.sub("data"), "data.", &unknown);
      s.get("manifest_path", c.data.manifest_path);
      s.get("format", c.data.format);
    }
    {
      Section s(root.sub("eval"), "eval.", &unknown);
      s.get("k", c.eval.k);
      s.get("seed", c.eval.seed);
    }
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += list.empty() ? k : ", " + k;
    throw ConfigError("unknown config keys: " + list);
  }
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config '" + path.string() + "': " + e.what());
  }
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  return {
      {"model",
       {{"embed_dim", model.embed_dim},
        {"n_blocks", model.n_blocks},
        {"n_heads", model.n_heads},
        {"mlp_dim", model.mlp_dim},
        {"patch_size", model.patch_size},
        {"dec_dim", model.dec_dim},
        {"dec_blocks", model.dec_blocks},
        {"dec_heads", model.dec_heads},
        {"dec_mlp_dim", model.dec_mlp_dim}}},
      {"pretrain",
       {{"epochs", pretrain.epochs},
        {"warmup_epochs", pretrain.warmup_epochs},
        {"batch_size", pretrain.batch_size},
        {"base_lr", pretrain.base_lr},
        {"weight_decay", pretrain.weight_decay},
        {"rho", pretrain.rho},
        {"alpha_bal", pretrain.alpha_bal},
        {"seed", pretrain.seed},
        {"checkpoint_every", pretrain.checkpoint_every},
        {"grad_clip", pretrain.grad_clip}}},
      {"finetune",
       {{"epochs", finetune.epochs},
        {"warmup_epochs", finetune.warmup_epochs},
        {"batch_size", finetune.batch_size},
        {"base_lr", finetune.base_lr},
        {"weight_decay", finetune.weight_decay},
        {"lora",
         {{"r", finetune.lora.r},
          {"alpha", finetune.lora.alpha},
          {"dropout", finetune.lora.dropout}}},
        {"seed", finetune.seed}}},
      {"data", {{"manifest_path", data.manifest_path}, {"format", data.format}}},
      {"eval", {{"k", eval.k}, {"seed", eval.seed}}},
  };
}

void RunConfig::validate() const {
  if (model.embed_dim <= 0 || model.n_blocks <= 0 || model.n_heads <= 0 || model.mlp_dim <= 0 ||
      model.patch_size <= 0 || model.dec_dim <= 0 || model.dec_blocks <= 0 ||
      model.dec_heads <= 0 || model.dec_mlp_dim <= 0)
    throw ConfigError("model dimensions must be positive");
  if (model.embed_dim % model.n_heads != 0)
    throw ConfigError("model.embed_dim must be divisible by model.n_heads");
  if (model.embed_dim % 6 != 0) throw ConfigError("model.embed_dim must be divisible by 6");
  if (model.mlp_dim < model.embed_dim)
    throw ConfigError("model.mlp_dim must be at least model.embed_dim");
  if (model.dec_dim % model.dec_heads != 0)
    throw ConfigError("model.dec_dim must be divisible by model.dec_heads");
  if (model.dec_dim % 6 != 0) throw ConfigError("model.dec_dim must be divisible by 6");

  if (pretrain.epochs < 0) throw ConfigError("pretrain.epochs must be non-negative");
  if (pretrain.epochs > 0 && pretrain.warmup_epochs >= pretrain.epochs)
    throw ConfigError("pretrain.warmup_epochs must be smaller than pretrain.epochs");
  if (pretrain.warmup_epochs < 1 && pretrain.epochs > 0)
    throw ConfigError("pretrain.warmup_epochs must be at least 1");
  if (pretrain.batch_size < 1) throw ConfigError("pretrain.batch_size must be at least 1");
  if (!(pretrain.base_lr > 0.0)) throw ConfigError("pretrain.base_lr must be positive");
  if (pretrain.weight_decay < 0.0) throw ConfigError("pretrain.weight_decay must be non-negative");
  if (!(pretrain.rho >= 0.0 && pretrain.rho <= 1.0))
    throw ConfigError("pretrain.rho must lie in [0,1]");
  if (!(pretrain.alpha_bal >= 0.0 && pretrain.alpha_bal <= 1.0))
    throw ConfigError("pretrain.alpha_bal must lie in [0,1]");
  if (pretrain.checkpoint_every < 0)
    throw ConfigError("pretrain.checkpoint_every must be non-negative");
  if (pretrain.grad_clip < 0.0) throw ConfigError("pretrain.grad_clip must be non-negative");

  if (finetune.epochs < 0) throw ConfigError("finetune.epochs must be non-negative");
  if (finetune.epochs > 0 && finetune.warmup_epochs >= finetune.epochs)
    throw ConfigError("finetune.warmup_epochs must be smaller than finetune.epochs");
  if (finetune.warmup_epochs < 1 && finetune.epochs > 0)
    throw ConfigError("finetune.warmup_epochs must be at least 1");
  if (finetune.batch_size < 1) throw ConfigError("finetune.batch_size must be at least 1");
  if (!(finetune.base_lr > 0.0)) throw ConfigError("finetune.base_lr must be positive");
  if (finetune.weight_decay < 0.0) throw ConfigError("finetune.weight_decay must be non-negative");
  if (finetune.lora.r < 1) throw ConfigError("finetune.lora.r must be at least 1");
  if (!(finetune.lora.alpha > 0.0)) throw ConfigError("finetune.lora.alpha must be positive");
  if (!(finetune.lora.dropout >= 0.0 && finetune.lora.dropout < 1.0))
    throw ConfigError("finetune.lora.dropout must lie in [0,1)");

  if (data.format != "auto" && data.format != "ivol" && data.format != "nifti")
    throw ConfigError("data.format must be auto, ivol, or nifti");

  if (eval.k < 2) throw ConfigError("eval.k must be at least 2");
}

std::string RunConfig::config_hash() const {
  const std::string dump = to_json().dump();
  return hex64(fnv1a_bytes(reinterpret_cast<const unsigned char*>(dump.data()), dump.size()));
}

}  // namespace ichor
