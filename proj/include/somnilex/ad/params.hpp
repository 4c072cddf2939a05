#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "somnilex/ad/graph.hpp"
#include "somnilex/ad/tensor.hpp"
#include "somnilex/common.hpp"

namespace somnilex::ad {

template <class S>
struct Param {
  NodePtr<S> node;
  Tensor<S> m, v;       // Adam first/second moments
  std::int64_t t = 0;   // per-parameter step count
  bool frozen = false;  // excluded from optimization (e.g. BN running stats)
};

// Named parameter collection. Names are hierarchical dot-paths; iteration is
// always in name order so optimizer sweeps, checksums and checkpoints are
// deterministic.
template <class S>
class ParameterStore {
 public:
  NodePtr<S> create(const std::string& name, Tensor<S> init, bool frozen = false) {
    if (params_.count(name))
      throw ConfigError("parameter already exists: " + name);
    Param<S> p;
    p.node = leaf(std::move(init), !frozen);
    p.frozen = frozen;
    if (!frozen) {
      p.m = Tensor<S>(p.node->value.shape);
      p.v = Tensor<S>(p.node->value.shape);
    }
    auto [it, ok] = params_.emplace(name, std::move(p));
    return it->second.node;
  }

  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  NodePtr<S> get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("no parameter named " + name);
    return it->second.node;
  }

  Param<S>& param(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("no parameter named " + name);
    return it->second;
  }

  Tensor<S>& tensor(const std::string& name) { return param(name).node->value; }

  std::map<std::string, Param<S>>& all() { return params_; }
  const std::map<std::string, Param<S>>& all() const { return params_; }

  std::size_t num_trainable_scalars() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_)
      if (!p.frozen) n += p.node->value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.node->zero_grad();
  }

  // FNV-1a over all values (cast to f32) in name order; the determinism
  // contract for training compares these.
  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& [name, p] : params_) {
      h = fnv1a(name.data(), name.size(), h);
      for (const S v : p.node->value.data) {
        const float f = static_cast<float>(v);
        h = fnv1a(&f, sizeof f, h);
      }
    }
    return h;
  }

  ParameterStore<S> clone() const {
    ParameterStore<S> out;
    for (const auto& [name, p] : params_) {
      Param<S> q;
      q.node = leaf(p.node->value, !p.frozen);
      q.m = p.m;
      q.v = p.v;
      q.t = p.t;
      q.frozen = p.frozen;
      out.params_.emplace(name, std::move(q));
    }
    return out;
  }

  // Copies values (and optimizer state) from another store with an identical
  // name/shape layout.
  void assign_from(const ParameterStore<S>& other) {
    if (other.params_.size() != params_.size())
      throw ConfigError("parameter store layout mismatch");
    auto it = params_.begin();
    auto jt = other.params_.begin();
    for (; it != params_.end(); ++it, ++jt) {
      if (it->first != jt->first ||
          it->second.node->value.shape != jt->second.node->value.shape)
        throw ConfigError("parameter store layout mismatch at " + it->first);
      it->second.node->value.data = jt->second.node->value.data;
      it->second.m = jt->second.m;
      it->second.v = jt->second.v;
      it->second.t = jt->second.t;
    }
  }

  // Checkpoint format: a short ASCII manifest (names, frozen flags, shapes,
  // plus an FNV-1a checksum of the payload) followed by raw little-endian
  // 32-bit floats in manifest order.
  void save(const std::string& path) const {
    std::vector<float> payload;
    for (const auto& [name, p] : params_)
      for (const S v : p.node->value.data)
        payload.push_back(static_cast<float>(v));
    const std::uint64_t sum =
        fnv1a(payload.data(), payload.size() * sizeof(float));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << "SOMNILEX-CKPT 1\n";
    out << "params " << params_.size() << "\n";
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(sum));
    out << "checksum " << hex << "\n";
    for (const auto& [name, p] : params_) {
      out << name << " " << (p.frozen ? 1 : 0);
      for (int d : p.node->value.shape) out << " " << d;
      out << "\n";
    }
    out << "\n";
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) throw IoError("write failure on checkpoint: " + path);
  }

  // Loads a checkpoint saved by save(). The store must already contain the
  // same parameters with the same shapes (i.e. be built from the same model
  // configuration).
  void load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string line;
    std::getline(in, line);
    if (line != "SOMNILEX-CKPT 1")
      throw ParseError("not a checkpoint file: " + path);
    std::getline(in, line);
    std::size_t count = 0;
    if (std::sscanf(line.c_str(), "params %zu", &count) != 1)
      throw ParseError("checkpoint missing parameter count");
    std::getline(in, line);
    unsigned long long declared_sum = 0;
    if (std::sscanf(line.c_str(), "checksum %llx", &declared_sum) != 1)
      throw ParseError("checkpoint missing checksum");

    struct Entry {
      std::string name;
      std::vector<int> shape;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < count; ++i) {
      std::getline(in, line);
      std::istringstream ls(line);
      Entry e;
      int frozen_flag = 0;
      ls >> e.name >> frozen_flag;
      int d;
      while (ls >> d) e.shape.push_back(d);
      entries.push_back(std::move(e));
    }
    std::getline(in, line);  // blank separator

    std::size_t total = 0;
    for (const auto& e : entries) total += Tensor<S>::numel_of(e.shape);
    std::vector<float> payload(total);
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(total * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != total * sizeof(float))
      throw ParseError("checkpoint payload truncated: " + path);
    const std::uint64_t sum = fnv1a(payload.data(), total * sizeof(float));
    if (sum != declared_sum)
      throw ParseError("checkpoint checksum mismatch in " + path);

    if (entries.size() != params_.size())
      throw ConfigError("checkpoint holds " + std::to_string(entries.size()) +
                        " parameters, store expects " +
                        std::to_string(params_.size()));
    std::size_t off = 0;
    for (const auto& e : entries) {
      auto it = params_.find(e.name);
      if (it == params_.end())
        throw ConfigError("checkpoint parameter " + e.name +
                          " not present in this model");
      if (it->second.node->value.shape != e.shape)
        throw ConfigError("checkpoint shape mismatch for " + e.name);
      auto& dst = it->second.node->value.data;
      for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] = static_cast<S>(payload[off + i]);
      off += dst.size();
    }
  }

 private:
  std::map<std::string, Param<S>> params_;
};

}  // namespace somnilex::ad
