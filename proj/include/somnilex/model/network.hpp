#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "somnilex/ad/adam.hpp"
#include "somnilex/ad/ops.hpp"
#include "somnilex/ad/params.hpp"
#include "somnilex/model/config.hpp"
#include "somnilex/tokenizer.hpp"

namespace somnilex {

template <class S>
struct ForwardCtx {
  bool training = false;
  Rng* dropout_rng = nullptr;
  // When set, every post-softmax attention matrix (B*heads, T, T) built
  // during the forward pass is appended here.
  std::vector<ad::NodePtr<S>>* attention_sink = nullptr;
};

// Symmetric-normalized adjacency D^{-1/2} (A+I) D^{-1/2} of the complete
// graph on m nodes with self-loops; every entry works out to 1/m.
inline std::vector<double> gcn_normalized_adjacency(int m) {
  std::vector<double> a_plus_i(static_cast<std::size_t>(m) * m, 1.0);
  std::vector<double> dinv_sqrt(m);
  for (int i = 0; i < m; ++i) {
    double deg = 0.0;
    for (int j = 0; j < m; ++j) deg += a_plus_i[static_cast<std::size_t>(i) * m + j];
    dinv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  std::vector<double> out(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      out[static_cast<std::size_t>(i) * m + j] =
          dinv_sqrt[i] * a_plus_i[static_cast<std::size_t>(i) * m + j] * dinv_sqrt[j];
  return out;
}

// The hierarchical staging network: multi-scale CNN token encoder,
// intra-epoch transformer, inter-epoch transformer over the context window,
// graph (or concatenation) fusion across modalities, softmax classifier.
// Each modality owns its encoder stack unless share_encoders is set.
template <class S>
class SleepModel {
 public:
  using NodeP = ad::NodePtr<S>;

  ModelConfig config;
  ad::ParameterStore<S> params;

  SleepModel(ModelConfig cfg, std::uint64_t init_seed) : config(std::move(cfg)) {
    config.validate();
    Rng rng(derive_seed(init_seed, "model-init"));
    const int enc_count = config.share_encoders ? 1 : config.num_modalities();
    for (int e = 0; e < enc_count; ++e) build_encoder(encoder_prefix(e), rng);
    const int d = config.d_tr;
    if (config.fusion == Fusion::Gcn) {
      create_affine("fuse.gcn.l1", d, d, rng);
      create_affine("fuse.gcn.l2", d, d, rng);
    } else {
      create_affine("fuse.concat", config.num_modalities() * d, d, rng);
    }
    create_affine("head", d, config.num_classes, rng);
  }

  // --- spec-level building blocks -----------------------------------------

  // (N, 1, token_len) raw tokens -> (N, d_cnn) embeddings.
  NodeP cnn_tokenize(int mod, const NodeP& x, const ForwardCtx<S>& ctx) {
    ad::check(x->value.ndim() == 3 && x->value.dim(1) == 1 &&
                  x->value.dim(2) == config.token_len,
              "cnn_tokenize: expected (N,1," + std::to_string(config.token_len) +
                  "), got " + x->value.shape_str());
    const std::string p = prefix(mod) + "cnn.";
    std::vector<NodeP> branches;
    for (int k : config.cnn_kernels) {
      const auto pad = ad::same_padding(k);
      auto y = ad::conv1d(x, params.get(p + "branch" + std::to_string(k) + ".w"),
                          params.get(p + "branch" + std::to_string(k) + ".b"), 1,
                          pad.left, pad.right);
      branches.push_back(ad::relu(y));
    }
    auto cat = ad::concat(branches, 1);  // (N, d_cnn, L)
    const auto tpad = ad::same_padding(config.cnn_trunk_kernel);
    auto t = ad::conv1d(cat, params.get(p + "trunk.w"), params.get(p + "trunk.b"),
                        1, tpad.left, tpad.right);
    t = ad::batch_norm1d(t, params.get(p + "bn.g"), params.get(p + "bn.b"),
                         params.tensor(p + "bn.running_mean"),
                         params.tensor(p + "bn.running_var"), ctx.training);
    t = ad::relu(t);
    t = ad::maxpool1d(t, config.cnn_pool, config.cnn_pool);
    return ad::mean_lastdim(t);  // adaptive average pool to length 1
  }

  // (B, tokens_per_epoch, d_cnn) -> (B, d_tr) segment embeddings.
  NodeP intra_encode(int mod, const NodeP& z, const ForwardCtx<S>& ctx) {
    ad::check(z->value.ndim() == 3 && z->value.dim(1) == config.tokens_per_epoch,
              "intra_encode: expected (B," +
                  std::to_string(config.tokens_per_epoch) + ",d_cnn), got " +
                  z->value.shape_str());
    const std::string p = prefix(mod) + "intra.";
    auto x = linear3(z, p + "proj");
    x = ad::add_rows(x, params.get(p + "pos"));
    for (int l = 0; l < config.transformer_layers; ++l)
      x = transformer_layer(x, p + "l" + std::to_string(l) + ".", ctx);
    return ad::mean_axis1(x);
  }

  // (B, context_window, d_tr) -> (B, d_tr) context embeddings.
  NodeP inter_encode(int mod, const NodeP& f, const ForwardCtx<S>& ctx) {
    ad::check(f->value.ndim() == 3 && f->value.dim(1) == config.context_window,
              "inter_encode: expected (B," +
                  std::to_string(config.context_window) + ",d_tr), got " +
                  f->value.shape_str());
    const std::string p = prefix(mod) + "inter.";
    auto x = ad::add_rows(f, params.get(p + "pos"));
    for (int l = 0; l < config.transformer_layers; ++l)
      x = transformer_layer(x, p + "l" + std::to_string(l) + ".", ctx);
    if (config.inter_pool == InterPool::Mean) return ad::mean_axis1(x);
    // last-position pooling
    const int B = x->value.dim(0), W = x->value.dim(1), D = x->value.dim(2);
    std::vector<int> last(B);
    for (int b = 0; b < B; ++b) last[b] = b * W + (W - 1);
    return ad::gather_rows(ad::reshape(x, {B * W, D}), last);
  }

  // (B, num_modalities, d_tr) -> (B, d_tr).
  NodeP fuse(const NodeP& h, const ForwardCtx<S>& ctx) {
    const int M = config.num_modalities();
    ad::check(h->value.ndim() == 3 && h->value.dim(1) == M,
              "fuse: expected (B," + std::to_string(M) + ",d_tr), got " +
                  h->value.shape_str());
    if (config.fusion == Fusion::Concat) {
      const int B = h->value.dim(0), D = h->value.dim(2);
      auto flat = ad::reshape(h, {B, M * D});
      return ad::linear(flat, params.get("fuse.concat.w"),
                        params.get("fuse.concat.b"));
    }
    // Two GCN layers over the complete modality graph, then node-mean.
    const int B = h->value.dim(0), D = h->value.dim(2);
    const auto ahat = gcn_normalized_adjacency(M);
    ad::Tensor<S> ab({B, M, M});
    for (int b = 0; b < B; ++b)
      for (std::size_t i = 0; i < ahat.size(); ++i)
        ab.data[static_cast<std::size_t>(b) * M * M + i] = static_cast<S>(ahat[i]);
    auto abar = ad::constant(std::move(ab));
    auto mix1 = ad::bmm(abar, h);
    auto l1 = ad::relu(linear3(mix1, "fuse.gcn.l1"));
    auto mix2 = ad::bmm(abar, l1);
    auto l2 = linear3(mix2, "fuse.gcn.l2");
    (void)ctx;
    return ad::mean_axis1(l2);  // mean across modality nodes
  }

  // (B, d_tr) -> (B, num_classes) logits.
  NodeP classify_logits(const NodeP& k) {
    return ad::linear(k, params.get("head.w"), params.get("head.b"));
  }

  // --- composition ---------------------------------------------------------

  // Per-epoch segment embeddings for one modality: tokens (E, T, token_len)
  // -> (E, d_tr). In cnn_only mode the transformer level is bypassed: token
  // embeddings are mean-pooled and projected.
  NodeP encode_epochs(int mod, const NodeP& tokens, const ForwardCtx<S>& ctx) {
    ad::check(tokens->value.ndim() == 3 &&
                  tokens->value.dim(1) == config.tokens_per_epoch &&
                  tokens->value.dim(2) == config.token_len,
              "encode_epochs: expected (E," +
                  std::to_string(config.tokens_per_epoch) + "," +
                  std::to_string(config.token_len) + "), got " +
                  tokens->value.shape_str());
    const int E = tokens->value.dim(0), T = config.tokens_per_epoch;
    auto flat = ad::reshape(tokens, {E * T, 1, config.token_len});
    auto z = cnn_tokenize(mod, flat, ctx);
    auto z3 = ad::reshape(z, {E, T, config.d_cnn});
    if (config.temporal == Temporal::CnnOnly) {
      auto zm = ad::mean_axis1(z3);
      return ad::linear(zm, params.get(prefix(mod) + "intra.proj.w"),
                        params.get(prefix(mod) + "intra.proj.b"));
    }
    return intra_encode(mod, z3, ctx);
  }

  // Logits for a set of context windows over pre-tokenized epochs.
  // `tokens_per_modality[m]` holds (E, T, token_len) for E consecutive
  // epochs; each entry of `window_indices` lists the context_window local
  // epoch indices of one window in causal order (left-edge repetition
  // already applied by the caller). cnn_only mode consumes only each
  // window's final epoch.
  NodeP window_logits(const std::vector<NodeP>& tokens_per_modality,
                      const std::vector<std::vector<int>>& window_indices,
                      const ForwardCtx<S>& ctx) {
    const int M = config.num_modalities();
    ad::check(static_cast<int>(tokens_per_modality.size()) == M,
              "window_logits: expected " + std::to_string(M) +
                  " modality tensors");
    const int W = config.context_window;
    const int Nw = static_cast<int>(window_indices.size());
    ad::check(Nw > 0, "window_logits: no windows");
    for (const auto& wi : window_indices)
      ad::check(static_cast<int>(wi.size()) == W,
                "window_logits: each window needs " + std::to_string(W) +
                    " epochs");
    std::vector<NodeP> per_mod;
    for (int m = 0; m < M; ++m) {
      auto emb = encode_epochs(m, tokens_per_modality[m], ctx);  // (E, d_tr)
      NodeP h;
      if (config.temporal == Temporal::CnnOnly) {
        std::vector<int> last(Nw);
        for (int i = 0; i < Nw; ++i) last[i] = window_indices[i].back();
        h = ad::gather_rows(emb, last);  // (Nw, d_tr)
      } else {
        std::vector<int> flat;
        flat.reserve(static_cast<std::size_t>(Nw) * W);
        for (const auto& wi : window_indices)
          flat.insert(flat.end(), wi.begin(), wi.end());
        auto win = ad::gather_rows(emb, flat);  // (Nw*W, d_tr)
        h = inter_encode(m, ad::reshape(win, {Nw, W, config.d_tr}), ctx);
      }
      per_mod.push_back(ad::reshape(h, {Nw, 1, config.d_tr}));
    }
    auto stacked = per_mod.size() == 1 ? per_mod[0] : ad::concat(per_mod, 1);
    auto fused = fuse(stacked, ctx);
    return classify_logits(fused);
  }

  // Single-window inference: probabilities for the window's last epoch.
  // `window_per_modality[m]` holds the trailing epochs (1 to context_window,
  // causal order) as TokenBatches; for epochs earlier than the context
  // window the first available segment embedding is repeated.
  std::vector<double> forward_full(
      const std::vector<std::vector<TokenBatch>>& window_per_modality,
      const ForwardCtx<S>& ctx = {}) {
    const int M = config.num_modalities();
    if (static_cast<int>(window_per_modality.size()) != M)
      throw ShapeError("forward_full: expected " + std::to_string(M) +
                       " modalities, got " +
                       std::to_string(window_per_modality.size()));
    const std::size_t E = window_per_modality[0].size();
    if (E == 0 || E > static_cast<std::size_t>(config.context_window))
      throw ShapeError("forward_full: window must hold 1.." +
                       std::to_string(config.context_window) + " epochs");
    std::vector<NodeP> tokens;
    for (int m = 0; m < M; ++m) {
      const auto& eps = window_per_modality[m];
      if (eps.size() != E)
        throw ShapeError("forward_full: modalities disagree on window length");
      ad::Tensor<S> t({static_cast<int>(E), config.tokens_per_epoch,
                       config.token_len});
      for (std::size_t e = 0; e < E; ++e) {
        const auto& tb = eps[e];
        if (tb.num_tokens != config.tokens_per_epoch ||
            tb.token_len != config.token_len)
          throw ShapeError("forward_full: token batch geometry mismatch");
        for (std::size_t i = 0; i < tb.tokens.size(); ++i)
          t.data[e * tb.tokens.size() + i] = static_cast<S>(tb.tokens[i]);
      }
      tokens.push_back(ad::leaf(std::move(t)));
    }
    std::vector<std::vector<int>> window(1, std::vector<int>(config.context_window));
    for (int j = 0; j < config.context_window; ++j)
      window[0][j] = std::max(0, static_cast<int>(E) - config.context_window + j);
    auto logits = window_logits(tokens, window, ctx);
    auto probs = ad::softmax_lastdim(logits);
    return std::vector<double>(probs->value.data.begin(),
                               probs->value.data.end());
  }

  // --- internals -----------------------------------------------------------

  std::string encoder_prefix(int e) const {
    if (config.share_encoders) return "enc.";
    return std::string("m.") + modality_name(config.modalities[e]) + ".";
  }

  std::string prefix(int mod) const {
    return encoder_prefix(config.share_encoders ? 0 : mod);
  }

 private:
  void create_affine(const std::string& name, int fan_in, int fan_out, Rng& rng) {
    params.create(name + ".w", uniform_fanin(rng, {fan_in, fan_out}, fan_in));
    params.create(name + ".b", ad::Tensor<S>({fan_out}));
  }

  ad::Tensor<S> uniform_fanin(Rng& rng, std::vector<int> shape, int fan_in) {
    ad::Tensor<S> t(shape);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<S>(rng.uniform(-bound, bound));
    return t;
  }

  void build_encoder(const std::string& p, Rng& rng) {
    const int bc = config.cnn_branch_channels;
    for (int k : config.cnn_kernels) {
      params.create(p + "cnn.branch" + std::to_string(k) + ".w",
                    uniform_fanin(rng, {bc, 1, k}, k));
      params.create(p + "cnn.branch" + std::to_string(k) + ".b",
                    ad::Tensor<S>({bc}));
    }
    const int d = config.d_cnn;
    params.create(p + "cnn.trunk.w",
                  uniform_fanin(rng, {d, d, config.cnn_trunk_kernel},
                                d * config.cnn_trunk_kernel));
    params.create(p + "cnn.trunk.b", ad::Tensor<S>({d}));
    params.create(p + "cnn.bn.g", ad::Tensor<S>({d}, S(1)));
    params.create(p + "cnn.bn.b", ad::Tensor<S>({d}));
    params.create(p + "cnn.bn.running_mean", ad::Tensor<S>({d}), /*frozen=*/true);
    params.create(p + "cnn.bn.running_var", ad::Tensor<S>({d}, S(1)),
                  /*frozen=*/true);

    create_affine(p + "intra.proj", d, config.d_tr, rng);
    if (config.temporal == Temporal::Full) {
      params.create(p + "intra.pos",
                    ad::Tensor<S>({config.tokens_per_epoch, config.d_tr}));
      for (int l = 0; l < config.transformer_layers; ++l)
        build_transformer_layer(p + "intra.l" + std::to_string(l) + ".", rng);
      params.create(p + "inter.pos",
                    ad::Tensor<S>({config.context_window, config.d_tr}));
      for (int l = 0; l < config.transformer_layers; ++l)
        build_transformer_layer(p + "inter.l" + std::to_string(l) + ".", rng);
    }
  }

  void build_transformer_layer(const std::string& p, Rng& rng) {
    const int d = config.d_tr;
    for (const char* nm : {"wq", "wk", "wv", "wo"})
      create_affine(p + "attn." + nm, d, d, rng);
    params.create(p + "ln1.g", ad::Tensor<S>({d}, S(1)));
    params.create(p + "ln1.b", ad::Tensor<S>({d}));
    create_affine(p + "ff.fc1", d, config.d_ff, rng);
    create_affine(p + "ff.fc2", config.d_ff, d, rng);
    params.create(p + "ln2.g", ad::Tensor<S>({d}, S(1)));
    params.create(p + "ln2.b", ad::Tensor<S>({d}));
  }

  // Affine map over the last axis of a 3-D tensor.
  NodeP linear3(const NodeP& x, const std::string& name) {
    const int a = x->value.dim(0), b = x->value.dim(1), d = x->value.dim(2);
    auto flat = ad::reshape(x, {a * b, d});
    auto y = ad::linear(flat, params.get(name + ".w"), params.get(name + ".b"));
    return ad::reshape(y, {a, b, y->value.dim(1)});
  }

  // Multi-head self-attention with per-head 1/sqrt(d_head) scaling,
  // head concatenation and output projection.
  NodeP mhsa(const NodeP& x, const std::string& p, const ForwardCtx<S>& ctx) {
    const int B = x->value.dim(0), T = x->value.dim(1), d = x->value.dim(2);
    const int h = config.num_heads, dh = d / h;
    auto split_heads = [&](const NodeP& v) {
      auto r = ad::reshape(v, {B, T, h, dh});
      auto pm = ad::permute(r, {0, 2, 1, 3});  // (B,h,T,dh)
      return ad::reshape(pm, {B * h, T, dh});
    };
    auto q = split_heads(linear3(x, p + "attn.wq"));
    auto k = split_heads(linear3(x, p + "attn.wk"));
    auto v = split_heads(linear3(x, p + "attn.wv"));
    auto scores = ad::bmm(q, ad::permute(k, {0, 2, 1}));  // (B*h,T,T)
    scores = ad::scale(scores, 1.0 / std::sqrt(static_cast<double>(dh)));
    auto attn = ad::softmax_lastdim(scores);
    if (ctx.attention_sink) ctx.attention_sink->push_back(attn);
    auto mixed = ad::bmm(attn, v);  // (B*h,T,dh)
    auto merged = ad::reshape(ad::permute(ad::reshape(mixed, {B, h, T, dh}),
                                          {0, 2, 1, 3}),
                              {B, T, d});
    return linear3(merged, p + "attn.wo");
  }

  // Post-norm transformer layer: MHSA, residual add, layer norm, then the
  // position-wise feed-forward (d -> d_ff -> d with ReLU), residual add,
  // layer norm. Dropout sits on each sublayer output.
  NodeP transformer_layer(const NodeP& x, const std::string& p,
                          const ForwardCtx<S>& ctx) {
    auto a = mhsa(x, p, ctx);
    a = ad::dropout(a, config.dropout, ctx.dropout_rng, ctx.training);
    auto x1 = ad::layer_norm(ad::add(x, a), params.get(p + "ln1.g"),
                             params.get(p + "ln1.b"));
    auto f = linear3(ad::relu(linear3(x1, p + "ff.fc1")), p + "ff.fc2");
    f = ad::dropout(f, config.dropout, ctx.dropout_rng, ctx.training);
    return ad::layer_norm(ad::add(x1, f), params.get(p + "ln2.g"),
                          params.get(p + "ln2.b"));
  }
};

}  // namespace somnilex
