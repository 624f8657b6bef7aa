#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "raypath/rng.hpp"
#include "raypath/tracer.hpp"

namespace raypath {

// Row-major dense tensor, double precision throughout.
struct Tensor {
  std::vector<std::size_t> dims;
  std::vector<double> data;

  static Tensor zeros(std::vector<std::size_t> d);

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return dims.empty() ? 0 : dims[0]; }
  std::size_t cols() const { return dims.size() < 2 ? 1 : dims[1]; }
  double* row(std::size_t r) { return data.data() + r * cols(); }
  const double* row(std::size_t r) const { return data.data() + r * cols(); }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  bool same_shape(const Tensor& o) const { return dims == o.dims; }
  bool all_finite() const;
};

enum class Activation { Identity, Relu, LeakyRelu };

struct DenseLayer {
  Tensor w;  // out x in
  Tensor b;  // out
  Activation act = Activation::Identity;

  std::size_t in_dim() const { return w.dims[1]; }
  std::size_t out_dim() const { return w.dims[0]; }
};

struct Mlp {
  std::vector<DenseLayer> layers;
  double leaky_slope = 0.01;

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
};

// Forward cache: the input to each layer plus each layer's pre-activation.
struct MlpCache {
  std::vector<Tensor> inputs;
  std::vector<Tensor> preact;
};

struct LayerGrads {
  Tensor w, b;
};

struct MlpGrads {
  std::vector<LayerGrads> layers;
};

MlpGrads zero_grads(const Mlp& mlp);

// Batched affine + activation per layer; rows of `input` are independent
// samples. When `cache` is non-null it is filled for a later backward pass.
// Throws ShapeMismatch when the input width differs from the first layer.
Tensor mlp_forward(const Mlp& mlp, const Tensor& input, MlpCache* cache = nullptr);

// Exact reverse-mode gradients for a cached forward pass. Accumulates
// parameter gradients into `grads` and returns the gradient w.r.t. the input.
Tensor mlp_backward(const Mlp& mlp, const MlpCache& cache, const Tensor& grad_out,
                    MlpGrads& grads);

struct ModelConfig {
  int d = 128;  // embedding size
  int k = 1;    // interaction order
  double leaky_slope = 0.01;

  int state_dim() const { return k * d; }                 // d'
  int scene_dim() const { return d; }                     // d''
  int flow_in_dim() const { return d + k * d + d; }       // flow head input width
};

// All learnable parameters: per-object encoder, partial-path state encoder,
// DeepSets-style scene encoder, and the shared scalar flow head (applied per
// object, exponentiated so flows stay strictly positive).
struct FlowModel {
  ModelConfig cfg;
  Mlp object_encoder;  // 9 -> 2d -> 2d -> d, ReLU
  Mlp state_encoder;   // K*d -> K*d, single linear layer
  Mlp scene_encoder;   // d -> 2d -> 2d -> d, ReLU
  Mlp flow_head;       // (d+d'+d'') -> 2(..) -> 2(..) -> 1, LeakyReLU
};

struct FlowModelGrads {
  MlpGrads object_encoder, state_encoder, scene_encoder, flow_head;
};

// He-style uniform fan-in init; the flow head's last layer starts at zero so
// every initial flow is exactly exp(0) = 1 (uniform initial policy).
FlowModel make_flow_model(const ModelConfig& cfg, Rng& rng);
FlowModelGrads zero_grads(const FlowModel& model);
std::size_t parameter_count(const ModelConfig& cfg);

// Visits tensors in a fixed canonical order (the checkpoint/optimizer order).
template <typename ModelT, typename Fn>
void for_each_tensor(ModelT& model, Fn&& fn) {
  auto visit_mlp = [&](auto& mlp, const std::string& prefix) {
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
      fn(prefix + "." + std::to_string(i) + ".W", mlp.layers[i].w);
      fn(prefix + "." + std::to_string(i) + ".b", mlp.layers[i].b);
    }
  };
  visit_mlp(model.object_encoder, "object_encoder");
  visit_mlp(model.state_encoder, "state_encoder");
  visit_mlp(model.scene_encoder, "scene_encoder");
  visit_mlp(model.flow_head, "flow_head");
}

struct EncodeCache {
  MlpCache object_cache;
  MlpCache scene_cache;
  Tensor mean_embedding;  // 1 x d
};

struct SceneEncoding {
  Tensor object_embeddings;  // N x d
  Tensor scene_embedding;    // 1 x d
};

// Canonical per-object inputs: for each triangle the three vertices mapped
// into the tx/rx canonical frame and flattened to 9 numbers.
Tensor canonical_object_inputs(const Scene& scene);

// Shared-weight object encoding plus DeepSets mean + scene encoder.
// Throws EmptyScene when the input has no rows.
SceneEncoding encode_scene(const FlowModel& model, const Tensor& canonical_vertices,
                           EncodeCache* cache = nullptr);

// Concatenates the embeddings of chosen objects in slot order (zero vector
// for -1 slots) and applies the state encoder. Returns a 1 x (K*d) tensor.
Tensor encode_state(const FlowModel& model, const PathCandidate& partial,
                    const Tensor& object_embeddings, MlpCache* cache = nullptr);

// Builds the N x (d+d'+d'') flow-head input rows [emb_i | state | scene].
Tensor flow_head_input(const ModelConfig& cfg, const Tensor& object_embeddings,
                       const Tensor& state_embedding, const Tensor& scene_embedding);

// Per-object flows exp(flow_head([emb_i | state | scene])); strictly
// positive, permutation-equivariant in the objects. When `z_cache`/`head_cache`
// are provided the pre-exponential outputs and forward cache are kept for the
// training backward pass.
std::vector<double> compute_flows(const FlowModel& model, const Tensor& object_embeddings,
                                  const Tensor& state_embedding, const Tensor& scene_embedding,
                                  MlpCache* head_cache = nullptr, Tensor* head_input = nullptr);

// Adam with bias correction (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
struct AdamState {
  std::vector<Tensor> m, v;  // aligned with for_each_tensor order
  std::uint64_t step = 0;
};

AdamState make_adam_state(const FlowModel& model);
void optimizer_step(FlowModel& model, const FlowModelGrads& grads, AdamState& state, double lr);

// Checkpoint file, bit-exact: magic "GFNPATH1", u32 version=1, u32 K, u32 d,
// u32 tensor_count, then per tensor { u32 name_len, name bytes, u32 ndim,
// u64 dims[], f64 little-endian row-major data }. An optional optimizer
// section follows: u32 opt_tensor_count, the same tensor framing with names
// "opt.m.<tensor>" / "opt.v.<tensor>", then a u64 step counter.
void save_checkpoint(const FlowModel& model, const AdamState* opt_state, const std::string& path);

struct Checkpoint {
  FlowModel model;
  std::optional<AdamState> opt_state;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace raypath
