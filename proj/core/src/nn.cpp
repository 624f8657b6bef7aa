#include "raypath/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "raypath/errors.hpp"
#include "raypath/geometry.hpp"

namespace raypath {

namespace {

// Fixed-order four-accumulator dot product: deterministic summation order
// regardless of optimization level, still pipelines well.
double dot_fixed(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

double activate(double x, Activation act, double slope) {
  switch (act) {
    case Activation::Identity:
      return x;
    case Activation::Relu:
      return x > 0.0 ? x : 0.0;
    case Activation::LeakyRelu:
      return x > 0.0 ? x : slope * x;
  }
  return x;
}

double activate_grad(double pre, Activation act, double slope) {
  switch (act) {
    case Activation::Identity:
      return 1.0;
    case Activation::Relu:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::LeakyRelu:
      return pre > 0.0 ? 1.0 : slope;
  }
  return 1.0;
}

DenseLayer make_layer(std::size_t out, std::size_t in, Activation act) {
  DenseLayer layer;
  layer.w = Tensor::zeros({out, in});
  layer.b = Tensor::zeros({out});
  layer.act = act;
  return layer;
}

void he_uniform_fill(Tensor& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.dims[1]));
  for (double& v : w.data) v = rng.uniform(-limit, limit);
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> d) {
  Tensor t;
  t.dims = std::move(d);
  std::size_t n = 1;
  for (std::size_t s : t.dims) n *= s;
  t.data.assign(n, 0.0);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

MlpGrads zero_grads(const Mlp& mlp) {
  MlpGrads g;
  g.layers.reserve(mlp.layers.size());
  for (const DenseLayer& l : mlp.layers) {
    g.layers.push_back({Tensor::zeros(l.w.dims), Tensor::zeros(l.b.dims)});
  }
  return g;
}

Tensor mlp_forward(const Mlp& mlp, const Tensor& input, MlpCache* cache) {
  if (input.cols() != mlp.in_dim()) {
    throw ShapeMismatch("mlp_forward: input width " + std::to_string(input.cols()) +
                        " != expected " + std::to_string(mlp.in_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->preact.clear();
  }
  const std::size_t batch = input.rows();
  Tensor x = input;
  for (const DenseLayer& layer : mlp.layers) {
    const std::size_t out = layer.out_dim();
    const std::size_t in = layer.in_dim();
    Tensor pre = Tensor::zeros({batch, out});
    for (std::size_t r = 0; r < batch; ++r) {
      const double* xr = x.row(r);
      double* pr = pre.row(r);
      for (std::size_t o = 0; o < out; ++o) {
        pr[o] = layer.b.data[o] + dot_fixed(layer.w.row(o), xr, in);
      }
    }
    if (cache) cache->inputs.push_back(std::move(x));
    Tensor y = Tensor::zeros({batch, out});
    for (std::size_t i = 0; i < pre.size(); ++i) {
      y.data[i] = activate(pre.data[i], layer.act, mlp.leaky_slope);
    }
    if (cache) cache->preact.push_back(std::move(pre));
    x = std::move(y);
  }
  return x;
}

Tensor mlp_backward(const Mlp& mlp, const MlpCache& cache, const Tensor& grad_out,
                    MlpGrads& grads) {
  if (cache.inputs.size() != mlp.layers.size() || grads.layers.size() != mlp.layers.size()) {
    throw ShapeMismatch("mlp_backward: cache/grads do not match the network");
  }
  if (grad_out.cols() != mlp.out_dim() || grad_out.rows() != cache.preact.back().rows()) {
    throw ShapeMismatch("mlp_backward: grad_out shape mismatch");
  }
  Tensor delta = grad_out;
  for (std::size_t li = mlp.layers.size(); li-- > 0;) {
    const DenseLayer& layer = mlp.layers[li];
    const Tensor& pre = cache.preact[li];
    const Tensor& x = cache.inputs[li];
    const std::size_t batch = delta.rows();
    const std::size_t out = layer.out_dim();
    const std::size_t in = layer.in_dim();

    // delta <- delta * act'(pre)
    for (std::size_t i = 0; i < delta.size(); ++i) {
      delta.data[i] *= activate_grad(pre.data[i], layer.act, mlp.leaky_slope);
    }

    LayerGrads& lg = grads.layers[li];
    for (std::size_t r = 0; r < batch; ++r) {
      const double* dr = delta.row(r);
      const double* xr = x.row(r);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        double* wg = lg.w.row(o);
        for (std::size_t c = 0; c < in; ++c) wg[c] += d * xr[c];
        lg.b.data[o] += d;
      }
    }

    Tensor dx = Tensor::zeros({batch, in});
    for (std::size_t r = 0; r < batch; ++r) {
      const double* dr = delta.row(r);
      double* dxr = dx.row(r);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        const double* wr = layer.w.row(o);
        for (std::size_t c = 0; c < in; ++c) dxr[c] += d * wr[c];
      }
    }
    delta = std::move(dx);
  }
  return delta;
}

FlowModel make_flow_model(const ModelConfig& cfg, Rng& rng) {
  if (cfg.d < 1 || cfg.k < 1) throw ShapeMismatch("ModelConfig requires d >= 1 and k >= 1");
  const auto d = static_cast<std::size_t>(cfg.d);
  const auto sd = static_cast<std::size_t>(cfg.state_dim());
  const auto fin = static_cast<std::size_t>(cfg.flow_in_dim());

  FlowModel m;
  m.cfg = cfg;
  m.object_encoder.leaky_slope = cfg.leaky_slope;
  m.object_encoder.layers = {make_layer(2 * d, 9, Activation::Relu),
                             make_layer(2 * d, 2 * d, Activation::Relu),
                             make_layer(d, 2 * d, Activation::Identity)};
  m.state_encoder.leaky_slope = cfg.leaky_slope;
  m.state_encoder.layers = {make_layer(sd, sd, Activation::Identity)};
  m.scene_encoder.leaky_slope = cfg.leaky_slope;
  m.scene_encoder.layers = {make_layer(2 * d, d, Activation::Relu),
                            make_layer(2 * d, 2 * d, Activation::Relu),
                            make_layer(d, 2 * d, Activation::Identity)};
  m.flow_head.leaky_slope = cfg.leaky_slope;
  m.flow_head.layers = {make_layer(2 * fin, fin, Activation::LeakyRelu),
                        make_layer(2 * fin, 2 * fin, Activation::LeakyRelu),
                        make_layer(1, 2 * fin, Activation::Identity)};

  for_each_tensor(m, [&](const std::string& name, Tensor& t) {
    if (t.dims.size() != 2) return;  // biases stay zero
    if (name == "flow_head.2.W") return;  // zero final layer: initial flows are 1
    he_uniform_fill(t, rng);
  });
  return m;
}

FlowModelGrads zero_grads(const FlowModel& model) {
  return FlowModelGrads{zero_grads(model.object_encoder), zero_grads(model.state_encoder),
                        zero_grads(model.scene_encoder), zero_grads(model.flow_head)};
}

std::size_t parameter_count(const ModelConfig& cfg) {
  Rng rng = Rng::seeded(0);
  FlowModel m = make_flow_model(cfg, rng);
  std::size_t n = 0;
  for_each_tensor(m, [&](const std::string&, Tensor& t) { n += t.size(); });
  return n;
}

Tensor canonical_object_inputs(const Scene& scene) {
  const CanonicalFrame frame = canonical_frame(scene.tx, scene.rx);
  const std::size_t n = scene.triangles.size();
  Tensor x = Tensor::zeros({n, 9});
  for (std::size_t i = 0; i < n; ++i) {
    const Triangle& t = scene.triangles[i];
    double* r = x.row(i);
    int c = 0;
    for (const Vec3* v : {&t.v0, &t.v1, &t.v2}) {
      const Vec3 p = to_canonical(frame, *v);
      r[c++] = p.x;
      r[c++] = p.y;
      r[c++] = p.z;
    }
  }
  return x;
}

SceneEncoding encode_scene(const FlowModel& model, const Tensor& canonical_vertices,
                           EncodeCache* cache) {
  const std::size_t n = canonical_vertices.rows();
  if (n == 0) throw EmptyScene("encode_scene: scene has no objects");
  if (canonical_vertices.cols() != 9) {
    throw ShapeMismatch("encode_scene: expected N x 9 input");
  }
  SceneEncoding enc;
  enc.object_embeddings =
      mlp_forward(model.object_encoder, canonical_vertices, cache ? &cache->object_cache : nullptr);

  const auto d = static_cast<std::size_t>(model.cfg.d);
  Tensor mean = Tensor::zeros({1, d});
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = enc.object_embeddings.row(i);
    for (std::size_t c = 0; c < d; ++c) mean.data[c] += r[c];
  }
  for (double& v : mean.data) v /= static_cast<double>(n);
  if (cache) cache->mean_embedding = mean;
  enc.scene_embedding = mlp_forward(model.scene_encoder, mean, cache ? &cache->scene_cache : nullptr);
  return enc;
}

Tensor encode_state(const FlowModel& model, const PathCandidate& partial,
                    const Tensor& object_embeddings, MlpCache* cache) {
  if (!partial.prefix_complete()) {
    throw IncompleteTrajectory("encode_state: partial candidate is not prefix-complete");
  }
  const auto d = static_cast<std::size_t>(model.cfg.d);
  const auto k = static_cast<std::size_t>(model.cfg.k);
  if (partial.sequence.size() != k) {
    throw ShapeMismatch("encode_state: candidate order does not match model K");
  }
  Tensor x = Tensor::zeros({1, k * d});
  for (std::size_t slot = 0; slot < k; ++slot) {
    const std::int32_t idx = partial.sequence[slot];
    if (idx < 0) continue;  // zero vector for unchosen slots
    if (static_cast<std::size_t>(idx) >= object_embeddings.rows()) {
      throw IndexOutOfRange("encode_state: object index " + std::to_string(idx) +
                            " out of range");
    }
    const double* emb = object_embeddings.row(static_cast<std::size_t>(idx));
    std::copy(emb, emb + d, x.data.data() + slot * d);
  }
  return mlp_forward(model.state_encoder, x, cache);
}

Tensor flow_head_input(const ModelConfig& cfg, const Tensor& object_embeddings,
                       const Tensor& state_embedding, const Tensor& scene_embedding) {
  const std::size_t n = object_embeddings.rows();
  const auto d = static_cast<std::size_t>(cfg.d);
  const auto sd = static_cast<std::size_t>(cfg.state_dim());
  if (object_embeddings.cols() != d || state_embedding.size() != sd ||
      scene_embedding.size() != d) {
    throw ShapeMismatch("flow_head_input: embedding widths do not match the config");
  }
  Tensor x = Tensor::zeros({n, d + sd + d});
  for (std::size_t i = 0; i < n; ++i) {
    double* r = x.row(i);
    std::copy(object_embeddings.row(i), object_embeddings.row(i) + d, r);
    std::copy(state_embedding.data.begin(), state_embedding.data.end(), r + d);
    std::copy(scene_embedding.data.begin(), scene_embedding.data.end(), r + d + sd);
  }
  return x;
}

std::vector<double> compute_flows(const FlowModel& model, const Tensor& object_embeddings,
                                  const Tensor& state_embedding, const Tensor& scene_embedding,
                                  MlpCache* head_cache, Tensor* head_input) {
  Tensor x = flow_head_input(model.cfg, object_embeddings, state_embedding, scene_embedding);
  Tensor z = mlp_forward(model.flow_head, x, head_cache);
  if (head_input) *head_input = std::move(x);
  std::vector<double> flows(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    // clamped exponent: keeps flows strictly positive and finite even when a
    // long-suppressed logit would underflow exp() to exactly zero
    flows[i] = std::exp(std::clamp(z.data[i], -300.0, 300.0));
  }
  return flows;
}

AdamState make_adam_state(const FlowModel& model) {
  AdamState s;
  for_each_tensor(const_cast<FlowModel&>(model), [&](const std::string&, Tensor& t) {
    s.m.push_back(Tensor::zeros(t.dims));
    s.v.push_back(Tensor::zeros(t.dims));
  });
  return s;
}

void optimizer_step(FlowModel& model, const FlowModelGrads& grads, AdamState& state, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

  std::vector<const Tensor*> grad_list;
  auto collect = [&](const MlpGrads& g) {
    for (const LayerGrads& l : g.layers) {
      grad_list.push_back(&l.w);
      grad_list.push_back(&l.b);
    }
  };
  collect(grads.object_encoder);
  collect(grads.state_encoder);
  collect(grads.scene_encoder);
  collect(grads.flow_head);

  std::size_t ti = 0;
  for_each_tensor(model, [&](const std::string& name, Tensor& t) {
    const Tensor& g = *grad_list[ti];
    Tensor& m = state.m[ti];
    Tensor& v = state.v[ti];
    if (!t.same_shape(g)) throw ShapeMismatch("optimizer_step: gradient shape mismatch at " + name);
    for (std::size_t i = 0; i < t.size(); ++i) {
      m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g.data[i];
      v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      t.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    ++ti;
  });
}

}  // namespace raypath
