#include "entransformer/transformer.hpp"

#include <cmath>
#include <utility>

#include "entransformer/errors.hpp"
#include "entransformer/ops.hpp"

namespace entransformer {

std::string to_string(Activation act) { return act == Activation::kRelu ? "relu" : "gelu"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "gelu") return Activation::kGelu;
  throw ConfigError("activation", "unsupported activation '" + name + "' (expected relu or gelu)");
}

void TransformerConfig::validate() const {
  if (n_head < 1) throw ConfigError("n_head", "must be >= 1");
  if (d_model < 1) throw ConfigError("d_model", "must be >= 1");
  if (d_model % n_head != 0) {
    throw ConfigError("d_model", "d_model=" + std::to_string(d_model) + " is not divisible by n_head=" +
                                     std::to_string(n_head));
  }
  if (n_layers < 1) throw ConfigError("n_layers", "must be >= 1");
  if (d_ff < 1) throw ConfigError("d_ff", "must be >= 1");
  if (!(dropout >= 0.0 && dropout <= 0.4)) throw ConfigError("dropout", "must lie in [0, 0.4]");
  if (context_len < 1) throw ConfigError("context_length", "must be >= 1");
  if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
  if (output_dim < 1) throw ConfigError("output_dim", "must be >= 1");
  if (input_dim < output_dim) throw ConfigError("input_dim", "must be >= output_dim");
}

Tensor positional_encoding(std::size_t length, std::size_t d_model) {
  std::vector<double> table(length * d_model);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model);
      const double freq = std::pow(10000.0, -exponent);
      const double angle = static_cast<double>(t) * freq;
      table[t * d_model + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from({length, d_model}, std::move(table));
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t n_head,
                                    double dropout_rate, ForwardContext& ctx, Tensor* weights) {
  if (q.rank() != 3 || k.rank() != 3 || v.rank() != 3) throw DimensionError("attention expects rank-3 inputs");
  const std::size_t b = q.dim(0), lq = q.dim(1), d_model = q.dim(2);
  const std::size_t lk = k.dim(1);
  if (k.dim(0) != b || v.dim(0) != b || k.dim(2) != d_model || v.dim(2) != d_model || v.dim(1) != lk) {
    throw DimensionError("attention: incompatible shapes Q" + shape_string(q.shape()) + " K" +
                         shape_string(k.shape()) + " V" + shape_string(v.shape()));
  }
  if (n_head == 0 || d_model % n_head != 0) {
    throw DimensionError("attention: d_model=" + std::to_string(d_model) + " not divisible by n_head=" +
                         std::to_string(n_head));
  }
  const std::size_t dh = d_model / n_head;
  auto split = [&](const Tensor& x, std::size_t len) {
    return reshape(permute(reshape(x, {b, len, n_head, dh}), {0, 2, 1, 3}), {b * n_head, len, dh});
  };
  Tensor qh = split(q, lq), kh = split(k, lk), vh = split(v, lk);
  Tensor scores = scale(bmm(qh, kh, /*transpose_b=*/true), 1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor attn = softmax(scores, 2);
  if (weights) *weights = attn;
  if (ctx.training && dropout_rate > 0.0) attn = dropout(attn, dropout_rate, *ctx.rng);
  Tensor heads = bmm(attn, vh);
  return reshape(permute(reshape(heads, {b, n_head, lq, dh}), {0, 2, 1, 3}), {b, lq, d_model});
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul_last(x, weight);
  return bias.defined() ? add_broadcast(y, bias) : y;
}

Tensor MultiHeadAttention::operator()(const Tensor& queries, const Tensor& memory, double dropout_rate,
                                      ForwardContext& ctx, Tensor* weights) const {
  Tensor heads =
      scaled_dot_product_attention(query(queries), key(memory), value(memory), n_head, dropout_rate, ctx, weights);
  return output(heads);
}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm(x, gain, shift); }

Tensor FeedForward::operator()(const Tensor& x, double dropout_rate, ForwardContext& ctx) const {
  Tensor h = inner(x);
  h = activation == Activation::kRelu ? relu(h) : gelu(h);
  if (ctx.training && dropout_rate > 0.0) h = dropout(h, dropout_rate, *ctx.rng);
  return outer(h);
}

TransformerModel::TransformerModel(const TransformerConfig& config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(init_seed);
  const std::size_t d = config_.d_model;

  input_projection_ = make_linear("input", config_.input_dim, d, true, rng);
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string prefix = "encoder." + std::to_string(l) + ".";
    EncoderLayer layer;
    layer.self_attention = make_attention(prefix + "self_attn", rng);
    layer.norm1 = make_norm(prefix + "norm1");
    layer.feed_forward = make_feed_forward(prefix + "ff", rng);
    layer.norm2 = make_norm(prefix + "norm2");
    encoder_.push_back(std::move(layer));
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> queries(config_.horizon * d);
  for (double& v : queries) v = normal(rng) / std::sqrt(static_cast<double>(d));
  query_embeddings_ = make_param("decoder.queries", {config_.horizon, d}, std::move(queries));

  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string prefix = "decoder." + std::to_string(l) + ".";
    DecoderLayer layer;
    layer.self_attention = make_attention(prefix + "self_attn", rng);
    layer.norm1 = make_norm(prefix + "norm1");
    layer.cross_attention = make_attention(prefix + "cross_attn", rng);
    layer.norm2 = make_norm(prefix + "norm2");
    layer.feed_forward = make_feed_forward(prefix + "ff", rng);
    layer.norm3 = make_norm(prefix + "norm3");
    decoder_.push_back(std::move(layer));
  }
  head_ = make_linear("head", d, config_.output_dim, true, rng);

  encoder_positions_ = positional_encoding(config_.context_len, d);
  decoder_positions_ = positional_encoding(config_.horizon, d);
}

Tensor TransformerModel::make_param(const std::string& name, Shape shape, std::vector<double> values) {
  Tensor t = Tensor::from(std::move(shape), std::move(values), /*requires_grad=*/true);
  params_.push_back({name, t});
  return t;
}

Linear TransformerModel::make_linear(const std::string& name, std::size_t in, std::size_t out, bool with_bias,
                                     std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> law(-bound, bound);
  std::vector<double> w(in * out);
  for (double& v : w) v = law(rng);
  Linear layer;
  layer.weight = make_param(name + ".weight", {in, out}, std::move(w));
  if (with_bias) layer.bias = make_param(name + ".bias", {out}, std::vector<double>(out, 0.0));
  return layer;
}

MultiHeadAttention TransformerModel::make_attention(const std::string& name, std::mt19937_64& rng) {
  const std::size_t d = config_.d_model;
  MultiHeadAttention mha;
  mha.n_head = config_.n_head;
  mha.query = make_linear(name + ".q", d, d, true, rng);
  // A key bias shifts every score of a query row equally and cancels in the
  // softmax, so its gradient is identically zero.
  mha.key = make_linear(name + ".k", d, d, false, rng);
  mha.value = make_linear(name + ".v", d, d, true, rng);
  mha.output = make_linear(name + ".o", d, d, true, rng);
  return mha;
}

LayerNorm TransformerModel::make_norm(const std::string& name) {
  const std::size_t d = config_.d_model;
  return {make_param(name + ".gain", {d}, std::vector<double>(d, 1.0)),
          make_param(name + ".shift", {d}, std::vector<double>(d, 0.0))};
}

FeedForward TransformerModel::make_feed_forward(const std::string& name, std::mt19937_64& rng) {
  FeedForward ff;
  ff.inner = make_linear(name + ".inner", config_.d_model, config_.d_ff, true, rng);
  ff.outer = make_linear(name + ".outer", config_.d_ff, config_.d_model, true, rng);
  ff.activation = config_.activation;
  return ff;
}

std::size_t TransformerModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Tensor TransformerModel::encode(const Tensor& x, ForwardContext& ctx) const {
  if (x.rank() != 3 || x.dim(1) != config_.context_len || x.dim(2) != config_.input_dim) {
    throw DimensionError("encode: expected (b, " + std::to_string(config_.context_len) + ", " +
                         std::to_string(config_.input_dim) + "), got " + shape_string(x.shape()));
  }
  auto values = x.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      const std::size_t width = config_.input_dim;
      const std::size_t per_row = config_.context_len * width;
      throw NumericError("encode: non-finite input at batch " + std::to_string(i / per_row) + ", step " +
                         std::to_string((i % per_row) / width) + ", feature " + std::to_string(i % width));
    }
  }
  const double rate = config_.dropout;
  Tensor h = add_broadcast(input_projection_(x), encoder_positions_);
  for (const EncoderLayer& layer : encoder_) {
    h = layer.norm1(add(h, layer.self_attention(h, h, rate, ctx)));
    h = layer.norm2(add(h, layer.feed_forward(h, rate, ctx)));
  }
  return h;
}

Tensor TransformerModel::decode(const Tensor& encoded, ForwardContext& ctx) const {
  if (encoded.rank() != 3 || encoded.dim(2) != config_.d_model) {
    throw DimensionError("decode: expected (b, l, " + std::to_string(config_.d_model) + "), got " +
                         shape_string(encoded.shape()));
  }
  for (double v : encoded.data()) {
    if (!std::isfinite(v)) throw NumericError("decode: non-finite encoder state");
  }
  const std::size_t b = encoded.dim(0);
  const double rate = config_.dropout;
  Tensor slots = add_broadcast(query_embeddings_, decoder_positions_);
  Tensor h = add_broadcast(Tensor::zeros({b, config_.horizon, config_.d_model}), slots);
  for (const DecoderLayer& layer : decoder_) {
    h = layer.norm1(add(h, layer.self_attention(h, h, rate, ctx)));
    h = layer.norm2(add(h, layer.cross_attention(h, encoded, rate, ctx)));
    h = layer.norm3(add(h, layer.feed_forward(h, rate, ctx)));
  }
  return head_(h);
}

Tensor TransformerModel::forward(const Tensor& x, ForwardContext& ctx) const { return decode(encode(x, ctx), ctx); }

Tensor forward_pass(const TransformerModel& model, const Tensor& x_expanded, std::size_t replicas,
                    const NoiseConfig& noise, std::mt19937_64& noise_rng, ForwardContext& ctx) {
  if (replicas < 1 || x_expanded.rank() < 1 || x_expanded.dim(0) % replicas != 0) {
    throw ContractViolation("forward_pass: batch extent must be divisible by M=" + std::to_string(replicas));
  }
  return model.forward(inject_noise(x_expanded, noise, noise_rng), ctx);
}

}  // namespace entransformer
