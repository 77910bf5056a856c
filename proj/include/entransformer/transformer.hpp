#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "entransformer/noise.hpp"
#include "entransformer/optim.hpp"
#include "entransformer/tensor.hpp"

namespace entransformer {

enum class Activation { kRelu, kGelu };

std::string to_string(Activation act);
Activation parse_activation(const std::string& name);

struct TransformerConfig {
  std::size_t n_head = 2;
  std::size_t d_model = 16;
  std::size_t n_layers = 1;  // shared by encoder and decoder
  std::size_t d_ff = 32;
  double dropout = 0.0;
  Activation activation = Activation::kGelu;
  std::size_t context_len = 24;  // p
  std::size_t horizon = 24;      // q
  std::size_t input_dim = 1;     // D' = D + D_cov
  std::size_t output_dim = 1;    // D

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Sinusoidal table [length x d_model]. Column pairs (2j, 2j+1) share the
// frequency 10000^(-2j/d_model); even columns hold sin, odd columns cos.
Tensor positional_encoding(std::size_t length, std::size_t d_model);

// Training mode enables dropout, which draws from rng.
struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

// Scaled dot-product attention over already projected q [b, lq, d_model]
// and k, v [b, lk, d_model], computed independently per head (width
// d_model / n_head) and concatenated back to [b, lq, d_model]. When
// `weights` is non-null it receives the softmax weights [b * n_head, lq, lk].
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t n_head,
                                    double dropout, ForwardContext& ctx, Tensor* weights = nullptr);

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out], undefined when the layer has no bias

  Tensor operator()(const Tensor& x) const;
};

struct MultiHeadAttention {
  Linear query, key, value, output;
  std::size_t n_head = 1;

  Tensor operator()(const Tensor& queries, const Tensor& memory, double dropout, ForwardContext& ctx,
                    Tensor* weights = nullptr) const;
};

struct LayerNorm {
  Tensor gain, shift;
  Tensor operator()(const Tensor& x) const;
};

struct FeedForward {
  Linear inner, outer;
  Activation activation = Activation::kGelu;
  Tensor operator()(const Tensor& x, double dropout, ForwardContext& ctx) const;
};

struct EncoderLayer {
  MultiHeadAttention self_attention;
  LayerNorm norm1, norm2;
  FeedForward feed_forward;
};

struct DecoderLayer {
  MultiHeadAttention self_attention, cross_attention;
  LayerNorm norm1, norm2, norm3;
  FeedForward feed_forward;
};

// Encoder-decoder transformer mapping (b, p, D') histories to (b, q, D)
// forecast blocks in a single non-autoregressive pass. The decoder's q query
// slots are learned embeddings plus positional encodings.
class TransformerModel {
 public:
  TransformerModel(const TransformerConfig& config, std::uint64_t init_seed);

  TransformerModel(const TransformerModel&) = delete;
  TransformerModel& operator=(const TransformerModel&) = delete;
  TransformerModel(TransformerModel&&) = default;
  TransformerModel& operator=(TransformerModel&&) = default;

  const TransformerConfig& config() const { return config_; }

  // (b, p, D') -> (b, p, d_model). Throws NumericError on non-finite input.
  Tensor encode(const Tensor& x, ForwardContext& ctx) const;
  // (b, p, d_model) -> (b, q, D)
  Tensor decode(const Tensor& encoded, ForwardContext& ctx) const;
  Tensor forward(const Tensor& x, ForwardContext& ctx) const;

  std::vector<NamedParameter>& parameters() { return params_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  // Access for tests that pin individual sub-layers.
  const std::vector<EncoderLayer>& encoder_layers() const { return encoder_; }

 private:
  Tensor make_param(const std::string& name, Shape shape, std::vector<double> values);
  Linear make_linear(const std::string& name, std::size_t in, std::size_t out, bool with_bias, std::mt19937_64& rng);
  MultiHeadAttention make_attention(const std::string& name, std::mt19937_64& rng);
  LayerNorm make_norm(const std::string& name);
  FeedForward make_feed_forward(const std::string& name, std::mt19937_64& rng);

  TransformerConfig config_;
  std::vector<NamedParameter> params_;
  Linear input_projection_;
  std::vector<EncoderLayer> encoder_;
  Tensor query_embeddings_;  // [q x d_model]
  std::vector<DecoderLayer> decoder_;
  Linear head_;
  Tensor encoder_positions_;
  Tensor decoder_positions_;
};

// Injects pre-additive noise into an already expanded (M*B, p, D') batch
// and runs encode -> decode, producing every trajectory in one pass.
Tensor forward_pass(const TransformerModel& model, const Tensor& x_expanded, std::size_t replicas,
                    const NoiseConfig& noise, std::mt19937_64& noise_rng, ForwardContext& ctx);

}  // namespace entransformer
