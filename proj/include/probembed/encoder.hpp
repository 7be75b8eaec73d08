#pragma once

#include <cstddef>
#include <vector>

#include "probembed/gaussian.hpp"
#include "probembed/rng.hpp"

namespace probembed {

struct DenseLayer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weight;  // out_dim x in_dim, row-major
    std::vector<double> bias;    // out_dim

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out)
        : in_dim(in), out_dim(out), weight(in * out, 0.0), bias(out, 0.0) {}
};

// Two-hidden-layer tanh MLP with separate heads emitting the mean and the
// raw log-variance of a Gaussian embedding. tanh keeps the network smooth
// everywhere, which finite-difference checks rely on.
struct EncoderParams {
    DenseLayer fc1, fc2, head_mu, head_log_var;

    std::size_t input_dim() const { return fc1.in_dim; }
    std::size_t embed_dim() const { return head_mu.out_dim; }

    // Fan-in uniform init; biases zero except the log-variance head bias,
    // which starts at -1 (slightly confident variances).
    static EncoderParams init(std::size_t input, std::size_t hidden1, std::size_t hidden2,
                              std::size_t embed, Rng& rng);

    static EncoderParams zeros_like(const EncoderParams& other);
};

// Activations cached by the forward pass for reuse in the backward pass.
struct EncoderActivations {
    std::vector<double> input;
    std::vector<double> act1, act2;   // post-tanh hidden activations
    std::vector<double> raw_log_var;  // pre-clamp head output
};

GaussianEmbedding encoder_forward(const EncoderParams& params, const std::vector<double>& x);
GaussianEmbedding encoder_forward_cached(const EncoderParams& params, const std::vector<double>& x,
                                         EncoderActivations& cache);

// Accumulates parameter gradients for one sample given gradients with
// respect to the emitted mu and (clamped) log_var. The clamp contributes
// identity inside [-6, 6] (boundary included) and zero outside.
void encoder_backward(const EncoderParams& params, const EncoderActivations& cache,
                      const std::vector<double>& d_mu, const std::vector<double>& d_log_var,
                      EncoderParams& grads);

}  // namespace probembed
