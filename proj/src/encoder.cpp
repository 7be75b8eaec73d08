#include "probembed/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace probembed {

namespace {

void fill_fan_in(DenseLayer& layer, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_dim));
    for (double& w : layer.weight) w = rng.uniform(-bound, bound);
}

void dense_forward(const DenseLayer& l, const std::vector<double>& x, std::vector<double>& out) {
    out.assign(l.out_dim, 0.0);
    for (std::size_t o = 0; o < l.out_dim; ++o) {
        double s = l.bias[o];
        const double* w = &l.weight[o * l.in_dim];
        for (std::size_t i = 0; i < l.in_dim; ++i) s += w[i] * x[i];
        out[o] = s;
    }
}

// Accumulates weight/bias gradients and, when d_x is non-null, the
// gradient with respect to the layer input.
void dense_backward(const DenseLayer& l, const std::vector<double>& x,
                    const std::vector<double>& d_out, DenseLayer& g, std::vector<double>* d_x) {
    for (std::size_t o = 0; o < l.out_dim; ++o) {
        const double go = d_out[o];
        g.bias[o] += go;
        double* gw = &g.weight[o * l.in_dim];
        for (std::size_t i = 0; i < l.in_dim; ++i) gw[i] += go * x[i];
    }
    if (d_x != nullptr) {
        for (std::size_t i = 0; i < l.in_dim; ++i) {
            double s = 0.0;
            for (std::size_t o = 0; o < l.out_dim; ++o) s += d_out[o] * l.weight[o * l.in_dim + i];
            (*d_x)[i] += s;
        }
    }
}

void tanh_inplace(std::vector<double>& v) {
    for (double& x : v) x = std::tanh(x);
}

}  // namespace

EncoderParams EncoderParams::init(std::size_t input, std::size_t hidden1, std::size_t hidden2,
                                  std::size_t embed, Rng& rng) {
    if (input == 0 || hidden1 == 0 || hidden2 == 0 || embed == 0) {
        throw std::invalid_argument("EncoderParams: all layer sizes must be >= 1");
    }
    EncoderParams p;
    p.fc1 = DenseLayer(input, hidden1);
    p.fc2 = DenseLayer(hidden1, hidden2);
    p.head_mu = DenseLayer(hidden2, embed);
    p.head_log_var = DenseLayer(hidden2, embed);
    fill_fan_in(p.fc1, rng);
    fill_fan_in(p.fc2, rng);
    fill_fan_in(p.head_mu, rng);
    fill_fan_in(p.head_log_var, rng);
    for (double& b : p.head_log_var.bias) b = -1.0;
    return p;
}

EncoderParams EncoderParams::zeros_like(const EncoderParams& other) {
    EncoderParams p;
    p.fc1 = DenseLayer(other.fc1.in_dim, other.fc1.out_dim);
    p.fc2 = DenseLayer(other.fc2.in_dim, other.fc2.out_dim);
    p.head_mu = DenseLayer(other.head_mu.in_dim, other.head_mu.out_dim);
    p.head_log_var = DenseLayer(other.head_log_var.in_dim, other.head_log_var.out_dim);
    return p;
}

GaussianEmbedding encoder_forward(const EncoderParams& params, const std::vector<double>& x) {
    EncoderActivations cache;
    return encoder_forward_cached(params, x, cache);
}

GaussianEmbedding encoder_forward_cached(const EncoderParams& params, const std::vector<double>& x,
                                         EncoderActivations& cache) {
    if (x.size() != params.fc1.in_dim) {
        throw std::invalid_argument("encoder_forward: input length mismatch");
    }
    cache.input = x;
    dense_forward(params.fc1, cache.input, cache.act1);
    tanh_inplace(cache.act1);
    dense_forward(params.fc2, cache.act1, cache.act2);
    tanh_inplace(cache.act2);
    std::vector<double> mu;
    dense_forward(params.head_mu, cache.act2, mu);
    dense_forward(params.head_log_var, cache.act2, cache.raw_log_var);
    return GaussianEmbedding(std::move(mu), cache.raw_log_var);
}

void encoder_backward(const EncoderParams& params, const EncoderActivations& cache,
                      const std::vector<double>& d_mu, const std::vector<double>& d_log_var,
                      EncoderParams& grads) {
    const std::size_t embed = params.head_mu.out_dim;
    std::vector<double> d_raw(embed, 0.0);
    for (std::size_t d = 0; d < embed; ++d) {
        const double raw = cache.raw_log_var[d];
        d_raw[d] = (raw >= kLogVarMin && raw <= kLogVarMax) ? d_log_var[d] : 0.0;
    }

    std::vector<double> d_act2(params.fc2.out_dim, 0.0);
    dense_backward(params.head_mu, cache.act2, d_mu, grads.head_mu, &d_act2);
    dense_backward(params.head_log_var, cache.act2, d_raw, grads.head_log_var, &d_act2);

    std::vector<double> d_pre2(params.fc2.out_dim);
    for (std::size_t j = 0; j < d_pre2.size(); ++j) {
        d_pre2[j] = d_act2[j] * (1.0 - cache.act2[j] * cache.act2[j]);
    }
    std::vector<double> d_act1(params.fc1.out_dim, 0.0);
    dense_backward(params.fc2, cache.act1, d_pre2, grads.fc2, &d_act1);

    std::vector<double> d_pre1(params.fc1.out_dim);
    for (std::size_t j = 0; j < d_pre1.size(); ++j) {
        d_pre1[j] = d_act1[j] * (1.0 - cache.act1[j] * cache.act1[j]);
    }
    dense_backward(params.fc1, cache.input, d_pre1, grads.fc1, nullptr);
}

}  // namespace probembed
