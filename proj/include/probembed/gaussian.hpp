#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "probembed/matrix.hpp"

namespace probembed {

inline constexpr double kLogVarMin = -6.0;
inline constexpr double kLogVarMax = 6.0;

// Numerically stable logistic helpers shared across the loss code.
double sigmoid(double x);
double softplus(double x);
double log_sigmoid(double x);  // ln sigmoid(x), stable for |x| up to ~700

// Clamps each entry of a raw log-variance vector to [-6, 6].
// Throws std::invalid_argument on non-finite entries.
std::vector<double> clamp_log_var(const std::vector<double>& raw);

// Diagonal Gaussian embedding: per-dimension mean and log-variance.
// The log-variance is clamped to [-6, 6] on construction.
struct GaussianEmbedding {
    std::vector<double> mu;
    std::vector<double> log_var;

    GaussianEmbedding() = default;
    GaussianEmbedding(std::vector<double> mean, const std::vector<double>& raw_log_var);

    std::size_t dim() const { return mu.size(); }
    double variance(std::size_t d) const;
    double total_variance() const;  // sum over dimensions of exp(log_var)
};

// Learnable logit scale/offset for the match probability. The scale is
// stored as an unconstrained parameter mapped through softplus so the
// effective scale stays positive under gradient updates.
struct MatchScalars {
    double raw_scale;  // scale() = softplus(raw_scale); default gives scale 1
    double offset;     // additive logit offset

    MatchScalars();
    double scale() const;
    static MatchScalars from_scale(double scale, double offset);
};

// Gradients of a pairwise match loss with respect to both embeddings and
// the match scalars. d_scale is taken with respect to the effective scale.
struct GradBundle {
    std::vector<double> d_mu1, d_mu2;
    std::vector<double> d_log_var1, d_log_var2;
    double d_scale = 0.0;
    double d_offset = 0.0;
};

enum class BceMode { standard, paper_literal };

// Closed-form distance between two diagonal Gaussians: per dimension the
// squared mean gap normalized by the summed variances plus the log of the
// summed variances, halved. Symmetric in its arguments.
double csd(const GaussianEmbedding& z1, const GaussianEmbedding& z2);

// logistic(-scale * distance + offset); strictly decreasing in distance.
double match_prob(double distance, const MatchScalars& s);

// Binary cross-entropy on the match probability. `standard` treats the
// negative branch as -ln(1 - p); `paper_literal` uses -ln logistic(-a*d - b)
// for negatives instead (sign-flipped offset, no complement).
double match_bce(double distance, int label, const MatchScalars& s,
                 BceMode mode = BceMode::standard);

// Loss plus partial derivatives of match_bce at a given distance.
struct BceGrads {
    double loss = 0.0;
    double d_distance = 0.0;
    double d_scale = 0.0;
    double d_offset = 0.0;
};
BceGrads match_bce_grads(double distance, int label, const MatchScalars& s,
                         BceMode mode = BceMode::standard);

// KL divergence of the embedding distribution from a unit Gaussian:
// 0.5 * sum(var + mu^2 - 1 - log var). Nonnegative, zero only at the
// standard normal.
double vib_kl(const GaussianEmbedding& z);

// Accumulates weight * d(vib_kl)/d(mu, log_var) into the given buffers.
void vib_kl_grad_accum(const GaussianEmbedding& z, double weight,
                       std::vector<double>& d_mu, std::vector<double>& d_log_var);

// M x N matrix of csd values between two batches.
Matrix pairwise_csd(const std::vector<GaussianEmbedding>& batch1,
                    const std::vector<GaussianEmbedding>& batch2);

// Loss and exact gradients of match_bce(csd(z1, z2), label) with respect
// to both embeddings and the match scalars.
std::pair<double, GradBundle> analytic_grads(const GaussianEmbedding& z1,
                                             const GaussianEmbedding& z2, int label,
                                             const MatchScalars& s,
                                             BceMode mode = BceMode::standard);

}  // namespace probembed
