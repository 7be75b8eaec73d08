#include "probembed/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace probembed {

double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double log_sigmoid(double x) { return -softplus(-x); }

std::vector<double> clamp_log_var(const std::vector<double>& raw) {
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!std::isfinite(raw[i])) {
            throw std::invalid_argument("clamp_log_var: non-finite entry at index " +
                                        std::to_string(i));
        }
        out[i] = std::min(kLogVarMax, std::max(kLogVarMin, raw[i]));
    }
    return out;
}

GaussianEmbedding::GaussianEmbedding(std::vector<double> mean,
                                     const std::vector<double>& raw_log_var)
    : mu(std::move(mean)), log_var(clamp_log_var(raw_log_var)) {
    if (mu.empty()) throw std::invalid_argument("GaussianEmbedding: dimension must be >= 1");
    if (mu.size() != log_var.size()) {
        throw std::invalid_argument("GaussianEmbedding: mu and log_var lengths differ");
    }
    for (double m : mu) {
        if (!std::isfinite(m)) throw std::invalid_argument("GaussianEmbedding: non-finite mean");
    }
}

double GaussianEmbedding::variance(std::size_t d) const { return std::exp(log_var[d]); }

double GaussianEmbedding::total_variance() const {
    double acc = 0.0;
    for (double lv : log_var) acc += std::exp(lv);
    return acc;
}

namespace {
// softplus(x) = 1  at  x = ln(e - 1)
constexpr double kRawScaleUnit = 0.5413248546129181;
}  // namespace

MatchScalars::MatchScalars() : raw_scale(kRawScaleUnit), offset(0.0) {}

double MatchScalars::scale() const { return softplus(raw_scale); }

MatchScalars MatchScalars::from_scale(double scale, double offset) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw std::invalid_argument("MatchScalars: scale must be positive and finite");
    }
    MatchScalars s;
    // inverse softplus: ln(e^a - 1), written to avoid overflow for large a
    s.raw_scale = scale + std::log1p(-std::exp(-scale));
    s.offset = offset;
    return s;
}

double csd(const GaussianEmbedding& z1, const GaussianEmbedding& z2) {
    if (z1.dim() != z2.dim()) throw std::invalid_argument("csd: dimension mismatch");
    double acc = 0.0;
    for (std::size_t d = 0; d < z1.dim(); ++d) {
        const double gap = z1.mu[d] - z2.mu[d];
        const double s = std::exp(z1.log_var[d]) + std::exp(z2.log_var[d]);
        acc += gap * gap / s + std::log(s);
    }
    return 0.5 * acc;
}

double match_prob(double distance, const MatchScalars& s) {
    if (!std::isfinite(distance)) throw std::invalid_argument("match_prob: non-finite distance");
    return sigmoid(-s.scale() * distance + s.offset);
}

double match_bce(double distance, int label, const MatchScalars& s, BceMode mode) {
    if (!std::isfinite(distance)) throw std::invalid_argument("match_bce: non-finite distance");
    if (label != 0 && label != 1) throw std::invalid_argument("match_bce: label must be 0 or 1");
    const double a = s.scale();
    if (label == 1) return -log_sigmoid(-a * distance + s.offset);
    if (mode == BceMode::standard) return -log_sigmoid(a * distance - s.offset);
    return -log_sigmoid(-a * distance - s.offset);
}

BceGrads match_bce_grads(double distance, int label, const MatchScalars& s, BceMode mode) {
    if (!std::isfinite(distance)) throw std::invalid_argument("match_bce_grads: non-finite distance");
    if (label != 0 && label != 1) throw std::invalid_argument("match_bce_grads: label must be 0 or 1");
    const double a = s.scale();
    const double b = s.offset;
    // Every branch is -ln sigmoid(u) for a branch-specific logit u.
    double u, du_dd, du_da, du_db;
    if (label == 1) {
        u = -a * distance + b;
        du_dd = -a;
        du_da = -distance;
        du_db = 1.0;
    } else if (mode == BceMode::standard) {
        u = a * distance - b;
        du_dd = a;
        du_da = distance;
        du_db = -1.0;
    } else {
        u = -a * distance - b;
        du_dd = -a;
        du_da = -distance;
        du_db = -1.0;
    }
    const double dl_du = -sigmoid(-u);  // d(-ln sigmoid(u))/du
    BceGrads g;
    g.loss = -log_sigmoid(u);
    g.d_distance = dl_du * du_dd;
    g.d_scale = dl_du * du_da;
    g.d_offset = dl_du * du_db;
    return g;
}

double vib_kl(const GaussianEmbedding& z) {
    double acc = 0.0;
    for (std::size_t d = 0; d < z.dim(); ++d) {
        acc += std::exp(z.log_var[d]) + z.mu[d] * z.mu[d] - 1.0 - z.log_var[d];
    }
    return 0.5 * acc;
}

void vib_kl_grad_accum(const GaussianEmbedding& z, double weight, std::vector<double>& d_mu,
                       std::vector<double>& d_log_var) {
    for (std::size_t d = 0; d < z.dim(); ++d) {
        d_mu[d] += weight * z.mu[d];
        d_log_var[d] += weight * 0.5 * (std::exp(z.log_var[d]) - 1.0);
    }
}

Matrix pairwise_csd(const std::vector<GaussianEmbedding>& batch1,
                    const std::vector<GaussianEmbedding>& batch2) {
    if (!batch1.empty() && !batch2.empty()) {
        const std::size_t dim = batch1.front().dim();
        for (const auto& z : batch1)
            if (z.dim() != dim) throw std::invalid_argument("pairwise_csd: ragged batch1");
        for (const auto& z : batch2)
            if (z.dim() != dim) throw std::invalid_argument("pairwise_csd: ragged batch2");
    }
    Matrix out(batch1.size(), batch2.size());
    for (std::size_t i = 0; i < batch1.size(); ++i)
        for (std::size_t j = 0; j < batch2.size(); ++j) out.at(i, j) = csd(batch1[i], batch2[j]);
    return out;
}

std::pair<double, GradBundle> analytic_grads(const GaussianEmbedding& z1,
                                             const GaussianEmbedding& z2, int label,
                                             const MatchScalars& s, BceMode mode) {
    const double distance = csd(z1, z2);  // validates dimensions
    const BceGrads bce = match_bce_grads(distance, label, s, mode);
    const std::size_t dim = z1.dim();

    GradBundle g;
    g.d_mu1.resize(dim);
    g.d_mu2.resize(dim);
    g.d_log_var1.resize(dim);
    g.d_log_var2.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        const double gap = z1.mu[d] - z2.mu[d];
        const double v1 = std::exp(z1.log_var[d]);
        const double v2 = std::exp(z2.log_var[d]);
        const double sum = v1 + v2;
        const double d_gap = bce.d_distance * gap / sum;
        g.d_mu1[d] = d_gap;
        g.d_mu2[d] = -d_gap;
        // d(csd)/d(sum) = 0.5 * (1/sum - gap^2/sum^2), chained through exp
        const double d_sum = bce.d_distance * 0.5 * (1.0 / sum - gap * gap / (sum * sum));
        g.d_log_var1[d] = d_sum * v1;
        g.d_log_var2[d] = d_sum * v2;
    }
    g.d_scale = bce.d_scale;
    g.d_offset = bce.d_offset;
    return {bce.loss, g};
}

}  // namespace probembed
