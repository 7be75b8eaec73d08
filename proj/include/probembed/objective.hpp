#pragma once

#include <cstdint>
#include <vector>

#include "probembed/gaussian.hpp"
#include "probembed/matrix.hpp"

namespace probembed {

using Batch = std::vector<GaussianEmbedding>;

// Weights and options for the composite training objective.
struct LossConfig {
    double lambda_img = 0.1;   // intra-modal image term weight
    double lambda_txt = 0.1;   // intra-modal text term weight
    double beta_img = 1e-4;    // image KL weight
    double beta_txt = 1e-4;    // text KL weight
    BceMode mode = BceMode::standard;
    double positive_weight = 1.0;  // relative weight of matched pairs in the BCE mean
};

struct LossBreakdown {
    double inter = 0.0;
    double intra_img = 0.0;
    double intra_txt = 0.0;
    double kl_img = 0.0;
    double kl_txt = 0.0;
    double total = 0.0;
};

// B x B binary match labels; the default supervision is the identity
// (in-batch diagonal positives).
struct MatchMatrix {
    std::size_t size = 0;
    std::vector<std::uint8_t> y;  // row-major

    static MatchMatrix identity(std::size_t n);
    std::uint8_t at(std::size_t i, std::size_t j) const { return y[i * size + j]; }
    void set(std::size_t i, std::size_t j, std::uint8_t v) { y[i * size + j] = v; }
};

// Weighted mean of match_bce over all B^2 entries of a distance matrix.
// Positive entries carry cfg.positive_weight; the mean is taken over the
// total weight.
double batch_match_loss(const Matrix& distances, const MatchMatrix& labels,
                        const MatchScalars& s, const LossConfig& cfg);

// Mean of batch_match_loss over the four view/section pairings
// (v1,t1), (v1,t2), (v2,t1), (v2,t2), all sharing the same labels.
double inter_modal_loss(const Batch& v1, const Batch& v2, const Batch& t1, const Batch& t2,
                        const MatchMatrix& labels, const MatchScalars& s, const LossConfig& cfg);

// batch_match_loss between the two views of one modality with identity
// labels: same-index pairs are positives, cross-index pairs negatives.
double intra_modal_loss(const Batch& a1, const Batch& a2, const MatchScalars& s,
                        const LossConfig& cfg);

// Composite objective: inter-modal mean, weighted intra-modal terms, and
// per-modality KL regularizers averaged over the 2B embeddings of each
// modality.
LossBreakdown total_loss(const Batch& v1, const Batch& v2, const Batch& t1, const Batch& t2,
                         const MatchMatrix& labels, const MatchScalars& s, const LossConfig& cfg);

// Per-batch gradient buffers (B x D each) for one embedding batch.
struct BatchGrad {
    Matrix d_mu;
    Matrix d_log_var;

    BatchGrad() = default;
    BatchGrad(std::size_t b, std::size_t d) : d_mu(b, d), d_log_var(b, d) {}
};

struct TotalLossGrads {
    BatchGrad v1, v2, t1, t2;
    double d_scale = 0.0;   // w.r.t. the effective scale
    double d_offset = 0.0;
};

// total_loss plus exact gradients with respect to every embedding and the
// match scalars. Produces the same field values as total_loss.
LossBreakdown total_loss_with_grads(const Batch& v1, const Batch& v2, const Batch& t1,
                                    const Batch& t2, const MatchMatrix& labels,
                                    const MatchScalars& s, const LossConfig& cfg,
                                    TotalLossGrads& grads);

// Deterministic bidirectional InfoNCE over a square similarity matrix:
// average of row-wise and column-wise softmax cross-entropy against the
// diagonal, with logits = similarities / temperature.
double infonce_loss(const Matrix& similarities, double temperature);

// infonce_loss plus d(loss)/d(similarities).
double infonce_loss_grad(const Matrix& similarities, double temperature, Matrix& d_similarities);

}  // namespace probembed
