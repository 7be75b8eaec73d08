#include "probembed/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace probembed {

MatchMatrix MatchMatrix::identity(std::size_t n) {
    MatchMatrix m;
    m.size = n;
    m.y.assign(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) m.y[i * n + i] = 1;
    return m;
}

namespace {

void check_batch_sizes(const Batch& v1, const Batch& v2, const Batch& t1, const Batch& t2,
                       std::size_t label_size) {
    const std::size_t b = v1.size();
    if (b == 0) throw std::invalid_argument("total_loss: empty batch");
    if (v2.size() != b || t1.size() != b || t2.size() != b) {
        throw std::invalid_argument("total_loss: batch size mismatch");
    }
    if (label_size != b) throw std::invalid_argument("total_loss: label size mismatch");
}

double total_label_weight(const MatchMatrix& labels, double positive_weight) {
    double w = 0.0;
    for (std::size_t i = 0; i < labels.size; ++i) {
        for (std::size_t j = 0; j < labels.size; ++j) {
            const std::uint8_t y = labels.at(i, j);
            if (y > 1) throw std::invalid_argument("batch_match_loss: labels must be 0 or 1");
            w += y ? positive_weight : 1.0;
        }
    }
    return w;
}

// Weighted-mean match loss over one embedding pairing, computed pair by
// pair. When gradient buffers are supplied, accumulates
// outer * d(pairing loss)/d(param) into them. The accumulation order over
// (i, j) matches batch_match_loss so both paths produce identical values.
double pair_match_loss(const Batch& b1, const Batch& b2, const MatchMatrix& labels,
                       const MatchScalars& s, const LossConfig& cfg, double outer,
                       BatchGrad* g1, BatchGrad* g2, double* d_scale, double* d_offset) {
    const std::size_t b = b1.size();
    const double total_weight = total_label_weight(labels, cfg.positive_weight);
    double weighted = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            const int y = labels.at(i, j);
            const double w = y ? cfg.positive_weight : 1.0;
            const double distance = csd(b1[i], b2[j]);
            if (g1 == nullptr) {
                weighted += w * match_bce(distance, y, s, cfg.mode);
                continue;
            }
            const BceGrads bg = match_bce_grads(distance, y, s, cfg.mode);
            weighted += w * bg.loss;
            const double f = outer * w / total_weight;
            const double fd = f * bg.d_distance;
            const std::size_t dim = b1[i].dim();
            for (std::size_t d = 0; d < dim; ++d) {
                const double gap = b1[i].mu[d] - b2[j].mu[d];
                const double var1 = std::exp(b1[i].log_var[d]);
                const double var2 = std::exp(b2[j].log_var[d]);
                const double sum = var1 + var2;
                const double d_gap = fd * gap / sum;
                g1->d_mu.at(i, d) += d_gap;
                g2->d_mu.at(j, d) -= d_gap;
                const double d_sum = fd * 0.5 * (1.0 / sum - gap * gap / (sum * sum));
                g1->d_log_var.at(i, d) += d_sum * var1;
                g2->d_log_var.at(j, d) += d_sum * var2;
            }
            *d_scale += f * bg.d_scale;
            *d_offset += f * bg.d_offset;
        }
    }
    return weighted / total_weight;
}

// Mean KL over the 2B embeddings of one modality; optional gradient
// accumulation with weight beta / (2B) per embedding.
double mean_vib(const Batch& a1, const Batch& a2, double beta, BatchGrad* g1, BatchGrad* g2) {
    double acc = 0.0;
    for (const auto& z : a1) acc += vib_kl(z);
    for (const auto& z : a2) acc += vib_kl(z);
    const double mean = acc / static_cast<double>(a1.size() + a2.size());
    if (g1 != nullptr) {
        const double w = beta / static_cast<double>(a1.size() + a2.size());
        for (std::size_t i = 0; i < a1.size(); ++i) {
            std::vector<double> dm(a1[i].dim(), 0.0), dl(a1[i].dim(), 0.0);
            vib_kl_grad_accum(a1[i], w, dm, dl);
            for (std::size_t d = 0; d < a1[i].dim(); ++d) {
                g1->d_mu.at(i, d) += dm[d];
                g1->d_log_var.at(i, d) += dl[d];
            }
        }
        for (std::size_t i = 0; i < a2.size(); ++i) {
            std::vector<double> dm(a2[i].dim(), 0.0), dl(a2[i].dim(), 0.0);
            vib_kl_grad_accum(a2[i], w, dm, dl);
            for (std::size_t d = 0; d < a2[i].dim(); ++d) {
                g2->d_mu.at(i, d) += dm[d];
                g2->d_log_var.at(i, d) += dl[d];
            }
        }
    }
    return mean;
}

double compose_total(const LossBreakdown& b, const LossConfig& cfg) {
    return b.inter + cfg.lambda_img * b.intra_img + cfg.lambda_txt * b.intra_txt +
           cfg.beta_img * b.kl_img + cfg.beta_txt * b.kl_txt;
}

}  // namespace

double batch_match_loss(const Matrix& distances, const MatchMatrix& labels,
                        const MatchScalars& s, const LossConfig& cfg) {
    if (distances.rows != labels.size || distances.cols != labels.size) {
        throw std::invalid_argument("batch_match_loss: shape mismatch");
    }
    if (labels.size == 0) throw std::invalid_argument("batch_match_loss: empty batch");
    if (!(cfg.positive_weight > 0.0)) {
        throw std::invalid_argument("batch_match_loss: positive_weight must be > 0");
    }
    const double total_weight = total_label_weight(labels, cfg.positive_weight);
    double weighted = 0.0;
    for (std::size_t i = 0; i < labels.size; ++i) {
        for (std::size_t j = 0; j < labels.size; ++j) {
            const int y = labels.at(i, j);
            const double w = y ? cfg.positive_weight : 1.0;
            weighted += w * match_bce(distances.at(i, j), y, s, cfg.mode);
        }
    }
    return weighted / total_weight;
}

double inter_modal_loss(const Batch& v1, const Batch& v2, const Batch& t1, const Batch& t2,
                        const MatchMatrix& labels, const MatchScalars& s, const LossConfig& cfg) {
    check_batch_sizes(v1, v2, t1, t2, labels.size);
    const double l11 = pair_match_loss(v1, t1, labels, s, cfg, 0.0, nullptr, nullptr, nullptr, nullptr);
    const double l12 = pair_match_loss(v1, t2, labels, s, cfg, 0.0, nullptr, nullptr, nullptr, nullptr);
    const double l21 = pair_match_loss(v2, t1, labels, s, cfg, 0.0, nullptr, nullptr, nullptr, nullptr);
    const double l22 = pair_match_loss(v2, t2, labels, s, cfg, 0.0, nullptr, nullptr, nullptr, nullptr);
    // Pairwise addition keeps the four-identical-pairings case exact.
    return ((l11 + l12) + (l21 + l22)) * 0.25;
}

double intra_modal_loss(const Batch& a1, const Batch& a2, const MatchScalars& s,
                        const LossConfig& cfg) {
    if (a1.size() != a2.size()) throw std::invalid_argument("intra_modal_loss: size mismatch");
    if (a1.empty()) throw std::invalid_argument("intra_modal_loss: empty batch");
    const MatchMatrix eye = MatchMatrix::identity(a1.size());
    return pair_match_loss(a1, a2, eye, s, cfg, 0.0, nullptr, nullptr, nullptr, nullptr);
}

LossBreakdown total_loss(const Batch& v1, const Batch& v2, const Batch& t1, const Batch& t2,
                         const MatchMatrix& labels, const MatchScalars& s, const LossConfig& cfg) {
    check_batch_sizes(v1, v2, t1, t2, labels.size);
    LossBreakdown out;
    out.inter = inter_modal_loss(v1, v2, t1, t2, labels, s, cfg);
    out.intra_img = intra_modal_loss(v1, v2, s, cfg);
    out.intra_txt = intra_modal_loss(t1, t2, s, cfg);
    out.kl_img = mean_vib(v1, v2, 0.0, nullptr, nullptr);
    out.kl_txt = mean_vib(t1, t2, 0.0, nullptr, nullptr);
    out.total = compose_total(out, cfg);
    return out;
}

LossBreakdown total_loss_with_grads(const Batch& v1, const Batch& v2, const Batch& t1,
                                    const Batch& t2, const MatchMatrix& labels,
                                    const MatchScalars& s, const LossConfig& cfg,
                                    TotalLossGrads& grads) {
    check_batch_sizes(v1, v2, t1, t2, labels.size);
    const std::size_t b = v1.size();
    const std::size_t dim_v = v1.front().dim();
    const std::size_t dim_t = t1.front().dim();
    grads = TotalLossGrads{};
    grads.v1 = BatchGrad(b, dim_v);
    grads.v2 = BatchGrad(b, dim_v);
    grads.t1 = BatchGrad(b, dim_t);
    grads.t2 = BatchGrad(b, dim_t);

    LossBreakdown out;
    const double l11 = pair_match_loss(v1, t1, labels, s, cfg, 0.25, &grads.v1, &grads.t1,
                                       &grads.d_scale, &grads.d_offset);
    const double l12 = pair_match_loss(v1, t2, labels, s, cfg, 0.25, &grads.v1, &grads.t2,
                                       &grads.d_scale, &grads.d_offset);
    const double l21 = pair_match_loss(v2, t1, labels, s, cfg, 0.25, &grads.v2, &grads.t1,
                                       &grads.d_scale, &grads.d_offset);
    const double l22 = pair_match_loss(v2, t2, labels, s, cfg, 0.25, &grads.v2, &grads.t2,
                                       &grads.d_scale, &grads.d_offset);
    out.inter = ((l11 + l12) + (l21 + l22)) * 0.25;

    const MatchMatrix eye = MatchMatrix::identity(b);
    out.intra_img = pair_match_loss(v1, v2, eye, s, cfg, cfg.lambda_img, &grads.v1, &grads.v2,
                                    &grads.d_scale, &grads.d_offset);
    out.intra_txt = pair_match_loss(t1, t2, eye, s, cfg, cfg.lambda_txt, &grads.t1, &grads.t2,
                                    &grads.d_scale, &grads.d_offset);
    out.kl_img = mean_vib(v1, v2, cfg.beta_img, &grads.v1, &grads.v2);
    out.kl_txt = mean_vib(t1, t2, cfg.beta_txt, &grads.t1, &grads.t2);
    out.total = compose_total(out, cfg);
    return out;
}

double infonce_loss(const Matrix& similarities, double temperature) {
    if (similarities.rows != similarities.cols) {
        throw std::invalid_argument("infonce_loss: similarity matrix must be square");
    }
    if (similarities.rows == 0) throw std::invalid_argument("infonce_loss: empty matrix");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("infonce_loss: temperature must be positive and finite");
    }
    for (double v : similarities.data) {
        if (!std::isfinite(v)) throw std::invalid_argument("infonce_loss: non-finite similarity");
    }
    const std::size_t n = similarities.rows;
    const double inv_t = 1.0 / temperature;
    double row_ce = 0.0, col_ce = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double mx = similarities.at(i, 0) * inv_t;
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, similarities.at(i, j) * inv_t);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += std::exp(similarities.at(i, j) * inv_t - mx);
        row_ce += mx + std::log(acc) - similarities.at(i, i) * inv_t;
    }
    for (std::size_t j = 0; j < n; ++j) {
        double mx = similarities.at(0, j) * inv_t;
        for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, similarities.at(i, j) * inv_t);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += std::exp(similarities.at(i, j) * inv_t - mx);
        col_ce += mx + std::log(acc) - similarities.at(j, j) * inv_t;
    }
    return 0.5 * (row_ce + col_ce) / static_cast<double>(n);
}

double infonce_loss_grad(const Matrix& similarities, double temperature, Matrix& d_similarities) {
    const double loss = infonce_loss(similarities, temperature);  // validates inputs
    const std::size_t n = similarities.rows;
    const double inv_t = 1.0 / temperature;
    d_similarities = Matrix(n, n, 0.0);
    const double f = 0.5 * inv_t / static_cast<double>(n);
    // row-wise softmax terms
    for (std::size_t i = 0; i < n; ++i) {
        double mx = similarities.at(i, 0) * inv_t;
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, similarities.at(i, j) * inv_t);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += std::exp(similarities.at(i, j) * inv_t - mx);
        for (std::size_t j = 0; j < n; ++j) {
            const double p = std::exp(similarities.at(i, j) * inv_t - mx) / acc;
            d_similarities.at(i, j) += f * (p - (i == j ? 1.0 : 0.0));
        }
    }
    // column-wise softmax terms
    for (std::size_t j = 0; j < n; ++j) {
        double mx = similarities.at(0, j) * inv_t;
        for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, similarities.at(i, j) * inv_t);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += std::exp(similarities.at(i, j) * inv_t - mx);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = std::exp(similarities.at(i, j) * inv_t - mx) / acc;
            d_similarities.at(i, j) += f * (p - (i == j ? 1.0 : 0.0));
        }
    }
    return loss;
}

}  // namespace probembed
