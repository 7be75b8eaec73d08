#include "probembed/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "probembed/rng.hpp"

namespace probembed {

const char* direction_name(Direction d) { return d == Direction::i2t ? "i2t" : "t2i"; }

namespace {

// 1-based rank of the ground-truth column within its row; ties count
// lower indices as ranking first.
std::size_t rank_of(const Matrix& distances, std::size_t row, std::size_t target) {
    const double ref = distances.at(row, target);
    std::size_t rank = 1;
    for (std::size_t j = 0; j < distances.cols; ++j) {
        const double v = distances.at(row, j);
        if (v < ref || (v == ref && j < target)) ++rank;
    }
    return rank;
}

}  // namespace

double recall_at_k(const Matrix& distances, const std::vector<std::size_t>& ground_truth,
                   std::size_t k) {
    if (distances.rows == 0) throw std::invalid_argument("recall_at_k: empty distance matrix");
    if (k == 0 || k > distances.cols) throw std::invalid_argument("recall_at_k: K out of range");
    if (ground_truth.size() != distances.rows) {
        throw std::invalid_argument("recall_at_k: ground truth size mismatch");
    }
    std::size_t hits = 0;
    for (std::size_t q = 0; q < distances.rows; ++q) {
        if (ground_truth[q] >= distances.cols) {
            throw std::invalid_argument("recall_at_k: ground-truth index out of range");
        }
        if (rank_of(distances, q, ground_truth[q]) <= k) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(distances.rows);
}

RetrievalReport retrieval_report(const Matrix& distances,
                                 const std::vector<std::size_t>& ground_truth, Direction direction,
                                 const std::vector<int>& ks) {
    RetrievalReport report;
    report.direction = direction;
    for (int k : ks) {
        report.recall_at[k] = recall_at_k(distances, ground_truth, static_cast<std::size_t>(k));
    }
    return report;
}

double rsum(const RetrievalReport& i2t, const RetrievalReport& t2i) {
    double sum = 0.0;
    for (const RetrievalReport* rep : {&i2t, &t2i}) {
        for (int k : kDefaultKs) {
            const auto it = rep->recall_at.find(k);
            if (it == rep->recall_at.end()) {
                throw std::invalid_argument("rsum: report missing K=" + std::to_string(k));
            }
            sum += it->second;
        }
    }
    return sum;
}

std::vector<std::size_t> zero_shot_predictions(const Matrix& distances) {
    std::vector<std::size_t> preds(distances.rows);
    for (std::size_t i = 0; i < distances.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < distances.cols; ++c) {
            if (distances.at(i, c) < distances.at(i, best)) best = c;
        }
        preds[i] = best;
    }
    return preds;
}

ZeroShotResult zero_shot_eval(const std::vector<GaussianEmbedding>& images,
                              const std::vector<GaussianEmbedding>& class_prototypes,
                              const std::vector<int>& labels, const MatchScalars& s) {
    (void)s;  // csd argmin equals match_prob argmax for any positive scale
    const std::size_t classes = class_prototypes.size();
    if (classes == 0) throw std::invalid_argument("zero_shot_eval: no class prototypes");
    if (images.empty()) throw std::invalid_argument("zero_shot_eval: no images");
    if (labels.size() != images.size()) {
        throw std::invalid_argument("zero_shot_eval: label count mismatch");
    }
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= classes) {
            throw std::invalid_argument("zero_shot_eval: label out of range");
        }
    }
    const Matrix distances = pairwise_csd(images, class_prototypes);
    const std::vector<std::size_t> preds = zero_shot_predictions(distances);

    std::vector<std::size_t> count(classes, 0), correct(classes, 0);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        ++count[c];
        if (preds[i] == c) ++correct[c];
    }
    ZeroShotResult result;
    result.per_class.resize(classes);
    double acc_sum = 0.0;
    std::size_t populated = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        if (count[c] == 0) {
            result.per_class[c] = std::nullopt;
            continue;
        }
        const double acc = static_cast<double>(correct[c]) / static_cast<double>(count[c]);
        result.per_class[c] = acc;
        acc_sum += acc;
        ++populated;
    }
    result.mean_accuracy = populated > 0 ? acc_sum / static_cast<double>(populated) : 0.0;
    return result;
}

const char* confidence_source_name(ConfidenceSource s) {
    switch (s) {
        case ConfidenceSource::match_prob: return "match_prob";
        case ConfidenceSource::neg_total_variance: return "neg_total_variance";
        case ConfidenceSource::random: return "random";
    }
    throw std::invalid_argument("confidence_source_name: unknown source");
}

ConfidenceSource confidence_source_from_name(const std::string& name) {
    if (name == "match_prob") return ConfidenceSource::match_prob;
    if (name == "neg_total_variance") return ConfidenceSource::neg_total_variance;
    if (name == "random") return ConfidenceSource::random;
    throw std::invalid_argument("unknown confidence source: " + name);
}

RiskCoverageCurve risk_coverage(const std::vector<double>& confidences,
                                const std::vector<int>& correctness, ConfidenceSource source) {
    if (confidences.size() != correctness.size()) {
        throw std::invalid_argument("risk_coverage: length mismatch");
    }
    const std::size_t n = confidences.size();
    if (n == 0) throw std::invalid_argument("risk_coverage: empty input");
    for (int c : correctness) {
        if (c != 0 && c != 1) throw std::invalid_argument("risk_coverage: correctness must be 0/1");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (confidences[a] != confidences[b]) return confidences[a] > confidences[b];
        return a < b;
    });
    RiskCoverageCurve curve;
    curve.confidence_source = source;
    curve.points.resize(n);
    std::size_t cum_correct = 0;
    double risk_sum = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
        cum_correct += static_cast<std::size_t>(correctness[order[m]]);
        const double coverage = static_cast<double>(m + 1) / static_cast<double>(n);
        const double risk =
            1.0 - static_cast<double>(cum_correct) / static_cast<double>(m + 1);
        curve.points[m] = {coverage, risk};
        risk_sum += risk;
    }
    curve.aurc = risk_sum / static_cast<double>(n);
    return curve;
}

double aurc(const RiskCoverageCurve& curve) {
    if (curve.points.empty()) throw std::invalid_argument("aurc: empty curve");
    double risk_sum = 0.0;
    for (const RiskCoveragePoint& p : curve.points) risk_sum += p.risk;
    return risk_sum / static_cast<double>(curve.points.size());
}

double ece(const std::vector<double>& probabilities, const std::vector<int>& correctness,
           std::size_t n_bins) {
    if (probabilities.size() != correctness.size()) {
        throw std::invalid_argument("ece: length mismatch");
    }
    if (probabilities.empty()) throw std::invalid_argument("ece: empty input");
    if (n_bins == 0) throw std::invalid_argument("ece: n_bins must be >= 1");
    for (double p : probabilities) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("ece: probability outside [0, 1]");
    }
    std::vector<double> conf_sum(n_bins, 0.0), acc_sum(n_bins, 0.0);
    std::vector<std::size_t> count(n_bins, 0);
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        std::size_t bin = static_cast<std::size_t>(probabilities[i] * static_cast<double>(n_bins));
        if (bin >= n_bins) bin = n_bins - 1;  // p == 1.0 joins the last bin
        conf_sum[bin] += probabilities[i];
        acc_sum[bin] += static_cast<double>(correctness[i]);
        ++count[bin];
    }
    const double n = static_cast<double>(probabilities.size());
    double out = 0.0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        if (count[b] == 0) continue;
        const double cnt = static_cast<double>(count[b]);
        out += (cnt / n) * std::fabs(conf_sum[b] / cnt - acc_sum[b] / cnt);
    }
    return out;
}

SelectiveInputs selective_retrieval_inputs(const Matrix& distances,
                                           const std::vector<std::size_t>& ground_truth,
                                           std::size_t k,
                                           const std::vector<GaussianEmbedding>& queries,
                                           const MatchScalars& s, ConfidenceSource source,
                                           std::uint64_t random_seed) {
    if (distances.rows == 0) throw std::invalid_argument("selective_retrieval_inputs: empty matrix");
    if (k == 0 || k > distances.cols) {
        throw std::invalid_argument("selective_retrieval_inputs: K out of range");
    }
    if (ground_truth.size() != distances.rows) {
        throw std::invalid_argument("selective_retrieval_inputs: ground truth size mismatch");
    }
    if (source == ConfidenceSource::neg_total_variance && queries.size() != distances.rows) {
        throw std::invalid_argument("selective_retrieval_inputs: query embeddings required");
    }
    SelectiveInputs out;
    out.confidences.resize(distances.rows);
    out.correctness.resize(distances.rows);
    Rng rng(random_seed);
    for (std::size_t q = 0; q < distances.rows; ++q) {
        out.correctness[q] = rank_of(distances, q, ground_truth[q]) <= k ? 1 : 0;
        switch (source) {
            case ConfidenceSource::match_prob: {
                double best = distances.at(q, 0);
                for (std::size_t j = 1; j < distances.cols; ++j) {
                    best = std::min(best, distances.at(q, j));
                }
                out.confidences[q] = match_prob(best, s);
                break;
            }
            case ConfidenceSource::neg_total_variance:
                out.confidences[q] = -queries[q].total_variance();
                break;
            case ConfidenceSource::random:
                out.confidences[q] = rng.uniform();
                break;
        }
    }
    return out;
}

std::optional<double> relative_recall(double clean, double perturbed) {
    if (clean == 0.0) return std::nullopt;
    return perturbed / clean;
}

RobustnessReport robustness_report(const DualEncoderModel& model,
                                   const std::vector<SynthStudy>& studies,
                                   const std::vector<int>& ks, const std::vector<int>& severities,
                                   std::uint64_t seed) {
    if (studies.empty()) throw std::invalid_argument("robustness_report: no studies");
    std::vector<GaussianEmbedding> texts;
    std::vector<GaussianEmbedding> clean_images;
    texts.reserve(studies.size());
    clean_images.reserve(studies.size());
    for (const SynthStudy& st : studies) {
        texts.push_back(encoder_forward(model.text, st.sect1));
        clean_images.push_back(encoder_forward(model.image, st.view1.flattened()));
    }
    std::vector<std::size_t> gt(studies.size());
    std::iota(gt.begin(), gt.end(), std::size_t{0});
    const Matrix clean_d = pairwise_csd(clean_images, texts);
    std::map<int, double> clean_recall;
    for (int k : ks) clean_recall[k] = recall_at_k(clean_d, gt, static_cast<std::size_t>(k));

    RobustnessReport report;
    const PerturbKind kinds[] = {PerturbKind::blur, PerturbKind::noise,
                                 PerturbKind::brightness_contrast, PerturbKind::rotation};
    for (PerturbKind kind : kinds) {
        for (int severity : severities) {
            std::vector<GaussianEmbedding> perturbed;
            perturbed.reserve(studies.size());
            const std::uint64_t cell_seed =
                derive_seed(seed, static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(severity));
            for (std::size_t i = 0; i < studies.size(); ++i) {
                PerturbSpec spec{kind, severity, derive_seed(cell_seed, i)};
                const Grid img = perturb_image(studies[i].view1, spec);
                perturbed.push_back(encoder_forward(model.image, img.flattened()));
            }
            const Matrix d = pairwise_csd(perturbed, texts);
            for (int k : ks) {
                RobustnessEntry entry;
                entry.kind = kind;
                entry.severity = severity;
                entry.k = k;
                entry.relative_recall = relative_recall(
                    clean_recall[k], recall_at_k(d, gt, static_cast<std::size_t>(k)));
                report.entries.push_back(entry);
            }
        }
    }
    return report;
}

Matrix cosine_distance_matrix(const std::vector<GaussianEmbedding>& queries,
                              const std::vector<GaussianEmbedding>& gallery) {
    auto norms = [](const std::vector<GaussianEmbedding>& batch) {
        std::vector<double> out(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            double sq = 1e-24;
            for (double m : batch[i].mu) sq += m * m;
            out[i] = std::sqrt(sq);
        }
        return out;
    };
    const std::vector<double> nq = norms(queries);
    const std::vector<double> ng = norms(gallery);
    Matrix out(queries.size(), gallery.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t j = 0; j < gallery.size(); ++j) {
            if (queries[i].dim() != gallery[j].dim()) {
                throw std::invalid_argument("cosine_distance_matrix: dimension mismatch");
            }
            double dot = 0.0;
            for (std::size_t d = 0; d < queries[i].dim(); ++d) {
                dot += queries[i].mu[d] * gallery[j].mu[d];
            }
            out.at(i, j) = 1.0 - dot / (nq[i] * ng[j]);
        }
    }
    return out;
}

}  // namespace probembed
