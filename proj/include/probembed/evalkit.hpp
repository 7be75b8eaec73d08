#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "probembed/gaussian.hpp"
#include "probembed/matrix.hpp"
#include "probembed/synth.hpp"
#include "probembed/trainer.hpp"

namespace probembed {

enum class Direction { i2t, t2i };
const char* direction_name(Direction d);

struct RetrievalReport {
    Direction direction = Direction::i2t;
    std::map<int, double> recall_at;  // K -> percentage in [0, 100]
};

inline const std::vector<int> kDefaultKs = {1, 5, 10, 100};

// Percentage of queries whose ground-truth column ranks among the K
// smallest distances of their row. Ties rank the lower column index
// first, so results are machine-independent.
double recall_at_k(const Matrix& distances, const std::vector<std::size_t>& ground_truth,
                   std::size_t k);

RetrievalReport retrieval_report(const Matrix& distances, const std::vector<std::size_t>& ground_truth,
                                 Direction direction, const std::vector<int>& ks = kDefaultKs);

// Sum of the R@K values of both directions over K in {1, 5, 10, 100}.
double rsum(const RetrievalReport& i2t, const RetrievalReport& t2i);

struct ZeroShotResult {
    std::vector<std::optional<double>> per_class;  // empty classes report null
    double mean_accuracy = 0.0;                    // unweighted mean over non-null classes
};

// Per-row argmin over class columns, ties to the lower class index.
std::vector<std::size_t> zero_shot_predictions(const Matrix& distances);

// C-way classification of image embeddings against class prototype
// embeddings by smallest csd (equivalently largest match probability).
ZeroShotResult zero_shot_eval(const std::vector<GaussianEmbedding>& images,
                              const std::vector<GaussianEmbedding>& class_prototypes,
                              const std::vector<int>& labels, const MatchScalars& s);

enum class ConfidenceSource { match_prob, neg_total_variance, random };
const char* confidence_source_name(ConfidenceSource s);
ConfidenceSource confidence_source_from_name(const std::string& name);

struct RiskCoveragePoint {
    double coverage = 0.0;
    double risk = 0.0;
};

struct RiskCoverageCurve {
    std::vector<RiskCoveragePoint> points;  // one per prefix, coverage increasing
    double aurc = 0.0;
    ConfidenceSource confidence_source = ConfidenceSource::match_prob;
};

// Sorts queries by confidence (descending, ties by query index), then for
// every prefix of size m reports coverage m/n and risk 1 - correct/m.
// The stored aurc is the mean of the n prefix risks.
RiskCoverageCurve risk_coverage(const std::vector<double>& confidences,
                                const std::vector<int>& correctness,
                                ConfidenceSource source = ConfidenceSource::match_prob);

// Mean prefix risk of a curve; matches the value stored by risk_coverage.
double aurc(const RiskCoverageCurve& curve);

// Expected calibration error with equal-width bins on [0, 1]; empty bins
// are skipped.
double ece(const std::vector<double>& probabilities, const std::vector<int>& correctness,
           std::size_t n_bins = 10);

// Per-query confidence and top-K correctness for selective retrieval over
// a distance matrix. Confidence sources: match probability of the top-1
// item, negative total variance of the query embedding, or a seeded
// random control.
struct SelectiveInputs {
    std::vector<double> confidences;
    std::vector<int> correctness;
};
SelectiveInputs selective_retrieval_inputs(const Matrix& distances,
                                           const std::vector<std::size_t>& ground_truth,
                                           std::size_t k,
                                           const std::vector<GaussianEmbedding>& queries,
                                           const MatchScalars& s, ConfidenceSource source,
                                           std::uint64_t random_seed = 0);

struct RobustnessEntry {
    PerturbKind kind = PerturbKind::blur;
    int severity = 0;
    int k = 1;
    std::optional<double> relative_recall;  // perturbed R@K / clean R@K; null when clean is 0
};

struct RobustnessReport {
    std::vector<RobustnessEntry> entries;
};

std::optional<double> relative_recall(double clean, double perturbed);

// Re-encodes perturbed copies of every study's first view against the
// clean text embeddings and reports R@K ratios per (kind, severity, K).
// Per-study perturbation seeds derive from `seed`, the kind, and the
// severity.
RobustnessReport robustness_report(const DualEncoderModel& model,
                                   const std::vector<SynthStudy>& studies,
                                   const std::vector<int>& ks, const std::vector<int>& severities,
                                   std::uint64_t seed);

// 1 - cosine similarity of the mean vectors; the retrieval distance used
// for models trained with the InfoNCE objective.
Matrix cosine_distance_matrix(const std::vector<GaussianEmbedding>& queries,
                              const std::vector<GaussianEmbedding>& gallery);

}  // namespace probembed
