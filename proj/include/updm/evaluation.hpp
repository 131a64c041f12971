#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "updm/diffusion.hpp"
#include "updm/erasure.hpp"
#include "updm/restoration.hpp"

namespace updm {

// Two-layer network mapping a plane point to K class scores. Stands in for
// the paper's per-concept detectors; every downstream metric is gated on its
// held-out accuracy.
struct ConceptClassifier {
    Tensor w1, b1, w2, b2;
    int num_classes = 0;
    double holdout_accuracy = 0.0;
    TrainingReport report;

    int predict(double x, double y) const;
    std::vector<double> probabilities(double x, double y) const;

    std::vector<std::pair<std::string, Tensor*>> named_tensors();
};

struct ClassifierConfig {
    int steps = 4000;
    double learning_rate = 5e-3;
    int hidden = 32;
    int holdout = 600;
    double min_accuracy = 0.98;
};

ConceptClassifier train_classifier(const ConceptWorld& world, const ClassifierConfig& cfg,
                                   std::uint64_t seed);

// Fraction of n generated samples classified as the target concept. The
// prompt is [NEUTRAL, token] or [NEUTRAL, S* <- embedding].
double restoration_accuracy(const DenoiserModel& model, const PromptSpec& prompt,
                            const ConceptClassifier& classifier, int target, int n,
                            const NoiseSchedule& sched, int ddim_stride, std::uint64_t seed,
                            int workers = 1);

// mean classifier probability of the target class over n samples
double restoration_probability(const DenoiserModel& model, const PromptSpec& prompt,
                               const ConceptClassifier& classifier, int target, int n,
                               const NoiseSchedule& sched, int ddim_stride, std::uint64_t seed);

struct AttackRow {
    std::string name;
    // one prompt per model column (white-box rows differ per column; shared
    // attacks repeat the same prompt)
    std::vector<PromptSpec> prompts;
};

struct TransferMatrix {
    std::vector<std::string> attacks;
    std::vector<std::string> models;
    std::vector<std::vector<double>> cells;  // [attack][model]
    std::vector<double> row_average;
    int samples_per_cell = 0;
};

TransferMatrix build_transfer_matrix(const std::vector<AttackRow>& rows,
                                     const std::vector<std::pair<std::string, const DenoiserModel*>>& models,
                                     const ConceptClassifier& classifier, int target, int n,
                                     const NoiseSchedule& sched, int ddim_stride,
                                     std::uint64_t seed, int workers = 1);

struct AtlasReport {
    std::vector<std::string> labels;              // one per embedding
    std::vector<std::array<double, 2>> coords;    // PCA projection
    std::vector<double> component1, component2;   // orthonormal axes
    std::optional<double> mean_silhouette;        // absent with < 2 labels
    std::map<std::string, double> label_spread;   // mean cosine distance to own centroid
};

AtlasReport embedding_atlas(const std::vector<std::pair<std::string, Tensor>>& embeddings);

// silhouette on cosine distance, grouped by label; returns the mean over all
// points (absent when only one label is present)
std::optional<double> mean_silhouette_cosine(const std::vector<std::string>& labels,
                                             const std::vector<Tensor>& embeddings);

struct AblationRecord {
    int epoch = 0;
    std::map<std::string, double> accuracy;   // per unlearned model
    std::map<std::string, double> mean_prob;  // classifier probability reading
};

struct AblationTrace {
    std::vector<AblationRecord> with_as;
    std::vector<AblationRecord> without_as;
};

struct AblationConfig {
    int record_every = 20;
    int samples = 200;
    int ddim_stride = 5;
};

AblationTrace ablation_trace(const DenoiserModel& surrogate, const ConceptWorld& world,
                             const NoiseSchedule& sched, int target, const ASConfig& as_cfg,
                             const std::vector<const UnlearnedModel*>& unlearned,
                             const ConceptClassifier& classifier, const AblationConfig& cfg,
                             std::uint64_t seed);

}  // namespace updm
