#include "updm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "updm/linalg.hpp"

namespace updm {

namespace {

Tensor classifier_logits(const ConceptClassifier& c, double x, double y) {
    const Tensor in = Tensor::from_values({1, 2}, {x, y});
    const Tensor h = silu(add(matmul(in, c.w1), c.b1));
    return add(matmul(h, c.w2), c.b2);
}

}  // namespace

int ConceptClassifier::predict(double x, double y) const {
    NoGradGuard ng;
    const Tensor logits = classifier_logits(*this, x, y);
    int best = 0;
    for (int j = 1; j < num_classes; ++j) {
        if (logits.at(0, j) > logits.at(0, best)) best = j;
    }
    return best;
}

std::vector<double> ConceptClassifier::probabilities(double x, double y) const {
    NoGradGuard ng;
    const Tensor probs = softmax_rows(classifier_logits(*this, x, y));
    return std::vector<double>(probs.data->begin(), probs.data->end());
}

std::vector<std::pair<std::string, Tensor*>> ConceptClassifier::named_tensors() {
    return {{"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"b2", &b2}};
}

ConceptClassifier train_classifier(const ConceptWorld& world, const ClassifierConfig& cfg,
                                   std::uint64_t seed) {
    if (world.num_concepts < 1) throw std::invalid_argument("updm: classifier needs a populated world");
    RandomStream rng(derive_seed(seed, 0x636c73ULL));

    ConceptClassifier c;
    c.num_classes = world.num_concepts;
    const double stddev1 = std::sqrt(2.0 / (2 + cfg.hidden));
    const double stddev2 = std::sqrt(2.0 / (cfg.hidden + world.num_concepts));
    c.w1 = Tensor::gaussian({2, cfg.hidden}, stddev1, rng, true);
    c.b1 = Tensor::zeros({1, cfg.hidden}, true);
    c.w2 = Tensor::gaussian({cfg.hidden, world.num_concepts}, stddev2, rng, true);
    c.b2 = Tensor::zeros({1, world.num_concepts}, true);

    Optimizer opt(OptKind::adam, cfg.learning_rate, 0.0,
                  {{"w1", c.w1}, {"b1", c.b1}, {"w2", c.w2}, {"b2", c.b2}});
    for (int step = 0; step < cfg.steps; ++step) {
        const int label = rng.uniform_int(0, world.num_concepts - 1);
        const auto p = world.sample_point(label, rng);
        const Tensor in = Tensor::from_values({1, 2}, {p[0], p[1]});
        const Tensor h = silu(add(matmul(in, c.w1), c.b1));
        const Tensor logits = add(matmul(h, c.w2), c.b2);
        const Tensor loss = cross_entropy(logits, label);
        backward(loss);
        opt.step();
        opt.zero_grad();
        c.report.loss_trace.push_back(loss.value());
    }

    int correct = 0;
    for (int i = 0; i < cfg.holdout; ++i) {
        const int label = rng.uniform_int(0, world.num_concepts - 1);
        const auto p = world.sample_point(label, rng);
        if (c.predict(p[0], p[1]) == label) ++correct;
    }
    c.holdout_accuracy = static_cast<double>(correct) / cfg.holdout;
    if (c.holdout_accuracy < cfg.min_accuracy) {
        throw std::runtime_error("updm: classifier failed its accuracy gate (reached " +
                                 std::to_string(c.holdout_accuracy) + ", needs " +
                                 std::to_string(cfg.min_accuracy) + ")");
    }
    return c;
}

double restoration_accuracy(const DenoiserModel& model, const PromptSpec& prompt,
                            const ConceptClassifier& classifier, int target, int n,
                            const NoiseSchedule& sched, int ddim_stride, std::uint64_t seed,
                            int workers) {
    if (n < 1) throw std::invalid_argument("updm: accuracy needs n >= 1");
    std::vector<int> hits(static_cast<std::size_t>(n), 0);
    auto run_range = [&](int lo, int hi) {
        for (int s = lo; s < hi; ++s) {
            // per-sample stream keyed by (seed, s): worker count cannot change results
            const std::vector<Tensor> out =
                ddim_sample(model, prompt, 1, sched, ddim_stride, derive_seed(seed, 0x63656c6cULL, static_cast<std::uint64_t>(s)));
            hits[static_cast<std::size_t>(s)] =
                classifier.predict(out[0].at(0, 0), out[0].at(0, 1)) == target ? 1 : 0;
        }
    };
    if (workers <= 1) {
        run_range(0, n);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (n + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int lo = w * chunk;
            const int hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(run_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    int total = 0;
    for (int h : hits) total += h;
    return static_cast<double>(total) / n;
}

double restoration_probability(const DenoiserModel& model, const PromptSpec& prompt,
                               const ConceptClassifier& classifier, int target, int n,
                               const NoiseSchedule& sched, int ddim_stride, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("updm: probability needs n >= 1");
    double acc = 0.0;
    for (int s = 0; s < n; ++s) {
        const std::vector<Tensor> out =
            ddim_sample(model, prompt, 1, sched, ddim_stride,
                        derive_seed(seed, 0x63656c6cULL, static_cast<std::uint64_t>(s)));
        acc += classifier.probabilities(out[0].at(0, 0), out[0].at(0, 1))[static_cast<std::size_t>(target)];
    }
    return acc / n;
}

TransferMatrix build_transfer_matrix(
    const std::vector<AttackRow>& rows,
    const std::vector<std::pair<std::string, const DenoiserModel*>>& models,
    const ConceptClassifier& classifier, int target, int n, const NoiseSchedule& sched,
    int ddim_stride, std::uint64_t seed, int workers) {
    TransferMatrix m;
    m.samples_per_cell = n;
    for (const auto& [name, model] : models) m.models.push_back(name);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const AttackRow& row = rows[r];
        if (row.prompts.size() != models.size()) {
            throw std::invalid_argument("updm: attack row '" + row.name +
                                        "' must supply one prompt per model");
        }
        m.attacks.push_back(row.name);
        std::vector<double> cells(models.size(), 0.0);
        for (std::size_t c = 0; c < models.size(); ++c) {
            cells[c] = restoration_accuracy(*models[c].second, row.prompts[c], classifier, target,
                                            n, sched, ddim_stride,
                                            derive_seed(seed, r, c), workers);
        }
        double avg = 0.0;
        for (double v : cells) avg += v;
        m.row_average.push_back(cells.empty() ? 0.0 : avg / cells.size());
        m.cells.push_back(std::move(cells));
    }
    return m;
}

namespace {

double cosine_distance(const Tensor& a, const Tensor& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a.at(i) * b.at(i);
        na += a.at(i) * a.at(i);
        nb += b.at(i) * b.at(i);
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    if (denom == 0.0) return 0.0;
    return 1.0 - dot / denom;
}

}  // namespace

std::optional<double> mean_silhouette_cosine(const std::vector<std::string>& labels,
                                             const std::vector<Tensor>& embeddings) {
    const std::size_t n = labels.size();
    std::vector<std::string> distinct;
    for (const auto& l : labels) {
        if (std::find(distinct.begin(), distinct.end(), l) == distinct.end()) distinct.push_back(l);
    }
    if (distinct.size() < 2) return std::nullopt;

    double total = 0.0;
    int counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double a = 0.0;
        int own = 0;
        double best_b = 0.0;
        bool has_b = false;
        for (const auto& other : distinct) {
            if (other == labels[i]) continue;
            double d = 0.0;
            int cnt = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (labels[j] != other) continue;
                d += cosine_distance(embeddings[i], embeddings[j]);
                ++cnt;
            }
            if (cnt > 0) {
                d /= cnt;
                if (!has_b || d < best_b) {
                    best_b = d;
                    has_b = true;
                }
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || labels[j] != labels[i]) continue;
            a += cosine_distance(embeddings[i], embeddings[j]);
            ++own;
        }
        if (own == 0 || !has_b) continue;  // singleton clusters contribute 0 by convention
        a /= own;
        const double s = (best_b - a) / std::max(a, best_b);
        total += s;
        ++counted;
    }
    if (counted == 0) return std::nullopt;
    return total / counted;
}

AtlasReport embedding_atlas(const std::vector<std::pair<std::string, Tensor>>& embeddings) {
    if (embeddings.size() < 2) throw std::invalid_argument("updm: atlas needs >= 2 embeddings");
    const int dim = embeddings[0].second.cols();
    const int n = static_cast<int>(embeddings.size());

    std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
    for (const auto& [label, e] : embeddings) {
        for (int j = 0; j < dim; ++j) mean[static_cast<std::size_t>(j)] += e.at(0, j);
    }
    for (double& v : mean) v /= n;

    std::vector<double> cov(static_cast<std::size_t>(dim) * dim, 0.0);
    for (const auto& [label, e] : embeddings) {
        for (int i = 0; i < dim; ++i) {
            const double di = e.at(0, i) - mean[static_cast<std::size_t>(i)];
            for (int j = 0; j < dim; ++j) {
                cov[static_cast<std::size_t>(i) * dim + j] +=
                    di * (e.at(0, j) - mean[static_cast<std::size_t>(j)]);
            }
        }
    }
    for (double& v : cov) v /= n;

    std::vector<double> values, vectors;
    jacobi_eigen_sym(cov, dim, values, vectors);
    if (values[0] <= 1e-15) {
        throw std::runtime_error("updm: degenerate atlas projection (all embeddings identical)");
    }

    AtlasReport report;
    report.component1.assign(vectors.begin(), vectors.begin() + dim);
    report.component2.assign(vectors.begin() + dim, vectors.begin() + 2 * dim);
    std::vector<Tensor> raw;
    for (const auto& [label, e] : embeddings) {
        report.labels.push_back(label);
        raw.push_back(e);
        double x = 0.0, y = 0.0;
        for (int j = 0; j < dim; ++j) {
            const double centered = e.at(0, j) - mean[static_cast<std::size_t>(j)];
            x += centered * report.component1[static_cast<std::size_t>(j)];
            y += centered * report.component2[static_cast<std::size_t>(j)];
        }
        report.coords.push_back({x, y});
    }
    report.mean_silhouette = mean_silhouette_cosine(report.labels, raw);

    // per-label mean cosine distance to the label centroid
    std::vector<std::string> distinct;
    for (const auto& l : report.labels) {
        if (std::find(distinct.begin(), distinct.end(), l) == distinct.end()) distinct.push_back(l);
    }
    for (const auto& label : distinct) {
        Tensor centroid = Tensor::zeros({1, dim});
        int cnt = 0;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (report.labels[i] != label) continue;
            for (int j = 0; j < dim; ++j) centroid.mut(0, j) += raw[i].at(0, j);
            ++cnt;
        }
        for (int j = 0; j < dim; ++j) centroid.mut(0, j) /= cnt;
        double spread = 0.0;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (report.labels[i] != label) continue;
            spread += cosine_distance(raw[i], centroid);
        }
        report.label_spread[label] = spread / cnt;
    }
    return report;
}

AblationTrace ablation_trace(const DenoiserModel& surrogate, const ConceptWorld& world,
                             const NoiseSchedule& sched, int target, const ASConfig& as_cfg,
                             const std::vector<const UnlearnedModel*>& unlearned,
                             const ConceptClassifier& classifier, const AblationConfig& cfg,
                             std::uint64_t seed) {
    if (cfg.record_every < 1) throw std::invalid_argument("updm: record_every must be >= 1");

    auto score_embedding = [&](const Tensor& v, int epoch, std::vector<AblationRecord>& out) {
        AblationRecord rec;
        rec.epoch = epoch;
        for (const UnlearnedModel* u : unlearned) {
            const std::string id = erasure_method_name(u->spec.method);
            const PromptSpec prompt = PromptSpec::adversarial(v);
            rec.accuracy[id] = restoration_accuracy(u->model, prompt, classifier, target,
                                                    cfg.samples, sched, cfg.ddim_stride,
                                                    derive_seed(seed, 0xab1ULL, epoch));
            rec.mean_prob[id] = restoration_probability(u->model, prompt, classifier, target,
                                                        cfg.samples, sched, cfg.ddim_stride,
                                                        derive_seed(seed, 0xab1ULL, epoch));
        }
        out.push_back(std::move(rec));
    };

    AblationTrace trace;
    for (const bool with_as : {true, false}) {
        ASConfig run_cfg = as_cfg;
        run_cfg.param_updates_enabled = with_as;
        std::vector<AblationRecord>& sink = with_as ? trace.with_as : trace.without_as;
        adversarial_search(surrogate, world, sched, target, run_cfg, seed, nullptr,
                           [&](int epoch, const Tensor& v) {
                               if (epoch % cfg.record_every == 0) score_embedding(v, epoch, sink);
                           });
    }
    return trace;
}

}  // namespace updm
