#include "updm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "updm/reports.hpp"

namespace updm {

using nlohmann::json;

namespace {

const std::vector<std::string> kModelIds = {"base", "esd", "ca", "fmn", "uce"};
const std::vector<std::string> kErasureIds = {"esd", "ca", "fmn", "uce"};

std::string combine_hashes(const std::vector<std::string>& hashes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const std::string& s : hashes) h = fnv1a64(s.data(), s.size(), h);
    return hash_hex(h);
}

std::string stage_file(const std::string& stage) {
    if (stage == "attack_as") return "candidates.updm";
    return stage + ".updm";
}

}  // namespace

const StageStatus* PipelineResult::find(const std::string& name) const {
    for (const StageStatus& s : stages) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

Checkpoint model_to_checkpoint(const DenoiserModel& model, const Provenance& prov) {
    Checkpoint c;
    c.prov = prov;
    json meta;
    meta["data_dim"] = model.data_dim;
    meta["embed_dim"] = model.embed_dim;
    meta["hidden_dim"] = model.hidden_dim;
    meta["attn_dim"] = model.attn_dim;
    meta["time_dim"] = model.time_dim;
    meta["vocab"] = model.vocab;
    c.meta_json = meta.dump();
    for (const auto& [name, t] : model.named_tensors()) {
        c.tensors.emplace_back(name, t->clone_detached());
    }
    return c;
}

DenoiserModel model_from_checkpoint(const Checkpoint& ckpt) {
    const json meta = json::parse(ckpt.meta_json);
    DenoiserModel m;
    m.data_dim = meta.at("data_dim");
    m.embed_dim = meta.at("embed_dim");
    m.hidden_dim = meta.at("hidden_dim");
    m.attn_dim = meta.at("attn_dim");
    m.time_dim = meta.at("time_dim");
    m.vocab = meta.at("vocab").get<std::vector<std::string>>();
    for (auto& [name, t] : m.named_tensors()) *t = ckpt.tensor(name).clone_detached();
    return m;
}

Checkpoint classifier_to_checkpoint(const ConceptClassifier& classifier, const Provenance& prov) {
    Checkpoint c;
    c.prov = prov;
    json meta;
    meta["num_classes"] = classifier.num_classes;
    meta["holdout_accuracy"] = classifier.holdout_accuracy;
    c.meta_json = meta.dump();
    ConceptClassifier& mut = const_cast<ConceptClassifier&>(classifier);
    for (const auto& [name, t] : mut.named_tensors()) c.tensors.emplace_back(name, t->clone_detached());
    return c;
}

ConceptClassifier classifier_from_checkpoint(const Checkpoint& ckpt) {
    const json meta = json::parse(ckpt.meta_json);
    ConceptClassifier c;
    c.num_classes = meta.at("num_classes");
    c.holdout_accuracy = meta.at("holdout_accuracy");
    for (auto& [name, t] : c.named_tensors()) *t = ckpt.tensor(name).clone_detached();
    return c;
}

Checkpoint candidates_to_checkpoint(const CandidateSet& candidates, const Provenance& prov) {
    Checkpoint c;
    c.prov = prov;
    json meta;
    meta["target"] = candidates.target;
    meta["seed"] = candidates.seed;
    meta["surrogate_base_checksum"] = candidates.surrogate_base_checksum;
    meta["update_epochs"] = candidates.update_epochs;
    meta["config"] = {{"epochs", candidates.config.epochs},
                      {"embed_iters", candidates.config.embed_iters},
                      {"update_freq", candidates.config.update_freq},
                      {"param_iters", candidates.config.param_iters},
                      {"lr_embed", candidates.config.lr_embed},
                      {"wd_embed", candidates.config.wd_embed},
                      {"lr_params", candidates.config.lr_params},
                      {"v0_policy", v0_policy_name(candidates.config.v0_policy)}};
    std::vector<int> epochs;
    std::vector<double> losses;
    for (const CandidateEntry& e : candidates.entries) {
        epochs.push_back(e.epoch);
        losses.push_back(e.loss);
    }
    meta["epochs"] = epochs;
    meta["losses"] = losses;
    c.meta_json = meta.dump();
    for (const CandidateEntry& e : candidates.entries) {
        c.tensors.emplace_back("v_" + std::to_string(e.epoch), e.embedding.clone_detached());
    }
    return c;
}

CandidateSet candidates_from_checkpoint(const Checkpoint& ckpt) {
    const json meta = json::parse(ckpt.meta_json);
    CandidateSet v;
    v.target = meta.at("target");
    v.seed = meta.at("seed");
    v.surrogate_base_checksum = meta.at("surrogate_base_checksum");
    v.update_epochs = meta.at("update_epochs").get<std::vector<int>>();
    const json& cfg = meta.at("config");
    v.config.epochs = cfg.at("epochs");
    v.config.embed_iters = cfg.at("embed_iters");
    v.config.update_freq = cfg.at("update_freq");
    v.config.param_iters = cfg.at("param_iters");
    v.config.lr_embed = cfg.at("lr_embed");
    v.config.wd_embed = cfg.at("wd_embed");
    v.config.lr_params = cfg.at("lr_params");
    v.config.v0_policy = v0_policy_from_name(cfg.at("v0_policy"));
    const std::vector<int> epochs = meta.at("epochs").get<std::vector<int>>();
    const std::vector<double> losses = meta.at("losses").get<std::vector<double>>();
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        CandidateEntry e;
        e.epoch = epochs[i];
        e.loss = losses[i];
        e.embedding = ckpt.tensor("v_" + std::to_string(e.epoch)).clone_detached();
        v.entries.push_back(std::move(e));
    }
    return v;
}

std::string describe_checkpoint(const std::filesystem::path& path) {
    const Checkpoint c = Checkpoint::load(path);
    std::ostringstream os;
    os << "file:         " << path.string() << "\n";
    os << "stage:        " << c.prov.stage << "\n";
    os << "seed:         " << c.prov.seed << "\n";
    os << "config hash:  " << c.prov.config_hash << "\n";
    os << "parent hash:  " << c.prov.parent_hash << "\n";
    os << "content hash: " << c.content_hash() << "\n";
    os << "tensors:      " << c.tensors.size() << "\n";
    for (const auto& [name, t] : c.tensors) {
        os << "  " << name << " " << t.shape_str() << "\n";
    }
    if (!c.meta_json.empty()) os << "meta: " << c.meta_json << "\n";
    return os.str();
}

namespace {

// Orchestration state: stages communicate through this context; every
// checkpoint read/write is logged per stage for the access audit.
struct PipelineContext {
    const ExperimentConfig& cfg;
    std::filesystem::path dir;
    PipelineOptions opts;
    std::string config_hash;
    ConceptWorld world;
    NoiseSchedule sched;
    std::ofstream log;

    DenoiserModel base;
    std::map<std::string, UnlearnedModel> unlearned;
    std::map<std::string, std::vector<Tensor>> ti_embeddings;  // model id -> one v per seed
    CandidateSet candidates;
    ConceptClassifier classifier;
    std::map<std::string, std::string> stage_hash;  // stage -> output content hash

    std::vector<StageStatus> statuses;
    StageStatus* current = nullptr;

    PipelineContext(const ExperimentConfig& c, std::filesystem::path d, PipelineOptions o)
        : cfg(c),
          dir(std::move(d)),
          opts(std::move(o)),
          config_hash(c.config_hash()),
          world(build_world(c.world.concepts, c.world.radius, c.world.spread,
                            c.world.points_per_concept, c.seed)),
          sched(build_schedule(c.schedule.steps, c.schedule.beta_start, c.schedule.beta_end)) {}

    std::filesystem::path path(const std::string& file) const { return dir / file; }

    void note_input(const std::string& file) {
        if (current) current->inputs.push_back(file);
    }

    const DenoiserModel* model_by_id(const std::string& id) const {
        if (id == "base") return &base;
        auto it = unlearned.find(id);
        if (it == unlearned.end()) throw std::runtime_error("updm: no model '" + id + "' loaded");
        return &it->second.model;
    }

    // Runs or skips one checkpointed stage. `parents` are stage names whose
    // output hashes feed the provenance chain.
    template <typename Make, typename Restore>
    void checkpoint_stage(const std::string& name, const std::string& file,
                          const std::vector<std::string>& parents, Make make, Restore restore) {
        statuses.push_back({name});
        current = &statuses.back();
        std::vector<std::string> parent_hashes;
        for (const std::string& p : parents) {
            parent_hashes.push_back(stage_hash.at(p));
            note_input(stage_file(p));
        }
        Provenance prov{name, cfg.seed, config_hash, combine_hashes(parent_hashes)};

        const std::filesystem::path out = path(file);
        if (opts.resume && std::filesystem::exists(out)) {
            try {
                Checkpoint existing = Checkpoint::load(out);
                if (existing.prov.stage == prov.stage && existing.prov.seed == prov.seed &&
                    existing.prov.config_hash == prov.config_hash &&
                    existing.prov.parent_hash == prov.parent_hash) {
                    restore(existing);
                    current->skipped = true;
                    current->output_hash = existing.content_hash();
                    stage_hash[name] = current->output_hash;
                    log << "stage " << name << ": skipped (up to date)\n" << std::flush;
                    current = nullptr;
                    return;
                }
            } catch (const std::exception& e) {
                log << "stage " << name << ": cannot reuse checkpoint (" << e.what() << ")\n";
            }
        }
        const auto start = std::chrono::steady_clock::now();
        Checkpoint fresh = make(prov);
        fresh.save(out);
        current->output_hash = fresh.content_hash();
        stage_hash[name] = current->output_hash;
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
        log << "stage " << name << ": done in " << ms << " ms\n" << std::flush;
        current = nullptr;
    }

    // Report stages write text artifacts plus a provenance sidecar used for
    // skip detection.
    template <typename Emit>
    void report_stage(const std::string& name, const std::vector<std::string>& parents,
                      const std::vector<std::string>& files, Emit emit) {
        statuses.push_back({name});
        current = &statuses.back();
        std::vector<std::string> parent_hashes;
        for (const std::string& p : parents) {
            parent_hashes.push_back(stage_hash.at(p));
            note_input(stage_file(p));
        }
        const std::string parent_hash = combine_hashes(parent_hashes);
        json prov;
        prov["stage"] = name;
        prov["seed"] = cfg.seed;
        prov["config_hash"] = config_hash;
        prov["parent_hash"] = parent_hash;
        const std::string prov_text = prov.dump(2) + "\n";
        const std::filesystem::path prov_path = path(name + ".prov.json");

        bool fresh_needed = !opts.resume;
        if (!fresh_needed) {
            fresh_needed = !std::filesystem::exists(prov_path) ||
                           read_text_file(prov_path) != prov_text;
            for (const std::string& f : files) {
                fresh_needed = fresh_needed || !std::filesystem::exists(path(f));
            }
        }
        if (!fresh_needed) {
            current->skipped = true;
            current->output_hash = parent_hash;
            stage_hash[name] = parent_hash;
            log << "stage " << name << ": skipped (up to date)\n" << std::flush;
            current = nullptr;
            return;
        }
        const auto start = std::chrono::steady_clock::now();
        emit();
        write_text_file(prov_path, prov_text);
        current->output_hash = parent_hash;
        stage_hash[name] = parent_hash;
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
        log << "stage " << name << ": done in " << ms << " ms\n" << std::flush;
        current = nullptr;
    }
};

ErasureSpec spec_for(const ExperimentConfig& cfg, const std::string& id) {
    if (id == "esd") return cfg.esd;
    if (id == "ca") return cfg.ca;
    if (id == "fmn") return cfg.fmn;
    if (id == "uce") return cfg.uce;
    throw std::invalid_argument("updm: unknown erasure id '" + id + "'");
}

std::uint64_t embedding_seed_key(const Tensor& v, const std::string& model_id) {
    std::uint64_t h = fnv1a64(v.data->data(), v.size());
    return fnv1a64(model_id.data(), model_id.size(), h);
}

// stage dependency map (transitively closed at query time)
const std::map<std::string, std::vector<std::string>>& stage_deps() {
    static const std::map<std::string, std::vector<std::string>> deps = {
        {"base", {}},
        {"erase_esd", {"base"}},
        {"erase_ca", {"base"}},
        {"erase_fmn", {"base"}},
        {"erase_uce", {"base"}},
        {"ti_base", {"base"}},
        {"ti_esd", {"erase_esd"}},
        {"ti_ca", {"erase_ca"}},
        {"ti_fmn", {"erase_fmn"}},
        {"ti_uce", {"erase_uce"}},
        {"attack_as", {"base"}},
        {"classifier", {}},
        {"evaluate",
         {"base", "erase_esd", "erase_ca", "erase_fmn", "erase_uce", "ti_base", "ti_esd", "ti_ca",
          "ti_fmn", "ti_uce", "attack_as", "classifier"}},
        {"atlas", {"ti_base", "ti_esd", "ti_ca", "ti_fmn", "ti_uce", "attack_as"}},
        {"ablate", {"base", "erase_esd", "erase_ca", "erase_fmn", "erase_uce", "classifier"}},
    };
    return deps;
}

const std::vector<std::string>& stage_order() {
    static const std::vector<std::string> order = {
        "base",   "erase_esd", "erase_ca", "erase_fmn", "erase_uce", "ti_base",
        "ti_esd", "ti_ca",     "ti_fmn",   "ti_uce",    "attack_as", "classifier",
        "evaluate", "atlas",   "ablate"};
    return order;
}

std::set<std::string> required_stages(const std::string& until) {
    const auto& order = stage_order();
    if (until.empty()) return {order.begin(), order.end()};
    std::vector<std::string> queue;
    std::istringstream list(until);
    for (std::string name; std::getline(list, name, ',');) {
        if (!stage_deps().count(name)) {
            throw std::invalid_argument("updm: unknown stage '" + name + "'");
        }
        queue.push_back(name);
    }
    std::set<std::string> need;
    while (!queue.empty()) {
        const std::string s = queue.back();
        queue.pop_back();
        if (!need.insert(s).second) continue;
        for (const std::string& d : stage_deps().at(s)) queue.push_back(d);
    }
    return need;
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                            const PipelineOptions& options) {
    std::filesystem::create_directories(out_dir);
    PipelineContext ctx(config, out_dir, options);
    ctx.log.open(out_dir / "log.txt", std::ios::app);

    // the effective config is always materialized for auditability
    write_text_file(ctx.path("effective_config.json"), config.to_json());

    const std::set<std::string> need = required_stages(options.until);
    const int workers = std::max(1, options.workers);

    if (need.count("base")) {
        ctx.checkpoint_stage(
            "base", "base.updm", {},
            [&](const Provenance& prov) {
                ctx.base = DenoiserModel::init(ctx.world, config.seed);
                train_denoiser(ctx.base, ctx.world, ctx.sched, config.base_training, config.seed);
                ctx.base.set_requires_grad(false);
                return model_to_checkpoint(ctx.base, prov);
            },
            [&](const Checkpoint& c) { ctx.base = model_from_checkpoint(c); });
    }

    for (const std::string& id : kErasureIds) {
        const std::string stage = "erase_" + id;
        if (!need.count(stage)) continue;
        ctx.checkpoint_stage(
            stage, stage + ".updm", {"base"},
            [&](const Provenance& prov) {
                ErasureSpec spec = spec_for(config, id);
                UnlearnedModel u = run_erasure(ctx.base, ctx.world, ctx.sched, spec,
                                               derive_seed(config.seed, 0x65726173ULL,
                                                           fnv1a64(id.data(), id.size())));
                Checkpoint c = model_to_checkpoint(u.model, prov);
                json meta = json::parse(c.meta_json);
                meta["erasure"] = {{"method", id},
                                   {"target", spec.target},
                                   {"steps", spec.steps},
                                   {"base_checksum", u.base_checksum},
                                   {"seed", u.seed}};
                c.meta_json = meta.dump();
                ctx.unlearned[id] = std::move(u);
                return c;
            },
            [&](const Checkpoint& c) {
                UnlearnedModel u;
                u.model = model_from_checkpoint(c);
                u.spec = spec_for(config, id);
                const json meta = json::parse(c.meta_json);
                u.base_checksum = meta.at("erasure").at("base_checksum");
                u.seed = meta.at("erasure").at("seed");
                ctx.unlearned[id] = std::move(u);
            });
    }

    for (const std::string& id : kModelIds) {
        const std::string stage = "ti_" + id;
        if (!need.count(stage)) continue;
        const std::vector<std::string> parent = {id == "base" ? std::string("base")
                                                              : "erase_" + id};
        ctx.checkpoint_stage(
            stage, stage + ".updm", parent,
            [&](const Provenance& prov) {
                const DenoiserModel* target_model = ctx.model_by_id(id);
                std::vector<Tensor>& out = ctx.ti_embeddings[id];
                out.clear();
                for (int s = 0; s < config.ti.atlas_seeds; ++s) {
                    out.push_back(textual_inversion(
                        *target_model, ctx.world, ctx.sched, config.target, config.ti.iters,
                        config.ti.learning_rate, config.ti.weight_decay,
                        derive_seed(config.seed, 0x7469ULL, fnv1a64(id.data(), id.size()),
                                    static_cast<std::uint64_t>(s))));
                }
                Checkpoint c;
                c.prov = prov;
                json meta;
                meta["model"] = id;
                meta["target"] = config.target;
                meta["runs"] = config.ti.atlas_seeds;
                c.meta_json = meta.dump();
                for (std::size_t i = 0; i < out.size(); ++i) {
                    c.tensors.emplace_back("v_" + std::to_string(i), out[i].clone_detached());
                }
                return c;
            },
            [&](const Checkpoint& c) {
                std::vector<Tensor>& out = ctx.ti_embeddings[id];
                out.clear();
                for (int s = 0; s < config.ti.atlas_seeds; ++s) {
                    out.push_back(c.tensor("v_" + std::to_string(s)).clone_detached());
                }
            });
    }

    if (need.count("attack_as")) {
        ctx.checkpoint_stage(
            "attack_as", "candidates.updm", {"base"},
            [&](const Provenance& prov) {
                ctx.candidates = adversarial_search(ctx.base, ctx.world, ctx.sched, config.target,
                                                    config.search,
                                                    derive_seed(config.seed, 0x6173ULL));
                write_text_file(ctx.path("candidates.csv"), candidates_to_csv(ctx.candidates));
                return candidates_to_checkpoint(ctx.candidates, prov);
            },
            [&](const Checkpoint& c) {
                ctx.candidates = candidates_from_checkpoint(c);
                if (!std::filesystem::exists(ctx.path("candidates.csv"))) {
                    write_text_file(ctx.path("candidates.csv"), candidates_to_csv(ctx.candidates));
                }
            });
    }

    if (need.count("classifier")) {
        ctx.checkpoint_stage(
            "classifier", "classifier.updm", {},
            [&](const Provenance& prov) {
                ctx.classifier = train_classifier(ctx.world, config.classifier, config.seed);
                return classifier_to_checkpoint(ctx.classifier, prov);
            },
            [&](const Checkpoint& c) { ctx.classifier = classifier_from_checkpoint(c); });
    }

    if (need.count("evaluate")) {
        ctx.report_stage(
            "evaluate",
            {"base", "erase_esd", "erase_ca", "erase_fmn", "erase_uce", "ti_base", "ti_esd",
             "ti_ca", "ti_fmn", "ti_uce", "attack_as", "classifier"},
            {"transfer_matrix.csv", "transfer_matrix.json"}, [&] {
                std::vector<std::pair<std::string, const DenoiserModel*>> models;
                for (const std::string& id : kModelIds) models.emplace_back(id, ctx.model_by_id(id));

                const std::size_t n_models = models.size();
                std::vector<AttackRow> rows;
                const PromptSpec literal = PromptSpec::concept_prompt(ctx.world, config.target);
                rows.push_back({"literal_token", std::vector<PromptSpec>(n_models, literal)});
                for (const std::string& id : kModelIds) {
                    rows.push_back({"ti_" + id,
                                    std::vector<PromptSpec>(
                                        n_models, PromptSpec::adversarial(ctx.ti_embeddings.at(id)[0]))});
                }

                const CandidateSelection by_loss = select_final_loss(ctx.candidates);
                rows.push_back({"as_final_loss",
                                std::vector<PromptSpec>(n_models,
                                                        PromptSpec::adversarial(by_loss.embedding))});

                auto scorer = [&](const Tensor& v, const std::string& model_id) {
                    return restoration_accuracy(
                        *ctx.model_by_id(model_id), PromptSpec::adversarial(v), ctx.classifier,
                        config.target, config.eval.selection_samples, ctx.sched,
                        config.eval.ddim_stride,
                        derive_seed(config.seed, 0x626f76ULL, embedding_seed_key(v, model_id)),
                        workers);
                };
                const auto by_model = select_best_of_v(ctx.candidates, kModelIds, scorer);
                AttackRow best_row{"as_best_of_v", {}};
                for (const std::string& id : kModelIds) {
                    best_row.prompts.push_back(PromptSpec::adversarial(by_model.at(id).embedding));
                }
                rows.push_back(std::move(best_row));

                const TransferMatrix matrix = build_transfer_matrix(
                    rows, models, ctx.classifier, config.target, config.eval.samples_per_cell,
                    ctx.sched, config.eval.ddim_stride, derive_seed(config.seed, 0x6d7478ULL),
                    workers);
                write_text_file(ctx.path("transfer_matrix.csv"), matrix_to_csv(matrix));
                write_text_file(ctx.path("transfer_matrix.json"), matrix_to_json(matrix));
            });
    }

    if (need.count("atlas")) {
        ctx.report_stage(
            "atlas", {"ti_base", "ti_esd", "ti_ca", "ti_fmn", "ti_uce", "attack_as"},
            {"atlas.csv", "atlas.json", "atlas.svg"}, [&] {
                std::vector<std::pair<std::string, Tensor>> labeled;
                for (const std::string& id : kModelIds) {
                    for (const Tensor& v : ctx.ti_embeddings.at(id)) {
                        labeled.emplace_back("ti_" + id, v);
                    }
                }
                for (const CandidateEntry& e : ctx.candidates.entries) {
                    labeled.emplace_back("as", e.embedding);
                }
                const AtlasReport report = embedding_atlas(labeled);
                write_text_file(ctx.path("atlas.csv"), atlas_to_csv(report));
                write_text_file(ctx.path("atlas.json"), atlas_to_json(report));
                write_text_file(ctx.path("atlas.svg"), atlas_to_svg(report));
            });
    }

    if (need.count("ablate")) {
        ctx.report_stage(
            "ablate", {"base", "erase_esd", "erase_ca", "erase_fmn", "erase_uce", "classifier"},
            {"ablation.csv", "ablation.json", "ablation.svg"}, [&] {
                std::vector<const UnlearnedModel*> targets;
                for (const std::string& id : kErasureIds) targets.push_back(&ctx.unlearned.at(id));
                AblationConfig acfg;
                acfg.record_every = config.eval.record_every;
                acfg.samples = config.eval.ablation_samples;
                acfg.ddim_stride = config.eval.ddim_stride;
                const AblationTrace trace =
                    ablation_trace(ctx.base, ctx.world, ctx.sched, config.target, config.search,
                                   targets, ctx.classifier, acfg,
                                   derive_seed(config.seed, 0xab1a7eULL));
                write_text_file(ctx.path("ablation.csv"), ablation_to_csv(trace));
                write_text_file(ctx.path("ablation.json"), ablation_to_json(trace));
                write_text_file(ctx.path("ablation.svg"), ablation_to_svg(trace));
            });
    }

    PipelineResult result;
    result.out_dir = out_dir;
    result.stages = std::move(ctx.statuses);
    return result;
}

}  // namespace updm
