#include "updm/config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "updm/checkpoint.hpp"

namespace updm {

using nlohmann::json;

ExperimentConfig::ExperimentConfig()
    : esd(ErasureSpec::defaults(ErasureMethod::esd, 0)),
      ca(ErasureSpec::defaults(ErasureMethod::ca, 0)),
      fmn(ErasureSpec::defaults(ErasureMethod::fmn, 0)),
      uce(ErasureSpec::defaults(ErasureMethod::uce, 0)) {}

namespace {

json erasure_to_json(const ErasureSpec& s) {
    json j;
    j["steps"] = s.steps;
    j["learning_rate"] = s.learning_rate;
    switch (s.method) {
        case ErasureMethod::esd:
            j["negative_guidance"] = s.negative_guidance;
            j["attention_only"] = s.attention_only;
            break;
        case ErasureMethod::ca:
            j["anchor"] = s.anchor;
            break;
        case ErasureMethod::uce:
            j.erase("steps");
            j.erase("learning_rate");
            j["ridge"] = s.ridge;
            break;
        case ErasureMethod::fmn:
            break;
    }
    return j;
}

void erasure_from_json(const json& j, ErasureSpec& s) {
    s.steps = j.value("steps", s.steps);
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.negative_guidance = j.value("negative_guidance", s.negative_guidance);
    s.attention_only = j.value("attention_only", s.attention_only);
    s.anchor = j.value("anchor", s.anchor);
    s.ridge = j.value("ridge", s.ridge);
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string ExperimentConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["target"] = target;
    j["workers"] = workers;
    j["world"] = {{"concepts", world.concepts},
                  {"radius", world.radius},
                  {"spread", world.spread},
                  {"points_per_concept", world.points_per_concept}};
    j["schedule"] = {{"steps", schedule.steps},
                     {"beta_start", schedule.beta_start},
                     {"beta_end", schedule.beta_end}};
    j["base_training"] = {{"steps", base_training.steps},
                          {"learning_rate", base_training.learning_rate},
                          {"weight_decay", base_training.weight_decay},
                          {"neutral_fraction", base_training.neutral_fraction}};
    j["classifier"] = {{"steps", classifier.steps},
                       {"learning_rate", classifier.learning_rate},
                       {"hidden", classifier.hidden},
                       {"holdout", classifier.holdout},
                       {"min_accuracy", classifier.min_accuracy}};
    j["erasure"] = {{"esd", erasure_to_json(esd)},
                    {"ca", erasure_to_json(ca)},
                    {"fmn", erasure_to_json(fmn)},
                    {"uce", erasure_to_json(uce)}};
    j["textual_inversion"] = {{"iters", ti.iters},
                              {"learning_rate", ti.learning_rate},
                              {"weight_decay", ti.weight_decay},
                              {"atlas_seeds", ti.atlas_seeds}};
    j["adversarial_search"] = {{"epochs", search.epochs},
                               {"embed_iters", search.embed_iters},
                               {"update_freq", search.update_freq},
                               {"param_iters", search.param_iters},
                               {"lr_embed", search.lr_embed},
                               {"wd_embed", search.wd_embed},
                               {"lr_params", search.lr_params},
                               {"v0_policy", v0_policy_name(search.v0_policy)}};
    j["evaluation"] = {{"samples_per_cell", eval.samples_per_cell},
                       {"selection_samples", eval.selection_samples},
                       {"ddim_stride", eval.ddim_stride},
                       {"record_every", eval.record_every},
                       {"ablation_samples", eval.ablation_samples}};
    return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("updm: config parse error: ") + e.what());
    }
    ExperimentConfig c;
    get_if(j, "seed", c.seed);
    get_if(j, "target", c.target);
    get_if(j, "workers", c.workers);
    if (j.contains("world")) {
        const json& w = j["world"];
        get_if(w, "concepts", c.world.concepts);
        get_if(w, "radius", c.world.radius);
        get_if(w, "spread", c.world.spread);
        get_if(w, "points_per_concept", c.world.points_per_concept);
    }
    if (j.contains("schedule")) {
        const json& s = j["schedule"];
        get_if(s, "steps", c.schedule.steps);
        get_if(s, "beta_start", c.schedule.beta_start);
        get_if(s, "beta_end", c.schedule.beta_end);
    }
    if (j.contains("base_training")) {
        const json& t = j["base_training"];
        get_if(t, "steps", c.base_training.steps);
        get_if(t, "learning_rate", c.base_training.learning_rate);
        get_if(t, "weight_decay", c.base_training.weight_decay);
        get_if(t, "neutral_fraction", c.base_training.neutral_fraction);
    }
    if (j.contains("classifier")) {
        const json& k = j["classifier"];
        get_if(k, "steps", c.classifier.steps);
        get_if(k, "learning_rate", c.classifier.learning_rate);
        get_if(k, "hidden", c.classifier.hidden);
        get_if(k, "holdout", c.classifier.holdout);
        get_if(k, "min_accuracy", c.classifier.min_accuracy);
    }
    if (j.contains("erasure")) {
        const json& e = j["erasure"];
        if (e.contains("esd")) erasure_from_json(e["esd"], c.esd);
        if (e.contains("ca")) erasure_from_json(e["ca"], c.ca);
        if (e.contains("fmn")) erasure_from_json(e["fmn"], c.fmn);
        if (e.contains("uce")) erasure_from_json(e["uce"], c.uce);
    }
    if (j.contains("textual_inversion")) {
        const json& t = j["textual_inversion"];
        get_if(t, "iters", c.ti.iters);
        get_if(t, "learning_rate", c.ti.learning_rate);
        get_if(t, "weight_decay", c.ti.weight_decay);
        get_if(t, "atlas_seeds", c.ti.atlas_seeds);
    }
    if (j.contains("adversarial_search")) {
        const json& a = j["adversarial_search"];
        get_if(a, "epochs", c.search.epochs);
        get_if(a, "embed_iters", c.search.embed_iters);
        get_if(a, "update_freq", c.search.update_freq);
        get_if(a, "param_iters", c.search.param_iters);
        get_if(a, "lr_embed", c.search.lr_embed);
        get_if(a, "wd_embed", c.search.wd_embed);
        get_if(a, "lr_params", c.search.lr_params);
        if (a.contains("v0_policy")) c.search.v0_policy = v0_policy_from_name(a["v0_policy"]);
    }
    if (j.contains("evaluation")) {
        const json& e = j["evaluation"];
        get_if(e, "samples_per_cell", c.eval.samples_per_cell);
        get_if(e, "selection_samples", c.eval.selection_samples);
        get_if(e, "ddim_stride", c.eval.ddim_stride);
        get_if(e, "record_every", c.eval.record_every);
        get_if(e, "ablation_samples", c.eval.ablation_samples);
    }
    c.esd.target = c.ca.target = c.fmn.target = c.uce.target = c.target;
    return c;
}

ExperimentConfig ExperimentConfig::load_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("updm: cannot open config '" + path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_json(text);
}

std::string ExperimentConfig::config_hash() const {
    const std::string canon = to_json();
    return hash_hex(fnv1a64(canon.data(), canon.size()));
}

}  // namespace updm
