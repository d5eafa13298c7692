// SPDX-License-Identifier: Apache-2.0
#include "bmcogan/config.hpp"

#include <fstream>

#include "bmcogan/error.hpp"

namespace bmcogan {

using nlohmann::json;

namespace {

// Reads j[key] into out when present; collects a diagnostic on type errors.
template <typename T>
void take(const json& j, const char* key, T& out, std::vector<std::string>& errs) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        errs.push_back(std::string("field '") + key + "' has the wrong type");
    }
}

void reject_unknown(const json& j, const std::vector<std::string>& known,
                    const std::string& scope, std::vector<std::string>& errs) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : known)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) errs.push_back("unknown field '" + scope + it.key() + "'");
    }
}

[[noreturn]] void fail(const std::vector<std::string>& errs) {
    std::string msg = "config validation failed:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw SchemaError(msg);
}

}  // namespace

json loss_weights_to_json(const LossWeights& w) {
    return json{{"lambda1", w.lambda1},   {"lambda2", w.lambda2},
                {"lambda_d", w.lambda_d}, {"lambda_cls", w.lambda_cls},
                {"lambda_cen", w.lambda_cen}, {"gp_coeff", w.gp_coeff},
                {"delta", w.delta}};
}

LossWeights loss_weights_from_json(const json& j) {
    LossWeights w;
    std::vector<std::string> errs;
    take(j, "lambda1", w.lambda1, errs);
    take(j, "lambda2", w.lambda2, errs);
    take(j, "lambda_d", w.lambda_d, errs);
    take(j, "lambda_cls", w.lambda_cls, errs);
    take(j, "lambda_cen", w.lambda_cen, errs);
    take(j, "gp_coeff", w.gp_coeff, errs);
    take(j, "delta", w.delta, errs);
    reject_unknown(j, {"lambda1", "lambda2", "lambda_d", "lambda_cls", "lambda_cen", "gp_coeff",
                       "delta"},
                   "weights.", errs);
    if (!errs.empty()) fail(errs);
    return w;
}

json train_config_to_json(const TrainConfig& c) {
    return json{{"weights", loss_weights_to_json(c.weights)},
                {"lr_main", c.lr_main},
                {"lr_aux", c.lr_aux},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"n_critic", c.n_critic},
                {"batch_size", c.batch_size},
                {"epochs", c.epochs},
                {"seed", c.seed},
                {"clip_norm", c.clip_norm},
                {"repulsion_margin", c.repulsion_margin},
                {"ablation", to_string(c.ablation)},
                {"dz", c.dz},
                {"gen_hidden", c.gen_hidden},
                {"reg_hidden", c.reg_hidden},
                {"disc_hidden", c.disc_hidden},
                {"critic_hidden", c.critic_hidden},
                {"combined_gen_update", c.combined_gen_update},
                {"regress_real_features", c.regress_real_features},
                {"pretrain_epochs", c.pretrain_epochs},
                {"pretrain_lr", c.pretrain_lr},
                {"checkpoint_every", c.checkpoint_every},
                {"log_every", c.log_every}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    std::vector<std::string> errs;
    if (j.contains("weights")) {
        if (!j["weights"].is_object())
            errs.push_back("field 'weights' must be an object");
        else
            c.weights = loss_weights_from_json(j["weights"]);
    }
    take(j, "lr_main", c.lr_main, errs);
    take(j, "lr_aux", c.lr_aux, errs);
    take(j, "adam_beta1", c.adam_beta1, errs);
    take(j, "adam_beta2", c.adam_beta2, errs);
    take(j, "n_critic", c.n_critic, errs);
    take(j, "batch_size", c.batch_size, errs);
    take(j, "epochs", c.epochs, errs);
    take(j, "seed", c.seed, errs);
    take(j, "clip_norm", c.clip_norm, errs);
    take(j, "repulsion_margin", c.repulsion_margin, errs);
    take(j, "dz", c.dz, errs);
    take(j, "gen_hidden", c.gen_hidden, errs);
    take(j, "reg_hidden", c.reg_hidden, errs);
    take(j, "disc_hidden", c.disc_hidden, errs);
    take(j, "critic_hidden", c.critic_hidden, errs);
    take(j, "combined_gen_update", c.combined_gen_update, errs);
    take(j, "regress_real_features", c.regress_real_features, errs);
    take(j, "pretrain_epochs", c.pretrain_epochs, errs);
    take(j, "pretrain_lr", c.pretrain_lr, errs);
    take(j, "checkpoint_every", c.checkpoint_every, errs);
    take(j, "log_every", c.log_every, errs);
    if (j.contains("ablation")) {
        try {
            c.ablation = parse_ablation(j["ablation"].get<std::string>());
        } catch (const std::exception& e) {
            errs.push_back(e.what());
        }
    }
    reject_unknown(j,
                   {"weights", "lr_main", "lr_aux", "adam_beta1", "adam_beta2", "n_critic",
                    "batch_size", "epochs", "seed", "clip_norm", "repulsion_margin",
                    "ablation", "dz", "gen_hidden",
                    "reg_hidden", "disc_hidden", "critic_hidden", "combined_gen_update",
                    "regress_real_features", "pretrain_epochs", "pretrain_lr",
                    "checkpoint_every", "log_every"},
                   "train.", errs);
    if (!errs.empty()) fail(errs);
    c.validate();
    return c;
}

json synthesis_config_to_json(const SynthesisConfig& c) {
    return json{{"n_per_class", c.n_per_class},
                {"seed", c.seed},
                {"use_D_transform", c.use_D_transform}};
}

SynthesisConfig synthesis_config_from_json(const json& j) {
    SynthesisConfig c;
    std::vector<std::string> errs;
    take(j, "n_per_class", c.n_per_class, errs);
    take(j, "seed", c.seed, errs);
    take(j, "use_D_transform", c.use_D_transform, errs);
    reject_unknown(j, {"n_per_class", "seed", "use_D_transform"}, "synth.", errs);
    if (c.n_per_class < 0) errs.push_back("synth.n_per_class must be >= 0");
    if (!errs.empty()) fail(errs);
    return c;
}

json toy_spec_to_json(const ToySpec& s) {
    return json{{"seed", s.seed},           {"c_seen", s.c_seen},
                {"c_unseen", s.c_unseen},   {"dx", s.dx},
                {"a_dim", s.a_dim},         {"n_per_class", s.n_per_class},
                {"test_per_class", s.test_per_class}, {"noise_sigma", s.noise_sigma}};
}

ToySpec toy_spec_from_json(const json& j) {
    ToySpec s;
    std::vector<std::string> errs;
    take(j, "seed", s.seed, errs);
    take(j, "c_seen", s.c_seen, errs);
    take(j, "c_unseen", s.c_unseen, errs);
    take(j, "dx", s.dx, errs);
    take(j, "a_dim", s.a_dim, errs);
    take(j, "n_per_class", s.n_per_class, errs);
    take(j, "test_per_class", s.test_per_class, errs);
    take(j, "noise_sigma", s.noise_sigma, errs);
    reject_unknown(j,
                   {"seed", "c_seen", "c_unseen", "dx", "a_dim", "n_per_class", "test_per_class",
                    "noise_sigma"},
                   "dataset.toy.", errs);
    if (!errs.empty()) fail(errs);
    return s;
}

GZSLDataset RunConfig::load_data() const {
    GZSLDataset ds = toy ? make_toy_dataset(*toy) : load_dataset(*dataset_dir);
    if (normalize) minmax_normalize(ds);
    return ds;
}

json RunConfig::to_json() const {
    json dataset;
    if (toy)
        dataset = json{{"toy", toy_spec_to_json(*toy)}};
    else
        dataset = json{{"path", dataset_dir->string()}};
    dataset["normalize"] = normalize;
    return json{{"dataset", dataset},
                {"train", train_config_to_json(train)},
                {"synth", synthesis_config_to_json(synth)},
                {"classifier",
                 {{"kind", to_string(classifier.kind)},
                  {"knn_k", classifier.knn_k},
                  {"softmax_epochs", classifier.softmax_epochs},
                  {"softmax_lr", classifier.softmax_lr},
                  {"softmax_batch", classifier.softmax_batch}}},
                {"out_dir", out_dir.string()}};
}

RunConfig run_config_from_json(const json& j) {
    std::vector<std::string> errs;
    if (!j.is_object()) fail({"top-level config must be a JSON object"});
    RunConfig c;

    if (!j.contains("dataset") || !j["dataset"].is_object()) {
        errs.push_back("required object 'dataset' missing");
    } else {
        const auto& d = j["dataset"];
        const bool has_path = d.contains("path");
        const bool has_toy = d.contains("toy");
        if (has_path == has_toy)
            errs.push_back("dataset needs exactly one of 'path' or 'toy'");
        if (has_path) {
            std::string p;
            take(d, "path", p, errs);
            c.dataset_dir = p;
        }
        if (has_toy && d["toy"].is_object()) {
            try {
                c.toy = toy_spec_from_json(d["toy"]);
            } catch (const SchemaError& e) {
                errs.push_back(e.what());
            }
        } else if (has_toy) {
            errs.push_back("dataset.toy must be an object");
        }
        bool norm = false;
        take(d, "normalize", norm, errs);
        c.normalize = norm;
        reject_unknown(d, {"path", "toy", "normalize"}, "dataset.", errs);
    }

    if (j.contains("train")) {
        try {
            c.train = train_config_from_json(j["train"]);
        } catch (const std::exception& e) {
            errs.push_back(e.what());
        }
    }
    if (j.contains("synth")) {
        try {
            c.synth = synthesis_config_from_json(j["synth"]);
        } catch (const SchemaError& e) {
            errs.push_back(e.what());
        }
    }
    if (j.contains("classifier")) {
        const auto& k = j["classifier"];
        std::string kind = "softmax";
        take(k, "kind", kind, errs);
        try {
            c.classifier.kind = parse_classifier_kind(kind);
        } catch (const std::exception& e) {
            errs.push_back(e.what());
        }
        take(k, "knn_k", c.classifier.knn_k, errs);
        take(k, "softmax_epochs", c.classifier.softmax_epochs, errs);
        take(k, "softmax_lr", c.classifier.softmax_lr, errs);
        take(k, "softmax_batch", c.classifier.softmax_batch, errs);
        reject_unknown(k, {"kind", "knn_k", "softmax_epochs", "softmax_lr", "softmax_batch"},
                       "classifier.", errs);
        if (c.classifier.knn_k < 1) errs.push_back("classifier.knn_k must be >= 1");
    }
    if (j.contains("out_dir")) {
        std::string o;
        take(j, "out_dir", o, errs);
        c.out_dir = o;
    }
    reject_unknown(j, {"dataset", "train", "synth", "classifier", "out_dir"}, "", errs);

    if (!errs.empty()) fail(errs);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw LoadError("cannot open config file: " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw SchemaError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ArgumentError("override must look like path.to.key=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json* node = &doc;
    size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw ArgumentError("empty key segment in override: " + assignment);
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        if (!node->is_object() && !node->is_null())
            throw ArgumentError("override path crosses a non-object at '" + key + "'");
        start = dot + 1;
    }
}

const char* run_config_schema() {
    // Mirrored by docs/config.schema.json; the loader enforces the same rules.
    return R"({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "bmcogan run configuration",
  "type": "object",
  "required": ["dataset"],
  "additionalProperties": false,
  "properties": {
    "dataset": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "path": {"type": "string"},
        "toy": {
          "type": "object",
          "additionalProperties": false,
          "properties": {
            "seed": {"type": "integer", "minimum": 0},
            "c_seen": {"type": "integer", "minimum": 1},
            "c_unseen": {"type": "integer", "minimum": 1},
            "dx": {"type": "integer", "minimum": 1},
            "a_dim": {"type": "integer", "minimum": 1},
            "n_per_class": {"type": "integer", "minimum": 1},
            "test_per_class": {"type": "integer"},
            "noise_sigma": {"type": "number", "exclusiveMinimum": 0}
          }
        },
        "normalize": {"type": "boolean"}
      },
      "oneOf": [{"required": ["path"]}, {"required": ["toy"]}]
    },
    "train": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "weights": {
          "type": "object",
          "additionalProperties": false,
          "properties": {
            "lambda1": {"type": "number", "minimum": 0},
            "lambda2": {"type": "number", "minimum": 0},
            "lambda_d": {"type": "number", "minimum": 0},
            "lambda_cls": {"type": "number", "minimum": 0},
            "lambda_cen": {"type": "number", "minimum": 0},
            "gp_coeff": {"type": "number", "minimum": 0},
            "delta": {"type": "number", "exclusiveMinimum": 0}
          }
        },
        "lr_main": {"type": "number", "exclusiveMinimum": 0},
        "lr_aux": {"type": "number", "exclusiveMinimum": 0},
        "adam_beta1": {"type": "number"},
        "adam_beta2": {"type": "number"},
        "n_critic": {"type": "integer", "minimum": 1},
        "batch_size": {"type": "integer", "minimum": 1},
        "epochs": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "clip_norm": {"type": "number", "minimum": 0},
        "repulsion_margin": {"type": "number", "minimum": 0},
        "ablation": {"enum": ["full", "wo_LG2", "wo_Ld", "wo_Lcls", "wo_Lcen",
                               "shared_R", "separate_Dsu", "coupled_Gsu", "wo_D_test"]},
        "dz": {"type": "integer"},
        "gen_hidden": {"type": "integer", "minimum": 1},
        "reg_hidden": {"type": "integer", "minimum": 1},
        "disc_hidden": {"type": "integer", "minimum": 1},
        "critic_hidden": {"type": "integer", "minimum": 1},
        "combined_gen_update": {"type": "boolean"},
        "regress_real_features": {"type": "boolean"},
        "pretrain_epochs": {"type": "integer", "minimum": 1},
        "pretrain_lr": {"type": "number", "exclusiveMinimum": 0},
        "checkpoint_every": {"type": "integer", "minimum": 0},
        "log_every": {"type": "integer", "minimum": 0}
      }
    },
    "synth": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "n_per_class": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "use_D_transform": {"type": "boolean"}
      }
    },
    "classifier": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "kind": {"enum": ["softmax", "knn"]},
        "knn_k": {"type": "integer", "minimum": 1},
        "softmax_epochs": {"type": "integer", "minimum": 1},
        "softmax_lr": {"type": "number", "exclusiveMinimum": 0},
        "softmax_batch": {"type": "integer", "minimum": 1}
      }
    },
    "out_dir": {"type": "string"}
  }
})";
}

}  // namespace bmcogan
