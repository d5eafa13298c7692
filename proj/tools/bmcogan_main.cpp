// SPDX-License-Identifier: Apache-2.0
//
// bmcogan command-line driver: train / eval / synth / ablate / sweep /
// import-dataset, all driven by a JSON run configuration.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bmcogan/config.hpp"
#include "bmcogan/error.hpp"
#include "bmcogan/eval.hpp"
#include "bmcogan/matio.hpp"
#include "bmcogan/training.hpp"
#include "bmcogan/version.hpp"

using namespace bmcogan;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitArtifact = 4;

json load_config_doc(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream f(path);
    if (!f) throw LoadError("cannot open config file: " + path);
    json doc;
    try {
        f >> doc;
    } catch (const json::exception& e) {
        throw SchemaError("malformed JSON in " + path + ": " + e.what());
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return doc;
}

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    localtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
    return buf;
}

fs::path make_run_dir(const RunConfig& cfg, const std::string& explicit_dir) {
    if (!explicit_dir.empty()) {
        fs::create_directories(explicit_dir);
        return explicit_dir;
    }
    const fs::path dir =
        cfg.out_dir / (timestamp_now() + "-" + config_hash(cfg.train));
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    std::ofstream f(tmp);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
    f.close();
    fs::rename(tmp, path);
}

void write_cli_manifest(const fs::path& run_dir, const RunConfig& cfg, const GZSLDataset& ds,
                        double wall_seconds, const EvalReport* report) {
    json j{{"artifact", std::string("bmcogan ") + kVersionString},
           {"config", cfg.to_json()},
           {"seed", cfg.train.seed},
           {"dataset_hash", dataset_content_hash(ds)},
           {"wall_clock_seconds", wall_seconds},
           {"eval_report", report ? json::parse(report->to_json()) : json(nullptr)}};
    write_text(run_dir / "manifest.json", j.dump(2) + "\n");
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& run_dir_flag, const std::string& resume_path) {
    const RunConfig cfg = run_config_from_json(load_config_doc(config_path, overrides));
    const GZSLDataset ds = cfg.load_data();
    const fs::path run_dir = make_run_dir(cfg, run_dir_flag);
    fs::create_directories(run_dir / "logs");
    fs::create_directories(run_dir / "reports");

    std::ofstream log(run_dir / "logs" / "train.log");
    TrainHooks hooks;
    hooks.log = &log;
    hooks.run_dir = run_dir;

    const auto t0 = std::chrono::steady_clock::now();
    const TrainState state = resume_path.empty()
                                 ? train(ds, cfg.train, hooks)
                                 : resume_training(ds, resume_path, hooks);

    EvalReport report = evaluate_gzsl(state.model, ds, cfg.synth, cfg.classifier);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_text(run_dir / "reports" / "eval_report.json", report.to_json() + "\n");
    write_text(run_dir / "reports" / "eval_table.txt", report.to_text_table());
    write_cli_manifest(run_dir, cfg, ds, wall, &report);

    std::cout << report.to_text_table();
    std::cout << "run directory: " << run_dir.string() << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::vector<std::string>& overrides,
             const std::string& checkpoint, const std::string& classifier_flag,
             const std::string& report_path, bool zsl) {
    const RunConfig cfg = run_config_from_json(load_config_doc(config_path, overrides));
    const GZSLDataset ds = cfg.load_data();

    auto loaded = load_checkpoint(checkpoint);
    FinalClassifierConfig clf = cfg.classifier;
    if (!classifier_flag.empty()) clf.kind = parse_classifier_kind(classifier_flag);

    SynthesisConfig synth = cfg.synth;
    const EvalReport report = evaluate_gzsl(loaded.state.model, ds, synth, clf);
    std::cout << report.to_text_table("BMCoGAN (" + to_string(clf.kind) + ")");
    if (zsl) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "ZSL (unseen-only) accuracy: %.1f\n",
                      evaluate_zsl(loaded.state.model, ds, synth, clf));
        std::cout << buf;
    }
    if (!report_path.empty()) write_text(report_path, report.to_json() + "\n");
    return 0;
}

int cmd_synth(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& checkpoint, const std::string& out_dir) {
    const RunConfig cfg = run_config_from_json(load_config_doc(config_path, overrides));
    const GZSLDataset ds = cfg.load_data();
    auto loaded = load_checkpoint(checkpoint);

    const SynthesizedSet syn = synthesize_unseen(loaded.state.model, ds.semantics, cfg.synth);
    fs::create_directories(out_dir);

    {
        std::ofstream f(fs::path(out_dir) / "synthesized.f32", std::ios::binary);
        if (!f) throw IoError("cannot write synthesized.f32");
        for (double v : syn.features.d) {
            const float x = static_cast<float>(v);
            f.write(reinterpret_cast<const char*>(&x), sizeof(x));
        }
    }
    {
        std::ofstream f(fs::path(out_dir) / "labels.i32", std::ios::binary);
        if (!f) throw IoError("cannot write labels.i32");
        for (int v : syn.labels) {
            const int32_t x = v;
            f.write(reinterpret_cast<const char*>(&x), sizeof(x));
        }
    }
    json meta{{"rows", syn.features.rows},
              {"dx", syn.features.cols},
              {"n_per_class", cfg.synth.n_per_class},
              {"seed", cfg.synth.seed}};
    write_text(fs::path(out_dir) / "synth.json", meta.dump(2) + "\n");
    std::cout << "wrote " << syn.features.rows << " synthesized rows to " << out_dir << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& overrides,
               const std::string& variants_csv, const std::string& csv_out) {
    if (variants_csv.empty()) {
        std::string all;
        for (const auto& v : all_ablation_names()) all += (all.empty() ? "" : ", ") + v;
        throw ArgumentError("no variants given; valid names: " + all);
    }
    std::vector<std::string> variants;
    std::string cur;
    for (char c : variants_csv + ",") {
        if (c == ',') {
            if (!cur.empty()) variants.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    for (const auto& v : variants) {
        try {
            parse_ablation(v);
        } catch (const ArgumentError&) {
            std::string all;
            for (const auto& name : all_ablation_names())
                all += (all.empty() ? "" : ", ") + name;
            throw ArgumentError("unknown variant '" + v + "'; valid names: " + all);
        }
    }

    const RunConfig cfg = run_config_from_json(load_config_doc(config_path, overrides));
    const GZSLDataset ds = cfg.load_data();
    const auto rows = run_ablation_suite(ds, cfg.train, variants, cfg.synth, cfg.classifier);
    std::cout << ablation_table_text(rows);
    if (!csv_out.empty()) write_text(csv_out, ablation_csv(rows));
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& param, const std::string& values_csv,
              const std::string& csv_out) {
    static const std::map<std::string, std::vector<double>> default_grids = {
        {"lambda1", {0.2, 0.5, 1, 2, 4}},
        {"lambda2", {0.2, 0.4, 0.8, 1.6}},
        {"lambda_d", {0, 0.5, 1, 2}},
        {"lambda_cls", {0.05, 0.1, 0.2, 0.5}},
        {"lambda_cen", {0.025, 0.05, 0.1, 0.2}},
        {"n_per_class", {100, 200, 400, 600}},
    };
    const auto grid_it = default_grids.find(param);
    if (grid_it == default_grids.end()) {
        std::string all;
        for (const auto& [k, v] : default_grids) {
            (void)v;
            all += (all.empty() ? "" : ", ") + k;
        }
        throw ArgumentError("unknown sweep parameter '" + param + "'; valid: " + all);
    }

    std::vector<double> values;
    if (values_csv.empty()) {
        values = grid_it->second;
    } else {
        std::string cur;
        for (char c : values_csv + ",") {
            if (c == ',') {
                if (cur.empty()) continue;
                try {
                    size_t used = 0;
                    const double v = std::stod(cur, &used);
                    if (used != cur.size()) throw std::invalid_argument(cur);
                    values.push_back(v);
                } catch (const std::exception&) {
                    throw ArgumentError("non-numeric sweep value: " + cur);
                }
                cur.clear();
            } else {
                cur += c;
            }
        }
    }

    const RunConfig base = run_config_from_json(load_config_doc(config_path, overrides));
    const GZSLDataset ds = base.load_data();

    std::vector<std::pair<double, EvalReport>> rows;
    for (const double v : values) {
        RunConfig cfg = base;
        if (param == "lambda1") cfg.train.weights.lambda1 = v;
        else if (param == "lambda2") cfg.train.weights.lambda2 = v;
        else if (param == "lambda_d") cfg.train.weights.lambda_d = v;
        else if (param == "lambda_cls") cfg.train.weights.lambda_cls = v;
        else if (param == "lambda_cen") cfg.train.weights.lambda_cen = v;
        else if (param == "n_per_class") cfg.synth.n_per_class = static_cast<int>(v);
        const TrainState st = train(ds, cfg.train);
        rows.push_back({v, evaluate_gzsl(st.model, ds, cfg.synth, cfg.classifier)});
    }
    const std::string csv = sweep_csv(rows, param);
    std::cout << csv;
    if (!csv_out.empty()) write_text(csv_out, csv);
    return 0;
}

int cmd_import(const std::string& features, const std::string& splits, const std::string& out,
               const std::string& name, const std::string& train_split) {
    if (train_split != "trainval" && train_split != "train")
        throw ArgumentError("--train-split must be 'trainval' or 'train'");
    const GZSLDataset ds =
        import_xlsa_dataset(features, splits, name, train_split == "trainval");
    save_dataset(ds, out);
    std::cout << "imported " << ds.meta.name << ": dx=" << ds.meta.dx
              << " A=" << ds.meta.a_dim << " seen=" << ds.meta.c_seen
              << " unseen=" << ds.meta.c_unseen << " train_rows=" << ds.meta.n_train << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BMCoGAN: coupled bidirectional-mapping GAN for generalized zero-shot learning"};
    app.set_version_flag("--version", std::string("bmcogan ") + kVersionString);
    app.require_subcommand(1);

    std::string config_path, run_dir, resume, checkpoint, classifier, report_path, out_dir;
    bool zsl = false;
    std::string variants, param, values, csv_out;
    std::string features, splits, name = "imported", train_split = "trainval";
    std::vector<std::string> overrides;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "run configuration JSON")->required();
        sub->add_option("--set", overrides,
                        "override config fields, e.g. --set train.weights.lambda_d=0");
    };

    auto* train_cmd = app.add_subcommand("train", "train a model and write a run directory");
    add_config(train_cmd);
    train_cmd->add_option("--run-dir", run_dir, "explicit run directory (default: out_dir/<ts>-<hash>)");
    train_cmd->add_option("--resume", resume, "checkpoint to resume from");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint with the U/S/H protocol");
    add_config(eval_cmd);
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--classifier", classifier, "softmax or knn (overrides config)");
    eval_cmd->add_option("--report", report_path, "write the EvalReport JSON here");
    eval_cmd->add_flag("--zsl", zsl, "also report the unseen-only (ZSL) accuracy");

    auto* synth_cmd = app.add_subcommand("synth", "synthesize unseen-class features");
    add_config(synth_cmd);
    synth_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    synth_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* ablate_cmd = app.add_subcommand("ablate", "train and compare ablation variants");
    add_config(ablate_cmd);
    ablate_cmd->add_option("--variants", variants, "comma-separated variant names")->required();
    ablate_cmd->add_option("--csv", csv_out, "write the comparison CSV here");

    auto* sweep_cmd = app.add_subcommand("sweep", "one run per hyper-parameter value");
    add_config(sweep_cmd);
    sweep_cmd->add_option("--param", param, "lambda1|lambda2|lambda_d|lambda_cls|lambda_cen|n_per_class")
        ->required();
    sweep_cmd->add_option("--values", values, "comma-separated values (default: built-in grid)");
    sweep_cmd->add_option("--csv", csv_out, "write the sweep CSV here");

    auto* import_cmd = app.add_subcommand("import-dataset", "convert .mat split archives");
    import_cmd->add_option("--features", features, "res101-style features .mat")->required();
    import_cmd->add_option("--splits", splits, "att_splits-style .mat")->required();
    import_cmd->add_option("--out", out_dir, "output dataset directory")->required();
    import_cmd->add_option("--name", name, "dataset name");
    import_cmd->add_option("--train-split", train_split, "trainval (default) or train");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(config_path, overrides, run_dir, resume);
        if (eval_cmd->parsed())
            return cmd_eval(config_path, overrides, checkpoint, classifier, report_path, zsl);
        if (synth_cmd->parsed()) return cmd_synth(config_path, overrides, checkpoint, out_dir);
        if (ablate_cmd->parsed()) return cmd_ablate(config_path, overrides, variants, csv_out);
        if (sweep_cmd->parsed()) return cmd_sweep(config_path, overrides, param, values, csv_out);
        if (import_cmd->parsed()) return cmd_import(features, splits, out_dir, name, train_split);
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InductiveViolationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const VersionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitArtifact;
    } catch (const LoadError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitArtifact;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitArtifact;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
