// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "stereolab/error.hpp"
#include "stereolab/experiment.hpp"
#include "stereolab/version.hpp"

namespace {

using namespace stereolab;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string checkpoint;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_checkpoint) {
    cmd->add_option("-c,--config", opts.config_path, "experiment config (json)");
    cmd->add_option("--set", opts.overrides, "override, e.g. --set train.steps=500")->take_all();
    if (with_checkpoint)
        cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint file (defaults to <out>/checkpoint.slckpt)");
}

int parse_toggle(const std::string& v, const char* flag) {
    if (v.empty()) return -1;
    if (v == "on" || v == "true" || v == "1") return 1;
    if (v == "off" || v == "false" || v == "0") return 0;
    throw ConfigError(std::string(flag) + " expects on|off, got " + v);
}

ExperimentConfig resolve(const CommonOpts& opts, std::vector<std::string>& provenance) {
    ExperimentConfig cfg = opts.config_path.empty() ? default_config() : load_config(opts.config_path);
    for (const auto& o : opts.overrides) {
        apply_override(cfg, o);
        provenance.push_back(o);
    }
    return cfg;
}

void write_provenance(const ExperimentConfig& cfg, const std::vector<std::string>& provenance) {
    if (provenance.empty()) return;
    const auto dir = resolve_output_dir(cfg);
    std::filesystem::create_directories(dir);
    std::ofstream f(std::filesystem::path(dir) / "provenance.txt", std::ios::trunc);
    f << "# command-line overrides applied to the config, in order\n";
    for (const auto& p : provenance) f << p << "\n";
}

// Ablation switches shared by train/eval/diagnose. The whitening flag wires
// the instance-norm stages and the loss together.
void apply_ablations(ExperimentConfig& cfg, int scf, int momentum, int whitening, double momentum_value,
                     const std::string& volume, std::vector<std::string>& provenance) {
    const auto set = [&](const std::string& s) {
        apply_override(cfg, s);
        provenance.push_back(s);
    };
    if (scf >= 0) set("scf.enable=" + std::string(scf ? "true" : "false"));
    if (momentum >= 0) set("momentum.enable=" + std::string(momentum ? "true" : "false"));
    if (momentum_value >= 0.0) set("momentum.value=" + std::to_string(momentum_value));
    if (whitening >= 0) {
        set("ssw.enable=" + std::string(whitening ? "true" : "false"));
        set(whitening ? "net.in_layers=[0,1]" : "net.in_layers=[]");
    }
    if (!volume.empty()) set("net.volume_kind=" + volume);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stereolab: stereo feature-consistency toolkit"};
    app.set_version_flag("--version", stereolab::kVersion);
    app.require_subcommand(1);

    CommonOpts gen_opts, train_opts, eval_opts, diag_opts;
    std::string trn_scf, trn_momentum, trn_whitening;
    double trn_momentum_value = -1.0;
    std::string trn_volume;
    std::string plot_mode, plot_out;
    std::vector<std::string> plot_inputs;

    CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
    add_common(gen, gen_opts, false);

    CLI::App* train = app.add_subcommand("train", "train a model on the generated corpus");
    add_common(train, train_opts, false);
    train->add_option("--contrastive", trn_scf, "contrastive loss: on | off");
    train->add_option("--momentum", trn_momentum, "momentum encoder + queue: on | off");
    train->add_option("--momentum-value", trn_momentum_value, "momentum m in [0,1]");
    train->add_option("--whitening", trn_whitening, "instance norm + whitening loss: on | off");
    train->add_option("--volume", trn_volume, "cost volume kind: concat | correlation | rgb");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint across styles");
    add_common(eval, eval_opts, true);

    CLI::App* diag = app.add_subcommand("diagnose", "feature-consistency report for a checkpoint");
    add_common(diag, diag_opts, true);

    CLI::App* plot = app.add_subcommand("plot", "emit plot-ready tables from metric csv files");
    plot->add_option("mode", plot_mode, "momentum | styles | channels")->required();
    plot->add_option("-o,--out", plot_out, "output table path")->required();
    plot->add_option("inputs", plot_inputs, "input csv files")->required()->expected(-1);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            std::vector<std::string> prov;
            const ExperimentConfig cfg = resolve(gen_opts, prov);
            cmd_gen_data(cfg);
            write_provenance(cfg, prov);
            std::cout << "corpus written to " << resolve_output_dir(cfg) << " (config " << config_hash(cfg) << ")\n";
        } else if (train->parsed()) {
            std::vector<std::string> prov;
            ExperimentConfig cfg = resolve(train_opts, prov);
            apply_ablations(cfg, parse_toggle(trn_scf, "--contrastive"), parse_toggle(trn_momentum, "--momentum"),
                            parse_toggle(trn_whitening, "--whitening"), trn_momentum_value, trn_volume, prov);
            cmd_train(cfg);
            write_provenance(cfg, prov);
            std::cout << "checkpoint written to " << resolve_output_dir(cfg) << " (config " << config_hash(cfg)
                      << ")\n";
        } else if (eval->parsed()) {
            std::vector<std::string> prov;
            const ExperimentConfig cfg = resolve(eval_opts, prov);
            const std::string ckpt = eval_opts.checkpoint.empty()
                                         ? (std::filesystem::path(resolve_output_dir(cfg)) / "checkpoint.slckpt").string()
                                         : eval_opts.checkpoint;
            cmd_eval(cfg, ckpt);
            std::cout << "metrics written to " << resolve_output_dir(cfg) << "/metrics.csv\n";
        } else if (diag->parsed()) {
            std::vector<std::string> prov;
            const ExperimentConfig cfg = resolve(diag_opts, prov);
            const std::string ckpt = diag_opts.checkpoint.empty()
                                         ? (std::filesystem::path(resolve_output_dir(cfg)) / "checkpoint.slckpt").string()
                                         : diag_opts.checkpoint;
            cmd_diagnose(cfg, ckpt);
            std::cout << "diagnostics written to " << resolve_output_dir(cfg) << "\n";
        } else if (plot->parsed()) {
            cmd_plot(plot_mode, plot_inputs, plot_out);
            std::cout << "table written to " << plot_out << "\n";
        }
    } catch (const HashMismatchError& e) {
        std::cerr << "reproducibility error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
