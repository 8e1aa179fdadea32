// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#include "stereolab/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "stereolab/disparity_io.hpp"
#include "stereolab/error.hpp"
#include "stereolab/version.hpp"

namespace stereolab {

namespace fs = std::filesystem;

std::string resolve_output_dir(const ExperimentConfig& cfg) {
    fs::path p(cfg.output_dir);
    if (p.is_relative()) {
        if (const char* root = std::getenv(kOutputRootEnv)) p = fs::path(root) / p;
    }
    return p.string();
}

std::vector<StereoSample> make_corpus(const ExperimentConfig& cfg, bool test_split) {
    const int n = test_split ? cfg.data.test_scenes : cfg.data.train_scenes;
    const std::uint64_t split_key = hash_combine(cfg.seed, test_split ? 0xBEEF : 0xFEED);
    std::vector<StereoSample> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng = Rng::derive(split_key, static_cast<std::uint64_t>(i));
        const SceneSpec spec = make_random_scene(rng, cfg.data.height, cfg.data.width, cfg.data.scene_max_disp,
                                                 cfg.data.scene);
        StereoSample s = generate_rds(hash_combine(split_key, 0x5EED + static_cast<std::uint64_t>(i)),
                                      cfg.data.height, cfg.data.width, cfg.data.scene_max_disp, spec);
        char id[32];
        snprintf(id, sizeof id, "%s-%04d", test_split ? "test" : "train", i);
        s.sample_id = id;
        out.push_back(std::move(s));
    }
    return out;
}

void write_corpus(const std::vector<StereoSample>& corpus, const std::string& dir, const std::string& manifest_name,
                  const std::string& config_hash_line) {
    fs::create_directories(dir);
    std::vector<ManifestEntry> entries;
    for (const auto& s : corpus) {
        const fs::path sub = fs::path(dir) / s.sample_id;
        fs::create_directories(sub);
        write_image_pfm(s.left_image, (sub / "left.pfm").string());
        write_image_pfm(s.right_image, (sub / "right.pfm").string());
        write_disparity(s.disparity_left, (sub / "disp_left.pfm").string(), DisparityFormat::pfm);
        ManifestEntry e;
        e.sample_id = s.sample_id;
        e.style_tag = s.style_tag;
        e.left_image = s.sample_id + "/left.pfm";
        e.right_image = s.sample_id + "/right.pfm";
        e.disparity_left = s.sample_id + "/disp_left.pfm";
        if (s.has_right_disparity) {
            write_disparity(s.disparity_right, (sub / "disp_right.pfm").string(), DisparityFormat::pfm);
            e.disparity_right = s.sample_id + "/disp_right.pfm";
        }
        write_mask_pgm(s.occlusion_left, (sub / "occlusion.pgm").string());
        e.occlusion = s.sample_id + "/occlusion.pgm";
        entries.push_back(std::move(e));
    }
    const std::string mpath = (fs::path(dir) / manifest_name).string();
    {
        std::ofstream f(mpath, std::ios::trunc);
        if (!f) throw DataError("cannot write manifest " + mpath);
        f << "# stereolab corpus " << kVersion << "\n" << config_hash_line << "\n";
    }
    // append entry lines after the header
    std::ofstream f(mpath, std::ios::app);
    for (const auto& e : entries)
        f << e.sample_id << '\t' << e.style_tag << '\t' << e.left_image << '\t' << e.right_image << '\t'
          << e.disparity_left << '\t' << (e.disparity_right.empty() ? "-" : e.disparity_right) << '\t'
          << (e.occlusion.empty() ? "-" : e.occlusion) << '\n';
}

std::vector<StereoSample> load_corpus(const std::string& manifest_path) {
    const auto entries = read_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<StereoSample> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        StereoSample s;
        s.sample_id = e.sample_id;
        s.style_tag = e.style_tag;
        s.left_image = read_image_pfm((base / e.left_image).string());
        s.right_image = read_image_pfm((base / e.right_image).string());
        s.disparity_left = read_disparity((base / e.disparity_left).string(), DisparityFormat::pfm);
        if (!e.disparity_right.empty() && e.disparity_right != "-") {
            s.disparity_right = read_disparity((base / e.disparity_right).string(), DisparityFormat::pfm);
            s.has_right_disparity = true;
        }
        if (!e.occlusion.empty() && e.occlusion != "-") s.occlusion_left = read_mask_pgm((base / e.occlusion).string());
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

std::uint64_t style_seed(const ExperimentConfig& cfg, size_t style_idx, size_t sample_idx) {
    return hash_combine(hash_combine(cfg.seed, 0xE7A1 + style_idx), sample_idx);
}

std::string fmt(double v) {
    char buf[40];
    snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace

std::vector<MetricsReport> evaluate_model(const ParamSet& params, const ExperimentConfig& cfg,
                                          const std::vector<StereoSample>& test_corpus) {
    std::vector<MetricsReport> reports;
    for (size_t si = 0; si < cfg.eval.styles.size(); ++si) {
        const NamedStyle& ns = cfg.eval.styles[si];
        for (size_t i = 0; i < test_corpus.size(); ++i) {
            const StereoSample styled = apply_style(test_corpus[i], ns.style, style_seed(cfg, si, i));
            MetricsReport r;
            r.sample_id = test_corpus[i].sample_id;
            r.style_tag = ns.name;

            const Tensor pred = infer(styled, params, cfg.net);
            BoolGrid valid(styled.height(), styled.width(), true);
            if (cfg.eval.exclude_occluded && !styled.occlusion_left.v.empty()) valid = styled.occlusion_left;
            r.pixel_count = count_valid(styled.disparity_left, valid);
            r.err_gt_1px = threshold_error_rate(pred, styled.disparity_left, valid, 1.0);
            r.err_gt_2px = threshold_error_rate(pred, styled.disparity_left, valid, 2.0);
            r.err_gt_3px = threshold_error_rate(pred, styled.disparity_left, valid, 3.0);
            r.d1_all = d1(pred, styled.disparity_left, valid);

            const FeatureMap fl = extract_features(styled.left_image, params, cfg.net, View::left);
            const FeatureMap fr = extract_features(styled.right_image, params, cfg.net, View::right);
            const ConsistencyResult c = stereo_consistency(fl, fr, styled, cfg.eval.delta, cfg.scf.normalize);
            r.pair_count = c.pair_count;
            if (c.pair_count > 0) {
                r.mean_cosine = c.masked;
                r.mean_cosine_unmasked = c.unmasked;
                r.per_channel_abs_diff = c.per_channel;
            }
            reports.push_back(std::move(r));
        }
    }
    return reports;
}

void write_metrics_csv(const std::vector<MetricsReport>& reports, const ExperimentConfig& cfg,
                       const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write metrics csv " + path);
    f << "# stereolab metrics " << kVersion << "\n";
    f << "# config_hash=" << config_hash(cfg) << "\n";
    f << "# seed=" << cfg.seed << "\n";
    f << "# scf=" << (cfg.scf_enable ? 1 : 0) << " momentum=" << (cfg.momentum_enable ? 1 : 0)
      << " momentum_value=" << fmt(cfg.momentum) << " ssw=" << (cfg.ssw_enable ? 1 : 0) << "\n";
    f << "sample_id,style,mean_cosine,mean_cosine_unmasked,err_gt_1px,err_gt_2px,err_gt_3px,d1_all,pixel_count,"
         "pair_count\n";
    for (const auto& r : reports) {
        f << r.sample_id << ',' << r.style_tag << ',' << fmt(r.mean_cosine) << ',' << fmt(r.mean_cosine_unmasked)
          << ',' << fmt(r.err_gt_1px) << ',' << fmt(r.err_gt_2px) << ',' << fmt(r.err_gt_3px) << ',' << fmt(r.d1_all)
          << ',' << r.pixel_count << ',' << r.pair_count << "\n";
    }
    if (!f) throw DataError("short write to " + path);
}

double mean_cosine_for_style(const std::vector<MetricsReport>& reports, const std::string& style) {
    double acc = 0.0;
    long pairs = 0;
    for (const auto& r : reports)
        if (r.style_tag == style && r.pair_count > 0) {
            acc += r.mean_cosine * static_cast<double>(r.pair_count);
            pairs += r.pair_count;
        }
    if (pairs == 0) throw Error("mean_cosine_for_style: no pairs for style " + style);
    return acc / static_cast<double>(pairs);
}

double mean_err3_for_style(const std::vector<MetricsReport>& reports, const std::string& style) {
    double acc = 0.0;
    long px = 0;
    for (const auto& r : reports)
        if (r.style_tag == style) {
            acc += r.err_gt_3px * static_cast<double>(r.pixel_count);
            px += r.pixel_count;
        }
    if (px == 0) throw Error("mean_err3_for_style: no rows for style " + style);
    return acc / static_cast<double>(px);
}

Checkpoint pack_model(const TrainedModel& model, const ExperimentConfig& cfg) {
    Checkpoint ckpt;
    ckpt.config_hash = config_hash(cfg);
    ckpt.seed = cfg.seed;
    ckpt.version = kVersion;
    for (const auto& [name, t] : model.params) ckpt.arrays.emplace("theta." + name, t);
    for (const auto& [name, t] : model.key_params) ckpt.arrays.emplace("eta." + name, t);
    if (model.queue.size() > 0) {
        Tensor q({model.queue.size(), model.queue.dim()});
        for (int i = 0; i < model.queue.size(); ++i)
            for (int j = 0; j < model.queue.dim(); ++j) q(i, j) = model.queue.entry(i)[static_cast<size_t>(j)];
        ckpt.arrays.emplace("queue.entries", std::move(q));
    }
    for (size_t li = 0; li < model.ssw_stats.size(); ++li) {
        const auto& st = model.ssw_stats[li];
        const std::string base = "ssw.layer" + std::to_string(li);
        ckpt.arrays.emplace(base + ".v", st.variance());
        Tensor m({st.channels(), st.channels()});
        for (int i = 0; i < st.channels(); ++i)
            for (int j = 0; j < st.channels(); ++j) m(i, j) = st.mask().at(i, j) ? 1.0 : 0.0;
        ckpt.arrays.emplace(base + ".mask", std::move(m));
    }
    ckpt.meta["steps"] = std::to_string(model.steps);
    ckpt.meta["contrastive_skipped"] = std::to_string(model.contrastive_skipped);
    ckpt.meta["replacement_warnings"] = std::to_string(model.replacement_warnings);
    return ckpt;
}

TrainedModel unpack_model(const Checkpoint& ckpt) {
    TrainedModel model;
    for (const auto& [name, t] : ckpt.arrays) {
        if (name.rfind("theta.", 0) == 0) model.params.emplace(name.substr(6), t);
        else if (name.rfind("eta.", 0) == 0) model.key_params.emplace(name.substr(4), t);
    }
    const auto q = ckpt.arrays.find("queue.entries");
    if (q != ckpt.arrays.end() && q->second.rank() == 2) {
        model.queue = NegativeQueue(std::max(1, q->second.dim(0)), q->second.dim(1));
        std::vector<std::vector<double>> keys;
        for (int i = 0; i < q->second.dim(0); ++i) {
            std::vector<double> k(static_cast<size_t>(q->second.dim(1)));
            for (int j = 0; j < q->second.dim(1); ++j) k[static_cast<size_t>(j)] = q->second(i, j);
            keys.push_back(std::move(k));
        }
        model.queue.push(keys);
    }
    const auto it = ckpt.meta.find("steps");
    if (it != ckpt.meta.end()) model.steps = std::stol(it->second);
    return model;
}

// ---------------------------------------------------------------------------

void cmd_gen_data(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string out = resolve_output_dir(cfg);
    const std::string hash_line = "# config_hash=" + config_hash(cfg);
    write_corpus(make_corpus(cfg, false), (fs::path(out) / "corpus" / "train").string(), "manifest.txt", hash_line);
    write_corpus(make_corpus(cfg, true), (fs::path(out) / "corpus" / "test").string(), "manifest.txt", hash_line);
    fs::create_directories(out);
    save_config(cfg, (fs::path(out) / "config.json").string());
}

namespace {
std::string train_manifest(const ExperimentConfig& cfg) {
    return (fs::path(resolve_output_dir(cfg)) / "corpus" / "train" / "manifest.txt").string();
}
std::string test_manifest(const ExperimentConfig& cfg) {
    return (fs::path(resolve_output_dir(cfg)) / "corpus" / "test" / "manifest.txt").string();
}
} // namespace

void cmd_train(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string out = resolve_output_dir(cfg);
    if (!fs::exists(train_manifest(cfg)))
        throw DataError("no corpus at " + train_manifest(cfg) + "; run gen-data first");
    const auto corpus = load_corpus(train_manifest(cfg));

    fs::create_directories(out);
    std::ofstream log((fs::path(out) / "train_log.jsonl").string(), std::ios::trunc);
    if (!log) throw DataError("cannot open training log in " + out);
    const TrainedModel model = train_model(cfg, corpus, &log);

    save_checkpoint(pack_model(model, cfg), (fs::path(out) / "checkpoint.slckpt").string());
    save_config(cfg, (fs::path(out) / "config.json").string());
}

namespace {
Checkpoint load_checked(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const std::string expect = config_hash(cfg);
    if (ckpt.config_hash != expect)
        throw HashMismatchError("checkpoint hash " + ckpt.config_hash + " does not match config hash " + expect +
                                "; refusing to mix configurations");
    return ckpt;
}
} // namespace

void cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    cfg.validate();
    if (!fs::exists(test_manifest(cfg))) throw DataError("no corpus at " + test_manifest(cfg) + "; run gen-data first");
    const Checkpoint ckpt = load_checked(cfg, checkpoint_path);
    const TrainedModel model = unpack_model(ckpt);
    const auto test = load_corpus(test_manifest(cfg));
    const auto reports = evaluate_model(model.params, cfg, test);
    write_metrics_csv(reports, cfg, (fs::path(resolve_output_dir(cfg)) / "metrics.csv").string());
}

void cmd_diagnose(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    cfg.validate();
    if (!fs::exists(test_manifest(cfg))) throw DataError("no corpus at " + test_manifest(cfg) + "; run gen-data first");
    const Checkpoint ckpt = load_checked(cfg, checkpoint_path);
    const TrainedModel model = unpack_model(ckpt);
    const auto test = load_corpus(test_manifest(cfg));
    const std::string out = resolve_output_dir(cfg);
    fs::create_directories(out);

    const auto reports = evaluate_model(model.params, cfg, test);
    write_metrics_csv(reports, cfg, (fs::path(out) / "diagnose_metrics.csv").string());

    // consistency by style
    {
        std::ofstream f((fs::path(out) / "consistency_by_style.csv").string(), std::ios::trunc);
        f << "# config_hash=" << config_hash(cfg) << "\n";
        f << "style,mean_cosine,mean_cosine_unmasked,pairs\n";
        for (const auto& ns : cfg.eval.styles) {
            double acc = 0.0, acc_u = 0.0;
            long pairs = 0;
            for (const auto& r : reports)
                if (r.style_tag == ns.name && r.pair_count > 0) {
                    acc += r.mean_cosine * static_cast<double>(r.pair_count);
                    acc_u += r.mean_cosine_unmasked * static_cast<double>(r.pair_count);
                    pairs += r.pair_count;
                }
            if (pairs == 0) continue;
            f << ns.name << ',' << fmt(acc / pairs) << ',' << fmt(acc_u / pairs) << ',' << pairs << "\n";
        }
    }

    // per-channel inconsistency profile
    {
        std::ofstream f((fs::path(out) / "per_channel.csv").string(), std::ios::trunc);
        f << "# config_hash=" << config_hash(cfg) << "\n";
        f << "style,channel,mean_abs_diff\n";
        for (const auto& ns : cfg.eval.styles) {
            std::vector<double> acc;
            long pairs = 0;
            for (const auto& r : reports) {
                if (r.style_tag != ns.name || r.pair_count == 0 || r.per_channel_abs_diff.empty()) continue;
                if (acc.empty()) acc.assign(r.per_channel_abs_diff.size(), 0.0);
                for (size_t c = 0; c < acc.size(); ++c)
                    acc[c] += r.per_channel_abs_diff[c] * static_cast<double>(r.pair_count);
                pairs += r.pair_count;
            }
            for (size_t c = 0; c < acc.size(); ++c)
                f << ns.name << ',' << c << ',' << fmt(acc[c] / static_cast<double>(pairs)) << "\n";
        }
    }

    // whitening statistics export: variance matrix + selective mask per layer
    for (const auto& [name, t] : ckpt.arrays) {
        if (name.rfind("ssw.layer", 0) != 0) continue;
        const std::string stem = name.substr(4); // layerK.v / layerK.mask
        std::string fname = stem;
        for (auto& c : fname)
            if (c == '.') c = '_';
        write_disparity(t, (fs::path(out) / (fname + ".pfm")).string(), DisparityFormat::pfm);
        if (name.substr(name.size() - 2) == ".v") {
            const std::string layer = name.substr(9, name.size() - 11);
            const auto mask_it = ckpt.arrays.find("ssw.layer" + layer + ".mask");
            std::ofstream f((fs::path(out) / ("heatmap_layer" + layer + ".tsv")).string(), std::ios::trunc);
            f << "i\tj\tvariance\tselected\n";
            for (int i = 0; i < t.dim(0); ++i)
                for (int j = 0; j < t.dim(1); ++j)
                    f << i << '\t' << j << '\t' << fmt(t(i, j)) << '\t'
                      << (mask_it != ckpt.arrays.end() && mask_it->second(i, j) != 0.0 ? 1 : 0) << "\n";
        }
    }
}

// ---------------------------------------------------------------------------

namespace {

struct CsvFile {
    std::map<std::string, std::string> header; // from "# key=value" lines
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

CsvFile read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open csv " + path);
    CsvFile out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string tok;
            while (ss >> tok) {
                const auto eq = tok.find('=');
                if (eq != std::string::npos) out.header[tok.substr(0, eq)] = tok.substr(eq + 1);
            }
            continue;
        }
        std::vector<std::string> cells;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (out.columns.empty()) out.columns = cells;
        else out.rows.push_back(cells);
    }
    return out;
}

int column_index(const CsvFile& csv, const std::string& name) {
    for (size_t i = 0; i < csv.columns.size(); ++i)
        if (csv.columns[i] == name) return static_cast<int>(i);
    throw DataError("csv missing column " + name);
}

} // namespace

void cmd_plot(const std::string& mode, const std::vector<std::string>& inputs, const std::string& out_path) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + out_path);

    if (mode == "momentum") {
        // one row per momentum value per style: the consistency sweep table
        std::map<double, std::map<std::string, std::pair<double, long>>> table;
        for (const auto& path : inputs) {
            const CsvFile csv = read_csv(path);
            const bool has_momentum = csv.header.count("momentum") && csv.header.at("momentum") == "1";
            const double m = has_momentum ? std::stod(csv.header.at("momentum_value")) : 0.0;
            const int style_col = column_index(csv, "style");
            const int cos_col = column_index(csv, "mean_cosine");
            const int pair_col = column_index(csv, "pair_count");
            for (const auto& row : csv.rows) {
                const long pairs = std::stol(row[static_cast<size_t>(pair_col)]);
                if (pairs <= 0) continue;
                auto& cell = table[m][row[static_cast<size_t>(style_col)]];
                cell.first += std::stod(row[static_cast<size_t>(cos_col)]) * static_cast<double>(pairs);
                cell.second += pairs;
            }
        }
        out << "momentum\tstyle\tmean_cosine\n";
        for (const auto& [m, styles] : table)
            for (const auto& [style, cell] : styles)
                out << fmt(m) << '\t' << style << '\t' << fmt(cell.first / static_cast<double>(cell.second)) << "\n";
    } else if (mode == "styles") {
        // error versus style shift, one row per input csv per style
        out << "source\tstyle\terr_gt_3px\td1_all\tmean_cosine\n";
        for (const auto& path : inputs) {
            const CsvFile csv = read_csv(path);
            const int style_col = column_index(csv, "style");
            const int err_col = column_index(csv, "err_gt_3px");
            const int d1_col = column_index(csv, "d1_all");
            const int cos_col = column_index(csv, "mean_cosine");
            const int px_col = column_index(csv, "pixel_count");
            std::map<std::string, std::array<double, 4>> acc; // err, d1, cos, px
            for (const auto& row : csv.rows) {
                const double px = std::stod(row[static_cast<size_t>(px_col)]);
                auto& a = acc[row[static_cast<size_t>(style_col)]];
                a[0] += std::stod(row[static_cast<size_t>(err_col)]) * px;
                a[1] += std::stod(row[static_cast<size_t>(d1_col)]) * px;
                a[2] += std::stod(row[static_cast<size_t>(cos_col)]) * px;
                a[3] += px;
            }
            for (const auto& [style, a] : acc)
                out << fs::path(path).stem().string() << '\t' << style << '\t' << fmt(a[0] / a[3]) << '\t'
                    << fmt(a[1] / a[3]) << '\t' << fmt(a[2] / a[3]) << "\n";
        }
    } else if (mode == "channels") {
        // per-channel inconsistency bars, merged across inputs
        out << "source\tstyle\tchannel\tmean_abs_diff\n";
        for (const auto& path : inputs) {
            const CsvFile csv = read_csv(path);
            const int style_col = column_index(csv, "style");
            const int ch_col = column_index(csv, "channel");
            const int v_col = column_index(csv, "mean_abs_diff");
            for (const auto& row : csv.rows)
                out << fs::path(path).stem().string() << '\t' << row[static_cast<size_t>(style_col)] << '\t'
                    << row[static_cast<size_t>(ch_col)] << '\t' << row[static_cast<size_t>(v_col)] << "\n";
        }
    } else {
        throw ConfigError("unknown plot mode " + mode + " (expected momentum | styles | channels)");
    }
}

// ---------------------------------------------------------------------------

namespace {
const NamedStyle& style_by_name(const ExperimentConfig& cfg, const std::string& name) {
    for (const auto& ns : cfg.eval.styles)
        if (ns.name == name) return ns;
    throw ConfigError("style " + name + " not found in eval.styles");
}
} // namespace

std::vector<BaselineResult> run_appendix_a(const ExperimentConfig& base_cfg, const std::vector<StereoSample>& train,
                                           const std::vector<StereoSample>& test, const std::string& train_style,
                                           const std::string& shift_style, const std::vector<std::string>& variants) {
    const NamedStyle& in_style = style_by_name(base_cfg, train_style);
    const NamedStyle& out_style = style_by_name(base_cfg, shift_style);

    const auto styled_err3 = [&](const ParamSet* params, const NamedStyle& ns, bool wta) {
        double acc = 0.0;
        long px = 0;
        for (size_t i = 0; i < test.size(); ++i) {
            const StereoSample s = apply_style(test[i], ns.style, hash_combine(base_cfg.seed, 0xA44A + i));
            const Tensor pred = wta ? wta_sad_match(s, 5, base_cfg.net.max_disp) : infer(s, *params, base_cfg.net);
            BoolGrid valid(s.height(), s.width(), true);
            const long n = count_valid(s.disparity_left, valid);
            acc += threshold_error_rate(pred, s.disparity_left, valid, 3.0) * static_cast<double>(n);
            px += n;
        }
        return acc / static_cast<double>(px);
    };

    std::vector<BaselineResult> results;
    for (const auto& variant : variants) {
        BaselineResult r;
        r.variant = variant;
        if (variant == "wta-sad") {
            r.in_style_err = styled_err3(nullptr, in_style, true);
            r.shifted_style_err = styled_err3(nullptr, out_style, true);
        } else if (variant == "rgb-volume" || variant == "feature-volume") {
            ExperimentConfig cfg = base_cfg;
            cfg.scf_enable = false;
            cfg.momentum_enable = false;
            cfg.ssw_enable = false;
            cfg.net.in_layers.clear();
            cfg.train.augment = false; // trained on the raw training style only
            cfg.net.volume_kind = variant == "rgb-volume" ? VolumeKind::rgb : VolumeKind::concat;

            std::vector<StereoSample> styled_train;
            styled_train.reserve(train.size());
            for (size_t i = 0; i < train.size(); ++i)
                styled_train.push_back(apply_style(train[i], in_style.style, hash_combine(cfg.seed, 0x77AA + i)));

            const TrainedModel model = train_model(cfg, styled_train, nullptr);
            r.in_style_err = styled_err3(&model.params, in_style, false);
            r.shifted_style_err = styled_err3(&model.params, out_style, false);
        } else {
            throw ConfigError("unknown appendix variant " + variant);
        }
        results.push_back(r);
    }
    return results;
}

} // namespace stereolab
