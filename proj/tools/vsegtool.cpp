// Batch front end for the segmentation pipeline: phantom data generation,
// patch preparation, training, inference and evaluation.

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vseg/errors.hpp"
#include "vseg/kvfile.hpp"
#include "vseg/metrics.hpp"
#include "vseg/nn.hpp"
#include "vseg/patchgen.hpp"
#include "vseg/phantom.hpp"
#include "vseg/rng.hpp"
#include "vseg/segmenter.hpp"
#include "vseg/trainer.hpp"
#include "vseg/volume.hpp"

namespace fs = std::filesystem;
using namespace vseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitValidation = 3;

struct RunConfig {
    int patch = 32;
    int stride = 1;
    int classes = 4;
    std::string bands = "auto";  // "auto" or "t1,t2"
    int band_search_lo = 2;
    int band_search_hi = 12;
    int margin = 8;

    int patches_per_class = 10000;
    int batch_size = 64;
    int epochs = 10;
    uint64_t seed = 20240501;
    double val_fraction = 0.10;
    std::string optimizer = "adam";
    double lr = 1e-4;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int normalize = 1;
    double sigma_floor = 1e-6;

    int threads = 0;  // 0 = all hardware threads
    int deterministic = 0;

    int phantom_subjects = 4;
    int phantom_width = 256;
    int phantom_height = 256;
    int phantom_frames = 16;
    double noise_sigma = 10.0;
    int rib_count = 2;
};

const std::set<std::string> kConfigKeys = {
    "patch",          "stride",        "classes",        "bands",
    "band_search_lo", "band_search_hi", "margin",        "patches_per_class",
    "batch_size",     "epochs",        "seed",           "val_fraction",
    "optimizer",      "lr",            "momentum",       "beta1",
    "beta2",          "adam_eps",      "normalize",      "sigma_floor",
    "threads",        "deterministic", "phantom_subjects", "phantom_width",
    "phantom_height", "phantom_frames", "noise_sigma",   "rib_count",
};

void apply_config_file(RunConfig& rc, const fs::path& path) {
    const KvFile kv = KvFile::load(path);
    for (const auto& [key, value] : kv.entries()) {
        if (!kConfigKeys.count(key))
            throw CLI::ValidationError("config", "unknown config key '" + key + "'");
    }
    auto geti = [&](const char* k, int& dst) {
        if (kv.has(k)) dst = int(kv.require_int(k));
    };
    auto getd = [&](const char* k, double& dst) {
        if (kv.has(k)) dst = kv.require_double(k);
    };
    geti("patch", rc.patch);
    geti("stride", rc.stride);
    geti("classes", rc.classes);
    if (kv.has("bands")) rc.bands = kv.require("bands");
    geti("band_search_lo", rc.band_search_lo);
    geti("band_search_hi", rc.band_search_hi);
    geti("margin", rc.margin);
    geti("patches_per_class", rc.patches_per_class);
    geti("batch_size", rc.batch_size);
    geti("epochs", rc.epochs);
    if (kv.has("seed")) rc.seed = kv.require_uint("seed");
    getd("val_fraction", rc.val_fraction);
    if (kv.has("optimizer")) rc.optimizer = kv.require("optimizer");
    getd("lr", rc.lr);
    getd("momentum", rc.momentum);
    getd("beta1", rc.beta1);
    getd("beta2", rc.beta2);
    getd("adam_eps", rc.adam_eps);
    geti("normalize", rc.normalize);
    getd("sigma_floor", rc.sigma_floor);
    geti("threads", rc.threads);
    geti("deterministic", rc.deterministic);
    geti("phantom_subjects", rc.phantom_subjects);
    geti("phantom_width", rc.phantom_width);
    geti("phantom_height", rc.phantom_height);
    geti("phantom_frames", rc.phantom_frames);
    getd("noise_sigma", rc.noise_sigma);
    geti("rib_count", rc.rib_count);
}

void apply_threads(const RunConfig& rc) {
    if (rc.deterministic)
        omp_set_num_threads(1);
    else if (rc.threads > 0)
        omp_set_num_threads(rc.threads);
}

std::pair<int, int> parse_bands(const std::string& bands) {
    const size_t comma = bands.find(',');
    if (comma == std::string::npos)
        throw CLI::ValidationError("--bands", "expected 'auto' or 't1,t2'");
    try {
        const int t1 = std::stoi(bands.substr(0, comma));
        const int t2 = std::stoi(bands.substr(comma + 1));
        return {t1, t2};
    } catch (const std::exception&) {
        throw CLI::ValidationError("--bands", "expected 'auto' or 't1,t2'");
    }
}

nn::OptimizerConfig optimizer_config(const RunConfig& rc) {
    nn::OptimizerConfig opt;
    if (rc.optimizer == "adam")
        opt.kind = nn::OptKind::adam;
    else if (rc.optimizer == "sgd" || rc.optimizer == "sgd_momentum")
        opt.kind = nn::OptKind::sgd_momentum;
    else
        throw CLI::ValidationError("optimizer", "expected 'adam' or 'sgd'");
    opt.lr = rc.lr;
    opt.beta1 = rc.beta1;
    opt.beta2 = rc.beta2;
    opt.eps = rc.adam_eps;
    opt.momentum = rc.momentum;
    return opt;
}

TrainConfig train_config(const RunConfig& rc) {
    TrainConfig tc;
    tc.classes = rc.classes;
    tc.patches_per_class = rc.patches_per_class;
    tc.batch_size = rc.batch_size;
    tc.epochs = rc.epochs;
    tc.seed = rc.seed;
    tc.opt = optimizer_config(rc);
    tc.normalize = rc.normalize != 0;
    tc.sigma_floor = rc.sigma_floor;
    tc.val_fraction = rc.val_fraction;
    return tc;
}

// ------------------------------------------------------------ subcommands --

int cmd_phantom(const RunConfig& rc, const fs::path& out_dir) {
    PhantomConfig cfg;
    cfg.width = rc.phantom_width;
    cfg.height = rc.phantom_height;
    cfg.frames = rc.phantom_frames;
    cfg.noise_sigma = rc.noise_sigma;
    cfg.rib_count = rc.rib_count;
    cfg.seed = rc.seed;
    const BenchmarkManifest m = make_benchmark(cfg, rc.phantom_subjects, out_dir);
    std::printf("wrote %zu subjects (%zu train, %zu test) to %s\n", m.subjects.size(),
                m.train_subjects().size(), m.test_subjects().size(), out_dir.string().c_str());
    return kExitOk;
}

MaskVolume stack_masks(const std::vector<MaskVolume>& masks) {
    MaskVolume out = masks.front();
    for (size_t i = 1; i < masks.size(); ++i) {
        const auto& m = masks[i];
        if (m.width != out.width || m.height != out.height)
            throw InvalidArgument("subject mask dimensions differ");
        out.depth += m.depth;
        out.values.insert(out.values.end(), m.values.begin(), m.values.end());
    }
    return out;
}

int cmd_prepare(const RunConfig& rc, const fs::path& data, const fs::path& out_dir) {
    const fs::path manifest_path = fs::is_directory(data) ? data / "benchmark.txt" : data;
    const BenchmarkManifest manifest = load_manifest(manifest_path);
    const fs::path data_dir = manifest_path.parent_path();
    fs::create_directories(out_dir);

    const PatchSpec spec{rc.patch, rc.stride};
    const auto train_subj = manifest.train_subjects();
    if (train_subj.empty()) throw InvalidArgument("manifest has no training subjects");

    std::vector<Volume> volumes;
    std::vector<MaskVolume> gts;
    for (const auto* s : train_subj) {
        volumes.push_back(load_volume(data_dir / s->volume_path));
        gts.push_back(load_mask(data_dir / s->gt_path));
    }
    const MaskVolume stacked = stack_masks(gts);

    size_t uncovered = 0;
    const RoiBox box = compute_roi_box(stacked, rc.margin, spec, &uncovered);
    if (uncovered > 0)
        std::fprintf(stderr, "warning: %zu spine pixels fall outside the clamped box\n",
                     uncovered);

    int t1 = 0, t2 = 0;
    const bool redundant = rc.classes != 2;
    if (redundant) {
        if (rc.bands == "auto") {
            std::tie(t1, t2) = balance_band_widths(stacked, box, rc.band_search_lo,
                                                   rc.band_search_hi);
            std::printf("balanced band widths: t1=%d t2=%d\n", t1, t2);
        } else {
            std::tie(t1, t2) = parse_bands(rc.bands);
        }
        if (rc.classes != 4)
            throw CLI::ValidationError("classes", "supported class counts are 2 and 4");
    }

    // candidate centers per class over every training frame
    struct Candidate {
        int subject, frame, row, col;
    };
    std::vector<std::vector<Candidate>> pools(rc.classes);
    for (size_t si = 0; si < gts.size(); ++si) {
        for (int k = 0; k < gts[si].depth; ++k) {
            const MaskFrame gt_frame = slice_mask_frame(gts[si], k);
            LabelMap map;
            if (redundant) map = generate_label_map(gt_frame, t1, t2);
            for (int row = box.row0; row < box.row_end(); ++row)
                for (int col = box.col0; col < box.col_end(); ++col) {
                    const int target = redundant ? map.at(col, row) - 1
                                                 : label_patch_2class(gt_frame, row, col);
                    pools[target].push_back({int(si), k, row, col});
                }
        }
    }

    Rng rng(rc.seed);
    PatchSet ps;
    ps.spec = spec;
    ps.box = box;
    ps.labeled = true;
    ps.num_classes = rc.classes;

    std::vector<Frame> frame_cache;
    int cached_subject = -1;
    auto frame_of = [&](int subject, int k) -> const Frame& {
        if (subject != cached_subject) {
            frame_cache.clear();
            for (int z = 0; z < volumes[subject].depth; ++z)
                frame_cache.push_back(slice_frame(volumes[subject], z));
            cached_subject = subject;
        }
        return frame_cache[k];
    };

    const int n = spec.n, half = spec.half();
    for (int cls = 0; cls < rc.classes; ++cls) {
        auto& pool = pools[cls];
        if (pool.empty())
            throw InvalidArgument("class " + std::to_string(cls) + " has no candidate patches");
        rng.shuffle(pool);
        const size_t take = std::min<size_t>(rc.patches_per_class, pool.size());
        if (take < size_t(rc.patches_per_class))
            std::fprintf(stderr, "warning: class %d has only %zu candidates (requested %d)\n",
                         cls, pool.size(), rc.patches_per_class);
        // keep per-subject ordering stable: sort the chosen slice by subject
        std::vector<Candidate> chosen(pool.begin(), pool.begin() + take);
        std::stable_sort(chosen.begin(), chosen.end(),
                         [](const Candidate& a, const Candidate& b) {
                             return a.subject < b.subject;
                         });
        for (const auto& c : chosen) {
            const Frame& frame = frame_of(c.subject, c.frame);
            for (int py = 0; py < n; ++py) {
                const float* src =
                    frame.values.data() + size_t(c.row - half + py) * frame.width + (c.col - half);
                ps.pixels.insert(ps.pixels.end(), src, src + n);
            }
            ps.centers.emplace_back(c.row, c.col);
            ps.labels.push_back(uint8_t(redundant ? cls + 1 : cls));
        }
    }

    const fs::path patch_path = out_dir / "patches.pmf";
    save_patchset(ps, patch_path);

    // label maps for the first training subject, for visual inspection
    if (redundant) {
        MaskVolume maps;
        maps.width = gts[0].width;
        maps.height = gts[0].height;
        maps.depth = gts[0].depth;
        maps.spacing = gts[0].spacing;
        for (int k = 0; k < gts[0].depth; ++k) {
            const LabelMap map = generate_label_map(slice_mask_frame(gts[0], k), t1, t2);
            maps.values.insert(maps.values.end(), map.classes.begin(), map.classes.end());
        }
        save_mask(maps, out_dir / "labelmap_subj0.vhdr");
    }

    KvFile kv;
    kv.set("source_manifest", fs::absolute(manifest_path).string());
    kv.set_int("classes", rc.classes);
    kv.set_int("patch_n", spec.n);
    kv.set_int("patch_s", spec.s);
    kv.set("box", std::to_string(box.row0) + " " + std::to_string(box.col0) + " " +
                      std::to_string(box.rows) + " " + std::to_string(box.cols));
    kv.set_int("band_t1", t1);
    kv.set_int("band_t2", t2);
    kv.set("patchset", patch_path.filename().string());
    kv.save(out_dir / "prepare.txt");

    const auto hist = ps.class_histogram();
    std::printf("prepared %zu patches, box %dx%d at (%d,%d)\n", ps.size(), box.rows, box.cols,
                box.row0, box.col0);
    for (size_t c = 0; c < hist.size(); ++c)
        if (hist[c]) std::printf("  class %zu: %zu\n", c, hist[c]);
    return kExitOk;
}

int cmd_train(const RunConfig& rc, const fs::path& prep_dir, const fs::path& out_path,
              std::optional<fs::path> trace_path) {
    const KvFile prep = KvFile::load(
        fs::is_directory(prep_dir) ? prep_dir / "prepare.txt" : prep_dir);
    const fs::path dir =
        fs::is_directory(prep_dir) ? prep_dir : fs::path(prep_dir).parent_path();
    const int classes = int(prep.require_int("classes"));
    if (classes != rc.classes)
        std::fprintf(stderr, "note: using class count %d from the prepared data\n", classes);

    PatchSet ps = load_patchset(dir / prep.require("patchset"));
    const auto b = prep.require_ints("box", 4);
    const RoiBox box{int(b[0]), int(b[1]), int(b[2]), int(b[3])};
    const PatchSpec spec{int(prep.require_int("patch_n")), int(prep.require_int("patch_s"))};

    TrainConfig tc = train_config(rc);
    tc.classes = classes;

    nn::NetConfig arch;
    arch.input_h = spec.n;
    arch.input_w = spec.n;
    arch.classes = classes;

    std::vector<PatchSet> sets;
    sets.push_back(std::move(ps));
    const SplitDataset data = assemble_dataset(sets, tc);
    if (data.downsampled)
        std::fprintf(stderr, "warning: downsampled every class to %d patches\n", data.per_class);
    std::printf("training on %zu patches (%zu validation), %d classes, %d epochs\n",
                data.train.size(), data.val.size(), classes, tc.epochs);

    const TrainResult result = train(data, tc, arch, box, spec);
    for (const auto& e : result.trace)
        std::printf("epoch %d: loss %.5f val_acc %.4f\n", e.epoch, e.mean_loss, e.val_accuracy);
    std::printf("best epoch %d (val_acc %.4f)\n", result.checkpoint.best_epoch,
                result.checkpoint.best_val_accuracy);

    save_checkpoint(result.checkpoint, out_path);
    const fs::path trace_out = trace_path ? *trace_path : fs::path(out_path).concat(".trace.csv");
    std::ofstream tf(trace_out);
    if (!tf) throw IoError("cannot write " + trace_out.string());
    tf << trace_csv(result.trace);
    return kExitOk;
}

int cmd_segment(const RunConfig&, const fs::path& ckpt_path, const fs::path& volume_path,
                const fs::path& out_path, std::optional<fs::path> overlay_dir, bool pgm) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Volume volume = load_volume(volume_path);
    const SegmentationResult res = segment_volume(ckpt, volume);

    save_mask(res.mask, out_path, pgm);
    fs::path classes_path = out_path;
    classes_path.replace_extension();
    classes_path += "_classes.vhdr";
    save_mask(res.class_map, classes_path);

    size_t contacts = 0;
    for (size_t c : res.border_contacts) contacts += c;
    if (contacts > 0)
        std::fprintf(stderr,
                     "warning: %zu predicted spine pixels touch the box border; the structure "
                     "may extend beyond the training-time box\n",
                     contacts);

    if (overlay_dir) {
        fs::create_directories(*overlay_dir);
        for (int k = 0; k < volume.depth; ++k) {
            const Frame frame = slice_frame(volume, k);
            const MaskFrame mf = slice_mask_frame(res.mask, k);
            char name[32];
            std::snprintf(name, sizeof name, "overlay_%04d.pgm", k);
            save_overlay_pgm(frame, mf, *overlay_dir / name);
        }
    }
    std::printf("spine voxels: %zu\n", res.mask.count(1));
    return kExitOk;
}

int cmd_evaluate(const std::vector<std::string>& pairs, std::optional<fs::path> csv_path) {
    std::vector<std::string> ids;
    std::vector<MetricReport> reports;
    for (const auto& pair : pairs) {
        const size_t comma = pair.find(',');
        if (comma == std::string::npos)
            throw CLI::ValidationError("--pair", "expected 'segmentation.vhdr,gt.vhdr'");
        const fs::path s_path = pair.substr(0, comma);
        const fs::path gt_path = pair.substr(comma + 1);
        const MaskVolume s = load_mask(s_path);
        const MaskVolume gt = load_mask(gt_path);
        reports.push_back(evaluate_all(s, gt, gt.spacing));
        ids.push_back(s_path.stem().string());
    }
    std::printf("%s", report_table(ids, reports).c_str());
    for (size_t i = 0; i < reports.size(); ++i)
        for (const auto& flag : reports[i].convention_flags)
            std::fprintf(stderr, "note: %s: convention %s\n", ids[i].c_str(), flag.c_str());
    if (csv_path) {
        std::ofstream f(*csv_path);
        if (!f) throw IoError("cannot write " + csv_path->string());
        f << report_csv(ids, reports);
    }
    return kExitOk;
}

int cmd_gradcheck(const RunConfig& rc, double eps, int draws) {
    nn::NetConfig arch;
    arch.input_h = 8;
    arch.input_w = 8;
    arch.conv1_channels = 4;
    arch.conv2_channels = 8;
    arch.fc1_units = 16;
    arch.fc2_units = 32;
    arch.classes = 4;
    arch.dropout_rate = 0.0f;

    double max_err = 0.0;
    for (int i = 0; i < draws; ++i) {
        Rng rng(derive_seed(rc.seed, uint64_t(i)));
        nn::Network<double> net = nn::Network<double>::he_init(arch, rng);
        nn::Tensor<double> patch(arch.input_h, arch.input_w, 1);
        for (auto& v : patch.v) v = rng.normal();
        const int label = int(rng.bounded(arch.classes));
        const double err = nn::gradient_check(net, patch, label, eps);
        std::printf("draw %d: max relative error %.3e\n", i, err);
        max_err = std::max(max_err, err);
    }
    const bool pass = max_err < 1e-6;
    std::printf("gradient check: max relative error %.3e -> %s\n", max_err,
                pass ? "PASS" : "FAIL");
    return pass ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"patch-based spine segmentation toolkit"};
    app.require_subcommand(1);

    RunConfig rc;
    std::string config_path, bands_flag, seed_flag;
    int classes_flag = -1, patch_flag = -1, stride_flag = -1, threads_flag = -1;
    bool deterministic_flag = false;

    app.add_option("--config", config_path, "key = value config file");
    app.add_option("--seed", seed_flag, "RNG seed (u64)");
    app.add_option("--classes", classes_flag, "class count: 2 or 4")
        ->check(CLI::IsMember({2, 4}));
    app.add_option("--patch", patch_flag, "patch side length");
    app.add_option("--stride", stride_flag, "patch stride");
    app.add_option("--bands", bands_flag, "band widths: 'auto' or 't1,t2'");
    app.add_option("--threads", threads_flag, "worker thread cap (0 = hardware)");
    app.add_flag("--deterministic", deterministic_flag, "single-stream execution");

    auto* phantom_cmd = app.add_subcommand("phantom", "generate a synthetic benchmark");
    std::string phantom_out;
    phantom_cmd->add_option("--out", phantom_out, "output directory")->required();

    auto* prepare_cmd = app.add_subcommand("prepare", "label maps + balanced patch sets");
    std::string prepare_data, prepare_out;
    prepare_cmd->add_option("--data", prepare_data, "benchmark directory or manifest")
        ->required();
    prepare_cmd->add_option("--out", prepare_out, "output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "train a network on prepared patches");
    std::string train_data, train_out, train_trace;
    train_cmd->add_option("--data", train_data, "prepare output directory")->required();
    train_cmd->add_option("--out", train_out, "checkpoint path")->required();
    train_cmd->add_option("--trace", train_trace, "training trace CSV path");

    auto* segment_cmd = app.add_subcommand("segment", "segment a volume with a checkpoint");
    std::string seg_ckpt, seg_volume, seg_out, seg_overlay;
    bool seg_pgm = false;
    segment_cmd->add_option("--ckpt", seg_ckpt, "checkpoint path")->required();
    segment_cmd->add_option("--volume", seg_volume, "input volume header")->required();
    segment_cmd->add_option("--out", seg_out, "output mask header path")->required();
    segment_cmd->add_option("--overlay", seg_overlay, "write overlay PGMs to this directory");
    segment_cmd->add_flag("--pgm", seg_pgm, "also write per-frame mask PGMs");

    auto* eval_cmd = app.add_subcommand("evaluate", "metric suite for (S, GT) pairs");
    std::vector<std::string> eval_pairs;
    std::string eval_seg, eval_gt, eval_csv;
    eval_cmd->add_option("--pair", eval_pairs, "segmentation.vhdr,gt.vhdr (repeatable)");
    eval_cmd->add_option("--seg", eval_seg, "segmentation mask header");
    eval_cmd->add_option("--gt", eval_gt, "ground-truth mask header");
    eval_cmd->add_option("--csv", eval_csv, "also write CSV rows here");

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
    double grad_eps = 1e-5;
    int grad_draws = 10;
    grad_cmd->add_option("--eps", grad_eps, "central difference step");
    grad_cmd->add_option("--draws", grad_draws, "number of random (input,label) draws");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help();
            return kExitOk;
        }
        std::cerr << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (!config_path.empty()) apply_config_file(rc, config_path);
        if (!seed_flag.empty()) rc.seed = std::stoull(seed_flag);
        if (classes_flag > 0) rc.classes = classes_flag;
        if (patch_flag > 0) rc.patch = patch_flag;
        if (stride_flag > 0) rc.stride = stride_flag;
        if (!bands_flag.empty()) rc.bands = bands_flag;
        if (threads_flag >= 0) rc.threads = threads_flag;
        if (deterministic_flag) rc.deterministic = 1;
        apply_threads(rc);

        if (phantom_cmd->parsed()) return cmd_phantom(rc, phantom_out);
        if (prepare_cmd->parsed()) return cmd_prepare(rc, prepare_data, prepare_out);
        if (train_cmd->parsed())
            return cmd_train(rc, train_data, train_out,
                             train_trace.empty() ? std::nullopt
                                                 : std::optional<fs::path>(train_trace));
        if (segment_cmd->parsed())
            return cmd_segment(rc, seg_ckpt, seg_volume, seg_out,
                               seg_overlay.empty() ? std::nullopt
                                                   : std::optional<fs::path>(seg_overlay),
                               seg_pgm);
        if (eval_cmd->parsed()) {
            std::vector<std::string> pairs = eval_pairs;
            if (!eval_seg.empty() || !eval_gt.empty()) {
                if (eval_seg.empty() || eval_gt.empty())
                    throw CLI::ValidationError("--seg/--gt", "both paths are required");
                pairs.push_back(eval_seg + "," + eval_gt);
            }
            if (pairs.empty())
                throw CLI::ValidationError("evaluate", "give --pair or --seg/--gt");
            return cmd_evaluate(pairs,
                                eval_csv.empty() ? std::nullopt
                                                 : std::optional<fs::path>(eval_csv));
        }
        if (grad_cmd->parsed()) return cmd_gradcheck(rc, grad_eps, grad_draws);
        return kExitUsage;
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "validation failure: " << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
