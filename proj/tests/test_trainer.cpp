#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "vseg/errors.hpp"
#include "vseg/rng.hpp"
#include "vseg/trainer.hpp"

using namespace vseg;
namespace fs = std::filesystem;

namespace {

// Synthetic labeled patch set: per-class blobs with distinct means so a
// tiny network can separate them quickly.
PatchSet synthetic_patchset(Rng& rng, int classes, int per_class, int n, bool two_class) {
    PatchSet ps;
    ps.spec = PatchSpec{n, 1};
    ps.box = RoiBox{n, n, 4, 4};
    ps.labeled = true;
    ps.num_classes = classes;
    for (int cls = 0; cls < classes; ++cls) {
        for (int i = 0; i < per_class; ++i) {
            for (int p = 0; p < n * n; ++p)
                ps.pixels.push_back(float(10.0 * cls + rng.normal()));
            ps.centers.emplace_back(n, n);
            ps.labels.push_back(uint8_t(two_class ? cls : cls + 1));
        }
    }
    return ps;
}

nn::NetConfig tiny_arch(int n, int classes) {
    nn::NetConfig arch;
    arch.input_h = n;
    arch.input_w = n;
    arch.conv1_channels = 4;
    arch.conv2_channels = 8;
    arch.fc1_units = 16;
    arch.fc2_units = 16;
    arch.classes = classes;
    return arch;
}

fs::path temp_dir() {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() / ("vseg_trainer_" + std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("assemble_dataset balances, splits and stays deterministic") {
    Rng rng(1);
    TrainConfig cfg;
    cfg.classes = 4;
    cfg.patches_per_class = 50;
    cfg.seed = 42;

    // uneven availability: min class has 30
    PatchSet ps;
    ps.spec = PatchSpec{8, 1};
    ps.box = RoiBox{8, 8, 2, 2};
    ps.labeled = true;
    ps.num_classes = 4;
    const int avail[4] = {100, 500, 30, 120};
    for (int cls = 0; cls < 4; ++cls)
        for (int i = 0; i < avail[cls]; ++i) {
            for (int p = 0; p < 64; ++p) ps.pixels.push_back(float(cls));
            ps.centers.emplace_back(8, 8);
            ps.labels.push_back(uint8_t(cls + 1));
        }

    const SplitDataset split = assemble_dataset({ps}, cfg);
    CHECK(split.downsampled);
    CHECK(split.per_class == 30);

    // exactly uniform class histogram in train and val
    auto histogram = [&](const Dataset& d) {
        std::vector<size_t> h(4, 0);
        for (uint8_t y : d.y) ++h[y];
        return h;
    };
    const auto train_h = histogram(split.train);
    const auto val_h = histogram(split.val);
    for (int c = 1; c < 4; ++c) {
        CHECK(train_h[c] == train_h[0]);
        CHECK(val_h[c] == val_h[0]);
    }
    CHECK(train_h[0] + val_h[0] == 30);
    CHECK(val_h[0] == size_t(30 * cfg.val_fraction));

    // same seed -> identical selection
    const SplitDataset again = assemble_dataset({ps}, cfg);
    CHECK(again.train.x == split.train.x);
    CHECK(again.train.y == split.train.y);
    CHECK(again.val.x == split.val.x);

    // a class with zero patches is an error
    TrainConfig cfg8 = cfg;
    cfg8.classes = 5;
    CHECK_THROWS_AS(assemble_dataset({ps}, cfg8), InvalidArgument);
}

TEST_CASE("normalize_patch centers and scales, honoring the sigma floor") {
    const float src[4] = {2.0f, 2.0f, 2.0f, 2.0f};
    float dst[4];
    normalize_patch(src, dst, 4, 1e-6);
    for (float v : dst) CHECK(v == 0.0f);  // constant patch -> zeros, no blowup

    const float src2[4] = {0.0f, 2.0f, 0.0f, 2.0f};
    normalize_patch(src2, dst, 4, 1e-6);
    CHECK(dst[0] == doctest::Approx(-1.0f));
    CHECK(dst[1] == doctest::Approx(1.0f));
}

TEST_CASE("training with lr=0 returns the initialization unchanged") {
    Rng rng(2);
    PatchSet ps = synthetic_patchset(rng, 4, 40, 8, false);
    TrainConfig cfg;
    cfg.classes = 4;
    cfg.patches_per_class = 40;
    cfg.batch_size = 16;
    cfg.epochs = 2;
    cfg.seed = 7;
    cfg.opt.lr = 0.0;

    const SplitDataset data = assemble_dataset({ps}, cfg);
    const nn::NetConfig arch = tiny_arch(8, 4);
    const TrainResult r = train(data, cfg, arch, ps.box, ps.spec);

    Rng init_rng(cfg.seed);
    const nn::Network<float> init = nn::Network<float>::he_init(arch, init_rng);
    std::vector<float> init_params;
    for (auto view : nn::param_views(init))
        init_params.insert(init_params.end(), view.begin(), view.end());
    CHECK(r.checkpoint.params == init_params);
}

TEST_CASE("same seed and config give a bit-identical checkpoint; loss decreases") {
    Rng rng(3);
    PatchSet ps = synthetic_patchset(rng, 4, 60, 8, false);
    TrainConfig cfg;
    cfg.classes = 4;
    cfg.patches_per_class = 60;
    cfg.batch_size = 16;
    cfg.epochs = 3;
    cfg.seed = 1234;
    cfg.opt.lr = 1e-3;

    const SplitDataset data = assemble_dataset({ps}, cfg);
    const nn::NetConfig arch = tiny_arch(8, 4);
    const TrainResult a = train(data, cfg, arch, ps.box, ps.spec);
    const TrainResult b = train(data, cfg, arch, ps.box, ps.spec);
    CHECK(a.checkpoint.params == b.checkpoint.params);
    CHECK(a.trace.size() == 3);
    for (size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].mean_loss == b.trace[i].mean_loss);
        CHECK(a.trace[i].val_accuracy == b.trace[i].val_accuracy);
    }
    // separable synthetic classes: final epoch beats the first
    CHECK(a.trace.back().mean_loss < a.trace.front().mean_loss);
    // best-validation selection recorded
    CHECK(a.checkpoint.best_epoch >= 1);
    CHECK(a.checkpoint.best_epoch <= 3);
}

TEST_CASE("checkpoint round trip is bit-exact; corruption and truncation are caught") {
    Rng rng(4);
    const nn::NetConfig arch = tiny_arch(8, 4);
    Rng init_rng(11);
    nn::Network<float> net = nn::Network<float>::he_init(arch, init_rng);
    Checkpoint ckpt = Checkpoint::from_network(net);
    ckpt.box = RoiBox{20, 30, 5, 6};
    ckpt.spec = PatchSpec{8, 1};
    ckpt.seed = 99;
    ckpt.best_epoch = 2;
    ckpt.final_loss = 0.5;
    ckpt.best_val_accuracy = 0.75;

    const fs::path dir = temp_dir();
    const fs::path path = dir / "net.vseg";
    save_checkpoint(ckpt, path);

    const Checkpoint back = load_checkpoint(path);
    CHECK(back.params == ckpt.params);
    CHECK(back.arch == ckpt.arch);
    CHECK(back.box.row0 == 20);
    CHECK(back.box.cols == 6);
    CHECK(back.spec.n == 8);
    CHECK(back.seed == 99);
    CHECK(back.best_epoch == 2);
    CHECK(back.final_loss == 0.5);

    // a round trip through the network restores the same weights
    const nn::Network<float> net2 = back.to_network();
    const auto a = nn::param_views(net);
    const auto b = nn::param_views(net2);
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(std::equal(a[i].begin(), a[i].end(), b[i].begin()));

    SUBCASE("flipping one byte fails the CRC") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(64);
        char c;
        f.seekg(64);
        f.get(c);
        f.seekp(64);
        f.put(char(c ^ 0x40));
        f.close();
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
    SUBCASE("truncated file is rejected") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), std::streamsize(bytes.size() / 2));
        out.close();
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
    SUBCASE("bad magic is rejected") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
        f.close();
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
}

TEST_CASE("trace CSV has the expected header and rows") {
    const std::vector<EpochStats> trace = {{1, 0.9, 0.5}, {2, 0.4, 0.8}};
    const std::string csv = trace_csv(trace);
    CHECK(csv.find("epoch,mean_loss,val_accuracy\n") == 0);
    CHECK(csv.find("1,0.9,0.5\n") != std::string::npos);
    CHECK(csv.find("2,0.4,0.8\n") != std::string::npos);
}

TEST_CASE("divergence guard aborts on non-finite loss") {
    Rng rng(5);
    PatchSet ps = synthetic_patchset(rng, 2, 30, 8, true);
    // poison every class-0 patch with enormous values so fp32 overflows
    for (int i = 0; i < 30 * 64; ++i) ps.pixels[i] = 1e30f;

    TrainConfig cfg;
    cfg.classes = 2;
    cfg.patches_per_class = 30;
    cfg.batch_size = 8;
    cfg.epochs = 2;
    cfg.seed = 3;
    cfg.normalize = false;  // keep the poison un-normalized
    cfg.opt.lr = 1e4;
    cfg.opt.kind = nn::OptKind::sgd_momentum;

    const SplitDataset data = assemble_dataset({ps}, cfg);
    const nn::NetConfig arch = tiny_arch(8, 2);
    CHECK_THROWS_AS(train(data, cfg, arch, ps.box, ps.spec), ValidationError);
}
