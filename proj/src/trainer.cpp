#include "vseg/trainer.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vseg/errors.hpp"
#include "vseg/kvfile.hpp"

namespace vseg {

void TrainConfig::validate() const {
    if (classes < 2) throw InvalidArgument("need at least 2 classes");
    if (patches_per_class < 1 || batch_size < 1 || epochs < 1)
        throw InvalidArgument("counts must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw InvalidArgument("validation fraction must lie in (0,1)");
    if (!(sigma_floor > 0.0)) throw InvalidArgument("sigma floor must be > 0");
}

void normalize_patch(const float* src, float* dst, int len, double sigma_floor) {
    double sum = 0.0;
    for (int i = 0; i < len; ++i) sum += src[i];
    const double mean = sum / len;
    double var = 0.0;
    for (int i = 0; i < len; ++i) {
        const double d = src[i] - mean;
        var += d * d;
    }
    const double sd = std::max(std::sqrt(var / len), sigma_floor);
    for (int i = 0; i < len; ++i) dst[i] = static_cast<float>((src[i] - mean) / sd);
}

SplitDataset assemble_dataset(const std::vector<PatchSet>& patch_sets, const TrainConfig& cfg) {
    cfg.validate();
    if (patch_sets.empty()) throw InvalidArgument("no patch sets given");
    const int patch_len = patch_sets.front().patch_len();
    for (const auto& ps : patch_sets) {
        if (!ps.labeled) throw InvalidArgument("patch sets must be labeled");
        if (ps.patch_len() != patch_len) throw InvalidArgument("mixed patch sizes");
    }

    // class id -> 0-based target: {0,1} stays, {1..C} shifts down by one
    const bool two_class = cfg.classes == 2 && !patch_sets.empty() &&
                           patch_sets.front().num_classes == 2 &&
                           !patch_sets.front().labels.empty() &&
                           *std::min_element(patch_sets.front().labels.begin(),
                                             patch_sets.front().labels.end()) == 0;
    auto to_target = [&](uint8_t label) -> int { return two_class ? label : label - 1; };

    // collect (set, index) per class
    std::vector<std::vector<std::pair<size_t, size_t>>> per_class(cfg.classes);
    for (size_t s = 0; s < patch_sets.size(); ++s) {
        const auto& ps = patch_sets[s];
        for (size_t i = 0; i < ps.labels.size(); ++i) {
            const int t = to_target(ps.labels[i]);
            if (t < 0 || t >= cfg.classes)
                throw InvalidArgument("patch label outside the configured class count");
            per_class[t].emplace_back(s, i);
        }
    }

    size_t avail_min = SIZE_MAX;
    for (int t = 0; t < cfg.classes; ++t) {
        if (per_class[t].empty())
            throw InvalidArgument("class " + std::to_string(t) + " has no patches");
        avail_min = std::min(avail_min, per_class[t].size());
    }
    const size_t take = std::min<size_t>(cfg.patches_per_class, avail_min);

    SplitDataset out;
    out.per_class = static_cast<int>(take);
    out.downsampled = take < size_t(cfg.patches_per_class);
    out.train.patch_len = out.val.patch_len = patch_len;

    const size_t n_val = static_cast<size_t>(double(take) * cfg.val_fraction);
    const size_t n_train = take - n_val;

    Rng rng(cfg.seed);
    auto append = [&](Dataset& ds, const std::pair<size_t, size_t>& ref, int target) {
        const auto& ps = patch_sets[ref.first];
        const auto patch = ps.patch(ref.second);
        const size_t at = ds.x.size();
        ds.x.resize(at + patch_len);
        if (cfg.normalize)
            normalize_patch(patch.data(), ds.x.data() + at, patch_len, cfg.sigma_floor);
        else
            std::copy(patch.begin(), patch.end(), ds.x.data() + at);
        ds.y.push_back(static_cast<uint8_t>(target));
    };

    for (int t = 0; t < cfg.classes; ++t) {
        auto& pool = per_class[t];
        rng.shuffle(pool);  // sampling without replacement
        for (size_t i = 0; i < n_train; ++i) append(out.train, pool[i], t);
        for (size_t i = n_train; i < take; ++i) append(out.val, pool[i], t);
    }
    return out;
}

namespace {

double validation_accuracy(const nn::Network<float>& net, const Dataset& val,
                           nn::BatchWork<float>& work, std::vector<float>& batch_buf,
                           int batch_size) {
    if (val.size() == 0) return 0.0;
    const int len = val.patch_len;
    size_t correct = 0;
    for (size_t at = 0; at < val.size(); at += batch_size) {
        const int n = static_cast<int>(std::min<size_t>(batch_size, val.size() - at));
        batch_buf.resize(size_t(n) * len);
        std::memcpy(batch_buf.data(), val.patch(at), sizeof(float) * batch_buf.size());
        nn::forward_batch(net, batch_buf.data(), n, nn::Mode::infer, nullptr, work);
        for (int s = 0; s < n; ++s) {
            const float* p = work.probs.data() + size_t(s) * net.cfg.classes;
            int arg = 0;
            for (int j = 1; j < net.cfg.classes; ++j)
                if (p[j] > p[arg]) arg = j;
            if (arg == val.y[at + s]) ++correct;
        }
    }
    return double(correct) / double(val.size());
}

}  // namespace

TrainResult train(const SplitDataset& data, const TrainConfig& cfg, const nn::NetConfig& arch,
                  const RoiBox& box, const PatchSpec& spec) {
    cfg.validate();
    arch.validate();
    if (data.train.size() == 0) throw InvalidArgument("empty training set");
    if (arch.classes != cfg.classes)
        throw InvalidArgument("network class count does not match training config");
    if (size_t(arch.input_len()) != size_t(data.train.patch_len))
        throw InvalidArgument("network input length does not match patch length");

    Rng rng(cfg.seed);
    nn::Network<float> net = nn::Network<float>::he_init(arch, rng);
    nn::Gradients<float> grads = nn::Gradients<float>::like(net);
    nn::OptimizerState<float> opt_state = nn::OptimizerState<float>::like(net);
    nn::BatchWork<float> work;

    const int len = data.train.patch_len;
    std::vector<size_t> order(data.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<float> batch_x;
    std::vector<uint8_t> batch_y;

    TrainResult result;
    std::vector<float> best_params;
    double best_acc = -1.0;
    int best_epoch = 0;
    double best_epoch_loss = 0.0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        size_t steps = 0;
        for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
            const int n = static_cast<int>(std::min<size_t>(cfg.batch_size, order.size() - at));
            batch_x.resize(size_t(n) * len);
            batch_y.resize(n);
            for (int s = 0; s < n; ++s) {
                std::memcpy(batch_x.data() + size_t(s) * len, data.train.patch(order[at + s]),
                            sizeof(float) * len);
                batch_y[s] = data.train.y[order[at + s]];
            }
            nn::forward_batch(net, batch_x.data(), n, nn::Mode::train, &rng, work);
            const double loss = nn::backward_batch(net, work, batch_y.data(), grads);
            if (!std::isfinite(loss)) throw ValidationError("training loss diverged (NaN/Inf)");
            nn::optimizer_step(net, grads, cfg.opt, opt_state);
            loss_sum += loss;
            ++steps;
        }
        const double mean_loss = loss_sum / double(steps);
        const double acc = validation_accuracy(net, data.val, work, batch_x, cfg.batch_size);
        result.trace.push_back({epoch, mean_loss, acc});

        if (acc > best_acc) {
            best_acc = acc;
            best_epoch = epoch;
            best_epoch_loss = mean_loss;
            best_params.clear();
            for (auto view : nn::param_views(net))
                best_params.insert(best_params.end(), view.begin(), view.end());
        }
    }

    Checkpoint ckpt;
    ckpt.arch = arch;
    ckpt.normalize = cfg.normalize;
    ckpt.sigma_floor = cfg.sigma_floor;
    ckpt.box = box;
    ckpt.spec = spec;
    ckpt.seed = cfg.seed;
    ckpt.best_epoch = best_epoch;
    ckpt.final_loss = best_epoch_loss;
    ckpt.best_val_accuracy = best_acc;
    ckpt.params = std::move(best_params);
    result.checkpoint = std::move(ckpt);
    return result;
}

nn::Network<float> Checkpoint::to_network() const {
    Rng dummy(0);
    nn::Network<float> net = nn::Network<float>::he_init(arch, dummy);
    if (params.size() != net.param_count())
        throw FormatError("checkpoint parameter count does not match architecture");
    size_t at = 0;
    for (auto view : nn::param_views(net)) {
        std::copy(params.begin() + at, params.begin() + at + view.size(), view.begin());
        at += view.size();
    }
    return net;
}

Checkpoint Checkpoint::from_network(const nn::Network<float>& net) {
    Checkpoint ckpt;
    ckpt.arch = net.cfg;
    for (auto view : nn::param_views(net))
        ckpt.params.insert(ckpt.params.end(), view.begin(), view.end());
    return ckpt;
}

namespace {

constexpr char kMagic[4] = {'V', 'S', 'E', 'G'};
constexpr uint32_t kVersion = 1;

template <typename T>
void append_le(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

std::string descriptor_text(const Checkpoint& c) {
    KvFile kv;
    kv.set_int("input_h", c.arch.input_h);
    kv.set_int("input_w", c.arch.input_w);
    kv.set_int("input_c", c.arch.input_c);
    kv.set_int("conv1_channels", c.arch.conv1_channels);
    kv.set_int("conv2_channels", c.arch.conv2_channels);
    kv.set_int("fc1_units", c.arch.fc1_units);
    kv.set_int("fc2_units", c.arch.fc2_units);
    kv.set_int("classes", c.arch.classes);
    kv.set_int("kernel", c.arch.kernel);
    kv.set_double("dropout_rate", c.arch.dropout_rate);
    kv.set_int("normalize", c.normalize ? 1 : 0);
    kv.set_double("sigma_floor", c.sigma_floor);
    kv.set("box", std::to_string(c.box.row0) + " " + std::to_string(c.box.col0) + " " +
                      std::to_string(c.box.rows) + " " + std::to_string(c.box.cols));
    kv.set_int("patch_n", c.spec.n);
    kv.set_int("patch_s", c.spec.s);
    kv.set_uint("seed", c.seed);
    kv.set_int("best_epoch", c.best_epoch);
    kv.set_double("final_loss", c.final_loss);
    kv.set_double("best_val_accuracy", c.best_val_accuracy);
    return kv.serialize();
}

Checkpoint descriptor_parse(const std::string& text) {
    const KvFile kv = KvFile::parse(text);
    Checkpoint c;
    c.arch.input_h = int(kv.require_int("input_h"));
    c.arch.input_w = int(kv.require_int("input_w"));
    c.arch.input_c = int(kv.require_int("input_c"));
    c.arch.conv1_channels = int(kv.require_int("conv1_channels"));
    c.arch.conv2_channels = int(kv.require_int("conv2_channels"));
    c.arch.fc1_units = int(kv.require_int("fc1_units"));
    c.arch.fc2_units = int(kv.require_int("fc2_units"));
    c.arch.classes = int(kv.require_int("classes"));
    c.arch.kernel = int(kv.require_int("kernel"));
    c.arch.dropout_rate = float(kv.require_double("dropout_rate"));
    c.normalize = kv.require_int("normalize") != 0;
    c.sigma_floor = kv.require_double("sigma_floor");
    const auto b = kv.require_ints("box", 4);
    c.box = {int(b[0]), int(b[1]), int(b[2]), int(b[3])};
    c.spec.n = int(kv.require_int("patch_n"));
    c.spec.s = int(kv.require_int("patch_s"));
    c.seed = kv.require_uint("seed");
    c.best_epoch = int(kv.require_int("best_epoch"));
    c.final_loss = kv.require_double("final_loss");
    c.best_val_accuracy = kv.require_double("best_val_accuracy");
    return c;
}

size_t expected_param_count(const nn::NetConfig& a) {
    const size_t k2 = size_t(a.kernel) * a.kernel;
    return k2 * a.input_c * a.conv1_channels + a.conv1_channels +
           k2 * a.conv1_channels * a.conv2_channels + a.conv2_channels +
           size_t(a.flatten_len()) * a.fc1_units + a.fc1_units +
           size_t(a.fc1_units) * a.fc2_units + a.fc2_units +
           size_t(a.fc2_units) * a.classes + a.classes;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    ckpt.arch.validate();
    if (ckpt.params.size() != expected_param_count(ckpt.arch))
        throw InvalidArgument("checkpoint parameter count does not match architecture");

    std::string out;
    out.append(kMagic, 4);
    append_le(out, kVersion);
    const std::string desc = descriptor_text(ckpt);
    append_le(out, uint32_t(desc.size()));
    out += desc;
    append_le(out, uint64_t(ckpt.params.size()));
    const size_t param_bytes = ckpt.params.size() * sizeof(float);
    out.append(reinterpret_cast<const char*>(ckpt.params.data()), param_bytes);

    const uint32_t crc = uint32_t(
        crc32(0L, reinterpret_cast<const Bytef*>(out.data()), uInt(out.size())));
    append_le(out, crc);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    constexpr size_t kMinSize = 4 + 4 + 4 + 8 + 4;
    if (bytes.size() < kMinSize) throw FormatError("checkpoint truncated: " + path.string());
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError("bad checkpoint magic: " + path.string());

    auto read_le = [&](size_t at, auto& v) {
        if (at + sizeof(v) > bytes.size())
            throw FormatError("checkpoint truncated: " + path.string());
        std::memcpy(&v, bytes.data() + at, sizeof(v));
        return at + sizeof(v);
    };

    uint32_t version = 0;
    size_t at = read_le(4, version);
    if (version != kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));

    uint32_t stored_crc = 0;
    read_le(bytes.size() - 4, stored_crc);
    const uint32_t crc = uint32_t(crc32(
        0L, reinterpret_cast<const Bytef*>(bytes.data()), uInt(bytes.size() - 4)));
    if (crc != stored_crc) throw FormatError("checkpoint CRC mismatch: " + path.string());

    uint32_t desc_len = 0;
    at = read_le(at, desc_len);
    if (at + desc_len > bytes.size()) throw FormatError("checkpoint truncated: " + path.string());
    Checkpoint ckpt = descriptor_parse(bytes.substr(at, desc_len));
    at += desc_len;

    uint64_t param_count = 0;
    at = read_le(at, param_count);
    if (param_count != expected_param_count(ckpt.arch))
        throw FormatError("checkpoint parameter count does not match architecture descriptor");
    const size_t param_bytes = size_t(param_count) * sizeof(float);
    if (at + param_bytes + 4 != bytes.size())
        throw FormatError("checkpoint size inconsistent: " + path.string());
    ckpt.params.resize(param_count);
    std::memcpy(ckpt.params.data(), bytes.data() + at, param_bytes);
    return ckpt;
}

std::string trace_csv(const std::vector<EpochStats>& trace) {
    std::ostringstream ss;
    ss << "epoch,mean_loss,val_accuracy\n";
    ss.precision(9);
    for (const auto& e : trace) ss << e.epoch << "," << e.mean_loss << "," << e.val_accuracy << "\n";
    return ss.str();
}

}  // namespace vseg
