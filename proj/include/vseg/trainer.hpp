#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vseg/nn.hpp"
#include "vseg/patchgen.hpp"

namespace vseg {

struct TrainConfig {
    int classes = 4;  // 2 or k+2
    int patches_per_class = 10000;
    int batch_size = 64;
    int epochs = 10;
    uint64_t seed = 20240501;
    nn::OptimizerConfig opt;
    bool normalize = true;        // per-patch zero-mean / unit-std
    double sigma_floor = 1e-6;
    double val_fraction = 0.10;

    void validate() const;
};

// Normalized patches with 0-based class indices, ready for the network.
struct Dataset {
    int patch_len = 0;
    std::vector<float> x;    // [count][patch_len]
    std::vector<uint8_t> y;  // target index in [0, classes)

    size_t size() const { return y.size(); }
    const float* patch(size_t i) const { return x.data() + i * size_t(patch_len); }
};

struct SplitDataset {
    Dataset train, val;
    int per_class = 0;         // sampled per class before the split
    bool downsampled = false;  // true when a class had fewer than requested
};

// Balanced class sampling without replacement (seeded), stratified 90/10
// train/validation split. Patch labels are class ids ({1..C} in redundant
// mode, {0,1} in 2-class mode); targets come out 0-based.
SplitDataset assemble_dataset(const std::vector<PatchSet>& patch_sets, const TrainConfig& cfg);

// Applies the per-patch normalization used at training time.
void normalize_patch(const float* src, float* dst, int len, double sigma_floor);

struct EpochStats {
    int epoch = 0;  // 1-based
    double mean_loss = 0.0;
    double val_accuracy = 0.0;
};

// Serialized network + provenance. Binary layout: magic "VSEG", u32
// version, u32 descriptor length, descriptor text, u64 param count, f32
// little-endian parameters in param_views order, trailing CRC-32 of all
// preceding bytes.
struct Checkpoint {
    nn::NetConfig arch;
    bool normalize = true;
    double sigma_floor = 1e-6;
    RoiBox box;      // training-time ROI, reused at inference
    PatchSpec spec;  // training-time patch geometry
    uint64_t seed = 0;
    int best_epoch = 0;
    double final_loss = 0.0;
    double best_val_accuracy = 0.0;
    std::vector<float> params;

    nn::Network<float> to_network() const;
    static Checkpoint from_network(const nn::Network<float>& net);
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochStats> trace;
};

// Seeded, single-stream training; identical (seed, config, data) produce a
// bit-identical checkpoint. Keeps the epoch with the best validation
// accuracy. Throws ValidationError when the loss turns NaN.
TrainResult train(const SplitDataset& data, const TrainConfig& cfg, const nn::NetConfig& arch,
                  const RoiBox& box, const PatchSpec& spec);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// epoch,mean_loss,val_accuracy rows.
std::string trace_csv(const std::vector<EpochStats>& trace);

}  // namespace vseg
