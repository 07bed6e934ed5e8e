#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "vseg/nn.hpp"
#include "vseg/patchgen.hpp"
#include "vseg/trainer.hpp"
#include "vseg/volume.hpp"

namespace vseg {

// Maps raw (un-normalized) patches to predicted class indices in [0, C).
// Centers are supplied so truth-reading classifiers can ignore the pixels.
class PatchClassifier {
public:
    virtual ~PatchClassifier() = default;
    virtual int num_classes() const = 0;
    // patches: [count][patch_len]; centers: interleaved (row, col) pairs.
    virtual void classify(const float* patches, const int* centers, int count, int patch_len,
                          uint8_t* out) const = 0;
};

// CNN-backed classifier; applies the checkpoint's patch normalization and
// batches internally.
class NetworkClassifier : public PatchClassifier {
public:
    NetworkClassifier(const nn::Network<float>& net, bool normalize, double sigma_floor,
                      int batch_size = 64);
    int num_classes() const override;
    void classify(const float* patches, const int* centers, int count, int patch_len,
                  uint8_t* out) const override;

private:
    const nn::Network<float>& net_;
    bool normalize_;
    double sigma_floor_;
    int batch_size_;
};

// Reads the true class at each center from a label map; used to verify that
// reconstruction is exact when classification is.
class OracleClassifier : public PatchClassifier {
public:
    explicit OracleClassifier(const LabelMap& map) : map_(map) {}
    int num_classes() const override { return map_.num_classes; }
    void classify(const float*, const int* centers, int count, int, uint8_t* out) const override;

private:
    const LabelMap& map_;
};

// Always predicts class index 0 (background in both modes).
class ConstantClassifier : public PatchClassifier {
public:
    explicit ConstantClassifier(int classes, uint8_t index = 0)
        : classes_(classes), index_(index) {}
    int num_classes() const override { return classes_; }
    void classify(const float*, const int*, int count, int, uint8_t* out) const override {
        std::fill(out, out + count, index_);
    }

private:
    int classes_;
    uint8_t index_;
};

struct FrameSegmentation {
    int width = 0, height = 0;
    std::vector<uint8_t> class_map;  // class ids; background outside the box
    std::vector<uint8_t> mask;       // 1 = spine
};

struct SegmentationResult {
    MaskVolume mask;       // binary spine mask
    MaskVolume class_map;  // raw per-pixel class ids
    std::string checkpoint_id;
    RoiBox box;
    PatchSpec spec;
    // Predicted spine pixels on the box border, per frame; nonzero values
    // suggest the structure extends beyond the training-time box.
    std::vector<size_t> border_contacts;
};

// Argmax class per visited center (ties -> lower index); stride > 1 leaves
// unvisited pixels at background. In redundant mode (two_class = false)
// class ids are index+1 and spine is the highest class; in 2-class mode ids
// are the indices themselves and spine is 1. Both make spine == C-1 by
// index, and the binary mask is exactly that set.
FrameSegmentation segment_frame(const PatchClassifier& classifier, const Frame& frame,
                                const RoiBox& box, const PatchSpec& spec, bool two_class);

SegmentationResult segment_volume(const PatchClassifier& classifier, const Volume& volume,
                                  const RoiBox& box, const PatchSpec& spec, bool two_class);

// Convenience: classifier + geometry from a checkpoint.
SegmentationResult segment_volume(const Checkpoint& ckpt, const Volume& volume);

// Frame rescaled to 8 bits with mask boundary pixels forced to 255.
void save_overlay_pgm(const Frame& frame, const MaskFrame& mask,
                      const std::filesystem::path& path);

}  // namespace vseg
