#include "vseg/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vseg/errors.hpp"

namespace vseg {

NetworkClassifier::NetworkClassifier(const nn::Network<float>& net, bool normalize,
                                     double sigma_floor, int batch_size)
    : net_(net), normalize_(normalize), sigma_floor_(sigma_floor), batch_size_(batch_size) {
    if (batch_size_ < 1) throw InvalidArgument("classifier batch size must be >= 1");
}

int NetworkClassifier::num_classes() const { return net_.cfg.classes; }

void NetworkClassifier::classify(const float* patches, const int* /*centers*/, int count,
                                 int patch_len, uint8_t* out) const {
    if (size_t(patch_len) != net_.cfg.input_len())
        throw InvalidArgument("patch length does not match network input");
    nn::BatchWork<float> work;
    std::vector<float> batch(size_t(batch_size_) * patch_len);
    const int classes = net_.cfg.classes;
    for (int at = 0; at < count; at += batch_size_) {
        const int n = std::min(batch_size_, count - at);
        for (int s = 0; s < n; ++s) {
            const float* src = patches + size_t(at + s) * patch_len;
            float* dst = batch.data() + size_t(s) * patch_len;
            if (normalize_)
                normalize_patch(src, dst, patch_len, sigma_floor_);
            else
                std::memcpy(dst, src, sizeof(float) * patch_len);
        }
        nn::forward_batch(net_, batch.data(), n, nn::Mode::infer, nullptr, work);
        for (int s = 0; s < n; ++s) {
            const float* p = work.probs.data() + size_t(s) * classes;
            int arg = 0;
            for (int j = 1; j < classes; ++j)
                if (p[j] > p[arg]) arg = j;  // ties keep the lower index
            out[at + s] = static_cast<uint8_t>(arg);
        }
    }
}

void OracleClassifier::classify(const float*, const int* centers, int count, int,
                                uint8_t* out) const {
    for (int i = 0; i < count; ++i) {
        const int row = centers[2 * i], col = centers[2 * i + 1];
        if (row < 0 || col < 0 || row >= map_.height || col >= map_.width)
            throw InvalidArgument("oracle center outside the label map");
        out[i] = static_cast<uint8_t>(map_.at(col, row) - 1);  // class id -> index
    }
}

FrameSegmentation segment_frame(const PatchClassifier& classifier, const Frame& frame,
                                const RoiBox& box, const PatchSpec& spec, bool two_class) {
    box.validate(frame.width, frame.height, spec);
    const int classes = classifier.num_classes();
    if (two_class && classes != 2)
        throw InvalidArgument("2-class segmentation needs a 2-class classifier");
    if (!two_class && classes < 3)
        throw InvalidArgument("redundant-class segmentation needs >= 3 classes");

    const uint8_t background_id = two_class ? 0 : 1;
    FrameSegmentation seg;
    seg.width = frame.width;
    seg.height = frame.height;
    seg.class_map.assign(size_t(frame.width) * frame.height, background_id);
    seg.mask.assign(seg.class_map.size(), 0);

    // visited centers
    const int ni = (box.rows - 1) / spec.s + 1;
    const int nj = (box.cols - 1) / spec.s + 1;
    const int count = ni * nj;
    const int n = spec.n, half = spec.half();
    const int patch_len = n * n;

    std::vector<float> patches(size_t(count) * patch_len);
    std::vector<int> centers(size_t(count) * 2);
    int idx = 0;
    for (int i = 0; i < ni; ++i)
        for (int j = 0; j < nj; ++j, ++idx) {
            const int row = box.row0 + i * spec.s;
            const int col = box.col0 + j * spec.s;
            centers[2 * idx] = row;
            centers[2 * idx + 1] = col;
            float* dst = patches.data() + size_t(idx) * patch_len;
            const int top = row - half, left = col - half;
            for (int py = 0; py < n; ++py)
                std::memcpy(dst + size_t(py) * n,
                            frame.values.data() + size_t(top + py) * frame.width + left,
                            sizeof(float) * n);
        }

    std::vector<uint8_t> predicted(count);
    classifier.classify(patches.data(), centers.data(), count, patch_len, predicted.data());

    const int spine_index = classes - 1;
    for (int i = 0; i < count; ++i) {
        const int row = centers[2 * i], col = centers[2 * i + 1];
        const size_t at = size_t(row) * frame.width + col;
        const int pred = predicted[i];
        seg.class_map[at] = static_cast<uint8_t>(two_class ? pred : pred + 1);
        seg.mask[at] = pred == spine_index ? 1 : 0;
    }
    return seg;
}

SegmentationResult segment_volume(const PatchClassifier& classifier, const Volume& volume,
                                  const RoiBox& box, const PatchSpec& spec, bool two_class) {
    SegmentationResult res;
    res.box = box;
    res.spec = spec;
    res.mask.width = res.class_map.width = volume.width;
    res.mask.height = res.class_map.height = volume.height;
    res.mask.depth = res.class_map.depth = volume.depth;
    res.mask.spacing = res.class_map.spacing = volume.spacing;
    res.mask.values.assign(volume.voxel_count(), 0);
    res.class_map.values.assign(volume.voxel_count(), two_class ? 0 : 1);
    res.border_contacts.assign(volume.depth, 0);

    for (int k = 0; k < volume.depth; ++k) {
        const Frame frame = slice_frame(volume, k);
        const FrameSegmentation seg = segment_frame(classifier, frame, box, spec, two_class);
        const size_t at = size_t(k) * volume.width * volume.height;
        std::copy(seg.mask.begin(), seg.mask.end(), res.mask.values.begin() + at);
        std::copy(seg.class_map.begin(), seg.class_map.end(), res.class_map.values.begin() + at);

        size_t contacts = 0;
        for (int col = box.col0; col < box.col_end(); ++col) {
            contacts += seg.mask[size_t(box.row0) * volume.width + col];
            contacts += seg.mask[size_t(box.row_end() - 1) * volume.width + col];
        }
        for (int row = box.row0; row < box.row_end(); ++row) {
            contacts += seg.mask[size_t(row) * volume.width + box.col0];
            contacts += seg.mask[size_t(row) * volume.width + box.col_end() - 1];
        }
        res.border_contacts[k] = contacts;
    }
    return res;
}

SegmentationResult segment_volume(const Checkpoint& ckpt, const Volume& volume) {
    const nn::Network<float> net = ckpt.to_network();
    const bool two_class = ckpt.arch.classes == 2;
    NetworkClassifier classifier(net, ckpt.normalize, ckpt.sigma_floor);
    SegmentationResult res =
        segment_volume(classifier, volume, ckpt.box, ckpt.spec, two_class);
    res.checkpoint_id = "seed=" + std::to_string(ckpt.seed) +
                        ",epoch=" + std::to_string(ckpt.best_epoch);
    return res;
}

void save_overlay_pgm(const Frame& frame, const MaskFrame& mask,
                      const std::filesystem::path& path) {
    if (mask.width != frame.width || mask.height != frame.height)
        throw InvalidArgument("overlay mask dimensions do not match the frame");
    float lo = frame.values[0], hi = frame.values[0];
    for (float v : frame.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const float scale = hi > lo ? 255.0f / (hi - lo) : 0.0f;
    std::vector<uint8_t> pixels(frame.values.size());
    for (size_t i = 0; i < pixels.size(); ++i)
        pixels[i] = static_cast<uint8_t>(std::lround((frame.values[i] - lo) * scale));

    auto is_mask = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= mask.width || y >= mask.height) return false;
        return mask.at(x, y) != 0;
    };
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (!is_mask(x, y)) continue;
            const bool boundary = !is_mask(x - 1, y) || !is_mask(x + 1, y) ||
                                  !is_mask(x, y - 1) || !is_mask(x, y + 1);
            if (boundary) pixels[size_t(y) * mask.width + x] = 255;
        }
    save_pgm(path, frame.width, frame.height, pixels);
}

}  // namespace vseg
