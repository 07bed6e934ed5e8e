#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vseg/volume.hpp"

namespace vseg {

// Deterministic synthetic volumes: a drifting elliptical "spine" cross
// section with lobed protrusions, plus rib-like arcs at spine intensity
// that sit close to (but never touch) the spine. Backgrounds carry smooth
// texture and Gaussian noise.
struct PhantomConfig {
    int width = 256;
    int height = 256;
    int frames = 16;
    std::array<double, 3> spacing{0.8, 0.8, 1.25};

    double spine_rx_min = 14.0, spine_rx_max = 20.0;  // ellipse radii, pixels
    double spine_ry_min = 16.0, spine_ry_max = 24.0;
    double center_jitter = 10.0;   // subject-level offset from the frame center
    double drift_per_frame = 1.5;  // max center movement between frames
    double drift_span = 6.0;       // random walk stays within start +- span
    int lobe_count = 3;            // boundary protrusions
    double lobe_radius_min = 4.0, lobe_radius_max = 7.0;

    int rib_count = 2;            // arcs per frame
    double rib_thickness = 4.0;   // radial thickness, pixels
    double rib_clearance = 3.0;   // min Euclidean gap to the spine, pixels
    double rib_arc_deg = 75.0;    // angular span of each arc

    double background_mean = 30.0;
    double spine_mean = 220.0;    // ribs share this intensity
    double noise_sigma = 10.0;
    int texture_blobs = 3;
    double texture_amp = 18.0;
    double texture_sigma = 48.0;

    int edge_margin = 16;  // min spine distance to every frame edge
    uint64_t seed = 1;

    void validate() const;
};

struct Phantom {
    Volume volume;   // f32 intensities
    MaskVolume gt;   // 1 = spine
    MaskVolume rib;  // 1 = rib, disjoint from gt
};

Phantom generate_phantom(const PhantomConfig& cfg);

// Disjoint seeded subjects split into train/test roles and written to disk
// in volume-io format, plus a manifest.
struct BenchmarkManifest {
    struct Subject {
        int index = 0;
        bool train = true;
        uint64_t seed = 0;
        std::string volume_path, gt_path, rib_path;  // relative to the manifest
    };
    std::vector<Subject> subjects;
    int frames = 0, width = 0, height = 0;
    std::array<double, 3> spacing{1, 1, 1};

    std::vector<const Subject*> train_subjects() const;
    std::vector<const Subject*> test_subjects() const;
};

BenchmarkManifest make_benchmark(const PhantomConfig& cfg, int n_subjects,
                                 const std::filesystem::path& out_dir);

void save_manifest(const BenchmarkManifest& m, const std::filesystem::path& path);
BenchmarkManifest load_manifest(const std::filesystem::path& path);

}  // namespace vseg
