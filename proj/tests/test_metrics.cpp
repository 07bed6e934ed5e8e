#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vseg/errors.hpp"
#include "vseg/metrics.hpp"
#include "vseg/rng.hpp"

using namespace vseg;

namespace {

MaskVolume mask3d(int w, int h, int d, std::vector<uint8_t> values,
                  std::array<double, 3> sp = {1, 1, 1}) {
    MaskVolume m;
    m.width = w;
    m.height = h;
    m.depth = d;
    m.spacing = sp;
    m.values = std::move(values);
    return m;
}

MaskVolume empty_mask(int w, int h, int d) {
    return mask3d(w, h, d, std::vector<uint8_t>(size_t(w) * h * d, 0));
}

// Hand-checked fixture: TP=2, FP=1, FN=2, TN=20.
const ConfusionMatrix kFixture{2, 1, 20, 2};

MaskVolume translated(const MaskVolume& m, int dx, int dy, int dz, int w, int h, int d) {
    MaskVolume out = empty_mask(w, h, d);
    out.spacing = m.spacing;
    for (int z = 0; z < m.depth; ++z)
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                if (m.at(x, y, z)) out.at(x + dx, y + dy, z + dz) = 1;
    return out;
}

}  // namespace

TEST_CASE("confusion counts by direct per-voxel comparison") {
    Rng rng(1);
    const auto s = oracle::random_mask(rng, 8, 8, 1, {1, 1, 1}, 0.4);
    const auto gt = oracle::random_mask(rng, 8, 8, 1, {1, 1, 1}, 0.4);
    const ConfusionMatrix cm = confusion(s, gt);
    const auto c = oracle::count_sets(s, gt);
    CHECK(double(cm.tp) == c.tp);
    CHECK(double(cm.fp) == c.fp);
    CHECK(double(cm.tn) == c.tn);
    CHECK(double(cm.fn) == c.fn);
    CHECK(cm.total() == s.voxel_count());

    // S == GT has no disagreement; complement has no agreement
    const ConfusionMatrix same = confusion(gt, gt);
    CHECK(same.fp == 0);
    CHECK(same.fn == 0);
    MaskVolume comp = gt;
    for (auto& v : comp.values) v = v ? 0 : 1;
    const ConfusionMatrix opposite = confusion(comp, gt);
    CHECK(opposite.tp == 0);
    CHECK(opposite.tn == 0);
}

TEST_CASE("confusion swaps FP and FN when arguments swap") {
    Rng rng(2);
    const auto s = oracle::random_mask(rng, 6, 6, 2, {1, 1, 1}, 0.5);
    const auto gt = oracle::random_mask(rng, 6, 6, 2, {1, 1, 1}, 0.5);
    const ConfusionMatrix a = confusion(s, gt), b = confusion(gt, s);
    CHECK(a.tp == b.tp);
    CHECK(a.tn == b.tn);
    CHECK(a.fp == b.fn);
    CHECK(a.fn == b.fp);
    // sensitivity of the swapped pair equals TP/(TP+FP) of the original
    CHECK(sensitivity(b) == doctest::Approx(double(a.tp) / double(a.tp + a.fp)));
}

TEST_CASE("fixture cm(2,1,2,20) reproduces every closed-form value") {
    CHECK(dice(kFixture) == doctest::Approx(4.0 / 7.0).epsilon(1e-9));
    CHECK(jaccard(kFixture) == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(volumetric_similarity(kFixture) == doctest::Approx(6.0 / 7.0).epsilon(1e-9));
    CHECK(sensitivity(kFixture) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(specificity(kFixture) == doctest::Approx(20.0 / 21.0).epsilon(1e-9));
    const auto [os, us] = over_under_segmentation(kFixture);
    CHECK(os == doctest::Approx(200.0 / 7.0).epsilon(1e-9));
    CHECK(us == doctest::Approx(400.0 / 7.0).epsilon(1e-9));
    CHECK(accuracy(kFixture) == doctest::Approx(88.0).epsilon(1e-9));
    CHECK(mcc(kFixture) == doctest::Approx(38.0 / std::sqrt(5544.0)).epsilon(1e-9));
}

TEST_CASE("jaccard equals DC/(2-DC) on random confusion matrices") {
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        const ConfusionMatrix cm{rng.bounded(500), rng.bounded(500), rng.bounded(500),
                                 rng.bounded(500)};
        const double dc = dice(cm);
        CHECK(jaccard(cm) == doctest::Approx(dc / (2.0 - dc)).epsilon(1e-12));
        const auto [os, us] = over_under_segmentation(cm);
        CHECK(os + us == doctest::Approx(200.0 * (1.0 - dc)).epsilon(1e-9));
    }
}

TEST_CASE("degenerate conventions are applied and flagged") {
    bool flag = false;
    const ConfusionMatrix both_empty{0, 0, 9, 0};
    CHECK(dice(both_empty, &flag) == 1.0);
    CHECK(flag);
    flag = false;
    CHECK(jaccard(both_empty, &flag) == 1.0);
    CHECK(flag);
    flag = false;
    CHECK(volumetric_similarity(both_empty, &flag) == 1.0);
    CHECK(flag);
    flag = false;
    CHECK(over_under_segmentation(both_empty, &flag) == std::pair<double, double>{0.0, 0.0});
    CHECK(flag);

    flag = false;
    CHECK(sensitivity(both_empty, &flag) == 0.0);
    CHECK(flag);
    const ConfusionMatrix no_negatives{4, 0, 0, 0};
    flag = false;
    CHECK(specificity(no_negatives, &flag) == 0.0);
    CHECK(flag);
    flag = false;
    CHECK(mcc(no_negatives, &flag) == 0.0);  // GT all-foreground
    CHECK(flag);

    // S empty, GT non-empty: VS = 0
    const ConfusionMatrix s_empty{0, 0, 5, 4};
    CHECK(volumetric_similarity(s_empty) == doctest::Approx(0.0));
    // S everything: sensitivity 1, specificity 0
    const ConfusionMatrix s_all{4, 5, 0, 0};
    CHECK(sensitivity(s_all) == 1.0);
    CHECK(specificity(s_all) == 0.0);
}

TEST_CASE("surface extraction: single voxel, solid cube, empty mask") {
    MaskVolume single = empty_mask(5, 5, 5);
    single.at(2, 2, 2) = 1;
    CHECK(surface_extract(single).count(1) == 1);
    CHECK(surface_extract(single).at(2, 2, 2) == 1);

    MaskVolume cube = empty_mask(5, 5, 5);
    for (int z = 1; z <= 3; ++z)
        for (int y = 1; y <= 3; ++y)
            for (int x = 1; x <= 3; ++x) cube.at(x, y, z) = 1;
    const MaskVolume shell = surface_extract(cube);
    CHECK(shell.count(1) == 26);  // all but the center
    CHECK(shell.at(2, 2, 2) == 0);

    CHECK(surface_extract(empty_mask(4, 4, 4)).count(1) == 0);

    // volume border counts as background: a full volume is all surface... not
    // quite - interior of a 3x3x3 full volume still touches the border
    MaskVolume full = empty_mask(3, 3, 3);
    std::fill(full.values.begin(), full.values.end(), 1);
    CHECK(surface_extract(full).count(1) == 26);
}

TEST_CASE("distance transform: Pythagorean distances from one voxel") {
    MaskVolume m = empty_mask(8, 8, 4);
    m.at(0, 0, 0) = 1;
    const DistanceField f = distance_transform(m, {1, 1, 1});
    CHECK(f.at(0, 0, 0) == 0.0);
    CHECK(f.at(3, 4, 0) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(f.at(2, 2, 1) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("distance transform: interior of a solid block grows inward") {
    MaskVolume m = empty_mask(9, 9, 5);
    std::fill(m.values.begin(), m.values.end(), 1);
    const DistanceField f = distance_transform(m, {1, 1, 1});
    // surface is the outer shell; the center is 2 away from the z faces
    CHECK(f.at(4, 4, 2) == doctest::Approx(2.0));
    CHECK(f.at(1, 4, 2) == doctest::Approx(1.0));
    CHECK(f.at(0, 4, 2) == 0.0);
}

TEST_CASE("distance transform matches brute force on random masks with spacing") {
    Rng rng(7);
    for (int trial = 0; trial < 8; ++trial) {
        const std::array<double, 3> sp{0.5 + rng.uniform(), 0.5 + rng.uniform(),
                                       0.5 + 2.0 * rng.uniform()};
        const auto m = oracle::random_mask(rng, 16, 16, 4, sp, 0.1);
        const DistanceField f = distance_transform(m, sp);
        const MaskVolume surf = surface_extract(m);
        const auto brute = oracle::squared_edt(surf.values, 16, 16, 4, sp);
        for (size_t i = 0; i < brute.size(); ++i)
            CHECK(f.mm[i] == doctest::Approx(std::sqrt(brute[i])).epsilon(1e-9));
    }
}

TEST_CASE("distance transform rejects empty masks") {
    CHECK_THROWS_AS(distance_transform(empty_mask(4, 4, 1), {1, 1, 1}), InvalidArgument);
}

TEST_CASE("mean surface distance: identical, offset voxels, brute force") {
    MaskVolume a = empty_mask(12, 12, 1);
    a.at(2, 2, 0) = 1;
    MaskVolume b = empty_mask(12, 12, 1);
    b.at(5, 2, 0) = 1;  // 3 pixels apart in x
    CHECK(mean_surface_distance(a, a, {1, 1, 1}) == 0.0);
    CHECK(mean_surface_distance(a, b, {1, 1, 1}) == doctest::Approx(3.0));

    Rng rng(8);
    for (int trial = 0; trial < 6; ++trial) {
        const auto s = oracle::random_mask(rng, 10, 10, 3, {1, 1, 1}, 0.15);
        const auto gt = oracle::random_mask(rng, 10, 10, 3, {1, 1, 1}, 0.15);
        CHECK(mean_surface_distance(s, gt, {1, 1, 1}) ==
              doctest::Approx(oracle::msd(s, gt, {1, 1, 1})).epsilon(1e-9));
        const double sym = mean_surface_distance_symmetric(s, gt, {1, 1, 1});
        CHECK(sym == doctest::Approx(0.5 * (oracle::msd(s, gt, {1, 1, 1}) +
                                            oracle::msd(gt, s, {1, 1, 1})))
                         .epsilon(1e-9));
    }
}

TEST_CASE("hausdorff: hand case and symmetry") {
    MaskVolume s = empty_mask(8, 8, 1);
    s.at(0, 0, 0) = 1;
    MaskVolume gt = empty_mask(8, 8, 1);
    gt.at(0, 0, 0) = 1;
    gt.at(0, 4, 0) = 1;
    CHECK(hausdorff(s, s, {1, 1, 1}) == 0.0);
    CHECK(hausdorff(s, gt, {1, 1, 1}) == doctest::Approx(4.0));

    Rng rng(9);
    for (int trial = 0; trial < 6; ++trial) {
        const auto a = oracle::random_mask(rng, 9, 9, 2, {1, 1, 2}, 0.2);
        const auto b = oracle::random_mask(rng, 9, 9, 2, {1, 1, 2}, 0.2);
        CHECK(hausdorff(a, b, {1, 1, 2}) == hausdorff(b, a, {1, 1, 2}));
        CHECK(hausdorff(a, b, {1, 1, 2}) ==
              doctest::Approx(oracle::hausdorff(a, b, {1, 1, 2})).epsilon(1e-9));
    }
}

TEST_CASE("gce: identical masks, 4x4 brute force, symmetry") {
    Rng rng(10);
    const auto m = oracle::random_mask(rng, 4, 4, 1, {1, 1, 1}, 0.4);
    CHECK(gce(m, m) == 0.0);

    for (int trial = 0; trial < 10; ++trial) {
        const auto s = oracle::random_mask(rng, 4, 4, 1, {1, 1, 1}, 0.5);
        const auto gt = oracle::random_mask(rng, 4, 4, 1, {1, 1, 1}, 0.5);
        CHECK(gce(s, gt) == doctest::Approx(oracle::gce(s, gt)).epsilon(1e-12));
        CHECK(gce(s, gt) == gce(gt, s));
    }
}

TEST_CASE("evaluate_all: identity tuple and dimension checks") {
    Rng rng(12);
    const auto m = oracle::random_mask(rng, 10, 10, 3, {1, 1, 1}, 0.25);
    const MetricReport r = evaluate_all(m, m, {1, 1, 1});
    CHECK(r.dc == 1.0);
    CHECK(r.jaccard == 1.0);
    CHECK(r.vs == 1.0);
    CHECK(r.sensitivity == 1.0);
    CHECK(r.specificity == 1.0);
    CHECK(r.os_pct == 0.0);
    CHECK(r.us_pct == 0.0);
    CHECK(r.accuracy_pct == 100.0);
    CHECK(r.mcc == 1.0);
    CHECK(r.msd_mm == 0.0);
    CHECK(r.hd_mm == 0.0);
    CHECK(r.gce == 0.0);
    CHECK(r.convention_flags.empty());

    CHECK_THROWS_AS(evaluate_all(m, empty_mask(9, 10, 3), {1, 1, 1}), InvalidArgument);
}

TEST_CASE("metrics are invariant under joint translation inside the same volume") {
    Rng rng(13);
    // masks confined to a 6x6x2 corner of a 12x12x4 volume, then shifted
    auto small_s = oracle::random_mask(rng, 6, 6, 2, {1, 1, 1}, 0.3);
    auto small_gt = oracle::random_mask(rng, 6, 6, 2, {1, 1, 1}, 0.3);
    const auto s0 = translated(small_s, 0, 0, 0, 12, 12, 4);
    const auto gt0 = translated(small_gt, 0, 0, 0, 12, 12, 4);
    const auto s1 = translated(small_s, 3, 2, 1, 12, 12, 4);
    const auto gt1 = translated(small_gt, 3, 2, 1, 12, 12, 4);

    const MetricReport r0 = evaluate_all(s0, gt0, {1, 1, 1});
    const MetricReport r1 = evaluate_all(s1, gt1, {1, 1, 1});
    const auto v0 = metric_values(r0);
    const auto v1 = metric_values(r1);
    for (size_t i = 0; i < v0.size(); ++i) CHECK(v0[i] == doctest::Approx(v1[i]).epsilon(1e-12));
}

TEST_CASE("report emitters produce rows plus mean/sd summary") {
    Rng rng(14);
    std::vector<MetricReport> reports;
    std::vector<std::string> ids;
    for (int i = 0; i < 3; ++i) {
        const auto s = oracle::random_mask(rng, 8, 8, 2, {1, 1, 1}, 0.3);
        const auto gt = oracle::random_mask(rng, 8, 8, 2, {1, 1, 1}, 0.3);
        reports.push_back(evaluate_all(s, gt, {1, 1, 1}));
        ids.push_back("v" + std::to_string(i));
    }
    const std::string table = report_table(ids, reports);
    CHECK(table.find("mean") != std::string::npos);
    CHECK(table.find("sd") != std::string::npos);
    const std::string csv = report_csv(ids, reports);
    CHECK(csv.find("volume,DC,") == 0);

    const MetricSummary sum = summarize(reports);
    const auto v0 = metric_values(reports[0]);
    const auto v1 = metric_values(reports[1]);
    const auto v2 = metric_values(reports[2]);
    CHECK(sum.mean[0] == doctest::Approx((v0[0] + v1[0] + v2[0]) / 3.0));
}
