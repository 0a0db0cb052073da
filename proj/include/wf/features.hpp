#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wf/image.hpp"
#include "wf/volume.hpp"

namespace wf {

/// A detected keypoint lifted to 3D, kept forever as a global anchor.
struct Feature {
    Vec3 canonical_pos = Vec3::Zero();  // in the canonical frame
    Vec3 world_pos = Vec3::Zero();      // at detection time
    Vec2 pixel = Vec2::Zero();          // detection pixel, full resolution
    double scale = 0;
    double orientation = 0;
    std::array<float, 128> descriptor{};
    int frame_id = -1;
};

struct Keypoint {
    Vec2 pixel;        // full-resolution coordinates
    int octave = 0;
    Vec2 octave_pixel; // coordinates within the octave image
    double scale = 0;  // sigma in full-resolution pixels
    double orientation = 0;
    float response = 0;
};

struct FeatureParams {
    int octaves = 4;
    int dog_levels = 3;
    double sigma0 = 1.6;
    double contrast_threshold = 0.01;
    double edge_ratio = 10.0;
    int max_keypoints = 150;
    int max_orientations = 2;
    double orientation_peak_ratio = 0.8;
    // matching / pruning
    int max_candidates = 128;
    int keep_best = 64;
    double tau_descriptor = 0.7;
    double tau_pixels = 48.0;
    double tau_3d = 0.10;
};

struct DogPyramid {
    int octaves = 0;
    int dog_levels = 0;
    double sigma0 = 0;
    // per octave: gaussian levels (dog_levels + 1) and DoG levels
    std::vector<std::vector<GrayImage>> gauss;
    std::vector<std::vector<GrayImage>> dog;
};

DogPyramid build_pyramid(const GrayImage& gray, const FeatureParams& params = {});

/// Scale-space extrema with a valid depth, up to 2 dominant orientations each,
/// capped at max_keypoints by |DoG| response.
std::vector<Keypoint> detect_keypoints(const DogPyramid& pyramid, const DepthImage& depth,
                                       const FeatureParams& params = {});

/// 4x4x8 gradient-histogram descriptors (rotated, clamped at 0.2, renormalized).
/// Keypoints whose window leaves the image are dropped.
std::vector<Feature> extract_descriptors(const std::vector<Keypoint>& keypoints,
                                         const DogPyramid& pyramid,
                                         const FeatureParams& params = {});

struct FeatureMatch {
    int source_id = -1;  // index into the history store
    int target_id = -1;  // index into the current frame's features
    double distance = 0;
};

/// Append-only global feature history.
class FeatureStore {
public:
    int add(const Feature& f) {
        features_.push_back(f);
        return int(features_.size()) - 1;
    }
    const Feature& operator[](int i) const { return features_[i]; }
    int size() const { return int(features_.size()); }
    const std::vector<Feature>& all() const { return features_; }
    std::vector<int> frame_ids() const;

    void save(const std::string& path) const;
    static FeatureStore load(const std::string& path);

private:
    std::vector<Feature> features_;
};

/// Mutual-best matching of the current frame against one past frame,
/// followed by the cap-sort-prune cascade. history_world_fn maps a stored
/// feature id to its predicted current world position (canonical position
/// pushed through the current deformation field).
std::vector<FeatureMatch> match_frame_pair(
    const std::vector<Feature>& current, const FeatureStore& store,
    const std::vector<int>& history_ids, const std::vector<Vec3>& history_predicted_world,
    const Intrinsics& intrinsics, const FeatureParams& params);

/// Matches against every past frame in the store.
std::vector<FeatureMatch> match_features(const std::vector<Feature>& current,
                                         const FeatureStore& store,
                                         const std::vector<Vec3>& predicted_world,
                                         const Intrinsics& intrinsics,
                                         const FeatureParams& params);

double descriptor_distance(const std::array<float, 128>& a, const std::array<float, 128>& b);

/// Keypoint overlay for debugging (PPM).
void write_keypoint_overlay(const GrayImage& gray, const std::vector<Keypoint>& keypoints,
                            const std::string& path);

}  // namespace wf
