#include "wf/config.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

namespace wf {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = val;
    }
    return kv;
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_key_values(ss.str());
}

std::string kv_string(const std::map<std::string, std::string>& kv, const std::string& key,
                      const std::string& fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key,
                 double fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw std::runtime_error("invalid number for key '" + key + "': " + it->second);
    }
}

int kv_int(const std::map<std::string, std::string>& kv, const std::string& key, int fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw std::runtime_error("invalid integer for key '" + key + "': " + it->second);
    }
}

Vec3 kv_vec3(const std::map<std::string, std::string>& kv, const std::string& key,
             const Vec3& fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::istringstream is(it->second);
    Vec3 v;
    if (!(is >> v.x() >> v.y() >> v.z()))
        throw std::runtime_error("invalid vector for key '" + key + "': " + it->second);
    return v;
}

ReconstructionConfig ReconstructionConfig::load(const std::string& path) {
    return from_key_values(read_key_values(path));
}

ReconstructionConfig ReconstructionConfig::from_key_values(
    const std::map<std::string, std::string>& kv) {
    ReconstructionConfig c;
    const Vec3 dims = kv_vec3(kv, "volume.dims", c.volume_dims.cast<double>());
    c.volume_dims = Vec3i(int(dims.x()), int(dims.y()), int(dims.z()));
    c.voxel_size = kv_double(kv, "volume.voxel_size", c.voxel_size);
    c.volume_origin = kv_vec3(kv, "volume.origin", c.volume_origin);

    c.solver.w_d = kv_double(kv, "solver.w_dense", c.solver.w_d);
    c.solver.w_s = kv_double(kv, "solver.w_sparse", c.solver.w_s);
    c.solver.w_r = kv_double(kv, "solver.w_reg", c.solver.w_r);
    c.solver.flip_flop_iters = kv_int(kv, "solver.flip_flop_iters", c.solver.flip_flop_iters);
    c.solver.pcg_tol = kv_double(kv, "solver.pcg_tol", c.solver.pcg_tol);
    c.solver.pcg_max_iters = kv_int(kv, "solver.pcg_max_iters", c.solver.pcg_max_iters);
    c.solver.levels = kv_int(kv, "solver.levels", c.solver.levels);

    c.correspond.eps_d = kv_double(kv, "correspond.eps_d", c.correspond.eps_d);
    c.correspond.eps_n = kv_double(kv, "correspond.eps_n", c.correspond.eps_n);
    c.correspond.eps_v = kv_double(kv, "correspond.eps_v", c.correspond.eps_v);

    c.features.max_keypoints = kv_int(kv, "features.max_keypoints", c.features.max_keypoints);
    c.features.tau_descriptor = kv_double(kv, "features.tau_descriptor", c.features.tau_descriptor);
    c.features.tau_pixels = kv_double(kv, "features.tau_pixels", c.features.tau_pixels);
    c.features.tau_3d = kv_double(kv, "features.tau_3d", c.features.tau_3d);

    c.fusion.k_min = kv_int(kv, "fusion.k_min", c.fusion.k_min);
    c.fusion.w_max = kv_double(kv, "fusion.w_max", c.fusion.w_max);
    c.fusion.sample_weight = kv_double(kv, "fusion.sample_weight", c.fusion.sample_weight);

    c.icp.max_iters = kv_int(kv, "icp.max_iters", c.icp.max_iters);
    c.icp.rel_tol = kv_double(kv, "icp.rel_tol", c.icp.rel_tol);
    c.icp.min_correspondences =
        kv_int(kv, "icp.min_correspondences", c.icp.min_correspondences);

    c.reassociations = kv_int(kv, "pipeline.reassociations", c.reassociations);
    c.frame_skip = kv_int(kv, "pipeline.frame_skip", c.frame_skip);
    c.max_frames = kv_int(kv, "pipeline.max_frames", c.max_frames);
    c.use_features = kv_int(kv, "pipeline.use_features", c.use_features ? 1 : 0) != 0;
    c.estimate_pose = kv_int(kv, "pipeline.estimate_pose", c.estimate_pose ? 1 : 0) != 0;

    if (c.frame_skip < 1) throw std::runtime_error("pipeline.frame_skip must be >= 1");
    if (c.solver.levels < 1) throw std::runtime_error("solver.levels must be >= 1");
    return c;
}

void ReconstructionConfig::print(std::ostream& os) const {
    os << "volume.dims=" << volume_dims.x() << ' ' << volume_dims.y() << ' ' << volume_dims.z()
       << '\n'
       << "volume.voxel_size=" << voxel_size << '\n'
       << "volume.origin=" << volume_origin.x() << ' ' << volume_origin.y() << ' '
       << volume_origin.z() << '\n'
       << "solver.w_dense=" << solver.w_d << '\n'
       << "solver.w_sparse=" << solver.w_s << '\n'
       << "solver.w_reg=" << solver.w_r << '\n'
       << "solver.flip_flop_iters=" << solver.flip_flop_iters << '\n'
       << "solver.pcg_tol=" << solver.pcg_tol << '\n'
       << "solver.pcg_max_iters=" << solver.pcg_max_iters << '\n'
       << "solver.levels=" << solver.levels << '\n'
       << "correspond.eps_d=" << correspond.eps_d << '\n'
       << "correspond.eps_n=" << correspond.eps_n << '\n'
       << "correspond.eps_v=" << correspond.eps_v << '\n'
       << "features.max_keypoints=" << features.max_keypoints << '\n'
       << "features.tau_descriptor=" << features.tau_descriptor << '\n'
       << "features.tau_pixels=" << features.tau_pixels << '\n'
       << "features.tau_3d=" << features.tau_3d << '\n'
       << "fusion.k_min=" << fusion.k_min << '\n'
       << "fusion.w_max=" << fusion.w_max << '\n'
       << "fusion.sample_weight=" << fusion.sample_weight << '\n'
       << "icp.max_iters=" << icp.max_iters << '\n'
       << "icp.rel_tol=" << icp.rel_tol << '\n'
       << "icp.min_correspondences=" << icp.min_correspondences << '\n'
       << "pipeline.reassociations=" << reassociations << '\n'
       << "pipeline.frame_skip=" << frame_skip << '\n'
       << "pipeline.max_frames=" << max_frames << '\n'
       << "pipeline.use_features=" << (use_features ? 1 : 0) << '\n'
       << "pipeline.estimate_pose=" << (estimate_pose ? 1 : 0) << '\n';
}

}  // namespace wf
