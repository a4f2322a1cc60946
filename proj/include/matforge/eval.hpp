#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matforge/graph.hpp"
#include "matforge/image.hpp"

namespace matforge {

/// The four PBR maps a graph evaluates to. albedo/normal are rgb, the rest
/// grayscale; normals are tangent-space, encoded 0.5*n + 0.5 and unit length.
struct MaterialMaps {
    ImagePlane albedo;
    ImagePlane normal;
    ImagePlane roughness;
    ImagePlane metallic;

    int res() const { return albedo.res; }
    const ImagePlane& map(MapRole role) const {
        switch (role) {
        case MapRole::Albedo: return albedo;
        case MapRole::Normal: return normal;
        case MapRole::Roughness: return roughness;
        default: return metallic;
        }
    }
};

/// Point light collocated with the camera above the plane center.
struct RenderConfig {
    double light_intensity = 3.0;
    double camera_distance = 1.0; // in plane-size units
    bool orthographic = false;
    double gamma = 2.2;
};

/// Evaluate one operator. `seed` is the graph-level seed; noise operators mix
/// in their own `seed` parameter so results are independent of node ids.
/// (phase_u, phase_v) shift generator uv coordinates; used to test tileability.
std::vector<ImagePlane> eval_node(const OpSchema& schema, const std::vector<ParamValue>& params,
                                  const std::vector<ImagePlane>& inputs, int resolution,
                                  uint64_t seed, double phase_u = 0.0, double phase_v = 0.0);

/// Evaluate the reachable part of a graph in topological order and collect the
/// four maps. Missing roles get defaults: 0.5 gray albedo, flat normal,
/// roughness 0.5, metallic 0.
MaterialMaps evaluate(const NodeGraph& g, const OpLibrary& lib, int resolution, uint64_t seed);

/// GGX microfacet shading under a point light collocated with the camera;
/// gamma-encoded rgb in [0,1].
ImagePlane render(const MaterialMaps& maps, const RenderConfig& cfg);

/// Write <stem>_albedo.png, _normal.png, _roughness.png, _metallic.png.
/// Albedo is gamma-encoded; data maps are stored linearly.
void save_material_maps(const std::string& stem, const MaterialMaps& maps);

} // namespace matforge
