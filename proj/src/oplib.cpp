#include "matforge/schema.hpp"

namespace matforge {

OpLibrary::OpLibrary(std::vector<OpSchema> schemas) : schemas_(std::move(schemas)) {
    for (size_t i = 0; i < schemas_.size(); ++i) {
        OpSchema& s = schemas_[i];
        s.type_id = int(i);
        if (!by_name_.emplace(s.name, int(i)).second)
            throw Error("library-invalid", "duplicate op name: " + s.name);
        if (s.is_generator != (s.n_inputs == 0) && !s.is_output)
            throw Error("library-invalid", "is_generator must match n_inputs==0: " + s.name);
        if (s.n_outputs < 1 && !s.is_output)
            throw Error("library-invalid", "non-output op needs an output slot: " + s.name);
        for (const auto& p : s.params) {
            if (!(p.lo < p.hi) && !(p.kind == ParamKind::Enumeration))
                throw Error("library-invalid", "param range must satisfy lo < hi: " + s.name + "." + p.name);
            if (p.is_discrete() && p.cardinality() > 128)
                throw Error("library-invalid", "discrete cardinality exceeds 128 bins: " + s.name + "." + p.name);
            if (int(p.defaults.size()) != p.scalar_count())
                throw Error("library-invalid", "default arity mismatch: " + s.name + "." + p.name);
            for (double d : p.defaults)
                if (!(d >= p.lo && d <= p.hi))
                    throw Error("library-invalid", "default outside range: " + s.name + "." + p.name);
        }
        if (s.is_output) output_types_[int(s.output_role)] = int(i);
    }
}

namespace {

ParamSchema fscalar(std::string name, double lo, double hi, double def, bool opt = true) {
    ParamSchema p;
    p.name = std::move(name);
    p.kind = ParamKind::FloatScalar;
    p.lo = lo;
    p.hi = hi;
    p.defaults = {def};
    p.optimizable = opt;
    return p;
}

ParamSchema fvec3(std::string name, std::vector<double> def) {
    ParamSchema p;
    p.name = std::move(name);
    p.kind = ParamKind::FloatVector;
    p.length = 3;
    p.lo = 0.0;
    p.hi = 1.0;
    p.defaults = std::move(def);
    p.optimizable = true;
    return p;
}

ParamSchema intp(std::string name, int lo, int hi, int def) {
    ParamSchema p;
    p.name = std::move(name);
    p.kind = ParamKind::Integer;
    p.lo = lo;
    p.hi = hi;
    p.defaults = {double(def)};
    p.optimizable = false;
    return p;
}

ParamSchema enump(std::string name, std::vector<std::string> values, int def) {
    ParamSchema p;
    p.name = std::move(name);
    p.kind = ParamKind::Enumeration;
    p.enum_values = std::move(values);
    p.lo = 0;
    p.hi = double(p.enum_values.size() - 1);
    p.defaults = {double(def)};
    p.optimizable = false;
    return p;
}

OpSchema generator(std::string name, std::vector<ParamSchema> params) {
    OpSchema s;
    s.name = std::move(name);
    s.n_inputs = 0;
    s.n_outputs = 1;
    s.is_generator = true;
    s.params = std::move(params);
    return s;
}

OpSchema filter(std::string name, int n_inputs, std::vector<ParamSchema> params) {
    OpSchema s;
    s.name = std::move(name);
    s.n_inputs = n_inputs;
    s.n_outputs = 1;
    s.params = std::move(params);
    return s;
}

OpSchema switch_op(int n_branches) {
    OpSchema s;
    s.name = "switch_" + std::to_string(n_branches);
    s.n_inputs = n_branches;
    s.n_outputs = 1;
    s.is_switch = true;
    s.params = {intp("selector", 0, n_branches - 1, 0)};
    return s;
}

OpSchema output_op(MapRole role) {
    OpSchema s;
    s.name = std::string("output_") + role_name(role);
    s.n_inputs = 1;
    s.n_outputs = 0;
    s.is_output = true;
    s.output_role = role;
    return s;
}

std::vector<OpSchema> make_builtin() {
    std::vector<OpSchema> v;

    // generators
    v.push_back(generator("uniform_color", {fvec3("color", {0.5, 0.5, 0.5})}));
    v.push_back(generator("perlin_noise", {intp("scale", 1, 16, 4), intp("seed", 0, 63, 0)}));
    v.push_back(generator("fbm_noise", {intp("scale", 1, 16, 4), intp("octaves", 1, 6, 4),
                                        fscalar("gain", 0.3, 0.8, 0.5), intp("seed", 0, 63, 0)}));
    v.push_back(generator("cells", {intp("scale", 1, 16, 4), fscalar("jitter", 0.0, 1.0, 1.0),
                                    intp("seed", 0, 63, 0)}));
    v.push_back(generator("checker", {intp("tiles", 1, 16, 4)}));
    // angle snaps to 8 lattice directions so the ramp tiles exactly
    v.push_back(generator("gradient_linear", {fscalar("angle", 0.0, 6.2832, 0.0, false)}));
    v.push_back(generator("brick", {intp("rows", 1, 12, 4), intp("cols", 1, 12, 8),
                                    fscalar("mortar_width", 0.0, 0.25, 0.05)}));

    // filters
    v.push_back(filter("blend", 2,
                       {enump("mode", {"copy", "multiply", "add", "subtract", "max", "min"}, 0),
                        fscalar("opacity", 0.0, 1.0, 1.0)}));
    v.push_back(filter("levels", 1,
                       {fscalar("in_lo", 0.0, 1.0, 0.0), fscalar("in_hi", 0.0, 1.0, 1.0),
                        fscalar("gamma", 0.1, 4.0, 1.0), fscalar("out_lo", 0.0, 1.0, 0.0),
                        fscalar("out_hi", 0.0, 1.0, 1.0)}));
    v.push_back(filter("hsl_adjust", 1,
                       {fscalar("dh", -0.5, 0.5, 0.0), fscalar("ds", -1.0, 1.0, 0.0),
                        fscalar("dl", -1.0, 1.0, 0.0)}));
    v.push_back(filter("blur_gaussian", 1, {fscalar("radius", 0.0, 16.0, 2.0)}));
    v.push_back(filter("transform2d", 1,
                       {fscalar("scale_x", 0.25, 4.0, 1.0), fscalar("scale_y", 0.25, 4.0, 1.0),
                        fscalar("rotation", 0.0, 6.2832, 0.0), fscalar("offset_x", -1.0, 1.0, 0.0),
                        fscalar("offset_y", -1.0, 1.0, 0.0)}));
    v.push_back(filter("directional_warp", 2,
                       {fscalar("intensity", 0.0, 0.25, 0.05), fscalar("angle", 0.0, 6.2832, 0.0)}));
    v.push_back(filter("invert", 1, {}));
    v.push_back(filter("threshold", 1, {fscalar("level", 0.0, 1.0, 0.5)}));
    v.push_back(filter("colorize", 1, {fvec3("color_a", {0.0, 0.0, 0.0}), fvec3("color_b", {1.0, 1.0, 1.0})}));
    v.push_back(filter("grayscale", 1, {}));
    v.push_back(filter("normal_from_height", 1, {fscalar("strength", 0.0, 2.0, 0.5)}));
    v.push_back(switch_op(2));
    v.push_back(switch_op(3));
    v.push_back(switch_op(4));

    // outputs
    v.push_back(output_op(MapRole::Albedo));
    v.push_back(output_op(MapRole::Normal));
    v.push_back(output_op(MapRole::Roughness));
    v.push_back(output_op(MapRole::Metallic));

    return v;
}

} // namespace

const OpLibrary& OpLibrary::builtin() {
    static const OpLibrary lib(make_builtin());
    return lib;
}

} // namespace matforge
