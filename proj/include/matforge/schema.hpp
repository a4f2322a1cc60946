#pragma once

#include <map>
#include <string>
#include <vector>

#include "matforge/util.hpp"

namespace matforge {

enum class ParamKind { FloatScalar, FloatVector, Integer, Enumeration };

enum class MapRole { Albedo = 0, Normal = 1, Roughness = 2, Metallic = 3 };

inline const char* role_name(MapRole r) {
    switch (r) {
        case MapRole::Albedo: return "albedo";
        case MapRole::Normal: return "normal";
        case MapRole::Roughness: return "roughness";
        case MapRole::Metallic: return "metallic";
    }
    return "?";
}

constexpr int kNumRoles = 4;

struct ParamSchema {
    std::string name;
    ParamKind kind = ParamKind::FloatScalar;
    int length = 1; // scalar elements; > 1 only for FloatVector
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> defaults;         // per element, the augmentation mean fallback
    std::vector<std::string> enum_values; // Enumeration only
    bool optimizable = false;

    int scalar_count() const { return kind == ParamKind::FloatVector ? length : 1; }

    /// Distinct representable values for Integer/Enumeration kinds.
    int cardinality() const {
        if (kind == ParamKind::Enumeration) return int(enum_values.size());
        if (kind == ParamKind::Integer) return int(hi - lo) + 1;
        return 0;
    }

    bool is_discrete() const { return kind == ParamKind::Integer || kind == ParamKind::Enumeration; }
};

struct OpSchema {
    int type_id = -1;
    std::string name;
    int n_inputs = 0;
    int n_outputs = 1;
    std::vector<ParamSchema> params;
    bool is_generator = false;
    bool is_output = false;
    bool is_switch = false;
    MapRole output_role = MapRole::Albedo; // meaningful only when is_output

    int total_slots() const { return n_inputs + n_outputs; }
    int scalar_param_count() const {
        int n = 0;
        for (const auto& p : params) n += p.scalar_count();
        return n;
    }
};

/// Fixed vocabulary of node operation types. type_id values are dense.
class OpLibrary {
public:
    explicit OpLibrary(std::vector<OpSchema> schemas);

    const OpSchema& schema(int type_id) const {
        if (type_id < 0 || type_id >= int(schemas_.size()))
            throw Error("unknown-type", "type_id out of range: " + std::to_string(type_id));
        return schemas_[size_t(type_id)];
    }
    const OpSchema* find(const std::string& name) const {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? nullptr : &schemas_[size_t(it->second)];
    }
    const OpSchema& by_name(const std::string& name) const {
        const OpSchema* s = find(name);
        if (!s) throw Error("unknown-type", "unknown op type: " + name);
        return *s;
    }
    int size() const { return int(schemas_.size()); }
    const std::vector<OpSchema>& schemas() const { return schemas_; }

    /// The output node type for a material-map role.
    int output_type(MapRole role) const { return output_types_[int(role)]; }

    /// The built-in operator set used across the toolkit.
    static const OpLibrary& builtin();

private:
    std::vector<OpSchema> schemas_;
    std::map<std::string, int> by_name_;
    int output_types_[kNumRoles] = {-1, -1, -1, -1};
};

} // namespace matforge
