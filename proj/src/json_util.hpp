#pragma once

// Strict accessors for hand-rolled document parsing. Every failure is a SchemaError
// carrying the JSON-pointer-ish path of the offending value.

#include <cmath>
#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "airisk/error.hpp"

namespace airisk::detail {

using nlohmann::json;

inline std::string where(const std::string& path) { return path.empty() ? "/" : path; }

inline const json& require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaError(where(path) + ": expected object");
    return j;
}

inline const json& require_array(const json& j, const std::string& path) {
    if (!j.is_array()) throw SchemaError(where(path) + ": expected array");
    return j;
}

/// Rejects keys outside `allowed`.
inline void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                                const std::string& path) {
    for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) throw SchemaError(where(path) + ": unknown field '" + key + "'");
    }
}

inline const json& field(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(where(path) + ": missing field '" + key + "'");
    return *it;
}

inline std::string get_string(const json& obj, const char* key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_string()) throw SchemaError(path + "/" + key + ": expected string");
    return v.get<std::string>();
}

inline std::string get_string_or(const json& obj, const char* key, const std::string& path,
                                 std::string fallback) {
    if (!obj.contains(key)) return fallback;
    return get_string(obj, key, path);
}

inline double get_number(const json& obj, const char* key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_number()) throw SchemaError(path + "/" + key + ": expected number");
    double d = v.get<double>();
    if (!std::isfinite(d)) throw SchemaError(path + "/" + key + ": expected finite number");
    return d;
}

inline bool get_bool_or(const json& obj, const char* key, const std::string& path, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_boolean()) throw SchemaError(path + "/" + key + ": expected boolean");
    return v.get<bool>();
}

}  // namespace airisk::detail
