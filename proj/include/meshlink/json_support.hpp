#ifndef MESHLINK_JSON_SUPPORT_HPP
#define MESHLINK_JSON_SUPPORT_HPP

#include "meshlink/error.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace meshlink {

/// Every document produced here keeps insertion order so exports are stable and readable.
using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

namespace json_detail {

inline std::string join_path(std::string_view parent, std::string_view key)
{
    if (parent.empty())
    {
        return std::string(key);
    }
    return std::string(parent) + "." + std::string(key);
}

} // namespace json_detail

/// Reads `obj[key]` as T, raising a ValidationError that names `path.key` on a type mismatch.
template <typename T>
T get_field(const Json& obj, std::string_view key, std::string_view path = {})
{
    const auto field = json_detail::join_path(path, key);
    if (!obj.is_object() || !obj.contains(key))
    {
        throw ValidationError("missing required field", field);
    }
    try
    {
        return obj.at(key).get<T>();
    }
    catch (const nlohmann::json::exception&)
    {
        throw ValidationError("wrong type (got " + std::string(obj.at(key).type_name()) + ")", field);
    }
}

/// As get_field, but returns `fallback` when the key is absent or null.
template <typename T>
T get_field_or(const Json& obj, std::string_view key, T fallback, std::string_view path = {})
{
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null())
    {
        return fallback;
    }
    return get_field<T>(obj, key, path);
}

inline Json parse_json_text(std::string_view text, std::string_view what)
{
    try
    {
        return Json::parse(text);
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ValidationError(std::string("malformed JSON in ") + std::string(what) + ": " + e.what());
    }
}

} // namespace meshlink

#endif // MESHLINK_JSON_SUPPORT_HPP
