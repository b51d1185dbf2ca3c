#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "thimac/model.hpp"

namespace thimac {

inline constexpr std::string_view kModelSchema = "tm-json/1";

/// Lossless JSON form of a model. Object keys are sorted; list order is
/// declaration order.
std::string export_json(const Model& model);

/// Throws Error(schema) on a missing or different "version" and
/// Error(malformed) on anything structurally wrong.
Model import_json(std::string_view text);

nlohmann::json value_to_json(const Value& v);
Value value_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const Record& r);
Record record_from_json(const nlohmann::json& j);

}  // namespace thimac
