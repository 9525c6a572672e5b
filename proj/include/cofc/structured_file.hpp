#pragma once

#include <json.hpp>

#include <string>

namespace cofc {

/// Reads a TOML or JSON document into a JSON value. JSON is selected by a
/// `.json` extension; everything else is parsed as TOML.
nlohmann::json load_structured_file(const std::string& path);
nlohmann::json parse_toml(const std::string& text);

}  // namespace cofc
