#include "cofc/structured_file.hpp"

#include "cofc/error.hpp"

#include <toml.hpp>

#include <fstream>
#include <sstream>

namespace cofc {

nlohmann::json parse_toml(const std::string& text) {
  toml::table table;
  try {
    table = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw Error(ErrorCode::Config, std::string("TOML parse error: ") + std::string(e.description()));
  }
  std::ostringstream json_text;
  json_text << toml::json_formatter{table};
  return nlohmann::json::parse(json_text.str());
}

nlohmann::json load_structured_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const bool is_json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  if (!is_json) return parse_toml(buffer.str());
  try {
    return nlohmann::json::parse(buffer.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Config, std::string("JSON parse error: ") + e.what());
  }
}

}  // namespace cofc
