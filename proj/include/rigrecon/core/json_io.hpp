#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rigrecon/core/error.hpp"

namespace rigrecon {

using Json = nlohmann::json;

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoFailure, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoFailure, "cannot write " + path.string());
  out << text;
  require(out.good(), ErrorCode::IoFailure, "write failed for " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const Json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

// Field lookup that turns nlohmann's type errors into ParseError.
template <typename T>
T json_get(const Json& doc, const char* key) {
  if (!doc.contains(key)) fail(ErrorCode::ParseError, std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const Json::exception& e) {
    fail(ErrorCode::ParseError, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace rigrecon
