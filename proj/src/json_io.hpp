/* Copyright 2026 The osgate Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

// Shared helpers for the JSON artifacts. Internal.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "osgate/error.hpp"

namespace osgate::detail {

using json = nlohmann::json;

// Keys come out sorted (nlohmann::json objects are std::map backed) and
// doubles use the shortest round-trip representation, so equal content gives
// equal bytes.
inline void write_json_file(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return json::parse(buffer.str());
  } catch (const json::exception& e) {
    throw FormatError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

// Accepts "1.x" for any minor version; anything else is a format error.
inline void check_format_version(const json& doc, const std::string& what) {
  if (!doc.contains("format_version") || !doc["format_version"].is_string()) {
    throw FormatError(what + ": missing format_version");
  }
  const auto version = doc["format_version"].get<std::string>();
  if (version != "1" && version.rfind("1.", 0) != 0) {
    throw FormatError(what + ": unsupported format_version " + version);
  }
  // Readers know no extensions; a writer that needs one understood must list it.
  if (doc.contains("required_extensions")) {
    const auto& ext = doc["required_extensions"];
    if (!ext.is_array()) throw FormatError(what + ": required_extensions must be an array");
    if (!ext.empty()) {
      throw FormatError(what + ": unsupported required extension " + ext[0].dump());
    }
  }
}

template <typename T>
T require(const json& doc, const char* key, const std::string& what) {
  if (!doc.contains(key)) throw FormatError(what + ": missing field '" + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(what + ": bad field '" + key + "': " + e.what());
  }
}

}  // namespace osgate::detail
