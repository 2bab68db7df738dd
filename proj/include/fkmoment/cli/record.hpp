#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fkmoment/cli/config.hpp"

namespace fkmoment::cli {

inline constexpr int kSchemaVersion = 1;

/// A flat, ordered result record. CSV is long-form (one field per row);
/// JSON is a single object with the same fields in the same order.
class Record {
 public:
  enum class Kind { Number, Text, Boolean };

  struct Field {
    std::string name;
    Kind kind;
    std::string text;
  };

  void add(std::string name, double v) { fields_.push_back({std::move(name), Kind::Number, format_real(v)}); }
  void add(std::string name, std::size_t v) { fields_.push_back({std::move(name), Kind::Number, std::to_string(v)}); }
  void add(std::string name, bool v) { fields_.push_back({std::move(name), Kind::Boolean, v ? "true" : "false"}); }
  void add(std::string name, std::string v) { fields_.push_back({std::move(name), Kind::Text, std::move(v)}); }
  void add(std::string name, const char* v) { add(std::move(name), std::string(v)); }

  /// Full parameter echo under the `config.` prefix.
  void add_config(const RunConfig& c) {
    for (auto& [key, value] : echo(c)) add("config." + key, value);
  }

  const std::vector<Field>& fields() const noexcept { return fields_; }

  const Field* find(const std::string& name) const {
    for (const auto& f : fields_)
      if (f.name == name) return &f;
    return nullptr;
  }

  void write(std::ostream& os, const std::string& format) const {
    if (format == "json") write_json(os);
    else write_csv(os);
  }

  void write_csv(std::ostream& os) const {
    os << "schema_version,field,value\n";
    for (const auto& f : fields_) os << kSchemaVersion << ',' << csv_quote(f.name) << ',' << csv_quote(f.text) << '\n';
  }

  void write_json(std::ostream& os) const {
    os << "{\n  \"schema_version\": " << kSchemaVersion;
    for (const auto& f : fields_) {
      os << ",\n  " << nlohmann::json(f.name).dump() << ": ";
      // Non-finite reals have no JSON literal; they are emitted as strings.
      const bool finite_number = f.kind == Kind::Number && f.text != "inf" && f.text != "-inf" && f.text != "nan";
      if (finite_number || f.kind == Kind::Boolean) os << f.text;
      else os << nlohmann::json(f.text).dump();
    }
    os << "\n}\n";
  }

  static std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + '"';
  }

 private:
  std::vector<Field> fields_;
};

/// Splits one CSV line with RFC 4180 quoting.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

/// Recovers the `config.*` echo of a CSV or JSON record.
inline void parse_record_config(const std::string& text, const std::string& source, Entries& entries) {
  const std::string prefix = "config.";
  const std::string_view head = trim(text);
  if (!head.empty() && head.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(source + ": invalid JSON record: " + e.what());
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key().rfind(prefix, 0) != 0) continue;
      std::string value = it->is_string() ? it->get<std::string>() : it->dump();
      set_entry(entries, it.key().substr(prefix.size()), std::move(value), Origin{source, 0});
    }
    return;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1) continue;  // header
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) throw ConfigError(source + ":" + std::to_string(number) + ": expected 3 CSV columns");
    if (cells[1].rfind(prefix, 0) != 0) continue;
    set_entry(entries, cells[1].substr(prefix.size()), cells[2], Origin{source, number});
  }
}

/// Loads a config file of any accepted form: key = value text, or a CSV or
/// JSON record produced by an earlier run.
inline void load_config_file(const std::string& path, Entries& entries) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const std::string_view head = trim(text);
  if ((!head.empty() && head.front() == '{') || head.rfind("schema_version,", 0) == 0) {
    parse_record_config(text, path, entries);
    return;
  }
  std::istringstream lines(text);
  parse_key_value_text(lines, path, entries);
}

}  // namespace fkmoment::cli
