#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "alert_sift/error.hpp"

namespace alert_sift::csv {

/// Quotes a field when it contains a delimiter, quote, or line break.
inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

using Record = std::vector<std::string>;

/// Reads RFC 4180 records. Quoted fields may span lines. `first_line`
/// receives the 1-based line where the record started.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  bool next(Record& record, std::size_t* first_line = nullptr) {
    record.clear();
    std::string line;
    if (!std::getline(in_, line)) return false;
    ++line_;
    if (first_line) *first_line = line_;
    std::string field;
    bool quoted = false;
    bool after_quote = false;
    for (;;) {
      for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
          if (c == '"') {
            if (i + 1 < line.size() && line[i + 1] == '"') {
              field += '"';
              ++i;
            } else {
              quoted = false;
              after_quote = true;
            }
          } else {
            field += c;
          }
        } else if (c == ',') {
          record.push_back(std::move(field));
          field.clear();
          after_quote = false;
        } else if (c == '"' && field.empty() && !after_quote) {
          quoted = true;
        } else if (c == '\r' && i + 1 == line.size()) {
          // tolerate CRLF
        } else {
          if (after_quote) throw ParseError("stray character after closing quote", line_);
          field += c;
        }
      }
      if (!quoted) break;
      if (!std::getline(in_, line)) throw ParseError("unterminated quoted field", line_);
      ++line_;
      field += '\n';
    }
    record.push_back(std::move(field));
    return true;
  }

  std::size_t line() const noexcept { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

inline std::string join(const Record& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += escape(fields[i]);
  }
  return out;
}

}  // namespace alert_sift::csv
