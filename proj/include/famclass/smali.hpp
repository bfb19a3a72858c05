#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "famclass/common.hpp"

// Smali (disassembled Dalvik) method parsing. One file per class; methods
// are delimited by `.method` / `.end method`. We only interpret invoke
// statements; everything else in a method body is opaque.

namespace famclass {

// Canonical API identifier: `Lpkg/Class;->method(Args)Ret`.
using ApiId = std::string;

struct MethodInvocations {
  std::string method_id;          // owning class + method signature
  std::vector<ApiId> invocations; // textual order within the body
};

// Grammar gate for emitted ApiIds: L[\w/$]+;->[\w<>$]+\(.*\).*
inline bool is_canonical_api_id(std::string_view s) {
  if (s.size() < 2 || s[0] != 'L') return false;
  std::size_t semi = s.find(';');
  if (semi == std::string_view::npos || semi == 1) return false;
  for (std::size_t i = 1; i < semi; ++i) {
    char c = s[i];
    bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                (c >= '0' && c <= '9') || c == '_' || c == '/' || c == '$';
    if (!word) return false;
  }
  if (s.substr(semi + 1, 2) != "->") return false;
  std::size_t open = s.find('(', semi + 3);
  if (open == std::string_view::npos || open == semi + 3) return false;
  for (std::size_t i = semi + 3; i < open; ++i) {
    char c = s[i];
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
              (c >= '0' && c <= '9') || c == '_' || c == '$' || c == '<' || c == '>';
    if (!ok) return false;
  }
  return s.find(')', open + 1) != std::string_view::npos;
}

namespace detail {

inline bool is_invoke_opcode(std::string_view op) {
  // The recognized forms and their /range variants; nothing else counts.
  static constexpr std::string_view kinds[] = {
      "invoke-virtual", "invoke-super", "invoke-direct", "invoke-static",
      "invoke-interface"};
  for (std::string_view k : kinds) {
    if (op == k) return true;
    if (op.size() == k.size() + 6 && op.substr(0, k.size()) == k &&
        op.substr(k.size()) == "/range")
      return true;
  }
  return false;
}

// `invoke-kind {v0, v1}, Lpkg/Class;->name(Desc)Ret` -> target, or nullopt.
inline std::optional<ApiId> parse_invoke_line(std::string_view line) {
  std::string_view s = trim(line);
  std::size_t sp = s.find_first_of(" \t");
  if (sp == std::string_view::npos) return std::nullopt;
  if (!is_invoke_opcode(s.substr(0, sp))) return std::nullopt;
  std::size_t brace = s.find("},", sp);
  if (brace == std::string_view::npos) return std::nullopt;
  std::string_view target = trim(s.substr(brace + 2));
  // Cut trailing junk (comments); descriptors never contain whitespace.
  std::size_t end = target.find_first_of(" \t");
  if (end != std::string_view::npos) target = target.substr(0, end);
  if (!is_canonical_api_id(target)) return std::nullopt;
  return ApiId(target);
}

}  // namespace detail

// Parses the text of one .smali file. `origin` is used only for log lines.
// A truncated trailing method (missing `.end method`) keeps the invocations
// parsed so far.
inline std::vector<MethodInvocations> parse_smali_text(std::string_view text,
                                                       std::string_view origin = "") {
  std::vector<MethodInvocations> methods;
  std::string class_name;
  const MethodInvocations* open = nullptr;
  std::size_t pos = 0;
  bool truncated = false;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    std::string_view t = trim(line);
    if (t.rfind(".class", 0) == 0) {
      // `.class <flags...> Lcom/foo/Bar;` - descriptor is the last token.
      std::size_t last_sp = t.find_last_of(" \t");
      if (last_sp != std::string_view::npos) {
        std::string_view desc = trim(t.substr(last_sp + 1));
        if (!desc.empty() && desc.front() == 'L' && desc.back() == ';')
          class_name = std::string(desc);
      }
    } else if (t.rfind(".method", 0) == 0) {
      std::size_t last_sp = t.find_last_of(" \t");
      std::string_view sig = last_sp == std::string_view::npos
                                 ? std::string_view{}
                                 : trim(t.substr(last_sp + 1));
      MethodInvocations m;
      m.method_id = class_name + "->" + std::string(sig);
      methods.push_back(std::move(m));
      open = &methods.back();
    } else if (t.rfind(".end method", 0) == 0) {
      open = nullptr;
    } else if (open != nullptr) {
      if (auto api = detail::parse_invoke_line(t))
        methods.back().invocations.push_back(std::move(*api));
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  if (open != nullptr) truncated = true;
  if (truncated)
    log_warn("truncated method block in " + std::string(origin) +
             "; keeping invocations parsed so far");
  return methods;
}

// Parses every `.smali` file under `root` (any nesting). Files are visited
// in sorted path order so output is independent of directory enumeration
// order. Unreadable files are skipped with a warning.
inline std::vector<MethodInvocations> parse_smali_dir(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<MethodInvocations> out;
  if (!fs::exists(root)) return out;
  std::vector<fs::path> files;
  std::error_code ec;
  for (fs::recursive_directory_iterator it(root, ec), end; it != end; it.increment(ec)) {
    if (ec) break;
    if (it->is_regular_file() && it->path().extension() == ".smali")
      files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& p : files) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
      log_warn("unreadable smali file, skipping: " + p.string());
      continue;
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
      log_warn("read error on smali file, skipping: " + p.string());
      continue;
    }
    auto methods = parse_smali_text(text, p.string());
    out.insert(out.end(), std::make_move_iterator(methods.begin()),
               std::make_move_iterator(methods.end()));
  }
  return out;
}

}  // namespace famclass
