#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "famclass/common.hpp"

// AndroidManifest.xml facts. Input is the decoded (plain-text) manifest as
// written by standard decompilers; binary AXML is out of scope.

namespace famclass {

enum class ComponentKind : int { activity = 0, service, receiver, provider };

inline const char* component_kind_name(ComponentKind k) {
  switch (k) {
    case ComponentKind::activity: return "activity";
    case ComponentKind::service: return "service";
    case ComponentKind::receiver: return "receiver";
    case ComponentKind::provider: return "provider";
  }
  return "?";
}

struct ManifestFacts {
  std::set<std::string> permissions;
  std::set<std::string> hardware;
  std::set<std::pair<ComponentKind, std::string>> components;
  std::set<std::string> intent_filters;  // action and category names

  bool operator==(const ManifestFacts&) const = default;
};

namespace xml {

// Minimal non-validating scanner, just enough for decompiler-emitted
// manifests: elements, attributes, comments, CDATA, PIs, DOCTYPE, and the
// five predefined entities plus numeric character references in attribute
// values. Throws MalformedManifest on structural breakage (unterminated
// tags, mismatched close tags, stray input).

struct Element {
  std::string name;
  std::map<std::string, std::string> attrs;
};

class Scanner {
 public:
  explicit Scanner(std::string_view text) : text_(text) {}

  // Walks the document, invoking on_open(element, depth_stack) for every
  // element open (including self-closing). The stack holds ancestor names,
  // outermost first, not including the element itself.
  template <typename Fn>
  void scan(Fn&& on_open) {
    std::vector<std::string> stack;
    bool seen_root = false;
    skip_misc();
    while (pos_ < text_.size()) {
      if (text_[pos_] != '<') {
        // Character data; meaningful only inside the root element.
        if (stack.empty() && !is_space_run()) fail("text outside of root element");
        skip_chardata();
        continue;
      }
      if (starts_with("<!--")) {
        skip_until("-->", "unterminated comment");
        continue;
      }
      if (starts_with("<![CDATA[")) {
        if (stack.empty()) fail("CDATA outside of root element");
        skip_until("]]>", "unterminated CDATA section");
        continue;
      }
      if (starts_with("<?")) {
        skip_until("?>", "unterminated processing instruction");
        continue;
      }
      if (starts_with("<!")) {
        skip_until(">", "unterminated declaration");
        continue;
      }
      if (starts_with("</")) {
        pos_ += 2;
        std::string name = read_name();
        skip_ws();
        expect('>');
        if (stack.empty() || stack.back() != name)
          fail("mismatched closing tag </" + name + ">");
        stack.pop_back();
        if (stack.empty()) {
          skip_misc();
          if (pos_ < text_.size()) fail("content after document element");
          return;
        }
        continue;
      }
      // Open tag.
      if (seen_root && stack.empty()) fail("multiple root elements");
      ++pos_;
      Element el;
      el.name = read_name();
      read_attributes(el);
      bool self_closing = false;
      if (pos_ < text_.size() && text_[pos_] == '/') {
        self_closing = true;
        ++pos_;
      }
      expect('>');
      seen_root = true;
      on_open(el, stack);
      if (!self_closing) stack.push_back(el.name);
    }
    if (!stack.empty()) fail("unterminated element <" + stack.back() + ">");
    if (!seen_root) fail("no root element");
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw MalformedManifest("malformed manifest: " + why);
  }

  bool starts_with(std::string_view prefix) const {
    return text_.substr(pos_, prefix.size()) == prefix;
  }

  static bool is_name_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-' || c == '.' || c == ':';
  }

  static bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

  void skip_ws() {
    while (pos_ < text_.size() && is_ws(text_[pos_])) ++pos_;
  }

  bool is_space_run() const {
    std::size_t p = pos_;
    while (p < text_.size() && text_[p] != '<') {
      if (!is_ws(text_[p])) return false;
      ++p;
    }
    return true;
  }

  void skip_chardata() {
    while (pos_ < text_.size() && text_[pos_] != '<') ++pos_;
  }

  // Misc = whitespace, comments, PIs, DOCTYPE between/around root.
  void skip_misc() {
    for (;;) {
      skip_ws();
      if (starts_with("<!--")) {
        skip_until("-->", "unterminated comment");
      } else if (starts_with("<?")) {
        skip_until("?>", "unterminated processing instruction");
      } else if (starts_with("<!")) {
        skip_until(">", "unterminated declaration");
      } else {
        return;
      }
    }
  }

  void skip_until(std::string_view terminator, const char* what) {
    std::size_t found = text_.find(terminator, pos_);
    if (found == std::string_view::npos) fail(what);
    pos_ = found + terminator.size();
  }

  std::string read_name() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_name_char(text_[pos_])) ++pos_;
    if (pos_ == start) fail("expected a name");
    return std::string(text_.substr(start, pos_ - start));
  }

  void expect(char c) {
    if (pos_ >= text_.size() || text_[pos_] != c)
      fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void read_attributes(Element& el) {
    for (;;) {
      skip_ws();
      if (pos_ >= text_.size()) fail("unterminated start tag <" + el.name + ">");
      char c = text_[pos_];
      if (c == '>' || c == '/') return;
      std::string name = read_name();
      skip_ws();
      expect('=');
      skip_ws();
      if (pos_ >= text_.size() || (text_[pos_] != '"' && text_[pos_] != '\''))
        fail("attribute value must be quoted");
      char quote = text_[pos_++];
      std::size_t start = pos_;
      std::size_t end = text_.find(quote, start);
      if (end == std::string_view::npos) fail("unterminated attribute value");
      el.attrs[name] = decode_entities(text_.substr(start, end - start));
      pos_ = end + 1;
    }
  }

  std::string decode_entities(std::string_view raw) const {
    if (raw.find('&') == std::string_view::npos) return std::string(raw);
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size();) {
      if (raw[i] != '&') {
        out.push_back(raw[i++]);
        continue;
      }
      std::size_t semi = raw.find(';', i);
      if (semi == std::string_view::npos) fail("unterminated entity reference");
      std::string_view ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "amp") out.push_back('&');
      else if (ent == "lt") out.push_back('<');
      else if (ent == "gt") out.push_back('>');
      else if (ent == "quot") out.push_back('"');
      else if (ent == "apos") out.push_back('\'');
      else if (!ent.empty() && ent[0] == '#') {
        append_codepoint(out, ent.substr(1));
      } else {
        fail("unknown entity &" + std::string(ent) + ";");
      }
      i = semi + 1;
    }
    return out;
  }

  void append_codepoint(std::string& out, std::string_view digits) const {
    unsigned long cp = 0;
    bool hex = !digits.empty() && (digits[0] == 'x' || digits[0] == 'X');
    if (hex) digits.remove_prefix(1);
    if (digits.empty()) fail("empty character reference");
    for (char c : digits) {
      unsigned d;
      if (c >= '0' && c <= '9') d = static_cast<unsigned>(c - '0');
      else if (hex && c >= 'a' && c <= 'f') d = static_cast<unsigned>(c - 'a' + 10);
      else if (hex && c >= 'A' && c <= 'F') d = static_cast<unsigned>(c - 'A' + 10);
      else { fail("bad character reference"); }
      cp = cp * (hex ? 16 : 10) + d;
      if (cp > 0x10FFFF) fail("character reference out of range");
    }
    // UTF-8 encode.
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace xml

// Extracts every uses-permission, uses-feature, component and intent-filter
// action/category name in the document. Names are trimmed and kept verbatim
// (case-sensitive); sets deduplicate. Throws MalformedManifest.
inline ManifestFacts parse_manifest(std::string_view xml_text) {
  ManifestFacts facts;
  xml::Scanner scanner(xml_text);
  scanner.scan([&](const xml::Element& el, const std::vector<std::string>& stack) {
    auto name_attr = [&]() -> std::string {
      auto it = el.attrs.find("android:name");
      if (it == el.attrs.end()) return {};
      return std::string(trim(it->second));
    };
    if (el.name == "uses-permission") {
      std::string n = name_attr();
      if (!n.empty()) facts.permissions.insert(std::move(n));
    } else if (el.name == "uses-feature") {
      std::string n = name_attr();
      if (!n.empty()) facts.hardware.insert(std::move(n));
    } else if (el.name == "activity") {
      std::string n = name_attr();
      if (!n.empty()) facts.components.emplace(ComponentKind::activity, std::move(n));
    } else if (el.name == "service") {
      std::string n = name_attr();
      if (!n.empty()) facts.components.emplace(ComponentKind::service, std::move(n));
    } else if (el.name == "receiver") {
      std::string n = name_attr();
      if (!n.empty()) facts.components.emplace(ComponentKind::receiver, std::move(n));
    } else if (el.name == "provider") {
      std::string n = name_attr();
      if (!n.empty()) facts.components.emplace(ComponentKind::provider, std::move(n));
    } else if (el.name == "action" || el.name == "category") {
      bool in_filter = std::find(stack.begin(), stack.end(), "intent-filter") != stack.end();
      if (in_filter) {
        std::string n = name_attr();
        if (!n.empty()) facts.intent_filters.insert(std::move(n));
      }
    }
  });
  return facts;
}

}  // namespace famclass
