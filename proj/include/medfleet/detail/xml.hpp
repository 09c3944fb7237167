// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace medfleet::detail {

class XmlSyntaxError : public std::runtime_error {
public:
    XmlSyntaxError(size_t position, const std::string& what)
        : std::runtime_error("XML syntax error at byte " + std::to_string(position) + ": " + what),
          position_(position) {}
    size_t position() const { return position_; }

private:
    size_t position_;
};

// Minimal DOM for the small, well-known documents served by the E-utilities
// endpoints. Covers elements, attributes, text, entities, CDATA, comments,
// and processing instructions; namespaces and DTD internals are out of scope.
struct XmlNode {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<XmlNode> children;  // element children, in document order
    std::string text;               // directly contained character data

    const XmlNode* first(std::string_view child_name) const {
        for (const auto& c : children)
            if (c.name == child_name) return &c;
        return nullptr;
    }

    std::vector<const XmlNode*> all(std::string_view child_name) const {
        std::vector<const XmlNode*> out;
        for (const auto& c : children)
            if (c.name == child_name) out.push_back(&c);
        return out;
    }

    const std::string* attribute(std::string_view key) const {
        for (const auto& [k, v] : attributes)
            if (k == key) return &v;
        return nullptr;
    }

    // Concatenated character data of this node and all descendants, in
    // document order. Inline markup (<i>, <sub>, ...) dissolves into text.
    std::string deep_text() const {
        std::string out = text_runs_.empty() ? text : std::string();
        if (!text_runs_.empty()) {
            size_t child_idx = 0;
            for (const auto& run : text_runs_) {
                if (run.child_follows && child_idx < children.size()) {
                    out += run.data;
                    out += children[child_idx++].deep_text();
                } else {
                    out += run.data;
                }
            }
            for (; child_idx < children.size(); ++child_idx)
                out += children[child_idx].deep_text();
        } else {
            for (const auto& c : children) out += c.deep_text();
        }
        return out;
    }

    struct TextRun {
        std::string data;
        bool child_follows = false;
    };
    std::vector<TextRun> text_runs_;  // interleaving bookkeeping for deep_text
};

class XmlParser {
public:
    explicit XmlParser(std::string_view input) : in_(input) {}

    XmlNode parse_document() {
        skip_misc();
        if (eof()) fail("document has no root element");
        XmlNode root = parse_element();
        skip_misc();
        if (!eof()) fail("trailing content after root element");
        return root;
    }

private:
    std::string_view in_;
    size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) const { throw XmlSyntaxError(pos_, what); }

    bool eof() const { return pos_ >= in_.size(); }
    char peek() const { return in_[pos_]; }
    bool starts_with(std::string_view s) const { return in_.substr(pos_, s.size()) == s; }

    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
    }

    void expect(char c) {
        if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_until(std::string_view terminator, const char* what) {
        auto end = in_.find(terminator, pos_);
        if (end == std::string_view::npos) fail(std::string("unterminated ") + what);
        pos_ = end + terminator.size();
    }

    // Prolog, comments, PIs, DOCTYPE between elements.
    void skip_misc() {
        for (;;) {
            skip_ws();
            if (starts_with("<?")) {
                skip_until("?>", "processing instruction");
            } else if (starts_with("<!--")) {
                skip_until("-->", "comment");
            } else if (starts_with("<!DOCTYPE")) {
                skip_until(">", "DOCTYPE");
            } else {
                return;
            }
        }
    }

    std::string parse_name() {
        size_t start = pos_;
        while (!eof()) {
            char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
                c == ':' || c == '.') {
                ++pos_;
            } else {
                break;
            }
        }
        if (pos_ == start) fail("expected a name");
        return std::string(in_.substr(start, pos_ - start));
    }

    std::string decode_entities(std::string_view raw) {
        std::string out;
        out.reserve(raw.size());
        for (size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] != '&') {
                out.push_back(raw[i]);
                continue;
            }
            auto semi = raw.find(';', i);
            if (semi == std::string_view::npos) fail("unterminated entity reference");
            auto ent = raw.substr(i + 1, semi - i - 1);
            if (ent == "lt") out.push_back('<');
            else if (ent == "gt") out.push_back('>');
            else if (ent == "amp") out.push_back('&');
            else if (ent == "quot") out.push_back('"');
            else if (ent == "apos") out.push_back('\'');
            else if (!ent.empty() && ent[0] == '#') append_codepoint(out, ent.substr(1));
            else fail("unknown entity '" + std::string(ent) + "'");
            i = semi;
        }
        return out;
    }

    void append_codepoint(std::string& out, std::string_view digits) {
        unsigned long cp = 0;
        try {
            cp = (digits.size() > 1 && (digits[0] == 'x' || digits[0] == 'X'))
                     ? std::stoul(std::string(digits.substr(1)), nullptr, 16)
                     : std::stoul(std::string(digits), nullptr, 10);
        } catch (const std::exception&) {
            fail("bad character reference");
        }
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

    std::string parse_attribute_value() {
        if (eof() || (peek() != '"' && peek() != '\'')) fail("expected quoted attribute value");
        char quote = peek();
        ++pos_;
        auto end = in_.find(quote, pos_);
        if (end == std::string_view::npos) fail("unterminated attribute value");
        auto raw = in_.substr(pos_, end - pos_);
        pos_ = end + 1;
        return decode_entities(raw);
    }

    XmlNode parse_element() {
        expect('<');
        XmlNode node;
        node.name = parse_name();
        for (;;) {
            skip_ws();
            if (eof()) fail("unterminated start tag");
            if (peek() == '>') {
                ++pos_;
                break;
            }
            if (starts_with("/>")) {
                pos_ += 2;
                return node;
            }
            std::string key = parse_name();
            skip_ws();
            expect('=');
            skip_ws();
            node.attributes.emplace_back(std::move(key), parse_attribute_value());
        }
        parse_content(node);
        return node;
    }

    void parse_content(XmlNode& node) {
        std::string pending_text;
        auto flush_text = [&](bool child_follows) {
            node.text += pending_text;
            node.text_runs_.push_back({std::move(pending_text), child_follows});
            pending_text.clear();
        };
        for (;;) {
            if (eof()) fail("unterminated element <" + node.name + ">");
            if (peek() == '<') {
                if (starts_with("</")) {
                    flush_text(false);
                    pos_ += 2;
                    std::string closing = parse_name();
                    if (closing != node.name)
                        fail("mismatched close tag </" + closing + "> for <" + node.name + ">");
                    skip_ws();
                    expect('>');
                    return;
                }
                if (starts_with("<!--")) {
                    skip_until("-->", "comment");
                    continue;
                }
                if (starts_with("<![CDATA[")) {
                    pos_ += 9;
                    auto end = in_.find("]]>", pos_);
                    if (end == std::string_view::npos) fail("unterminated CDATA section");
                    pending_text += in_.substr(pos_, end - pos_);
                    pos_ = end + 3;
                    continue;
                }
                if (starts_with("<?")) {
                    skip_until("?>", "processing instruction");
                    continue;
                }
                flush_text(true);
                node.children.push_back(parse_element());
            } else {
                size_t start = pos_;
                while (!eof() && peek() != '<') ++pos_;
                pending_text += decode_entities(in_.substr(start, pos_ - start));
            }
        }
    }
};

inline XmlNode parse_xml(std::string_view input) { return XmlParser(input).parse_document(); }

}  // namespace medfleet::detail
