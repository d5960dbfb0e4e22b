#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "goldsift/dataset.hpp"
#include "goldsift/errors.hpp"
#include "goldsift/hash.hpp"

namespace goldsift {

enum class RenderRole {
    Query,
    Demonstration,
};

// Patterns may reference {instruction}, {input} and, in the demonstration
// pattern, {answer}. A section wrapped as {?input:...} is emitted only when
// the input field is non-empty, which is how the default template elides the
// input block. "{{" and "}}" escape literal braces.
struct PromptTemplate {
    std::string query_pattern;
    std::string demonstration_pattern;
    std::string separator;

    std::string fingerprint() const {
        nlohmann::json j;
        j["query_pattern"] = query_pattern;
        j["demonstration_pattern"] = demonstration_pattern;
        j["separator"] = separator;
        return goldsift::fingerprint(j.dump());
    }
};

inline PromptTemplate default_template() {
    PromptTemplate t;
    t.query_pattern =
        "Below is an instruction that describes a task"
        "{?input:, paired with an input that provides further context}"
        ". Write a response that appropriately completes the request.\n\n"
        "### Instruction:\n{instruction}\n\n"
        "{?input:### Input:\n{input}\n\n}"
        "### Response:\n";
    t.demonstration_pattern = t.query_pattern + "{answer}";
    t.separator = "\n\n";
    return t;
}

inline PromptTemplate load_template(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open template file '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("cannot parse template file '" + path + "': " + ex.what());
    }
    for (const char* key : {"query_pattern", "demonstration_pattern", "separator"}) {
        if (!j.contains(key) || !j.at(key).is_string()) {
            throw ConfigError(std::string("template file missing string field '") + key + "'");
        }
    }
    PromptTemplate t;
    t.query_pattern = j.at("query_pattern").get<std::string>();
    t.demonstration_pattern = j.at("demonstration_pattern").get<std::string>();
    t.separator = j.at("separator").get<std::string>();
    return t;
}

namespace detail {

using FieldMap = std::map<std::string, const std::string*>;

inline const std::string& lookup_field(const FieldMap& fields, const std::string& name) {
    auto it = fields.find(name);
    if (it == fields.end()) {
        throw TemplateError("placeholder '{" + name + "}' is not available in this role");
    }
    return *it->second;
}

// Recursive descent over the pattern; `in_section` means a bare '}' closes
// the current conditional body ("}}"-escapes take precedence). Skipped
// sections are still parsed, so bad placeholder names fail regardless of
// which branch a particular example takes.
inline std::string render_scan(std::string_view pattern, std::size_t& i, const FieldMap& fields,
                               bool in_section) {
    std::string out;
    while (i < pattern.size()) {
        char c = pattern[i];
        if (c == '{') {
            if (i + 1 < pattern.size() && pattern[i + 1] == '{') {
                out.push_back('{');
                i += 2;
                continue;
            }
            if (i + 1 < pattern.size() && pattern[i + 1] == '?') {
                std::size_t colon = pattern.find(':', i + 2);
                if (colon == std::string_view::npos) {
                    throw TemplateError("conditional section '{?' without ':'");
                }
                std::string name(pattern.substr(i + 2, colon - i - 2));
                i = colon + 1;
                std::string body = render_scan(pattern, i, fields, true);
                if (!trim(lookup_field(fields, name)).empty()) out += body;
                continue;
            }
            std::size_t close = pattern.find('}', i + 1);
            if (close == std::string_view::npos) {
                throw TemplateError("unterminated placeholder");
            }
            std::string name(pattern.substr(i + 1, close - i - 1));
            out += lookup_field(fields, name);
            i = close + 1;
            continue;
        }
        if (c == '}') {
            if (i + 1 < pattern.size() && pattern[i + 1] == '}') {
                out.push_back('}');
                i += 2;
                continue;
            }
            if (in_section) {
                i += 1;
                return out;
            }
            throw TemplateError("unbalanced '}' in pattern");
        }
        out.push_back(c);
        i += 1;
    }
    if (in_section) {
        throw TemplateError("unterminated conditional section");
    }
    return out;
}

inline std::string render_pattern(std::string_view pattern, const FieldMap& fields) {
    std::size_t i = 0;
    return render_scan(pattern, i, fields, false);
}

}  // namespace detail

// Deterministic: identical (example, template, role) inputs give
// byte-identical output.
inline std::string render(const InstructionExample& example, const PromptTemplate& tmpl,
                          RenderRole role) {
    detail::FieldMap fields;
    fields["instruction"] = &example.instruction;
    fields["input"] = &example.input;
    if (role == RenderRole::Demonstration) {
        fields["answer"] = &example.answer;
        return detail::render_pattern(tmpl.demonstration_pattern, fields);
    }
    return detail::render_pattern(tmpl.query_pattern, fields);
}

}  // namespace goldsift
