#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace prism {

// Prompt template with {placeholder} substitution. Placeholders are
// identifiers in single braces; rendering with a placeholder missing from
// the value map (or a value for a placeholder the template does not use is
// fine) throws TemplateError for unknown placeholders in the template.
class Template {
  public:
    Template() = default;
    explicit Template(std::string text) : text_(std::move(text)) {}

    static Template from_file(const std::filesystem::path& path);

    std::string render(const std::map<std::string, std::string>& values) const;

    const std::string& text() const { return text_; }

  private:
    std::string text_;
};

// The named templates used by the engine, baselines, and aggregation.
struct TemplateSet {
    Template generate;
    Template verify;
    Template refine;
    Template explore;
    Template compare;
    Template aggregate;
    Template critique;
    Template rewrite;
    Template debate;
    Template conform;
    Template synthesize;

    // Loads the stock templates from a prompt directory; individual paths
    // may be overridden (name -> file).
    static TemplateSet load(const std::filesystem::path& prompt_dir,
                            const std::map<std::string, std::filesystem::path>& overrides = {});
};

}  // namespace prism
