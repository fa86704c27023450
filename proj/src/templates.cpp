#include "prism/templates.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "prism/errors.hpp"

namespace prism {

Template Template::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open template: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return Template(buf.str());
}

std::string Template::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    out.reserve(text_.size());
    std::size_t i = 0;
    while (i < text_.size()) {
        char c = text_[i];
        if (c != '{') {
            out.push_back(c);
            ++i;
            continue;
        }
        // Try to read {identifier}.
        std::size_t j = i + 1;
        while (j < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[j])) || text_[j] == '_')) {
            ++j;
        }
        if (j > i + 1 && j < text_.size() && text_[j] == '}') {
            std::string name = text_.substr(i + 1, j - i - 1);
            auto it = values.find(name);
            if (it == values.end()) {
                throw TemplateError("unknown placeholder {" + name + "} in template");
            }
            out += it->second;
            i = j + 1;
        } else {
            out.push_back(c);  // literal brace, not a placeholder
            ++i;
        }
    }
    return out;
}

TemplateSet TemplateSet::load(const std::filesystem::path& prompt_dir,
                              const std::map<std::string, std::filesystem::path>& overrides) {
    auto pick = [&](const std::string& name) {
        auto it = overrides.find(name);
        std::filesystem::path path = it != overrides.end() ? it->second : prompt_dir / (name + ".txt");
        return Template::from_file(path);
    };
    TemplateSet set;
    set.generate = pick("generate");
    set.verify = pick("verify");
    set.refine = pick("refine");
    set.explore = pick("explore");
    set.compare = pick("compare");
    set.aggregate = pick("aggregate");
    set.critique = pick("critique");
    set.rewrite = pick("rewrite");
    set.debate = pick("debate");
    set.conform = pick("conform");
    set.synthesize = pick("synthesize");
    return set;
}

}  // namespace prism
