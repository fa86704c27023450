#include "prism/dataset.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "prism/errors.hpp"

namespace prism {

using nlohmann::json;

std::vector<Problem> parse_dataset(const std::string& jsonl, const std::string& origin) {
    std::vector<Problem> problems;
    std::unordered_set<std::string> seen;
    std::istringstream in(jsonl);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
        }
        if (!obj.is_object() || !obj.contains("id") || !obj.contains("statement")) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected object with id and statement");
        }
        Problem p;
        p.id = obj.at("id").is_string() ? obj.at("id").get<std::string>() : obj.at("id").dump();
        p.statement = obj.at("statement").get<std::string>();
        if (p.statement.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty statement");
        }
        if (!seen.insert(p.id).second) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate problem id '" + p.id + "'");
        }
        if (obj.contains("gold_answer") && !obj.at("gold_answer").is_null()) {
            p.gold_answer = obj.at("gold_answer").get<std::string>();
        }
        if (obj.contains("domain_tag") && !obj.at("domain_tag").is_null()) {
            p.domain_tag = obj.at("domain_tag").get<std::string>();
        }
        problems.push_back(std::move(p));
    }
    return problems;
}

std::vector<Problem> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str(), path.string());
}

void write_dataset(const std::filesystem::path& path, const std::vector<Problem>& problems) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write dataset: " + path.string());
    for (const Problem& p : problems) {
        json obj{{"id", p.id}, {"statement", p.statement}};
        if (p.gold_answer) obj["gold_answer"] = *p.gold_answer;
        if (p.domain_tag) obj["domain_tag"] = *p.domain_tag;
        out << obj.dump() << '\n';
    }
}

}  // namespace prism
