#include "ktree/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace ktree {

namespace {

std::string trim(std::string s) {
    auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && sp(s.front())) s.erase(s.begin());
    while (!s.empty() && sp(s.back())) s.pop_back();
    return s;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

double to_double(const std::string& s, const std::string& key) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw SpecError("config: bad numeric value for " + key + ": '" + s + "'");
    }
}

std::uint64_t to_u64(const std::string& s, const std::string& key) {
    try {
        std::size_t used = 0;
        unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw SpecError("config: bad integer value for " + key + ": '" + s + "'");
    }
}

} // namespace

ExperimentConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw SpecError("config: expected key = value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw SpecError("config: empty key");
        kv[key] = val;
    }

    ExperimentConfig cfg;
    auto take = [&kv](const std::string& key) -> std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };

    if (auto* v = take("model")) {
        if (*v == "coin")
            cfg.model = ExperimentConfig::Model::coin;
        else if (*v == "mark")
            cfg.model = ExperimentConfig::Model::mark;
        else if (*v == "kprocess")
            cfg.model = ExperimentConfig::Model::kprocess;
        else if (*v == "grem")
            cfg.model = ExperimentConfig::Model::grem;
        else
            throw SpecError("config: unknown model '" + *v + "'");
        kv.erase("model");
    }
    if (auto* v = take("volumes")) {
        for (const auto& tok : split_list(*v)) cfg.volumes.push_back(to_u64(tok, "volumes"));
        kv.erase("volumes");
    }
    if (auto* v = take("horizon")) { cfg.horizon = to_double(*v, "horizon"); kv.erase("horizon"); }
    if (auto* v = take("jumps")) { cfg.jumps = to_u64(*v, "jumps"); kv.erase("jumps"); }
    if (auto* v = take("replicas")) { cfg.replicas = to_u64(*v, "replicas"); kv.erase("replicas"); }
    if (auto* v = take("seed")) { cfg.seed = to_u64(*v, "seed"); kv.erase("seed"); }
    if (auto* v = take("threads")) {
        cfg.threads = static_cast<unsigned>(to_u64(*v, "threads"));
        kv.erase("threads");
    }
    if (auto* v = take("start")) {
        for (const auto& tok : split_list(*v))
            cfg.start.push_back(static_cast<Coord>(to_u64(tok, "start")));
        kv.erase("start");
    }
    if (auto* v = take("out_prefix")) { cfg.out_prefix = *v; kv.erase("out_prefix"); }
    if (auto* v = take("grem.n")) { cfg.grem_n = to_u64(*v, "grem.n"); kv.erase("grem.n"); }
    if (auto* v = take("grem.alphas")) {
        for (const auto& tok : split_list(*v)) cfg.alphas.push_back(to_double(tok, "grem.alphas"));
        kv.erase("grem.alphas");
    }
    if (auto* v = take("r")) { cfg.theta_r = to_double(*v, "r"); kv.erase("r"); }

    // level.J.* keys
    std::size_t max_level = 0;
    for (const auto& [key, _] : kv)
        if (key.rfind("level.", 0) == 0) {
            auto rest = key.substr(6);
            auto dot = rest.find('.');
            if (dot == std::string::npos) throw SpecError("config: malformed key '" + key + "'");
            max_level = std::max(max_level, static_cast<std::size_t>(to_u64(rest.substr(0, dot), key)));
        }

    if (max_level > 0) {
        bool any_dense = false, any_form = false;
        cfg.gamma_levels.resize(max_level);
        cfg.forms.resize(max_level);
        for (std::size_t j = 1; j <= max_level; ++j) {
            std::string base = "level." + std::to_string(j) + ".";
            if (auto* v = take(base + "gamma")) {
                for (const auto& tok : split_list(*v))
                    cfg.gamma_levels[j - 1].push_back(to_double(tok, base + "gamma"));
                any_dense = true;
                kv.erase(base + "gamma");
            }
            if (auto* v = take(base + "gamma_formula")) {
                if (*v == "geometric")
                    cfg.forms[j - 1].kind = FormKind::geometric;
                else if (*v == "power")
                    cfg.forms[j - 1].kind = FormKind::power;
                else
                    throw SpecError("config: unknown gamma_formula '" + *v + "'");
                any_form = true;
                kv.erase(base + "gamma_formula");
            }
            if (auto* v = take(base + "param")) {
                cfg.forms[j - 1].param = to_double(*v, base + "param");
                kv.erase(base + "param");
            }
            if (auto* v = take(base + "cutoff")) {
                cfg.forms[j - 1].cutoff = (*v == "inf") ? kUnbounded : to_u64(*v, base + "cutoff");
                kv.erase(base + "cutoff");
            }
        }
        if (any_dense && any_form)
            throw SpecError("config: dense gamma arrays and gamma formulas cannot be mixed");
        if (!any_dense) cfg.gamma_levels.clear();
        if (!any_form) cfg.forms.clear();
    }

    for (const auto& [key, _] : kv)
        throw SpecError("config: unknown key '" + key + "'");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("config file not readable: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

Environment make_environment(const ExperimentConfig& cfg) {
    if (!cfg.gamma_levels.empty() && !cfg.forms.empty())
        throw SpecError("config: ambiguous environment");
    if (!cfg.gamma_levels.empty()) {
        if (cfg.volumes.size() != cfg.gamma_levels.size())
            throw SpecError("config: volumes must match the number of gamma levels");
        return Environment::make_dense(make_tree(cfg.volumes), cfg.gamma_levels);
    }
    if (!cfg.forms.empty()) return Environment::make_closed(cfg.forms);
    throw SpecError("config: no environment given");
}

} // namespace ktree
