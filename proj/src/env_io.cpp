#include "ktree/env_io.hpp"

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

namespace ktree {

namespace {

constexpr const char* kMagic = "# ktree-env v1";

void write_addresses(std::ostream& out, const Environment& env, std::size_t level,
                     std::uint64_t parent, std::string& prefix) {
    const TreeSpec& tree = env.tree();
    std::uint64_t m = tree.volumes[level - 1];
    char buf[64];
    std::size_t base_len = prefix.size();
    for (std::uint64_t x = 1; x <= m; ++x) {
        prefix.resize(base_len);
        if (base_len > 0) prefix += '.';
        prefix += std::to_string(x);
        std::snprintf(buf, sizeof buf, "%.17g", env.gamma(level, parent, static_cast<Coord>(x)));
        out << level << ',' << prefix << ',' << buf << ',';
        if (level < env.levels()) {
            std::snprintf(buf, sizeof buf, "%.17g", env.p_value(level, parent, static_cast<Coord>(x)));
            out << buf;
        }
        out << '\n';
        if (level < env.levels())
            write_addresses(out, env, level + 1, parent * m + (x - 1), prefix);
    }
    prefix.resize(base_len);
}

} // namespace

void write_env_csv(const Environment& env, std::ostream& out) {
    if (env.kind() != Environment::Kind::dense)
        throw SpecError("env csv dump requires a dense environment");
    out << kMagic << "\n";
    out << "level,address,gamma,p\n";
    std::string prefix;
    write_addresses(out, env, 1, 0, prefix);
}

Environment read_env_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kMagic) throw SpecError("env csv: bad or missing version line");
    if (!std::getline(in, line) || line != "level,address,gamma,p")
        throw SpecError("env csv: bad header");

    struct Row {
        std::vector<Coord> address;
        double gamma;
        double p;
        bool has_p;
    };
    std::vector<std::vector<Row>> by_level;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        std::size_t level = std::stoul(cell);
        std::getline(row, cell, ',');
        Row r;
        std::istringstream addr(cell);
        std::string part;
        while (std::getline(addr, part, '.')) r.address.push_back(static_cast<Coord>(std::stoul(part)));
        if (r.address.size() != level) throw SpecError("env csv: address/level mismatch");
        std::getline(row, cell, ',');
        r.gamma = std::stod(cell);
        r.has_p = static_cast<bool>(std::getline(row, cell, ',')) && !cell.empty();
        r.p = r.has_p ? std::stod(cell) : 0.0;
        if (by_level.size() < level) by_level.resize(level);
        by_level[level - 1].push_back(std::move(r));
    }
    if (by_level.empty()) throw SpecError("env csv: no rows");

    // Infer volumes from the per-level maxima of the last coordinate.
    std::vector<std::uint64_t> volumes(by_level.size(), 0);
    for (std::size_t j = 0; j < by_level.size(); ++j)
        for (const Row& r : by_level[j])
            volumes[j] = std::max<std::uint64_t>(volumes[j], r.address.back());
    TreeSpec tree = make_tree(volumes);

    std::vector<std::vector<double>> gamma(by_level.size());
    std::vector<std::vector<double>> p(by_level.size());
    std::uint64_t count = 1;
    for (std::size_t j = 0; j < by_level.size(); ++j) {
        count *= volumes[j];
        if (by_level[j].size() != count) throw SpecError("env csv: missing rows at level " + std::to_string(j + 1));
        gamma[j].resize(count);
        p[j].resize(count);
        for (const Row& r : by_level[j]) {
            std::uint64_t idx = flat_index(tree, VertexAddress{r.address});
            gamma[j][idx] = r.gamma;
            p[j][idx] = r.p;
        }
    }
    Environment env = Environment::make_dense(std::move(tree), std::move(gamma));
    for (std::size_t j = 1; j < by_level.size(); ++j) env.set_coin_params(j, std::move(p[j - 1]));
    return env;
}

} // namespace ktree
