#include "spgnm/mdp_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "spgnm/error.hpp"

namespace spgnm {

using nlohmann::json;

namespace {

const std::set<std::string> kMdpKeys = {"n_states", "n_actions", "gamma", "rho", "reward", "transition"};

template <typename T>
T get_field(const json& doc, const char* key) {
    if (!doc.contains(key)) throw InvalidInput(fmt::format("MDP file: missing field '{}'", key));
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InvalidInput(fmt::format("MDP file: field '{}': {}", key, e.what()));
    }
}

}  // namespace

json mdp_to_json(const TabularMdp& mdp) {
    json transition = json::array();
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        json block = json::array();
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const auto row = mdp.transition(s, a);
            block.push_back(numvec(row.begin(), row.end()));
        }
        transition.push_back(std::move(block));
    }
    return json{{"n_states", mdp.n_states()},
                {"n_actions", mdp.n_actions()},
                {"gamma", mdp.discount()},
                {"rho", mdp.initial_dist()},
                {"reward", mdp.reward().to_rows()},
                {"transition", std::move(transition)}};
}

TabularMdp mdp_from_json(const json& doc) {
    if (!doc.is_object()) throw InvalidInput("MDP file: top level must be an object");
    for (const auto& [key, _] : doc.items())
        if (!kMdpKeys.contains(key)) throw InvalidInput(fmt::format("MDP file: unknown key '{}'", key));

    const auto n_states = get_field<std::size_t>(doc, "n_states");
    const auto n_actions = get_field<std::size_t>(doc, "n_actions");
    const auto gamma = get_field<double>(doc, "gamma");
    const auto rho = get_field<numvec>(doc, "rho");
    const auto reward_rows = get_field<std::vector<numvec>>(doc, "reward");
    const auto blocks = get_field<std::vector<std::vector<numvec>>>(doc, "transition");

    if (reward_rows.size() != n_states)
        throw InvalidInput(fmt::format("MDP file: reward has {} rows, expected {}", reward_rows.size(), n_states));
    for (std::size_t s = 0; s < reward_rows.size(); ++s)
        if (reward_rows[s].size() != n_actions)
            throw InvalidInput(fmt::format("MDP file: reward row {} has {} entries, expected {}", s,
                                           reward_rows[s].size(), n_actions));
    if (blocks.size() != n_states)
        throw InvalidInput(fmt::format("MDP file: transition has {} blocks, expected {}", blocks.size(), n_states));

    numvec transition;
    transition.reserve(n_states * n_actions * n_states);
    for (std::size_t s = 0; s < n_states; ++s) {
        if (blocks[s].size() != n_actions)
            throw InvalidInput(fmt::format("MDP file: transition block {} has {} rows, expected {}", s,
                                           blocks[s].size(), n_actions));
        for (std::size_t a = 0; a < n_actions; ++a) {
            if (blocks[s][a].size() != n_states)
                throw InvalidInput(fmt::format("MDP file: transition({}, {}) has {} entries, expected {}", s, a,
                                               blocks[s][a].size(), n_states));
            transition.insert(transition.end(), blocks[s][a].begin(), blocks[s][a].end());
        }
    }
    return TabularMdp(n_states, n_actions, Table::from_rows(reward_rows), std::move(transition), gamma, rho);
}

TabularMdp read_mdp_unchecked(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(fmt::format("cannot open MDP file '{}'", path.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidInput(fmt::format("MDP file '{}': {}", path.string(), e.what()));
    }
    return mdp_from_json(doc);
}

TabularMdp load_mdp(const std::filesystem::path& path) {
    TabularMdp mdp = read_mdp_unchecked(path);
    require_valid(mdp);
    return mdp;
}

void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path) {
    write_file_atomic(path, mdp_to_json(mdp).dump(2) + "\n");
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", tmp.string()));
        out << contents;
        out.flush();
        if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", tmp.string()));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw std::runtime_error(fmt::format("cannot move '{}' into place: {}", path.string(), ec.message()));
    }
}

}  // namespace spgnm
