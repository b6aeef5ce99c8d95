#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "spgnm/mdp.hpp"

namespace spgnm {

/**
MDP definition document (JSON):

    {
      "n_states": 2, "n_actions": 2, "gamma": 0.9,
      "rho": [0.5, 0.5],
      "reward": [[r00, r01], [r10, r11]],
      "transition": [ [[P(.|0,0)], [P(.|0,1)]], [[P(.|1,0)], [P(.|1,1)]] ]
    }

Each transition block belongs to one source state; its rows are the actions
and each row is a distribution over next states. Unknown keys are rejected.
*/
nlohmann::json mdp_to_json(const TabularMdp& mdp);

/// Parses the document; shape errors throw InvalidInput. Does not validate probabilities.
TabularMdp mdp_from_json(const nlohmann::json& doc);

/// Reads, parses and validates; throws InvalidInput with the validation report.
TabularMdp load_mdp(const std::filesystem::path& path);

/// Reads and parses without validating (used by the CLI validate command).
TabularMdp read_mdp_unchecked(const std::filesystem::path& path);

void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path);

/// Writes `contents` to a sibling temp file then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace spgnm
