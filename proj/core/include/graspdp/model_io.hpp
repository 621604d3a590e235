#pragma once

#include <filesystem>
#include <string>

#include "graspdp/env.hpp"
#include "graspdp/hand.hpp"

namespace graspdp {

/// Four-finger hand (thumb, index, middle, ring), two links per finger, with
/// six contactable links whose catalogs have sizes 3, 2, 3, 2, 4, 2.
HandModel default_hand();

/// Flat box-shaped hand tool (0.35 kg) with the contact points the default
/// hand catalogs refer to.
ToolModel default_tool();

// JSON documents; the schema is described in docs/model_format.md. Parse
// and validation failures throw std::invalid_argument naming the field.
std::string hand_to_json(const HandModel& hand);
HandModel hand_from_json(const std::string& text);
std::string tool_to_json(const ToolModel& tool);
ToolModel tool_from_json(const std::string& text);
std::string episode_to_json(const EpisodeInput& episode);
EpisodeInput episode_from_json(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

HandModel load_hand(const std::filesystem::path& path);
ToolModel load_tool(const std::filesystem::path& path);
EpisodeInput load_episode(const std::filesystem::path& path);

}  // namespace graspdp
