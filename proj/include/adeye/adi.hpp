#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "adeye/kernel.hpp"
#include "adeye/nominal.hpp"
#include "adeye/safety.hpp"
#include "adeye/scenario.hpp"

// The ADI profile: which channels are registered and how they are tuned.
// It lives beside the scenario, not inside it, so scenarios stay
// channel-agnostic; the profile in force is written into every trace header.
namespace adeye::adi {

inline constexpr int kProfileFormat = 1;

struct Profile {
  int staleness = kernel::kDefaultStaleness;
  std::optional<nominal::NominalConfig> nominal = nominal::NominalConfig{};
  std::optional<safety::SafetyConfig> safety = safety::SafetyConfig{};
  bool operator==(const Profile&) const = default;
};

nlohmann::json to_json(const Profile& p);
Profile profile_from(const nlohmann::json& j);
Profile parse_profile(std::string_view text);
Profile load_profile(const std::filesystem::path& path);

// Registered channel ids, in execution order.
std::vector<std::string> channel_ids(const Profile& p);

// Cross-checks routing targets and channel-fault targets against the
// profile's channels (ValidationError naming the scenario path).
void check_scenario(const scenario::ScenarioSpec& spec, const Profile& p);

struct ChannelSet {
  std::vector<std::unique_ptr<kernel::Channel>> owned;
  std::vector<kernel::Channel*> ordered;
  nominal::NominalChannel* nominal = nullptr;
  safety::SafetyChannel* safety = nullptr;
};

// Nominal first, then safety. `maps` may be null when there is no nominal.
ChannelSet make_channels(const Profile& p, std::shared_ptr<const nominal::MapArtifacts> maps);

}  // namespace adeye::adi
