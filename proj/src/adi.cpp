#include "adeye/adi.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "adeye/detail/json_util.hpp"
#include "adeye/error.hpp"

namespace adeye::adi {

using nlohmann::json;
using namespace adeye::detail;

json to_json(const Profile& p) {
  return {{"adi_format", kProfileFormat},
          {"staleness", p.staleness},
          {"nominal", p.nominal ? nominal::to_json(*p.nominal) : json(nullptr)},
          {"safety", p.safety ? safety::to_json(*p.safety) : json(nullptr)}};
}

Profile profile_from(const json& j) {
  ObjectReader r(j, "");
  if (r.integer("adi_format", kProfileFormat) != kProfileFormat) {
    throw ValidationError("adi_format", "unsupported profile format");
  }
  Profile p;
  p.staleness = static_cast<int>(r.integer("staleness", p.staleness));
  if (p.staleness < 0) throw ValidationError("staleness", "must be >= 0");
  if (const json* n = r.optional("nominal")) {
    p.nominal = n->is_null() ? std::nullopt : std::optional(nominal::nominal_config_from(*n, "nominal"));
  }
  if (const json* s = r.optional("safety")) {
    p.safety = s->is_null() ? std::nullopt : std::optional(safety::safety_config_from(*s, "safety"));
  }
  r.finish();
  if (!p.nominal && !p.safety) throw ValidationError("", "profile registers no channels");
  if (p.nominal && p.safety && p.nominal->id == p.safety->id) {
    throw ValidationError("safety.id", "duplicates the nominal channel id");
  }
  return p;
}

Profile parse_profile(std::string_view text) { return profile_from(parse_strict(text)); }

Profile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string(), "cannot open profile");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_profile(buf.str());
}

std::vector<std::string> channel_ids(const Profile& p) {
  std::vector<std::string> ids;
  if (p.nominal) ids.push_back(p.nominal->id);
  if (p.safety) ids.push_back(p.safety->id);
  return ids;
}

void check_scenario(const scenario::ScenarioSpec& spec, const Profile& p) {
  const auto ids = channel_ids(p);
  const std::set<std::string> known(ids.begin(), ids.end());
  std::string listing;
  for (const auto& id : ids) listing += (listing.empty() ? "" : ", ") + id;
  for (const auto& [source, targets] : spec.routing) {
    for (const auto& t : targets) {
      if (!known.count(t)) {
        throw ValidationError(join_path("routing", source), "unknown channel '" + t + "' (registered: " + listing + ")");
      }
    }
  }
  for (std::size_t i = 0; i < spec.faults.size(); ++i) {
    const auto& f = spec.faults[i];
    if (faults::is_channel_fault(f.kind) && !known.count(f.target)) {
      throw ValidationError(index_path("faults", i) + ".target",
                            "unknown channel '" + f.target + "' (registered: " + listing + ")");
    }
  }
}

ChannelSet make_channels(const Profile& p, std::shared_ptr<const nominal::MapArtifacts> maps) {
  ChannelSet set;
  if (p.nominal) {
    auto ch = std::make_unique<nominal::NominalChannel>(*p.nominal, std::move(maps));
    set.nominal = ch.get();
    set.owned.push_back(std::move(ch));
  }
  if (p.safety) {
    auto ch = std::make_unique<safety::SafetyChannel>(*p.safety);
    set.safety = ch.get();
    set.owned.push_back(std::move(ch));
  }
  for (auto& ch : set.owned) set.ordered.push_back(ch.get());
  return set;
}

}  // namespace adeye::adi
