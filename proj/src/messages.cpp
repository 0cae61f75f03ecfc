#include "adeye/messages.hpp"

namespace adeye {

std::string_view to_string(VerdictStatus status) { return status == VerdictStatus::ok ? "ok" : "trigger"; }

std::string_view to_string(TriggerReason reason) {
  switch (reason) {
    case TriggerReason::limit_violation: return "limit_violation";
    case TriggerReason::heartbeat_loss: return "heartbeat_loss";
    case TriggerReason::predicted_collision: return "predicted_collision";
  }
  return "limit_violation";
}

nlohmann::json to_json(const ChannelCommand& c) {
  return {{"channel_id", c.channel_id}, {"priority", c.priority}, {"accel", c.accel}, {"steer", c.steer},
          {"tick", c.tick}};
}

nlohmann::json to_json(const Heartbeat& h) {
  return {{"channel_id", h.channel_id}, {"counter", h.counter}, {"tick", h.tick}};
}

nlohmann::json to_json(const Verdict& v) {
  nlohmann::json j{{"status", to_string(v.status)}};
  j["reason"] = v.reason ? nlohmann::json(to_string(*v.reason)) : nlohmann::json(nullptr);
  nlohmann::json ev = nlohmann::json::object();
  if (v.evidence.cell) ev["cell"] = {(*v.evidence.cell)[0], (*v.evidence.cell)[1]};
  if (v.evidence.distance) ev["distance"] = *v.evidence.distance;
  if (v.evidence.required) ev["required"] = *v.evidence.required;
  if (v.evidence.age) ev["age"] = *v.evidence.age;
  if (!v.evidence.field.empty()) ev["field"] = v.evidence.field;
  j["evidence"] = std::move(ev);
  return j;
}

nlohmann::json to_json(const FaultEvent& e) {
  return {{"target", e.target}, {"kind", e.kind}, {"event", e.event}, {"detail", e.detail}};
}

nlohmann::json to_json(const MetricEvent& m) { return {{"name", m.name}, {"value", m.value}, {"detail", m.detail}}; }

}  // namespace adeye
