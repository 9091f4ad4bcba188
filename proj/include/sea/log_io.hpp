#pragma once
// JSONL serialization of interaction logs. One interaction per line:
//   {"context":[...],"dedup_key":3,"action":1,"reward":1.0,"propensity":0.91}
// "context" may instead be an integer key into a caller-supplied context table.
// Doubles are written in shortest round-trip form, so write -> read is exact.

#include <nlohmann/json.hpp>

#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "sea/core_types.hpp"

namespace sea {

struct LogWriteOptions {
  /// Write only the dedup key for contexts that carry one.
  bool contexts_by_key = false;
};

inline nlohmann::json interaction_to_json(const LoggedInteraction& item, const LogWriteOptions& opt = {}) {
  nlohmann::json j;
  if (opt.contexts_by_key && item.context.dedup_key) {
    j["context"] = *item.context.dedup_key;
  } else {
    j["context"] = std::vector<double>(item.context.values.data(),
                                       item.context.values.data() + item.context.values.size());
    if (item.context.dedup_key) j["dedup_key"] = *item.context.dedup_key;
  }
  j["action"] = item.action.id;
  j["reward"] = item.reward;
  j["propensity"] = item.propensity;
  return j;
}

inline void write_jsonl(const InteractionLog& log, std::ostream& out, const LogWriteOptions& opt = {}) {
  for (const auto& item : log) out << interaction_to_json(item, opt).dump() << '\n';
}

/// Parses a JSONL log. `context_table[k]` resolves integer contexts.
inline InteractionLog read_jsonl(std::istream& in, std::span<const Vector> context_table = {}) {
  InteractionLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    LoggedInteraction item;
    const auto& ctx = j.at("context");
    if (ctx.is_number_integer()) {
      const auto key = ctx.get<std::int64_t>();
      if (key < 0 || static_cast<std::size_t>(key) >= context_table.size()) {
        throw ValidationError("line " + std::to_string(line_no) + ": unresolvable context key " +
                              std::to_string(key));
      }
      item.context = ContextVector(context_table[static_cast<std::size_t>(key)], key);
    } else {
      const auto values = ctx.get<std::vector<double>>();
      item.context.values = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
      if (j.contains("dedup_key")) item.context.dedup_key = j["dedup_key"].get<std::int64_t>();
    }
    item.action = ActionId(j.at("action").get<std::size_t>());
    item.reward = j.at("reward").get<double>();
    item.propensity = j.at("propensity").get<double>();
    try {
      log.append(std::move(item));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace sea
