// JSON converters shared by the file-format code (channel, q-graph, encoder).
#pragma once

#include <string>

#include "nlohmann/json.hpp"
#include "qcap/channel.hpp"
#include "qcap/qgraph.hpp"

namespace qcap {

nlohmann::json channel_to_json(const Channel& ch);
// ctx names the source (file path) in error messages.
Channel channel_from_json(const nlohmann::json& j, const std::string& ctx);

nlohmann::json qgraph_to_json(const QGraph& g);
QGraph qgraph_from_json(const nlohmann::json& j, const std::string& ctx);

}  // namespace qcap
