#include "bovw/control.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "bovw/errors.hpp"

namespace bovw {

namespace {

using nlohmann::json;

int int_field(const json& j, const char* key) {
    if (!j.contains(key)) throw FormatError(std::string("set_roi needs '") + key + "'");
    const auto& v = j.at(key);
    if (v.is_number_integer()) {
        const auto n = v.get<std::int64_t>();
        if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max()) {
            throw FormatError(std::string("'") + key + "' is out of range");
        }
        return static_cast<int>(n);
    }
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 1e9) return static_cast<int>(d);
    }
    throw FormatError(std::string("'") + key + "' must be an integer");
}

} // namespace

std::string to_string(ControlKind kind) {
    switch (kind) {
    case ControlKind::set_roi: return "set_roi";
    case ControlKind::set_mode: return "set_mode";
    case ControlKind::set_smoothing: return "set_smoothing";
    case ControlKind::pause: return "pause";
    case ControlKind::resume: return "resume";
    }
    return "unknown";
}

ControlCommand parse_control(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error&) {
        throw FormatError("body is not valid JSON");
    }
    if (!j.is_object()) throw FormatError("body must be a JSON object");
    if (!j.contains("kind") || !j["kind"].is_string()) throw FormatError("missing string field 'kind'");
    const auto kind = j["kind"].get<std::string>();

    ControlCommand cmd;
    if (kind == "set_roi") {
        cmd.kind = ControlKind::set_roi;
        cmd.roi = {int_field(j, "x"), int_field(j, "y"), int_field(j, "w"), int_field(j, "h")};
        if (cmd.roi.width <= 0 || cmd.roi.height <= 0) throw FormatError("ROI width and height must be positive");
    } else if (kind == "set_mode") {
        cmd.kind = ControlKind::set_mode;
        if (!j.contains("mode") || !j["mode"].is_string()) throw FormatError("set_mode needs string 'mode'");
        try {
            cmd.mode = parse_mode(j["mode"].get<std::string>());
        } catch (const PreconditionError& e) {
            throw FormatError(e.what());
        }
    } else if (kind == "set_smoothing") {
        cmd.kind = ControlKind::set_smoothing;
        if (!j.contains("alpha") || !j["alpha"].is_number()) throw FormatError("set_smoothing needs number 'alpha'");
        cmd.alpha = j["alpha"].get<double>();
        if (!(cmd.alpha >= 0.0 && cmd.alpha < 1.0)) throw FormatError("alpha must lie in [0, 1)");
    } else if (kind == "pause") {
        cmd.kind = ControlKind::pause;
    } else if (kind == "resume") {
        cmd.kind = ControlKind::resume;
    } else {
        throw FormatError("unknown control kind '" + kind + "'");
    }
    return cmd;
}

std::string control_to_json(const ControlCommand& command) {
    json j{{"kind", to_string(command.kind)}};
    switch (command.kind) {
    case ControlKind::set_roi:
        j["x"] = command.roi.x;
        j["y"] = command.roi.y;
        j["w"] = command.roi.width;
        j["h"] = command.roi.height;
        break;
    case ControlKind::set_mode: j["mode"] = to_string(command.mode); break;
    case ControlKind::set_smoothing: j["alpha"] = command.alpha; break;
    default: break;
    }
    return j.dump();
}

} // namespace bovw
