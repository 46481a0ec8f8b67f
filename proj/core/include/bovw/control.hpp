#pragma once

#include <string>

#include "bovw/roi.hpp"
#include "bovw/svm.hpp"

namespace bovw {

enum class ControlKind { set_roi, set_mode, set_smoothing, pause, resume };

std::string to_string(ControlKind kind);

struct ControlCommand {
    ControlKind kind = ControlKind::pause;
    RoiSpec roi{};        // set_roi
    Mode mode = Mode::three;  // set_mode
    double alpha = 0.0;   // set_smoothing
};

// Body of POST /control, e.g. {"kind":"set_roi","x":0,"y":0,"w":200,"h":200},
// {"kind":"set_mode","mode":"two"}, {"kind":"set_smoothing","alpha":0.5}.
// Throws FormatError with a reason suitable for a 400 response.
ControlCommand parse_control(const std::string& body);
std::string control_to_json(const ControlCommand& command);

} // namespace bovw
