#include "cobridge/monitor.hpp"

#include "cobridge/error.hpp"

#include <cmath>
#include <limits>

namespace cobridge {

void MonitorConfig::validate() const {
    if (!(threshold > 0.0) || !std::isfinite(threshold)) throw ValidationError("monitor.threshold", "must be positive");
}

MonitorResult monitor_step(double x_r, double y_r, double x_o, double y_o, double threshold) {
    if (!std::isfinite(x_r) || !std::isfinite(y_r) || !std::isfinite(x_o) || !std::isfinite(y_o)) {
        throw UsageError("monitor_step: non-finite position");
    }
    const double d = std::hypot(x_r - x_o, y_r - y_o);
    return {d, d < threshold};
}

MonitorUnit::MonitorUnit(MonitorConfig config) : config_(std::move(config)) {
    config_.validate();
    out_.distance = std::numeric_limits<double>::infinity();
}

void MonitorUnit::set_input(const std::string& name, const Value& value) {
    if (name != config_.robot_x && name != config_.robot_y && name != config_.obstacle_x && name != config_.obstacle_y) {
        throw UsageError("monitor has no input '" + name + "'");
    }
    if (value.is_real()) {
        inputs_[name] = value.as_real();
    } else if (value.is_integer()) {
        inputs_[name] = static_cast<double>(value.as_integer());
    } else {
        throw UsageError("monitor input '" + name + "' must be numeric");
    }
}

Value MonitorUnit::get_output(const std::string& name) const {
    if (name == config_.distance_out) return Value(out_.distance);
    if (name == config_.stop_out) return Value(out_.stop);
    throw UsageError("monitor has no output '" + name + "'");
}

void MonitorUnit::do_step(SimTime, Duration) {
    if (inputs_.size() < 4) return;
    out_ = monitor_step(inputs_.at(config_.robot_x), inputs_.at(config_.robot_y), inputs_.at(config_.obstacle_x),
                        inputs_.at(config_.obstacle_y), config_.threshold);
}

}  // namespace cobridge
